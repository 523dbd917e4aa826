# modules/ppo/rollout.py
from typing import Any, Dict, List, Optional, Protocol, Tuple

import numpy as np

from modules.neuralcore import log_prob, sample_action
from .agent import ActorCritic
from .trajectory import Trajectory


class RlTask(Protocol):
    """Anything PPO can train on: a reset/step loop over flat observations

    ``step`` returns (observation, reward, terminated, truncated) and must
    truncate by its own horizon.
    """
    obs_dim: int
    action_dim: int
    horizon: int

    def reset(self, rng: np.random.Generator) -> np.ndarray: ...

    def step(self, action: np.ndarray) -> Tuple[np.ndarray, float, bool, bool]: ...

    def episode_info(self) -> Dict[str, Any]: ...


def run_episode(task: RlTask, agent: ActorCritic, rng: np.random.Generator,
                deterministic: bool = False) -> Trajectory:
    obs = task.reset(rng)
    traj = Trajectory()
    terminated = False
    while True:
        head = agent.head(obs)
        action = head.mean.copy() if deterministic else sample_action(head, rng)
        next_obs, reward, terminated, truncated = task.step(action)
        traj.append(obs, action, reward, float(log_prob(head, action)), agent.value(obs), terminated)
        obs = next_obs
        if terminated or truncated:
            break
    traj.bootstrap_value = 0.0 if terminated else agent.value(obs)
    traj.info = dict(task.episode_info())
    return traj


def collect_rollouts(task: RlTask, agent: ActorCritic, steps: int, rng: np.random.Generator,
                     deterministic: bool = False, max_episodes: Optional[int] = None) -> List[Trajectory]:
    """Collect whole episodes until at least ``steps`` transitions are gathered

    Episodes are never cut to fit the budget, so the total lies in
    [steps, steps + horizon).
    """
    if steps <= 0:
        raise ValueError(f"steps must be positive, got {steps}")
    trajectories: List[Trajectory] = []
    total = 0
    while total < steps and (max_episodes is None or len(trajectories) < max_episodes):
        traj = run_episode(task, agent, rng, deterministic)
        trajectories.append(traj)
        total += len(traj)
    return trajectories
