# modules/rat/zero_shot.py
from typing import Optional
import logging

import numpy as np

from core.errors import ZeroShotRefusedError
from modules.envs import EnvSpec, EnvState, LatentParams, WorldConfig, observe
from modules.evalbench.metrics import EvalEntry, run_episodes
from modules.upn import UniversalPolicy, query
from .core import adjacent_distance, correct_action
from .policy import RatPolicy

logger = logging.getLogger(__name__)


class RatController:
    """UPN at θ̂ plus the greedy correction Δa, executed in the real world"""

    def __init__(self, upn: UniversalPolicy, rat: RatPolicy, theta_hat: LatentParams, spec: EnvSpec):
        self.upn = upn
        self.rat = rat
        self.theta_hat = theta_hat
        self.spec = spec

    def reset(self, state: EnvState) -> None:
        pass

    def act(self, state: EnvState) -> np.ndarray:
        obs = observe(self.spec, state)
        action = query(self.upn, obs, self.theta_hat)
        return correct_action(action, self.rat.greedy_delta(obs, action), self.spec.action_bound)


def check_zero_shot(rat: RatPolicy, theta_hat: LatentParams, eps_max: float) -> float:
    """Refuse adjacent parameters further than eps_max from the policy's ground truth"""
    distance = adjacent_distance(theta_hat, rat.theta_g)
    if distance > eps_max:
        raise ZeroShotRefusedError(f"theta_hat lies {distance:.6g} from the ground truth, "
                                   f"beyond eps_max={eps_max:.6g}")
    return distance


def apply_zero_shot(upn: UniversalPolicy, rat: RatPolicy, theta_hat: LatentParams, real_world: WorldConfig,
                    spec: EnvSpec, episodes: int, seed: int, eps_max: float,
                    deviation: float = 0.0, start_index: int = 0,
                    method: Optional[str] = None) -> EvalEntry:
    """Evaluate a correction policy trained for θ_g in an adjacent world, without retraining

    ``real_world`` is [θ̂, μ_g]: the adjacent parameters with the unchanged
    reality gap. The score is the task reward, not the correction reward.
    """
    check_zero_shot(rat, theta_hat, eps_max)
    controller = RatController(upn, rat, theta_hat, spec)
    results = run_episodes(spec, real_world, controller, episodes, seed, start_index=start_index)
    return EvalEntry.from_episodes(method or "rat", deviation, results, spec.horizon, seed)
