# modules/rat/training.py
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from config.config import NetworkConfig, PpoHyperparams
from core.errors import DimensionMismatchError, TrainingDivergedError
from core.events import EventBus
from core.logger import log_metrics
from modules.envs import EnvSpec, Environment, LatentParams, RealityGap, WorldConfig
from modules.ppo import ActorCritic, PpoTrainer
from modules.upn import UniversalPolicy, query
from .core import GapSampler, correct_action, rat_reward
from .policy import RatPolicy, rat_observation

logger = logging.getLogger(__name__)


class RatTask:
    """The correction MDP over a simulator at θ_g and a (possibly hypothetical) real world

    Observation: [real observation, greedy UPN action at θ_g].
    Action: Δa. Reward: -||s^R_{t+1} - s_{t+1}||^2 on observations.

    With ``reset`` the simulator is moved onto the real state after every
    step, so each reward scores a single paired transition; otherwise the
    simulator follows its own trajectory from the shared initial state.
    With a ``sampler`` the real world's gap is redrawn at every reset.
    """

    def __init__(self, upn: UniversalPolicy, spec: EnvSpec, theta_g: LatentParams,
                 real_gap: Optional[RealityGap] = None, reset: bool = True,
                 sampler: Optional[GapSampler] = None, scale_reward: bool = False):
        if upn.state_dim != spec.state_dim or upn.action_dim != spec.action_dim:
            raise DimensionMismatchError(f"{spec.env_id} state/action space of the UPN",
                                         spec.state_dim + spec.action_dim, upn.state_dim + upn.action_dim)
        self.upn = upn
        self.spec = spec
        self.theta_g = theta_g
        self.reset_sim = bool(reset)
        self.sampler = sampler
        self.scale_reward = scale_reward
        self.gap = real_gap or RealityGap.zero()
        self.sim = Environment(spec, WorldConfig(theta_g))
        self.real = Environment(spec, WorldConfig(theta_g, self.gap))
        self.obs_dim = spec.state_dim + spec.action_dim
        self.action_dim = spec.action_dim
        self.horizon = spec.horizon
        self._upn_action: Optional[np.ndarray] = None
        self._rat_rewards: List[float] = []

    def _query(self) -> np.ndarray:
        return query(self.upn, self.sim.observe(), self.theta_g)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is not None:
            self.gap = self.sampler.sample(rng)
            self.real.reconfigure(WorldConfig(self.theta_g, self.gap))
        state = self.real.reset(rng)
        self.sim.set_state(state)
        self._upn_action = self._query()
        self._rat_rewards = []
        return rat_observation(self.real.observe(), self._upn_action)

    def step(self, delta):
        if self._upn_action is None:
            raise RuntimeError("RatTask.step() called before reset()")
        action = self._upn_action
        sim_next, _, sim_terminated, _ = self.sim.step(action)
        real_next, _, real_terminated, truncated = self.real.step(
            correct_action(action, delta, self.spec.action_bound))
        reward = rat_reward(self.real.observe(real_next), self.sim.observe(sim_next))
        if self.scale_reward:
            reward /= self.spec.state_dim
        self._rat_rewards.append(reward)

        if self.reset_sim:
            self.sim.set_state(real_next)
            terminated = real_terminated
        else:
            terminated = real_terminated or sim_terminated
        self._upn_action = self._query()
        return (rat_observation(self.real.observe(), self._upn_action), reward,
                terminated, truncated and not terminated)

    @property
    def upn_action(self) -> Optional[np.ndarray]:
        return self._upn_action

    def episode_info(self) -> Dict[str, Any]:
        return {
            'gap': self.gap.tolist(),
            'mean_rat_reward': float(np.mean(self._rat_rewards)) if self._rat_rewards else 0.0,
        }


def new_rat_policy(upn: UniversalPolicy, theta_g: LatentParams, sampler: GapSampler, reset: bool,
                   network: NetworkConfig, rng: np.random.Generator,
                   init_log_std: float = -1.0) -> RatPolicy:
    agent = ActorCritic.initialize(upn.state_dim + upn.action_dim, upn.action_dim, network, rng, init_log_std)
    return RatPolicy(agent=agent, env_id=upn.env_id, state_dim=upn.state_dim, action_dim=upn.action_dim,
                     theta_g=theta_g, sampler=sampler, reset=reset)


def train_rat(upn: UniversalPolicy, spec: EnvSpec, theta_g: LatentParams, real_gap: RealityGap,
              steps: int, hp: PpoHyperparams, network: NetworkConfig, rng: np.random.Generator,
              reset: bool = True, initial: Optional[RatPolicy] = None, init_log_std: float = -1.0,
              scale_reward: bool = False, event_bus: Optional[EventBus] = None,
              show_progress: bool = False) -> RatPolicy:
    """Train the correction policy against the real world with gap ``real_gap``

    Starts from ``initial`` when given (e.g. the robust initial policy).
    """
    task = RatTask(upn, spec, theta_g, real_gap=real_gap, reset=reset, scale_reward=scale_reward)
    policy = initial or new_rat_policy(upn, theta_g, GapSampler(real_gap.offsets, real_gap.offsets),
                                       reset, network, rng, init_log_std)
    if steps <= 0:
        return policy
    trainer = PpoTrainer(policy.agent, hp, rng, stage="rat", event_bus=event_bus, show_progress=show_progress)
    try:
        trainer.train(task, steps)
    except TrainingDivergedError as e:
        e.last_good = policy.with_agent(e.last_good)
        raise
    log_metrics(logger, "rat", steps=trainer.total_steps, episodes=trainer.total_episodes,
                final_return=trainer.history[-1].mean_return)
    return policy.with_agent(trainer.agent, provenance="real", reset=reset,
                             steps_trained=policy.steps_trained + trainer.total_steps,
                             episodes_trained=policy.episodes_trained + trainer.total_episodes)


def train_rat_initial(upn: UniversalPolicy, spec: EnvSpec, theta_g: LatentParams, sampler: GapSampler,
                      episodes: int, hp: PpoHyperparams, network: NetworkConfig, rng: np.random.Generator,
                      reset: bool = True, init_log_std: float = -1.0, scale_reward: bool = False,
                      event_bus: Optional[EventBus] = None, show_progress: bool = False) -> RatPolicy:
    """Robust initial correction policy

    Every episode draws a hypothetical gap μ̄ ~ U(low, high), runs the
    correction routine against a second simulator at [θ_g, μ̄] and feeds
    the experience into one persistent policy and optimizer. The number of
    environment steps consumed is recorded in ``steps_trained``.
    """
    policy = new_rat_policy(upn, theta_g, sampler, reset, network, rng, init_log_std)
    if episodes <= 0:
        return policy
    task = RatTask(upn, spec, theta_g, reset=reset, sampler=sampler, scale_reward=scale_reward)
    trainer = PpoTrainer(policy.agent, hp, rng, stage="rat_init", event_bus=event_bus,
                         show_progress=show_progress)
    try:
        trainer.train_episodes(task, episodes)
    except TrainingDivergedError as e:
        e.last_good = policy.with_agent(e.last_good, provenance="robust_init")
        raise
    log_metrics(logger, "rat_init", steps=trainer.total_steps, episodes=trainer.total_episodes,
                final_return=trainer.history[-1].mean_return)
    return policy.with_agent(trainer.agent, provenance="robust_init",
                             steps_trained=trainer.total_steps, episodes_trained=trainer.total_episodes)
