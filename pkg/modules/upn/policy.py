# modules/upn/policy.py
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional
import logging

import numpy as np

from core.errors import DimensionMismatchError
from modules.envs import LATENT_DIM, EnvSpec, Environment, LatentParams, RealityGap, WorldConfig
from modules.ppo import ActorCritic

logger = logging.getLogger(__name__)


def upn_observation(task_obs, theta) -> np.ndarray:
    """Concatenate a task observation with the normalized latent vector"""
    values = theta.values if isinstance(theta, LatentParams) else np.asarray(theta, dtype=float)
    if values.size != LATENT_DIM:
        raise DimensionMismatchError("UPN latent input", LATENT_DIM, values.size)
    return np.concatenate([np.asarray(task_obs, dtype=float).reshape(-1), values.reshape(-1)])


@dataclass
class UniversalPolicy:
    """A single actor-critic conditioned on θ, plus where and how long it was trained"""
    agent: ActorCritic
    env_id: str
    state_dim: int
    action_dim: int
    theta_low: np.ndarray
    theta_high: np.ndarray
    steps_trained: int = 0
    fine_tune_steps: int = 0
    final_return: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.theta_low = np.asarray(self.theta_low, dtype=float)
        self.theta_high = np.asarray(self.theta_high, dtype=float)
        if self.agent.obs_dim != self.state_dim + LATENT_DIM:
            raise DimensionMismatchError("UPN input layer", self.state_dim + LATENT_DIM, self.agent.obs_dim)
        if self.agent.action_dim != self.action_dim:
            raise DimensionMismatchError("UPN output layer", self.action_dim, self.agent.action_dim)

    def in_range(self, theta: LatentParams) -> bool:
        return bool(np.all(theta.values >= self.theta_low) and np.all(theta.values <= self.theta_high))

    def with_agent(self, agent: ActorCritic, **changes) -> 'UniversalPolicy':
        return replace(self, agent=agent, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'agent': self.agent.to_dict(),
            'env_id': self.env_id,
            'state_dim': self.state_dim,
            'action_dim': self.action_dim,
            'theta_low': [float(v) for v in self.theta_low],
            'theta_high': [float(v) for v in self.theta_high],
            'steps_trained': int(self.steps_trained),
            'fine_tune_steps': int(self.fine_tune_steps),
            'final_return': None if self.final_return is None else float(self.final_return),
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'UniversalPolicy':
        return cls(agent=ActorCritic.from_dict(data['agent']), env_id=data['env_id'],
                   state_dim=int(data['state_dim']), action_dim=int(data['action_dim']),
                   theta_low=data['theta_low'], theta_high=data['theta_high'],
                   steps_trained=int(data['steps_trained']), fine_tune_steps=int(data['fine_tune_steps']),
                   final_return=data.get('final_return'), metadata=dict(data.get('metadata', {})))


def query(policy: UniversalPolicy, state, theta: LatentParams) -> np.ndarray:
    """Greedy action (mean of the Gaussian head) of the θ-conditioned policy

    ``state`` is the task observation. Querying outside the trained θ range
    is allowed but logged.
    """
    if not policy.in_range(theta):
        logger.warning(f"UPN queried at theta={np.round(theta.values, 4).tolist()} outside its trained range")
    return policy.agent.greedy(upn_observation(state, theta))


class ConditionedTask:
    """Simulator episodes whose observation is [task observation, θ]

    θ is drawn uniformly from [low, high] at every reset; set low == high
    for a fixed conditioning.
    """

    def __init__(self, spec: EnvSpec, theta_low, theta_high, gap: Optional[RealityGap] = None):
        self.spec = spec
        self.low = np.asarray(theta_low, dtype=float)
        self.high = np.asarray(theta_high, dtype=float)
        if self.low.size != LATENT_DIM or self.high.size != LATENT_DIM:
            raise DimensionMismatchError("theta range", LATENT_DIM, self.low.size)
        if np.any(self.low > self.high):
            raise ValueError("theta range lower bound exceeds upper bound")
        self.gap = gap or RealityGap.zero()
        self.obs_dim = spec.state_dim + LATENT_DIM
        self.action_dim = spec.action_dim
        self.horizon = spec.horizon
        self.theta = LatentParams(self.low)
        self.env = Environment(spec, WorldConfig(self.theta, self.gap))

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.theta = LatentParams(rng.uniform(self.low, self.high))
        self.env.reconfigure(WorldConfig(self.theta, self.gap))
        self.env.reset(rng)
        return upn_observation(self.env.observe(), self.theta)

    def step(self, action):
        state, reward, terminated, truncated = self.env.step(action)
        return upn_observation(self.env.observe(state), self.theta), reward, terminated, truncated

    def episode_info(self) -> Dict[str, Any]:
        return {'theta': self.theta.tolist()}
