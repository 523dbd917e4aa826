# modules/rat/policy.py
from dataclasses import dataclass, field, replace
from typing import Any, Dict

import numpy as np

from core.errors import DimensionMismatchError
from modules.envs import LatentParams
from modules.ppo import ActorCritic
from .core import GapSampler


def rat_observation(real_obs, upn_action) -> np.ndarray:
    """[real-world observation, greedy UPN action]"""
    return np.concatenate([np.asarray(real_obs, dtype=float).reshape(-1),
                           np.asarray(upn_action, dtype=float).reshape(-1)])


@dataclass
class RatPolicy:
    """Correction policy Δa = π(s^R, a) trained for one ground truth θ_g

    ``provenance`` records how it was produced: 'fresh', 'robust_init'
    (gap-randomized training) or 'real' (trained against the real world).
    """
    agent: ActorCritic
    env_id: str
    state_dim: int
    action_dim: int
    theta_g: LatentParams
    sampler: GapSampler
    reset: bool
    provenance: str = "fresh"
    steps_trained: int = 0
    episodes_trained: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.agent.obs_dim != self.state_dim + self.action_dim:
            raise DimensionMismatchError("RAT input layer", self.state_dim + self.action_dim, self.agent.obs_dim)
        if self.agent.action_dim != self.action_dim:
            raise DimensionMismatchError("RAT output layer", self.action_dim, self.agent.action_dim)

    def greedy_delta(self, real_obs, upn_action) -> np.ndarray:
        return self.agent.greedy(rat_observation(real_obs, upn_action))

    def with_agent(self, agent: ActorCritic, **changes) -> 'RatPolicy':
        return replace(self, agent=agent, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'agent': self.agent.to_dict(),
            'env_id': self.env_id,
            'state_dim': self.state_dim,
            'action_dim': self.action_dim,
            'theta_g': self.theta_g.tolist(),
            'gap_low': [float(v) for v in self.sampler.low],
            'gap_high': [float(v) for v in self.sampler.high],
            'reset': bool(self.reset),
            'provenance': self.provenance,
            'steps_trained': int(self.steps_trained),
            'episodes_trained': int(self.episodes_trained),
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RatPolicy':
        return cls(agent=ActorCritic.from_dict(data['agent']), env_id=data['env_id'],
                   state_dim=int(data['state_dim']), action_dim=int(data['action_dim']),
                   theta_g=LatentParams(data['theta_g']),
                   sampler=GapSampler(data['gap_low'], data['gap_high']),
                   reset=bool(data['reset']), provenance=data.get('provenance', 'fresh'),
                   steps_trained=int(data.get('steps_trained', 0)),
                   episodes_trained=int(data.get('episodes_trained', 0)),
                   metadata=dict(data.get('metadata', {})))
