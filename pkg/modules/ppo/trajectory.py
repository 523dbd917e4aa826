# modules/ppo/trajectory.py
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from core.errors import NonFiniteError


@dataclass
class Trajectory:
    """One episode of on-policy experience

    ``dones[t]`` marks a true terminal transition; an episode cut by the
    horizon keeps ``dones[-1] = False`` and stores the critic's value of the
    final observation in ``bootstrap_value``.
    """
    states: List[np.ndarray] = field(default_factory=list)
    actions: List[np.ndarray] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    dones: List[bool] = field(default_factory=list)
    bootstrap_value: float = 0.0
    info: Dict[str, Any] = field(default_factory=dict)

    def append(self, state, action, reward: float, log_prob: float, value: float, done: bool):
        if not np.isfinite(reward):
            raise NonFiniteError(f"non-finite reward {reward}")
        self.states.append(np.asarray(state, dtype=float))
        self.actions.append(np.asarray(action, dtype=float))
        self.rewards.append(float(reward))
        self.log_probs.append(float(log_prob))
        self.values.append(float(value))
        self.dones.append(bool(done))

    def __len__(self) -> int:
        return len(self.rewards)

    def validate(self) -> None:
        n = len(self.rewards)
        lengths = {len(self.states), len(self.actions), len(self.log_probs), len(self.values), len(self.dones)}
        if lengths != {n}:
            raise ValueError(f"trajectory fields have unequal lengths: {sorted(lengths | {n})}")

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards))

    @property
    def terminated(self) -> bool:
        return bool(self.dones and self.dones[-1])
