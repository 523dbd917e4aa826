# modules/ppo/gae.py
from typing import Tuple

import numpy as np

from .trajectory import Trajectory


def gae_advantages(traj: Trajectory, gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Generalised Advantage Estimation over one trajectory

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}

    V(s_T) is the trajectory's bootstrap value.

    Returns:
        (advantages, returns) with returns = advantages + values
    """
    if len(traj) == 0:
        raise ValueError("cannot compute advantages of an empty trajectory")
    traj.validate()
    rewards = np.asarray(traj.rewards, dtype=float)
    values = np.asarray(traj.values, dtype=float)
    nonterminal = 1.0 - np.asarray(traj.dones, dtype=float)
    next_values = np.append(values[1:], traj.bootstrap_value)

    deltas = rewards + gamma * next_values * nonterminal - values
    advantages = np.zeros_like(deltas)
    last = 0.0
    for t in reversed(range(len(deltas))):
        last = deltas[t] + gamma * lam * nonterminal[t] * last
        advantages[t] = last
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Shift to mean 0 and scale to std 1 across the batch"""
    advantages = np.asarray(advantages, dtype=float)
    return (advantages - advantages.mean()) / (advantages.std() + eps)
