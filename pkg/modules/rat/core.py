# modules/rat/core.py
from typing import Sequence

import numpy as np

from core.errors import DimensionMismatchError
from modules.envs import GAP_SUPPORT, LATENT_DIM, EnvState, LatentParams, RealityGap


def _vector(state) -> np.ndarray:
    return state.vector if isinstance(state, EnvState) else np.asarray(state, dtype=float).reshape(-1)


def rat_reward(real_next, sim_next) -> float:
    """Negative squared distance between the real and simulated next states"""
    real = _vector(real_next)
    sim = _vector(sim_next)
    if real.size != sim.size:
        raise DimensionMismatchError("rat_reward states", real.size, sim.size)
    diff = real - sim
    return -float(diff @ diff)


def correct_action(upn_action, delta, bound: float) -> np.ndarray:
    """Real-world action a + Δa, clamped to [-bound, bound]"""
    upn_action = np.asarray(upn_action, dtype=float).reshape(-1)
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if upn_action.size != delta.size:
        raise DimensionMismatchError("action correction", upn_action.size, delta.size)
    return np.clip(upn_action + delta, -bound, bound)


class GapSampler:
    """Uniform sampler of hypothetical reality gaps μ̄ ~ U(low, high)

    Bounds are in normalized latent units. Dimensions with low == high == 0
    carry no gap.
    """

    def __init__(self, low: Sequence[float], high: Sequence[float]):
        self.low = np.asarray(low, dtype=float).reshape(-1)
        self.high = np.asarray(high, dtype=float).reshape(-1)
        if self.low.size != LATENT_DIM or self.high.size != LATENT_DIM:
            raise DimensionMismatchError("gap sampler bounds", LATENT_DIM, self.low.size)
        if np.any(self.low > self.high):
            raise ValueError(f"gap sampler needs low <= high elementwise, got {self.low} / {self.high}")

    @classmethod
    def from_absolute_ranges(cls, theta_g: LatentParams, absolute_low: Sequence[float],
                             absolute_high: Sequence[float], dims: Sequence[int] = GAP_SUPPORT) -> 'GapSampler':
        """Build from ranges of the effective (gapped) latent value

        The gap for each listed dimension is the absolute value minus the
        ground truth, e.g. normalized mass in [0, 3) and friction in [0, 1).
        """
        low = np.zeros(LATENT_DIM)
        high = np.zeros(LATENT_DIM)
        for d, lo, hi in zip(dims, absolute_low, absolute_high):
            low[d] = lo - theta_g.values[d]
            high[d] = hi - theta_g.values[d]
        return cls(low, high)

    @property
    def support(self) -> np.ndarray:
        """Mask of dimensions that can carry a non-zero gap"""
        return (self.low != 0.0) | (self.high != 0.0)

    def sample(self, rng: np.random.Generator) -> RealityGap:
        return RealityGap(rng.uniform(self.low, self.high))

    def contains(self, gap: RealityGap) -> bool:
        return bool(np.all(gap.offsets >= self.low) and np.all(gap.offsets <= self.high))

    def to_dict(self):
        return {'low': [float(v) for v in self.low], 'high': [float(v) for v in self.high]}

    @classmethod
    def from_dict(cls, data) -> 'GapSampler':
        return cls(data['low'], data['high'])


def adjacent_distance(theta_hat: LatentParams, theta_g: LatentParams) -> float:
    """Largest elementwise |θ̂ - θ_g|"""
    return float(np.max(np.abs(theta_hat.values - theta_g.values)))
