# modules/envs/latent.py
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from core.errors import DimensionMismatchError, NonFiniteError

LATENT_DIM = 5
# Dimensions allowed to carry an unmodellable offset: friction and primary mass
GAP_SUPPORT = (0, 1)
LATENT_FLOOR = 0.0


def _as_latent_vector(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size != LATENT_DIM:
        raise DimensionMismatchError(what, LATENT_DIM, arr.size)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class LatentParams:
    """Normalized modellable parameters θ

    Order: friction, primary mass, auxiliary mass 1, auxiliary mass 2, restitution.
    """
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _as_latent_vector(self.values, "latent parameters"))

    def __eq__(self, other) -> bool:
        return isinstance(other, LatentParams) and np.array_equal(self.values, other.values)

    def tolist(self):
        return self.values.tolist()


@dataclass(frozen=True, eq=False)
class RealityGap:
    """Unmodellable additive offsets μ in normalized latent units"""
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(LATENT_DIM))

    def __post_init__(self):
        object.__setattr__(self, 'offsets', _as_latent_vector(self.offsets, "reality gap"))

    @classmethod
    def zero(cls) -> 'RealityGap':
        return cls(np.zeros(LATENT_DIM))

    @classmethod
    def relative(cls, theta: LatentParams, factor: float = 4.0,
                 dims: Iterable[int] = GAP_SUPPORT) -> 'RealityGap':
        """Offset selected dimensions by ``factor`` times their ground-truth value (+400% by default)"""
        offsets = np.zeros(LATENT_DIM)
        for d in dims:
            offsets[d] = factor * theta.values[d]
        return cls(offsets)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.offsets)

    def __eq__(self, other) -> bool:
        return isinstance(other, RealityGap) and np.array_equal(self.offsets, other.offsets)

    def tolist(self):
        return self.offsets.tolist()


def apply_gap(theta: LatentParams, gap: RealityGap, floor: float = LATENT_FLOOR) -> LatentParams:
    """Effective latents = θ + μ, clamped from below at the positive-domain floor"""
    return LatentParams(np.maximum(theta.values + gap.offsets, floor))


@dataclass(frozen=True, eq=False)
class WorldConfig:
    """φ = [θ, μ]: what a simulator instance (or the emulated real world) runs with"""
    theta: LatentParams
    gap: RealityGap = field(default_factory=RealityGap.zero)

    def effective(self) -> LatentParams:
        return apply_gap(self.theta, self.gap)

    def with_theta(self, theta: LatentParams) -> 'WorldConfig':
        return WorldConfig(theta=theta, gap=self.gap)


@dataclass(frozen=True, eq=False)
class LatentMap:
    """Affine map from normalized latents to physical units: offset + scale * v"""
    offset: np.ndarray
    scale: np.ndarray
    names: Sequence[str]

    def physical(self, latent: LatentParams) -> np.ndarray:
        return self.offset + self.scale * latent.values
