# modules/evalbench/adjacent.py
from dataclasses import dataclass
from typing import List

import numpy as np

from core.seeding import stream
from modules.envs import LatentParams

BAND_SLACK = 1e-12


@dataclass(frozen=True)
class AdjacentSample:
    theta_hat: LatentParams
    deviation: float
    index: int
    seed: int


def sample_adjacent(theta_g: LatentParams, deviation: float, n: int, seed: int) -> List[AdjacentSample]:
    """Draw ``n`` parameters uniformly in the relative band θ_g·(1 ± deviation), elementwise"""
    if deviation < 0:
        raise ValueError(f"deviation must be >= 0, got {deviation}")
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    rng = stream(seed, "adjacent", repr(float(deviation)))
    width = deviation * theta_g.values
    return [AdjacentSample(theta_hat=LatentParams(theta_g.values + rng.uniform(-1.0, 1.0, theta_g.values.size) * width),
                           deviation=float(deviation), index=i, seed=int(seed))
            for i in range(n)]


def in_band(theta_hat: LatentParams, theta_g: LatentParams, deviation: float) -> bool:
    bound = deviation * np.abs(theta_g.values) + BAND_SLACK
    return bool(np.all(np.abs(theta_hat.values - theta_g.values) <= bound))
