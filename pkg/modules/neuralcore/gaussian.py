# modules/neuralcore/gaussian.py
from dataclasses import dataclass

import numpy as np

from core.errors import NonFiniteError
from .mlp import LOG_STD_MAX, LOG_STD_MIN

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianHead:
    """Diagonal Gaussian over actions; log_std is clamped on construction"""
    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        log_std = np.clip(np.asarray(self.log_std, dtype=float), LOG_STD_MIN, LOG_STD_MAX)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise NonFiniteError("Gaussian head has non-finite mean or log_std")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'log_std', log_std)

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def dim(self) -> int:
        return self.log_std.shape[-1]


def sample_action(head: GaussianHead, rng: np.random.Generator) -> np.ndarray:
    """Draw one action (or a batch, if mean is 2-D)"""
    noise = rng.standard_normal(np.shape(head.mean))
    return head.mean + head.std * noise


def log_prob(head: GaussianHead, action) -> np.ndarray:
    """Exact diagonal-Gaussian log-density, summed over the last axis"""
    action = np.asarray(action, dtype=float)
    z = (action - head.mean) / head.std
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(head.log_std) - 0.5 * head.dim * LOG_2PI


def entropy(head: GaussianHead) -> float:
    return float(np.sum(head.log_std) + 0.5 * head.dim * (LOG_2PI + 1.0))
