# modules/neuralcore/adam.py
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from core.errors import DimensionMismatchError, NonFiniteError
from .mlp import MlpParams


@dataclass
class AdamState:
    """First/second moment estimates tracking one MlpParams"""
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    step_count: int = 0
    stepsize: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, stepsize: float = 3e-4,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> 'AdamState':
        if stepsize <= 0:
            raise ValueError(f"Adam stepsize must be positive, got {stepsize}")
        zeros = [np.zeros_like(a) for a in params.arrays()]
        return cls(first_moment=zeros, second_moment=[z.copy() for z in zeros],
                   step_count=0, stepsize=stepsize, beta1=beta1, beta2=beta2, eps=eps)

    def with_stepsize(self, stepsize: float) -> 'AdamState':
        return AdamState(self.first_moment, self.second_moment, self.step_count,
                         stepsize, self.beta1, self.beta2, self.eps)


def adam_step(state: AdamState, params: MlpParams, grads: MlpParams) -> Tuple[MlpParams, AdamState]:
    """Apply one bias-corrected Adam update

    Nothing is mutated: on a non-finite gradient the call raises and the
    caller keeps its current params and state.
    """
    if state.stepsize <= 0:
        raise ValueError(f"Adam stepsize must be positive, got {state.stepsize}")
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.first_moment):
        raise DimensionMismatchError("Adam parameter groups", len(p_arrays), len(g_arrays))
    for p, g, m in zip(p_arrays, g_arrays, state.first_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionMismatchError("Adam parameter shape", p.size, g.size)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("gradient contains non-finite values; update skipped")

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.first_moment, state.second_moment):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_p.append(p - state.stepsize * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)

    new_state = AdamState(new_m, new_v, t, state.stepsize, b1, b2, state.eps)
    return params.with_arrays(new_p), new_state
