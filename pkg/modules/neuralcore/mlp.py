# modules/neuralcore/mlp.py
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DimensionMismatchError, MissingActivationsError, NonFiniteError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class MlpParams:
    """Parameters of a dense tanh network with an optional state-independent log_std

    Weights are stored fan-in x fan-out. The container is treated as an
    immutable snapshot: optimizers return new instances.
    """
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    log_std: Optional[np.ndarray] = None
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty lists of equal length")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionMismatchError(f"layer {i} bias", w.shape[1], b.size)
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionMismatchError(f"layer {i} fan-in", self.weights[i - 1].shape[1], w.shape[0])
        if self.log_std is not None and self.log_std.shape != (self.output_dim,):
            raise DimensionMismatchError("log_std", self.output_dim, self.log_std.size)
        if self.activation != "tanh":
            raise ValueError(f"Unsupported activation: {self.activation}")

    @classmethod
    def initialize(cls, sizes: Sequence[int], rng: np.random.Generator,
                   output_gain: float = 0.01, hidden_gain: float = np.sqrt(2.0),
                   init_log_std: Optional[float] = None) -> 'MlpParams':
        """Orthogonal-style initialization with zero biases

        Args:
            sizes: layer widths, input first, output last
            output_gain: scale of the last layer (small keeps initial outputs near 0)
            init_log_std: if given, attach a Gaussian log_std of this value
        """
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = output_gain if i == len(sizes) - 2 else hidden_gain
            a = rng.standard_normal((max(fan_in, fan_out), min(fan_in, fan_out)))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            w = q if fan_in >= fan_out else q.T
            weights.append(gain * w[:fan_in, :fan_out])
            biases.append(np.zeros(fan_out))
        log_std = None if init_log_std is None else np.full(sizes[-1], float(init_log_std))
        return cls(weights=weights, biases=biases, log_std=log_std)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def depth(self) -> int:
        """Number of hidden layers"""
        return len(self.weights) - 1

    @property
    def hidden_width(self) -> int:
        return self.weights[0].shape[1] if self.depth else 0

    @property
    def sizes(self) -> List[int]:
        return [self.input_dim] + [w.shape[1] for w in self.weights]

    def arrays(self) -> List[np.ndarray]:
        """Flat list of parameter arrays in a fixed order (weights, biases, log_std)"""
        out = list(self.weights) + list(self.biases)
        if self.log_std is not None:
            out.append(self.log_std)
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray], clip_log_std: bool = True) -> 'MlpParams':
        n = len(self.weights)
        log_std = None
        if self.log_std is not None:
            log_std = np.array(arrays[2 * n], dtype=float)
            if clip_log_std:
                log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
        return MlpParams(weights=[np.array(a, dtype=float) for a in arrays[:n]],
                         biases=[np.array(a, dtype=float) for a in arrays[n:2 * n]],
                         log_std=log_std, activation=self.activation)

    def zeros_like(self) -> 'MlpParams':
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])

    def copy(self) -> 'MlpParams':
        return self.with_arrays([a.copy() for a in self.arrays()])

    def clamped_log_std(self) -> np.ndarray:
        if self.log_std is None:
            return np.zeros(0)
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def to_dict(self) -> Dict[str, Any]:
        """Self-describing form for checkpoints: shapes plus flattened float64 values"""
        return {
            'activation': self.activation,
            'sizes': self.sizes,
            'weights': [_encode_array(w) for w in self.weights],
            'biases': [_encode_array(b) for b in self.biases],
            'log_std': None if self.log_std is None else _encode_array(self.log_std),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MlpParams':
        log_std = data.get('log_std')
        return cls(weights=[_decode_array(w) for w in data['weights']],
                   biases=[_decode_array(b) for b in data['biases']],
                   log_std=None if log_std is None else _decode_array(log_std),
                   activation=data.get('activation', 'tanh'))


def _encode_array(a: np.ndarray) -> Dict[str, Any]:
    return {'shape': list(a.shape), 'data': [float(v) for v in a.ravel()]}


def _decode_array(d: Dict[str, Any]) -> np.ndarray:
    return np.array(d['data'], dtype=np.float64).reshape(d['shape'])


@dataclass
class ForwardCache:
    """Activations recorded by forward(), consumed by backward()"""
    activations: List[np.ndarray] = field(default_factory=list)


def forward(params: MlpParams, x, cache: Optional[ForwardCache] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate the network on one input vector or a batch (rows)

    Returns:
        (mean, log_std) where log_std is the clamped state-independent
        vector (empty for networks without a Gaussian head)
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise DimensionMismatchError("network input", params.input_dim, x.shape[-1])
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("network input contains non-finite values")

    activations = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if i == last else np.tanh(z)
        activations.append(h)

    if cache is not None:
        cache.activations = activations
    return h, params.clamped_log_std()


def backward(params: MlpParams, cache: Optional[ForwardCache], upstream_grad) -> MlpParams:
    """Reverse-mode gradient of a scalar loss w.r.t. weights and biases

    Args:
        cache: the ForwardCache filled by the matching forward() call
        upstream_grad: dLoss/dOutput, same shape as the forward output

    Returns:
        gradient container shaped like ``params`` (log_std gradient is zero;
        losses that depend on log_std add their own term)
    """
    if cache is None or not cache.activations:
        raise MissingActivationsError("backward() called without cached forward activations")
    acts = cache.activations
    delta = np.asarray(upstream_grad, dtype=float)
    if delta.shape != acts[-1].shape:
        raise DimensionMismatchError("upstream gradient", acts[-1].size, delta.size)

    n_layers = len(params.weights)
    grad_w: List[np.ndarray] = [None] * n_layers
    grad_b: List[np.ndarray] = [None] * n_layers
    for i in reversed(range(n_layers)):
        if i != n_layers - 1:
            delta = delta * (1.0 - acts[i + 1] ** 2)
        a_prev = acts[i]
        if a_prev.ndim == 1:
            grad_w[i] = np.outer(a_prev, delta)
            grad_b[i] = delta.copy()
        else:
            grad_w[i] = a_prev.T @ delta
            grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T

    log_std = None if params.log_std is None else np.zeros_like(params.log_std)
    return MlpParams(weights=grad_w, biases=grad_b, log_std=log_std, activation=params.activation)
