# modules/suprat/model.py
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from config.config import NetworkConfig, SupRatConfig
from core.errors import DimensionMismatchError
from core.logger import log_metrics
from modules.envs import EnvSpec, LatentParams
from modules.neuralcore import AdamState, ForwardCache, MlpParams, adam_step, backward, forward
from .dataset import TransitionDataset

logger = logging.getLogger(__name__)


@dataclass
class InverseDynamicsModel:
    """f(s_t, s_{t+1}) -> a_t over observations, with input standardization"""
    params: MlpParams
    env_id: str
    state_dim: int
    action_dim: int
    action_bound: float
    theta_g: LatentParams
    input_mean: np.ndarray
    input_std: np.ndarray
    input_low: np.ndarray
    input_high: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.params.input_dim != 2 * self.state_dim:
            raise DimensionMismatchError("inverse model input", 2 * self.state_dim, self.params.input_dim)
        if self.params.output_dim != self.action_dim:
            raise DimensionMismatchError("inverse model output", self.action_dim, self.params.output_dim)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return forward(self.params, (inputs - self.input_mean) / self.input_std)[0]

    def out_of_range_fraction(self, inputs: np.ndarray) -> float:
        """Fraction of input rows with any feature outside the training range"""
        inputs = np.atleast_2d(inputs)
        if inputs.shape[0] == 0:
            return 0.0
        outside = np.any((inputs < self.input_low) | (inputs > self.input_high), axis=1)
        return float(np.mean(outside))

    def to_dict(self) -> Dict[str, Any]:
        as_list = lambda a: [float(v) for v in a]
        return {
            'params': self.params.to_dict(),
            'env_id': self.env_id,
            'state_dim': self.state_dim,
            'action_dim': self.action_dim,
            'action_bound': float(self.action_bound),
            'theta_g': self.theta_g.tolist(),
            'input_mean': as_list(self.input_mean),
            'input_std': as_list(self.input_std),
            'input_low': as_list(self.input_low),
            'input_high': as_list(self.input_high),
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'InverseDynamicsModel':
        arr = lambda key: np.asarray(data[key], dtype=float)
        return cls(params=MlpParams.from_dict(data['params']), env_id=data['env_id'],
                   state_dim=int(data['state_dim']), action_dim=int(data['action_dim']),
                   action_bound=float(data['action_bound']), theta_g=LatentParams(data['theta_g']),
                   input_mean=arr('input_mean'), input_std=arr('input_std'),
                   input_low=arr('input_low'), input_high=arr('input_high'),
                   metadata=dict(data.get('metadata', {})))


@dataclass
class FitReport:
    train_mse: float
    validation_mse: float
    epochs: int
    best_epoch: int
    history: List[float] = field(default_factory=list)


def _mse(model_params: MlpParams, x: np.ndarray, y: np.ndarray) -> float:
    diff = forward(model_params, x)[0] - y
    return float(np.mean(diff * diff))


def fit(dataset: TransitionDataset, spec: EnvSpec, network: NetworkConfig, settings: SupRatConfig,
        rng: np.random.Generator, sampler_bounds: Optional[Dict[str, Any]] = None):
    """Regress actions on state transitions with minibatch Adam

    90/10 train/validation split (``settings.validation_fraction``); the
    parameters with the best validation MSE are kept and training stops
    after ``settings.patience`` epochs without improvement.

    Returns:
        (InverseDynamicsModel, FitReport)
    """
    if len(dataset) == 0:
        raise ValueError("cannot fit an inverse dynamics model to an empty dataset")
    inputs = dataset.inputs(spec)
    targets = dataset.targets()
    train_idx, val_idx = dataset.split(settings.validation_fraction, rng)

    mean = inputs[train_idx].mean(axis=0)
    std = inputs[train_idx].std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    x = (inputs - mean) / std
    x_train, y_train = x[train_idx], targets[train_idx]
    x_val, y_val = x[val_idx], targets[val_idx]

    params = MlpParams.initialize(network.sizes(2 * spec.state_dim, spec.action_dim), rng, output_gain=1.0)
    state = AdamState.for_params(params, settings.stepsize)
    best_params, best_val, best_epoch = params, _mse(params, x_val, y_val), 0
    history = []
    n = x_train.shape[0]
    epoch = 0
    for epoch in range(1, settings.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, settings.minibatch_size):
            idx = order[start:start + settings.minibatch_size]
            cache = ForwardCache()
            pred = forward(params, x_train[idx], cache)[0]
            grad = 2.0 * (pred - y_train[idx]) / pred.size
            params, state = adam_step(state, params, backward(params, cache, grad))
        val = _mse(params, x_val, y_val)
        history.append(val)
        if val < best_val:
            best_params, best_val, best_epoch = params, val, epoch
        elif epoch - best_epoch >= settings.patience:
            break

    train_mse = _mse(best_params, x_train, y_train)
    log_metrics(logger, "suprat_fit", rows=len(dataset), epochs=epoch, best_epoch=best_epoch,
                train_mse=train_mse, validation_mse=best_val)
    model = InverseDynamicsModel(
        params=best_params, env_id=spec.env_id, state_dim=spec.state_dim, action_dim=spec.action_dim,
        action_bound=spec.action_bound, theta_g=dataset.theta_g, input_mean=mean, input_std=std,
        input_low=inputs[train_idx].min(axis=0), input_high=inputs[train_idx].max(axis=0),
        metadata={'dataset_size': len(dataset), 'train_mse': train_mse, 'validation_mse': best_val,
                  'sampler': sampler_bounds or {}})
    return model, FitReport(train_mse=train_mse, validation_mse=best_val, epochs=epoch,
                            best_epoch=best_epoch, history=history)


def act(model: InverseDynamicsModel, state_t, state_t1) -> np.ndarray:
    """Action that should carry the real system from ``state_t`` to ``state_t1`` (observations)"""
    x = np.concatenate([np.asarray(state_t, dtype=float).reshape(-1),
                        np.asarray(state_t1, dtype=float).reshape(-1)])
    return np.clip(model.predict(x), -model.action_bound, model.action_bound)
