from .mlp import MlpParams, ForwardCache, forward, backward, LOG_STD_MIN, LOG_STD_MAX
from .adam import AdamState, adam_step
from .gaussian import GaussianHead, sample_action, log_prob, entropy

__all__ = [
    'MlpParams', 'ForwardCache', 'forward', 'backward',
    'LOG_STD_MIN', 'LOG_STD_MAX',
    'AdamState', 'adam_step',
    'GaussianHead', 'sample_action', 'log_prob', 'entropy',
]
