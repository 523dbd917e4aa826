from .policy import UniversalPolicy, ConditionedTask, upn_observation, query
from .training import (train_upn, fine_tune, extend_training, improvement_ratio, should_stop,
                       FineTuneReport)

__all__ = [
    'UniversalPolicy', 'ConditionedTask', 'upn_observation', 'query',
    'train_upn', 'fine_tune', 'extend_training', 'improvement_ratio', 'should_stop',
    'FineTuneReport',
]
