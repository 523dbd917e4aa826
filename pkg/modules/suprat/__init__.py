from .dataset import TransitionDataset, collect_dataset
from .model import InverseDynamicsModel, FitReport, fit, act
from .evaluation import SupervisedController, eval_supervised_zero_shot

__all__ = [
    'TransitionDataset', 'collect_dataset',
    'InverseDynamicsModel', 'FitReport', 'fit', 'act',
    'SupervisedController', 'eval_supervised_zero_shot',
]
