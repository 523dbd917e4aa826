from .trajectory import Trajectory
from .gae import gae_advantages, normalize_advantages
from .agent import (ActorCritic, OptimizerState, UpdateDiagnostics, policy_loss_and_grads,
                    value_loss_and_grads, ppo_update, mean_episode_return)
from .rollout import RlTask, run_episode, collect_rollouts
from .trainer import PpoTrainer, UpdateRecord

__all__ = [
    'Trajectory', 'gae_advantages', 'normalize_advantages',
    'ActorCritic', 'OptimizerState', 'UpdateDiagnostics', 'policy_loss_and_grads',
    'value_loss_and_grads', 'ppo_update', 'mean_episode_return',
    'RlTask', 'run_episode', 'collect_rollouts',
    'PpoTrainer', 'UpdateRecord',
]
