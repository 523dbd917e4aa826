from .core import rat_reward, correct_action, GapSampler, adjacent_distance
from .policy import RatPolicy, rat_observation
from .training import RatTask, new_rat_policy, train_rat, train_rat_initial
from .zero_shot import RatController, check_zero_shot, apply_zero_shot

__all__ = [
    'rat_reward', 'correct_action', 'GapSampler', 'adjacent_distance',
    'RatPolicy', 'rat_observation',
    'RatTask', 'new_rat_policy', 'train_rat', 'train_rat_initial',
    'RatController', 'check_zero_shot', 'apply_zero_shot',
]
