from .metrics import EpisodeResult, EvalEntry, Controller, metric_stepwise, run_episodes
from .adjacent import AdjacentSample, sample_adjacent, in_band
from .baselines import (UpnController, DrController, dr_action, dr_thetas, transfer_baseline,
                        dr_baseline)
from .imitation import imitation_deviation
from .report import EvalReport, METHODS

# run_comparison lives in modules.evalbench.comparison; it depends on the rat
# and suprat packages, which themselves import from this package.

__all__ = [
    'EpisodeResult', 'EvalEntry', 'Controller', 'metric_stepwise', 'run_episodes',
    'AdjacentSample', 'sample_adjacent', 'in_band',
    'UpnController', 'DrController', 'dr_action', 'dr_thetas', 'transfer_baseline', 'dr_baseline',
    'imitation_deviation', 'EvalReport', 'METHODS',
]
