from .pipeline import (Pipeline, ProgressCsvWriter, build_context, pipeline_stages, stage_exit_code,
                       STAGE_TYPES)
from .hyperopt import SearchResult, hyperparam_search, sample_trial

__all__ = [
    'Pipeline', 'ProgressCsvWriter', 'build_context', 'pipeline_stages', 'stage_exit_code',
    'STAGE_TYPES', 'SearchResult', 'hyperparam_search', 'sample_trial',
]
