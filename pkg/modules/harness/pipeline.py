# modules/harness/pipeline.py
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import csv
import logging
import threading

from config.config import FORMAT_VERSION, TRAINING_HASH_EXCLUDES, ExperimentConfig
from core.base import BaseStage
from core.checkpoint import CheckpointManager
from core.events import Event, EventBus, EventTypes
from core.logger import log_shutdown, log_startup
from modules.envs import LatentParams, RealityGap, make_spec
from .stages import (BudgetParityStage, EvalStage, FineTuneStage, RatInitStage, RatRealStage,
                     SupRatStage, TrainUpnStage)

PROGRESS_COLUMNS = ["stage", "update", "steps", "episodes", "mean_return", "policy_loss", "value_loss",
                    "entropy", "clip_fraction", "approx_kl", "seed", "config_hash", "format_version"]

STAGE_TYPES = {
    'upn': TrainUpnStage,
    'upn_ft': FineTuneStage,
    'rat_init': RatInitStage,
    'rat': RatRealStage,
    'upn_parity': BudgetParityStage,
    'suprat': SupRatStage,
    'eval': EvalStage,
}

# Stage 0 is reported as exit code 10, stage 1 as 11, ...
STAGE_EXIT_BASE = 10


def pipeline_stages(config: ExperimentConfig) -> List[str]:
    """Full run order; real-world correction training is included only when it has a budget"""
    order = ['upn', 'upn_ft', 'rat_init']
    if config.rat.real_steps > 0:
        order.append('rat')
    return order + ['upn_parity', 'suprat', 'eval']


def stage_exit_code(stage: str) -> int:
    return STAGE_EXIT_BASE + list(STAGE_TYPES).index(stage) if stage in STAGE_TYPES else 1


class ProgressCsvWriter:
    """Event-bus subscriber appending every training progress event to a CSV file"""

    def __init__(self, path, seed: int, config_hash: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.config_hash = config_hash
        self._lock = threading.Lock()
        self._file = open(self.path, 'w', newline='', encoding='utf-8')
        self._writer = csv.DictWriter(self._file, fieldnames=PROGRESS_COLUMNS, extrasaction='ignore')
        self._writer.writeheader()

    def __call__(self, event: Event) -> None:
        row = {k: (repr(v) if isinstance(v, float) else v) for k, v in event.data.items()}
        row.update({'seed': self.seed, 'config_hash': self.config_hash, 'format_version': FORMAT_VERSION})
        with self._lock:
            self._writer.writerow(row)
            self._file.flush()

    def close(self) -> None:
        with self._lock:
            if not self._file.closed:
                self._file.close()


def build_context(config: ExperimentConfig, checkpoint_dir: Optional[str] = None) -> Dict[str, Any]:
    """Shared state handed from stage to stage"""
    theta_g = LatentParams(config.theta_g)
    config_hash = config.config_hash()
    training_hash = config.config_hash(exclude=TRAINING_HASH_EXCLUDES)
    out = Path(checkpoint_dir) if checkpoint_dir else config.output_path()
    return {
        'config': config,
        'config_hash': config_hash,
        'training_hash': training_hash,
        'spec': make_spec(config.env_id, config.horizon),
        'theta_g': theta_g,
        'real_gap': RealityGap.relative(theta_g, config.gap_factor, config.gap_dims),
        'checkpoints': CheckpointManager(out, config.env_id, config.seed, training_hash),
        'artifact_metadata': {'seed': config.seed, 'config_hash': config_hash,
                              'format_version': FORMAT_VERSION},
    }


class Pipeline:
    """Runs stages in order over one shared context

    Products of finished stages stay on disk when a later stage fails; a
    rerun with the same config and seed resumes from them.
    """

    def __init__(self, config: ExperimentConfig, event_bus: Optional[EventBus] = None,
                 logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger(__name__)
        self.config = config
        self.event_bus = event_bus or EventBus()
        self.context = build_context(config)
        self.progress = ProgressCsvWriter(config.output_path() / f"progress_{config.env_id}_{config.seed}.csv",
                                          config.seed, self.context['config_hash'])
        self.event_bus.subscribe(EventTypes.TRAINING_PROGRESS, self.progress)
        self.stages: Dict[str, BaseStage] = {}

    def stage(self, name: str) -> BaseStage:
        if name not in self.stages:
            self.stages[name] = STAGE_TYPES[name](logger=self.logger, event_bus=self.event_bus)
        return self.stages[name]

    def run(self, stage_names: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """Execute the named stages (default: the full pipeline); raises StageError on failure"""
        names = list(stage_names) if stage_names is not None else pipeline_stages(self.config)
        log_startup(self.logger, f"pipeline [{', '.join(names)}] seed={self.config.seed} "
                                 f"config={self.context['config_hash']}")
        try:
            for name in names:
                self.stage(name).execute(self.context)
        finally:
            self.close()
        log_shutdown(self.logger, "pipeline")
        return self.context

    def close(self) -> None:
        self.event_bus.unsubscribe(EventTypes.TRAINING_PROGRESS, self.progress)
        self.progress.close()
