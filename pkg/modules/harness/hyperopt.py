# modules/harness/hyperopt.py
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional
import copy
import csv
import logging
import math

import numpy as np

from config.config import FORMAT_VERSION, ExperimentConfig, SearchSpaceConfig
from core.errors import NonFiniteError, SearchFailedError, TrainingDivergedError
from core.events import EventBus, publish_progress
from core.logger import log_metrics
from core.seeding import stream
from modules.envs import EnvSpec, LatentParams, RealityGap, WorldConfig
from modules.rat import GapSampler, apply_zero_shot, train_rat_initial
from modules.upn import UniversalPolicy

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = ["trial", "clip", "entcoeff", "stepsize", "lam", "gamma", "reset", "objective", "error",
                 "seed", "config_hash", "format_version"]


def sample_trial(space: SearchSpaceConfig, rng: np.random.Generator) -> Dict[str, Any]:
    """One point of the search space; the step size is drawn log-uniformly"""
    lo, hi = space.stepsize
    return {
        'clip': float(rng.uniform(*space.clip)),
        'entcoeff': float(rng.uniform(*space.entcoeff)),
        'stepsize': float(lo if lo == hi else math.exp(rng.uniform(math.log(lo), math.log(hi)))),
        'lam': float(rng.uniform(*space.lam)),
        'gamma': float(rng.uniform(*space.gamma)),
        'reset': bool(space.reset_options[int(rng.integers(len(space.reset_options)))]),
    }


@dataclass
class SearchResult:
    best_params: Dict[str, Any]
    best_objective: float
    trials: List[Dict[str, Any]] = field(default_factory=list)

    def apply_to(self, config: ExperimentConfig) -> ExperimentConfig:
        """Copy of ``config`` with the correction policy's PPO settings and reset flag replaced"""
        cfg = copy.deepcopy(config)
        params = dict(self.best_params)
        cfg.rat.reset = params.pop('reset')
        cfg.rat.ppo = replace(cfg.rat.ppo, **params)
        return cfg


def hyperparam_search(config: ExperimentConfig, upn: UniversalPolicy, spec: EnvSpec,
                      space: Optional[SearchSpaceConfig] = None, event_bus: Optional[EventBus] = None,
                      output_dir: Optional[str] = None) -> SearchResult:
    """Random search over the correction policy's PPO settings

    Each trial trains a robust initial policy for ``space.trial_episodes``
    episodes and scores it in the original real world [θ_g, μ_g]. Parameter
    draws depend on the trial index; training and evaluation streams do not,
    so identical parameters give identical objectives.
    """
    space = space or config.search
    theta_g = LatentParams(config.theta_g)
    real_gap = RealityGap.relative(theta_g, config.gap_factor, config.gap_dims)
    sampler = GapSampler(config.rat.gap_low, config.rat.gap_high)
    config_hash = config.config_hash()
    trials: List[Dict[str, Any]] = []

    for trial in range(space.trials):
        params = sample_trial(space, stream(config.seed, "hyperopt", "sample", trial))
        record: Dict[str, Any] = {'trial': trial, **params, 'objective': None, 'error': ""}
        try:
            hp = replace(config.rat.ppo, **{k: v for k, v in params.items() if k != 'reset'})
            rat = train_rat_initial(upn, spec, theta_g, sampler, space.trial_episodes, hp, config.network,
                                    stream(config.seed, "hyperopt", "train"), reset=params['reset'],
                                    init_log_std=config.network.rat_init_log_std,
                                    scale_reward=config.rat.scale_reward_by_state_dim)
            entry = apply_zero_shot(upn, rat, theta_g, WorldConfig(theta_g, real_gap), spec,
                                    space.objective_episodes, config.seed, config.rat.eps_max)
            record['objective'] = entry.mean
        except (TrainingDivergedError, NonFiniteError) as e:
            record['error'] = str(e).splitlines()[0]
            logger.warning(f"Trial {trial} failed: {record['error']}")
        trials.append(record)
        log_metrics(logger, "hyperopt", trial=trial, objective=record['objective'], reset=params['reset'])
        publish_progress(event_bus, "hyperopt", update=trial + 1,
                         mean_return=record['objective'] if record['objective'] is not None else float('nan'))

    if output_dir is not None:
        write_trials_csv(Path(output_dir) / f"trials_{config.env_id}_{config.seed}.csv", trials,
                         config.seed, config_hash)

    scored = [t for t in trials if t['objective'] is not None]
    if not scored:
        raise SearchFailedError(trials)
    best = max(scored, key=lambda t: (t['objective'], -t['trial']))
    best_params = {k: best[k] for k in ('clip', 'entcoeff', 'stepsize', 'lam', 'gamma', 'reset')}
    logger.info(f"Best trial {best['trial']}: objective={best['objective']:.6g} params={best_params}")
    result = SearchResult(best_params=best_params, best_objective=best['objective'], trials=trials)
    if output_dir is not None:
        result.apply_to(config).save(str(Path(output_dir) / f"best_{config.env_id}_{config.seed}.json"))
    return result


def write_trials_csv(path: Path, trials: List[Dict[str, Any]], seed: int, config_hash: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=TRIAL_COLUMNS)
        writer.writeheader()
        for t in trials:
            row = {k: (repr(v) if isinstance(v, float) else v) for k, v in t.items()}
            row['objective'] = "" if t['objective'] is None else repr(t['objective'])
            writer.writerow({**row, 'seed': seed, 'config_hash': config_hash, 'format_version': FORMAT_VERSION})
    return path
