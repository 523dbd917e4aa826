# modules/evalbench/comparison.py
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np

from config.config import EvalConfig
from modules.envs import EnvSpec, LatentParams, RealityGap, WorldConfig
from modules.rat import RatPolicy, apply_zero_shot
from modules.suprat import InverseDynamicsModel, eval_supervised_zero_shot
from modules.upn import UniversalPolicy
from .adjacent import BAND_SLACK, sample_adjacent
from .baselines import dr_baseline, dr_thetas, transfer_baseline
from .metrics import EvalEntry
from .report import METHODS, EvalReport

logger = logging.getLogger(__name__)

# (theta_hat, real world, episodes, start_index) -> entry
Evaluator = Callable[[LatentParams, WorldConfig, int, int], EvalEntry]


def zero_shot_eps(eps_max: float, theta_g: LatentParams, deviation: float) -> float:
    """Admissible distance at a sweep level: the configured eps_max, widened to cover the band"""
    return max(eps_max, deviation * float(np.max(np.abs(theta_g.values)))) + BAND_SLACK


def run_comparison(spec: EnvSpec, theta_g: LatentParams, real_gap: RealityGap, eval_cfg: EvalConfig,
                   seed: int, upn: Optional[UniversalPolicy], rat: Optional[RatPolicy] = None,
                   suprat: Optional[InverseDynamicsModel] = None,
                   baseline_upn: Optional[UniversalPolicy] = None, eps_max: float = 0.05,
                   config_hash: str = "") -> EvalReport:
    """Evaluate every available method at every deviation level

    Level 0 is the original real world [θ_g, μ_g] over ``eval_cfg.episodes``
    episodes. A level d > 0 draws ``eval_cfg.adjacent_samples`` adjacent θ̂
    and runs one episode in each world [θ̂, μ_g]; the cell pools them.
    Transfer and DR use ``baseline_upn`` (the budget-matched UPN) when given.
    Methods whose model is missing are left out with a warning.
    """
    report = EvalReport(env_id=spec.env_id, seed=seed, config_hash=config_hash)
    if upn is None:
        logger.warning("No UPN available: comparison report is empty")
        return report
    base = baseline_upn or upn
    evaluators: Dict[str, Callable[[float], Evaluator]] = {
        'transfer': lambda d: (lambda th, world, n, start: transfer_baseline(
            base, th, world, spec, n, seed, deviation=d, start_index=start)),
        'dr': lambda d: (lambda th, world, n, start: dr_baseline(
            base, th, world, spec, n, seed, deviation=d, start_index=start,
            thetas=dr_thetas(th, eval_cfg.dr_deviation, eval_cfg.dr_samples, seed))),
    }
    if suprat is not None:
        evaluators['suprat'] = lambda d: (lambda th, world, n, start: eval_supervised_zero_shot(
            upn, suprat, th, world, spec, n, seed, zero_shot_eps(eps_max, theta_g, d),
            deviation=d, start_index=start))
    else:
        logger.warning("No supervised RAT model: its rows are omitted")
    if rat is not None:
        evaluators['rat'] = lambda d: (lambda th, world, n, start: apply_zero_shot(
            upn, rat, th, world, spec, n, seed, zero_shot_eps(eps_max, theta_g, d),
            deviation=d, start_index=start))
    else:
        logger.warning("No RAT policy: its rows are omitted")

    jobs: List[Tuple[str, float, LatentParams, int, int]] = []
    for deviation in eval_cfg.deviation_levels:
        if rat is not None or suprat is not None:
            eps = zero_shot_eps(eps_max, theta_g, deviation)
            if eps > eps_max + BAND_SLACK:
                logger.info(f"Zero-shot eps widened from {eps_max:.6g} to {eps:.6g} "
                            f"to cover deviation level {deviation:g}")
        if deviation == 0:
            targets = [(theta_g, eval_cfg.episodes, 0)]
        else:
            samples = sample_adjacent(theta_g, deviation, eval_cfg.adjacent_samples, seed)
            targets = [(s.theta_hat, 1, s.index) for s in samples]
        for method in METHODS:
            if method in evaluators:
                jobs.extend((method, float(deviation), th, n, start) for th, n, start in targets)

    def run(job):
        method, deviation, theta_hat, n, start = job
        return evaluators[method](deviation)(theta_hat, WorldConfig(theta_hat, real_gap), n, start)

    if eval_cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=eval_cfg.workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    cells: Dict[Tuple[str, float], List[EvalEntry]] = {}
    for (method, deviation, _, _, _), entry in zip(jobs, results):
        cells.setdefault((method, deviation), []).append(entry)
    for (method, deviation), entries in cells.items():
        report.add(entries[0] if len(entries) == 1 else EvalEntry.pool(entries))
    logger.info("Comparison finished:\n" + report.summary())
    return report
