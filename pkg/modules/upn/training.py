# modules/upn/training.py
from dataclasses import dataclass, field
from typing import List, Optional
import logging
import math

import numpy as np

from config.config import NetworkConfig, PpoHyperparams
from core.errors import TrainingDivergedError
from core.events import EventBus
from core.logger import log_metrics
from modules.envs import LATENT_DIM, EnvSpec, LatentParams
from modules.ppo import ActorCritic, PpoTrainer, UpdateRecord, collect_rollouts
from .policy import ConditionedTask, UniversalPolicy

logger = logging.getLogger(__name__)


def _check_theta_range(low: np.ndarray, high: np.ndarray):
    if low.size != LATENT_DIM or high.size != LATENT_DIM:
        raise ValueError(f"theta range bounds need {LATENT_DIM} entries")
    if np.any(low < 0.0) or np.any(high > 1.0) or np.any(low > high):
        raise ValueError("theta range must satisfy 0 <= low <= high <= 1 per dimension")


def train_upn(spec: EnvSpec, theta_low, theta_high, total_steps: int, hp: PpoHyperparams,
              network: NetworkConfig, rng: np.random.Generator, init_log_std: float = -0.5,
              event_bus: Optional[EventBus] = None, show_progress: bool = False) -> UniversalPolicy:
    """Train one policy across θ drawn uniformly per episode from [theta_low, theta_high]

    With total_steps == 0 the freshly initialized policy is returned.
    On divergence, TrainingDivergedError.last_good holds a UniversalPolicy.
    """
    low = np.asarray(theta_low, dtype=float)
    high = np.asarray(theta_high, dtype=float)
    _check_theta_range(low, high)
    if total_steps < 0:
        raise ValueError(f"total_steps must be >= 0, got {total_steps}")

    agent = ActorCritic.initialize(spec.state_dim + LATENT_DIM, spec.action_dim, network, rng, init_log_std)
    policy = UniversalPolicy(agent=agent, env_id=spec.env_id, state_dim=spec.state_dim,
                             action_dim=spec.action_dim, theta_low=low, theta_high=high)
    if total_steps == 0:
        return policy

    trainer = PpoTrainer(agent, hp, rng, stage="upn", event_bus=event_bus, show_progress=show_progress)
    try:
        history = trainer.train(ConditionedTask(spec, low, high), total_steps)
    except TrainingDivergedError as e:
        e.last_good = policy.with_agent(e.last_good, steps_trained=trainer.total_steps)
        raise
    final = history[-1].mean_return
    log_metrics(logger, "upn", steps=trainer.total_steps, final_return=final)
    return policy.with_agent(trainer.agent, steps_trained=trainer.total_steps, final_return=final)


def improvement_ratio(previous: float, current: float) -> float:
    """Relative chunk-over-chunk improvement (current - previous) / |previous|"""
    if previous == 0.0:
        if current == previous:
            return 0.0
        return math.inf if current > previous else -math.inf
    return (current - previous) / abs(previous)


def should_stop(previous: float, current: float, threshold: float) -> bool:
    # an infinite threshold always stops, even on an infinite ratio from a zero baseline
    if math.isinf(threshold) and threshold > 0:
        return True
    return improvement_ratio(previous, current) < threshold


@dataclass
class FineTuneReport:
    chunk_returns: List[float] = field(default_factory=list)
    baseline_return: Optional[float] = None
    steps: int = 0
    stopped_early: bool = False


def fine_tune(policy: UniversalPolicy, theta_g: LatentParams, step_budget: int, chunk_steps: int,
              improvement_threshold: float, hp: PpoHyperparams, rng: np.random.Generator,
              spec: EnvSpec, event_bus: Optional[EventBus] = None, show_progress: bool = False,
              stage: str = "fine_tune"):
    """Continue PPO at the fixed ground truth in chunks of ``chunk_steps``

    The return of the very first on-policy batch is the baseline. After
    every chunk the mean return over that chunk is compared with the
    previous one (or the baseline) and training stops once the relative
    improvement falls below ``improvement_threshold``.

    Returns:
        (fine-tuned policy, FineTuneReport)
    """
    if chunk_steps < 1:
        raise ValueError("chunk_steps must be a positive integer")
    report = FineTuneReport()
    if step_budget <= 0:
        return policy, report

    task = ConditionedTask(spec, theta_g.values, theta_g.values)
    trainer = PpoTrainer(policy.agent, hp, rng, stage=stage, event_bus=event_bus, show_progress=show_progress)
    previous: Optional[float] = None
    try:
        while trainer.total_steps < step_budget:
            chunk = min(chunk_steps, step_budget - trainer.total_steps)
            records: List[UpdateRecord] = trainer.train(task, chunk)
            if report.baseline_return is None:
                report.baseline_return = records[0].mean_return
                previous = report.baseline_return
            current = float(np.mean([r.mean_return for r in records]))
            report.chunk_returns.append(current)
            log_metrics(logger, stage, steps=trainer.total_steps, chunk_return=current,
                        improvement=improvement_ratio(previous, current))
            if should_stop(previous, current, improvement_threshold):
                report.stopped_early = trainer.total_steps < step_budget
                break
            previous = current
    except TrainingDivergedError as e:
        e.last_good = policy.with_agent(e.last_good,
                                        fine_tune_steps=policy.fine_tune_steps + trainer.total_steps)
        raise
    report.steps = trainer.total_steps
    tuned = policy.with_agent(trainer.agent, fine_tune_steps=policy.fine_tune_steps + trainer.total_steps,
                              final_return=report.chunk_returns[-1])
    return tuned, report


def extend_training(policy: UniversalPolicy, theta_g: LatentParams, extra_steps: int,
                    hp: PpoHyperparams, rng: np.random.Generator, spec: EnvSpec,
                    event_bus: Optional[EventBus] = None, show_progress: bool = False) -> UniversalPolicy:
    """Fine-tune at θ_g for exactly ``extra_steps`` more steps without early stopping

    Used to give the uncorrected baselines the same additional training
    budget the correction policy consumed.
    """
    if extra_steps <= 0:
        return policy
    trainer = PpoTrainer(policy.agent, hp, rng, stage="budget_parity", event_bus=event_bus,
                         show_progress=show_progress)
    task = ConditionedTask(spec, theta_g.values, theta_g.values)
    try:
        while trainer.total_steps < extra_steps:
            remaining = extra_steps - trainer.total_steps
            batch = _collect_exact(task, trainer, remaining)
            trainer.update(batch, min_samples=sum(len(t) for t in batch))
    except TrainingDivergedError as e:
        e.last_good = policy.with_agent(e.last_good,
                                        fine_tune_steps=policy.fine_tune_steps + trainer.total_steps)
        raise
    return policy.with_agent(trainer.agent, fine_tune_steps=policy.fine_tune_steps + trainer.total_steps)


def _collect_exact(task, trainer: PpoTrainer, steps: int):
    """Rollouts totalling exactly ``steps`` transitions (the last episode is cut short)"""
    target = min(steps, trainer.hp.batch_size)
    batch = collect_rollouts(task, trainer.agent, target, trainer.rng)
    excess = sum(len(t) for t in batch) - target
    if excess > 0:
        last = batch[-1]
        keep = len(last) - excess
        # the cut point becomes a truncation: bootstrap from the first dropped state
        last.bootstrap_value = last.values[keep]
        for name in ('states', 'actions', 'rewards', 'log_probs', 'values', 'dones'):
            setattr(last, name, getattr(last, name)[:keep])
    return batch
