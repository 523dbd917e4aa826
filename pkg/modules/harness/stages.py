# modules/harness/stages.py
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np

from config.config import ExperimentConfig
from core.base import BaseStage
from core.errors import TrainingDivergedError
from core.events import EventBus, EventTypes
from core.seeding import stream
from modules.evalbench.comparison import run_comparison
from modules.rat import GapSampler, RatPolicy, train_rat, train_rat_initial
from modules.suprat import InverseDynamicsModel, collect_dataset, fit
from modules.upn import UniversalPolicy, extend_training, fine_tune, train_upn


class CheckpointedStage(BaseStage):
    """A stage whose product is a model stored as ``<kind>_<env>_<seed>.ckpt``

    If a checkpoint written under the same config hash and seed exists it is
    reused instead of training again. A diverged training run stores its last
    finite model as ``<kind>_last_good`` before the error propagates.
    """

    kind: str = ""
    model_type: Any = None

    def __init__(self, logger: Optional[logging.Logger] = None, event_bus: Optional[EventBus] = None):
        super().__init__(logger=logger, event_bus=event_bus)
        self.name = self.kind

    def _run(self, context: Dict[str, Any]) -> None:
        manager = context['checkpoints']
        document = manager.load_if_current(self.kind)
        if document is not None:
            context[self.kind] = self.model_type.from_dict(document['payload'])
            return
        config: ExperimentConfig = context['config']
        try:
            product, metadata = self.produce(context, stream(config.seed, self.kind))
        except TrainingDivergedError as e:
            if e.last_good is not None and hasattr(e.last_good, 'to_dict'):
                manager.save(f"{self.kind}_last_good", e.last_good.to_dict(),
                             {'diverged': True, **{k: float(v) for k, v in e.diagnostics.items()}})
            raise
        context[self.kind] = product
        if product is not None:
            manager.save(self.kind, product.to_dict(), metadata)

    def produce(self, context: Dict[str, Any], rng: np.random.Generator) -> Tuple[Any, Dict[str, Any]]:
        raise NotImplementedError


def _show(context) -> bool:
    return context['config'].system.show_progress


class TrainUpnStage(CheckpointedStage):
    kind = "upn"
    model_type = UniversalPolicy

    def produce(self, context, rng):
        cfg: ExperimentConfig = context['config']
        upn = train_upn(context['spec'], cfg.upn.theta_low, cfg.upn.theta_high, cfg.upn.total_steps,
                        cfg.upn.ppo, cfg.network, rng, init_log_std=cfg.network.upn_init_log_std,
                        event_bus=self.event_bus, show_progress=_show(context))
        return upn, {'steps': upn.steps_trained, 'theta_low': cfg.upn.theta_low,
                     'theta_high': cfg.upn.theta_high, 'final_return': upn.final_return}


class FineTuneStage(CheckpointedStage):
    kind = "upn_ft"
    model_type = UniversalPolicy

    def produce(self, context, rng):
        cfg: ExperimentConfig = context['config']
        upn, report = fine_tune(context['upn'], context['theta_g'], cfg.upn.fine_tune_steps,
                                cfg.upn.fine_tune_chunk, cfg.upn.improvement_threshold, cfg.upn.ppo, rng,
                                context['spec'], event_bus=self.event_bus, show_progress=_show(context))
        return upn, {'steps': report.steps, 'chunks': len(report.chunk_returns),
                     'stopped_early': report.stopped_early, 'final_return': upn.final_return}


class RatInitStage(CheckpointedStage):
    kind = "rat_init"
    model_type = RatPolicy

    def produce(self, context, rng):
        cfg: ExperimentConfig = context['config']
        sampler = GapSampler(cfg.rat.gap_low, cfg.rat.gap_high)
        rat = train_rat_initial(context['upn_ft'], context['spec'], context['theta_g'], sampler,
                                cfg.rat.init_episodes, cfg.rat.ppo, cfg.network, rng, reset=cfg.rat.reset,
                                init_log_std=cfg.network.rat_init_log_std,
                                scale_reward=cfg.rat.scale_reward_by_state_dim,
                                event_bus=self.event_bus, show_progress=_show(context))
        return rat, _rat_metadata(rat)


class RatRealStage(CheckpointedStage):
    """Correction policy trained against the emulated real world, starting from the robust initial policy"""
    kind = "rat"
    model_type = RatPolicy

    def produce(self, context, rng):
        cfg: ExperimentConfig = context['config']
        rat = train_rat(context['upn_ft'], context['spec'], context['theta_g'], context['real_gap'],
                        cfg.rat.real_steps, cfg.rat.ppo, cfg.network, rng, reset=cfg.rat.reset,
                        initial=context.get('rat_init'), init_log_std=cfg.network.rat_init_log_std,
                        scale_reward=cfg.rat.scale_reward_by_state_dim,
                        event_bus=self.event_bus, show_progress=_show(context))
        return rat, _rat_metadata(rat)


def _rat_metadata(rat: RatPolicy) -> Dict[str, Any]:
    return {'theta_g': rat.theta_g.tolist(), 'gap_low': [float(v) for v in rat.sampler.low],
            'gap_high': [float(v) for v in rat.sampler.high], 'reset': rat.reset,
            'steps': rat.steps_trained, 'episodes': rat.episodes_trained, 'provenance': rat.provenance}


class BudgetParityStage(CheckpointedStage):
    """Extra ground-truth fine-tuning for the baselines, equal to the correction policy's step count"""
    kind = "upn_parity"
    model_type = UniversalPolicy

    def produce(self, context, rng):
        cfg: ExperimentConfig = context['config']
        extra = context['rat_init'].steps_trained
        upn = extend_training(context['upn_ft'], context['theta_g'], extra, cfg.upn.ppo, rng,
                              context['spec'], event_bus=self.event_bus, show_progress=_show(context))
        return upn, {'extra_steps': extra, 'fine_tune_steps': upn.fine_tune_steps}


class SupRatStage(CheckpointedStage):
    kind = "suprat"
    model_type = InverseDynamicsModel

    def produce(self, context, rng):
        cfg: ExperimentConfig = context['config']
        if cfg.suprat.dataset_steps == 0:
            self.logger.warning("Supervised RAT dataset budget is 0: no model is fitted")
            return None, {}
        sampler = GapSampler(cfg.rat.gap_low, cfg.rat.gap_high)
        dataset = collect_dataset(context['upn_ft'], context['spec'], context['theta_g'], sampler,
                                  cfg.suprat.dataset_steps, rng, noise_fraction=cfg.suprat.noise_fraction)
        out = cfg.output_path() / f"dataset_{cfg.env_id}_{cfg.seed}.csv"
        dataset.to_csv(out, metadata=context['artifact_metadata'])
        model, report = fit(dataset, context['spec'], cfg.network, cfg.suprat, rng,
                            sampler_bounds=sampler.to_dict())
        return model, {'dataset_size': len(dataset), 'train_mse': report.train_mse,
                       'validation_mse': report.validation_mse, 'epochs': report.epochs}


class EvalStage(BaseStage):
    name = "eval"

    def _run(self, context: Dict[str, Any]) -> None:
        cfg: ExperimentConfig = context['config']
        report = run_comparison(context['spec'], context['theta_g'], context['real_gap'], cfg.eval, cfg.seed,
                                upn=context.get('upn_ft'), rat=context.get('rat') or context.get('rat_init'),
                                suprat=context.get('suprat'), baseline_upn=context.get('upn_parity'),
                                eps_max=cfg.rat.eps_max, config_hash=context['config_hash'])
        context['report'] = report
        if self.event_bus is not None:
            for entry in report.sorted_entries():
                self.event_bus.emit(EventTypes.EVAL_RESULT, {'method': entry.method, 'deviation': entry.deviation,
                                                             'mean': entry.mean, 'std_error': entry.std_error})
        context['results_path'] = report.to_csv(cfg.output_path() / f"results_{cfg.env_id}_{cfg.seed}.csv")
