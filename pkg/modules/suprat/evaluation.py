# modules/suprat/evaluation.py
from typing import List, Optional
import logging

import numpy as np

from core.errors import ZeroShotRefusedError
from core.logger import log_metrics
from modules.envs import EnvSpec, EnvState, Environment, LatentParams, WorldConfig, observe
from modules.evalbench.metrics import EvalEntry, run_episodes
from modules.rat import adjacent_distance
from modules.upn import UniversalPolicy, query
from .model import InverseDynamicsModel, act

logger = logging.getLogger(__name__)


class SupervisedController:
    """Fetch the simulator's target transition under the UPN action and invert it

    The simulator at θ̂ is re-synced to the real state before every step.
    """

    def __init__(self, upn: UniversalPolicy, model: InverseDynamicsModel, theta_hat: LatentParams,
                 spec: EnvSpec):
        self.upn = upn
        self.model = model
        self.theta_hat = theta_hat
        self.spec = spec
        self.sim = Environment(spec, WorldConfig(theta_hat))
        self.inputs: List[np.ndarray] = []

    def reset(self, state: EnvState) -> None:
        self.sim.set_state(state)

    def act(self, state: EnvState) -> np.ndarray:
        self.sim.set_state(state)
        obs = observe(self.spec, state)
        target, _, _, _ = self.sim.step(query(self.upn, obs, self.theta_hat))
        target_obs = observe(self.spec, target)
        self.inputs.append(np.concatenate([obs, target_obs]))
        return act(self.model, obs, target_obs)


def eval_supervised_zero_shot(upn: UniversalPolicy, model: InverseDynamicsModel, theta_hat: LatentParams,
                              real_world: WorldConfig, spec: EnvSpec, episodes: int, seed: int,
                              eps_max: float, deviation: float = 0.0, start_index: int = 0,
                              method: Optional[str] = None) -> EvalEntry:
    distance = adjacent_distance(theta_hat, model.theta_g)
    if distance > eps_max:
        raise ZeroShotRefusedError(f"theta_hat lies {distance:.6g} from the ground truth, "
                                   f"beyond eps_max={eps_max:.6g}")
    controller = SupervisedController(upn, model, theta_hat, spec)
    results = run_episodes(spec, real_world, controller, episodes, seed, start_index=start_index)
    ood = model.out_of_range_fraction(np.vstack(controller.inputs))
    log_metrics(logger, "suprat_eval", deviation=float(deviation), out_of_range_fraction=ood)
    if ood > 0.5:
        logger.warning(f"Supervised RAT saw {ood:.1%} of simulator targets outside its training range")
    return EvalEntry.from_episodes(method or "suprat", deviation, results, spec.horizon, seed)
