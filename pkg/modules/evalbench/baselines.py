# modules/evalbench/baselines.py
from typing import List, Optional, Sequence

import numpy as np

from core.seeding import stream
from modules.envs import EnvSpec, EnvState, LatentParams, WorldConfig, observe
from modules.upn import UniversalPolicy, query
from .metrics import EvalEntry, run_episodes


class UpnController:
    """Greedy UPN conditioned on a fixed θ, no correction"""

    def __init__(self, upn: UniversalPolicy, theta: LatentParams, spec: EnvSpec):
        self.upn = upn
        self.theta = theta
        self.spec = spec

    def reset(self, state: EnvState) -> None:
        pass

    def act(self, state: EnvState) -> np.ndarray:
        return query(self.upn, observe(self.spec, state), self.theta)


def dr_action(actions: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of the conditioned actions

    Accumulated as offsets from the first action so k identical actions
    return that action bit for bit.
    """
    first = np.asarray(actions[0], dtype=float)
    offset = np.zeros_like(first)
    for a in actions[1:]:
        offset = offset + (np.asarray(a, dtype=float) - first)
    return first + offset / len(actions)


class DrController:
    """Per-state action average over UPN policies conditioned on sampled θs"""

    def __init__(self, upn: UniversalPolicy, thetas: Sequence[LatentParams], spec: EnvSpec):
        if not thetas:
            raise ValueError("domain-randomized baseline needs at least one θ")
        self.upn = upn
        self.thetas = list(thetas)
        self.spec = spec

    def reset(self, state: EnvState) -> None:
        pass

    def act(self, state: EnvState) -> np.ndarray:
        obs = observe(self.spec, state)
        return dr_action([query(self.upn, obs, theta) for theta in self.thetas])


def transfer_baseline(upn: UniversalPolicy, theta: LatentParams, real_world: WorldConfig, spec: EnvSpec,
                      episodes: int, seed: int, deviation: float = 0.0, start_index: int = 0) -> EvalEntry:
    """UPN conditioned on θ deployed in the real world without further training"""
    results = run_episodes(spec, real_world, UpnController(upn, theta, spec), episodes, seed, start_index)
    return EvalEntry.from_episodes("transfer", deviation, results, spec.horizon, seed)


def dr_thetas(theta: LatentParams, dr_deviation: float, k: int, seed: int) -> List[LatentParams]:
    """The k conditioning parameters of the DR baseline, drawn once per run"""
    rng = stream(seed, "dr", repr(float(dr_deviation)))
    width = dr_deviation * theta.values
    return [LatentParams(theta.values + rng.uniform(-1.0, 1.0, theta.values.size) * width) for _ in range(k)]


def dr_baseline(upn: UniversalPolicy, theta: LatentParams, real_world: WorldConfig, spec: EnvSpec,
                episodes: int, seed: int, dr_deviation: float = 0.05, k: int = 10,
                deviation: float = 0.0, start_index: int = 0,
                thetas: Optional[Sequence[LatentParams]] = None) -> EvalEntry:
    """Average the greedy actions of k UPN conditionings sampled ±dr_deviation around θ"""
    thetas = list(thetas) if thetas is not None else dr_thetas(theta, dr_deviation, k, seed)
    results = run_episodes(spec, real_world, DrController(upn, thetas, spec), episodes, seed, start_index)
    return EvalEntry.from_episodes("dr", deviation, results, spec.horizon, seed)
