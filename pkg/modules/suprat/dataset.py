# modules/suprat/dataset.py
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple
import csv
import logging

import numpy as np

from core.errors import NonFiniteError
from modules.envs import (LATENT_DIM, EnvSpec, EnvState, Environment, LatentParams, RealityGap,
                          WorldConfig, observe, step)
from modules.rat import GapSampler
from modules.upn import UniversalPolicy, query

logger = logging.getLogger(__name__)


@dataclass
class TransitionDataset:
    """Rows (s_t, s_{t+1}, a_t) recorded in gapped worlds

    States are raw integrator vectors with their step counter so every row
    can be replayed through the transition function; ``gaps`` holds the
    reality gap each row was collected under.
    """
    env_id: str
    theta_g: LatentParams
    states: List[np.ndarray] = field(default_factory=list)
    next_states: List[np.ndarray] = field(default_factory=list)
    actions: List[np.ndarray] = field(default_factory=list)
    gaps: List[np.ndarray] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    def append(self, state: EnvState, next_state: EnvState, action, gap: RealityGap):
        action = np.asarray(action, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(state.vector)) and np.all(np.isfinite(next_state.vector))
                and np.all(np.isfinite(action))):
            raise NonFiniteError("transition row contains non-finite values")
        self.states.append(state.vector.copy())
        self.next_states.append(next_state.vector.copy())
        self.actions.append(action)
        self.gaps.append(gap.offsets.copy())
        self.steps.append(int(state.t))

    def inputs(self, spec: EnvSpec) -> np.ndarray:
        """Model inputs: [observe(s_t), observe(s_{t+1})] per row"""
        dyn_obs = [np.concatenate([observe(spec, EnvState(s)), observe(spec, EnvState(s1))])
                   for s, s1 in zip(self.states, self.next_states)]
        return np.vstack(dyn_obs) if dyn_obs else np.zeros((0, 2 * spec.state_dim))

    def targets(self) -> np.ndarray:
        return np.vstack(self.actions) if self.actions else np.zeros((0, 0))

    def replay_mismatches(self, spec: EnvSpec) -> int:
        """Rows whose recorded next state is not reproduced by the transition function"""
        bad = 0
        for s, s1, a, g, t in zip(self.states, self.next_states, self.actions, self.gaps, self.steps):
            nxt, _, _ = step(spec, WorldConfig(self.theta_g, RealityGap(g)), EnvState(s, t), a)
            if not np.array_equal(nxt.vector, s1):
                bad += 1
        return bad

    def split(self, validation_fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Shuffled (train, validation) row indices; tiny datasets validate on the training rows"""
        order = rng.permutation(len(self))
        n_val = int(round(validation_fraction * len(self)))
        if n_val == 0 or n_val >= len(self):
            return order, order
        return order[n_val:], order[:n_val]

    def to_csv(self, path, metadata: Dict[str, Any] = None) -> Path:
        """Write one row per transition: gap dims, s, s', a

        ``metadata`` (seed, config hash, format version) goes into a leading
        comment line.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        raw_dim = self.states[0].size if self.states else 0
        action_dim = self.actions[0].size if self.actions else 0
        header = ([f"gap_{i}" for i in range(LATENT_DIM)] + ["t"]
                  + [f"s_{i}" for i in range(raw_dim)] + [f"next_s_{i}" for i in range(raw_dim)]
                  + [f"a_{i}" for i in range(action_dim)])
        with open(path, 'w', newline='', encoding='utf-8') as f:
            if metadata:
                f.write("# " + " ".join(f"{k}={v}" for k, v in sorted(metadata.items())) + "\n")
            writer = csv.writer(f)
            writer.writerow(header)
            for s, s1, a, g, t in zip(self.states, self.next_states, self.actions, self.gaps, self.steps):
                writer.writerow([repr(float(v)) for v in g] + [t] + [repr(float(v)) for v in s]
                                + [repr(float(v)) for v in s1] + [repr(float(v)) for v in a])
        logger.info(f"Wrote {len(self)} transitions to {path}")
        return path

    @classmethod
    def from_csv(cls, path, env_id: str, theta_g: LatentParams) -> 'TransitionDataset':
        dataset = cls(env_id=env_id, theta_g=theta_g)
        with open(path, newline='', encoding='utf-8') as f:
            rows = [line for line in f if not line.startswith('#')]
        reader = csv.DictReader(rows)
        for row in reader:
            gap = [float(row[f"gap_{i}"]) for i in range(LATENT_DIM)]
            s = [float(row[k]) for k in reader.fieldnames if k.startswith("s_")]
            s1 = [float(row[k]) for k in reader.fieldnames if k.startswith("next_s_")]
            a = [float(row[k]) for k in reader.fieldnames if k.startswith("a_")]
            dataset.append(EnvState(s, int(row["t"])), EnvState(s1), a, RealityGap(gap))
        return dataset


def collect_dataset(upn: UniversalPolicy, spec: EnvSpec, theta_g: LatentParams, sampler: GapSampler,
                    steps: int, rng: np.random.Generator, noise_fraction: float = 0.2) -> TransitionDataset:
    """Roll noisy UPN actions in hypothetical gapped worlds

    Every episode draws μ̄ from the sampler; actions are the greedy UPN
    action at θ_g plus Gaussian noise with std ``noise_fraction`` of the
    action range, clamped to the bounds. Stops at exactly ``steps`` rows.
    """
    dataset = TransitionDataset(env_id=spec.env_id, theta_g=theta_g)
    if steps <= 0:
        return dataset
    sigma = noise_fraction * 2.0 * spec.action_bound
    env = Environment(spec, WorldConfig(theta_g))
    while len(dataset) < steps:
        gap = sampler.sample(rng)
        env.reconfigure(WorldConfig(theta_g, gap))
        state = env.reset(rng)
        while len(dataset) < steps:
            action = query(upn, env.observe(state), theta_g)
            action = spec.clip_action(action + sigma * rng.standard_normal(spec.action_dim))
            next_state, _, terminated, truncated = env.step(action)
            dataset.append(state, next_state, action, gap)
            state = next_state
            if terminated or truncated:
                break
    return dataset
