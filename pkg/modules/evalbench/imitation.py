# modules/evalbench/imitation.py
from typing import Callable, Optional

import numpy as np

from core.seeding import stream
from modules.envs import EnvSpec, Environment, LatentParams, RealityGap, WorldConfig, observe
from modules.upn import UniversalPolicy, query

Correction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def imitation_deviation(upn: UniversalPolicy, spec: EnvSpec, theta_g: LatentParams, real_gap: RealityGap,
                        episodes: int, seed: int, correction: Optional[Correction] = None) -> np.ndarray:
    """Per-episode mean squared distance between real and simulated next observations

    At each real state the simulator at θ_g is placed on that state and
    stepped with the greedy UPN action, while the real world executes the
    same action plus ``correction(obs, action)`` if given. Episodes use the
    same initial states as run_episodes() with the same seed, so corrected
    and uncorrected calls are paired.
    """
    real = Environment(spec, WorldConfig(theta_g, real_gap))
    sim = Environment(spec, WorldConfig(theta_g))
    per_episode = np.zeros(episodes)
    for i in range(episodes):
        state = real.reset(stream(seed, "episode", i))
        deviations = []
        while True:
            obs = observe(spec, state)
            action = query(upn, obs, theta_g)
            real_action = action if correction is None else spec.clip_action(action + correction(obs, action))
            sim.set_state(state)
            sim_next = sim.step(action)[0]
            state, _, terminated, truncated = real.step(real_action)
            diff = observe(spec, state) - observe(spec, sim_next)
            deviations.append(float(diff @ diff))
            if terminated or truncated:
                break
        per_episode[i] = np.mean(deviations)
    return per_episode
