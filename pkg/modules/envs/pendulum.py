# modules/envs/pendulum.py
from typing import Tuple

import numpy as np

from .base import Dynamics, EnvSpec, EnvState, register
from .latent import LatentMap

GRAVITY = 9.81
LENGTH = 1.0
MAX_TORQUE = 2.0
MAX_SPEED = 8.0
ACTION_PENALTY = 0.01


def angle_normalize(x: float) -> float:
    return ((x + np.pi) % (2 * np.pi)) - np.pi


class PendulumSwingUp(Dynamics):
    """Torque-limited pendulum, angle 0 is upright

    Raw state: (theta, omega). Observation: (cos theta, sin theta, omega).
    Physical latents: joint damping, bob mass, rod mass, rotor inertia,
    restitution of the speed governor.
    """

    env_id = "pendulum"

    latent_map = LatentMap(
        offset=np.array([0.0, 0.5, 0.0, 0.0, 0.2]),
        scale=np.array([1.0, 1.0, 0.5, 0.1, 0.75]),
        names=("damping", "bob_mass", "rod_mass", "rotor_inertia", "restitution"),
    )

    def make_spec(self, horizon: int) -> EnvSpec:
        return EnvSpec(env_id=self.env_id, state_dim=3, raw_dim=2, action_dim=1,
                       action_bound=1.0, horizon=horizon, dt=0.05, goal=(0.0,),
                       latent_map=self.latent_map)

    def initial_state(self, spec: EnvSpec, rng: np.random.Generator) -> EnvState:
        theta = rng.uniform(-np.pi, np.pi)
        omega = rng.uniform(-1.0, 1.0)
        return EnvState(np.array([theta, omega]), 0)

    def advance(self, spec: EnvSpec, physical: np.ndarray, vector: np.ndarray,
                action: np.ndarray) -> Tuple[np.ndarray, float]:
        damping, bob, rod, rotor, restitution = physical
        theta, omega = vector
        inertia = bob * LENGTH ** 2 + rod * LENGTH ** 2 / 3.0 + rotor
        gravity_torque = (bob * LENGTH + rod * LENGTH / 2.0) * GRAVITY * np.sin(theta)
        torque = MAX_TORQUE * action[0]

        omega = omega + (gravity_torque + torque - damping * omega) / inertia * spec.dt
        if abs(omega) > MAX_SPEED:
            # the governor bounces the overshoot back
            overshoot = abs(omega) - MAX_SPEED
            omega = np.sign(omega) * max(MAX_SPEED - restitution * overshoot, 0.0)
        theta = angle_normalize(theta + omega * spec.dt)

        reward = float(np.cos(theta) - ACTION_PENALTY * action[0] ** 2)
        return np.array([theta, omega]), reward

    def observe(self, vector: np.ndarray) -> np.ndarray:
        theta, omega = vector
        return np.array([np.cos(theta), np.sin(theta), omega])


register(PendulumSwingUp())
