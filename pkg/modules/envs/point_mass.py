# modules/envs/point_mass.py
from typing import Tuple

import numpy as np

from .base import Dynamics, EnvSpec, EnvState, register
from .latent import LatentMap

ARENA_HALF_WIDTH = 1.0
GOAL = (0.5, 0.0)
GOAL_RADIUS = 0.05
GOAL_SPEED = 0.1


class PointMassPutt(Dynamics):
    """2-D puck pushed by a bounded force towards a hole, inside a walled arena

    Raw state: (px, py, vx, vy). Physical latents: friction c_f (1/s),
    primary mass, payload mass (both axes), carriage mass (y axis only),
    wall restitution.
    """

    env_id = "point_mass"

    latent_map = LatentMap(
        offset=np.array([0.0, 0.5, 0.0, 0.0, 0.2]),
        scale=np.array([2.0, 1.0, 0.5, 0.5, 0.75]),
        names=("friction", "mass", "payload_mass", "carriage_mass", "restitution"),
    )

    def make_spec(self, horizon: int) -> EnvSpec:
        return EnvSpec(env_id=self.env_id, state_dim=4, raw_dim=4, action_dim=2,
                       action_bound=1.0, horizon=horizon, dt=0.05, goal=GOAL,
                       latent_map=self.latent_map)

    def initial_state(self, spec: EnvSpec, rng: np.random.Generator) -> EnvState:
        px = rng.uniform(-0.8, -0.4)
        py = rng.uniform(-0.3, 0.3)
        return EnvState(np.array([px, py, 0.0, 0.0]), 0)

    def advance(self, spec: EnvSpec, physical: np.ndarray, vector: np.ndarray,
                action: np.ndarray) -> Tuple[np.ndarray, float]:
        friction, mass, payload, carriage, restitution = physical
        inv_mass = np.array([1.0 / (mass + payload), 1.0 / (mass + payload + carriage)])
        pos, vel = vector[:2], vector[2:]

        # semi-implicit Euler: velocity first, then position with the new velocity
        vel = vel + (action * inv_mass - friction * vel) * spec.dt
        pos = pos + vel * spec.dt

        for axis in range(2):
            if abs(pos[axis]) > ARENA_HALF_WIDTH:
                wall = np.sign(pos[axis]) * ARENA_HALF_WIDTH
                pos[axis] = wall - restitution * (pos[axis] - wall)
                vel[axis] = -restitution * vel[axis]
        pos = np.clip(pos, -ARENA_HALF_WIDTH, ARENA_HALF_WIDTH)

        reward = -float(np.linalg.norm(pos - np.asarray(spec.goal)))
        return np.concatenate([pos, vel]), reward

    def observe(self, vector: np.ndarray) -> np.ndarray:
        return vector.copy()

    def is_terminal(self, spec: EnvSpec, vector: np.ndarray) -> bool:
        near = np.linalg.norm(vector[:2] - np.asarray(spec.goal)) < GOAL_RADIUS
        slow = np.linalg.norm(vector[2:]) < GOAL_SPEED
        return bool(near and slow)


register(PointMassPutt())
