# modules/envs/base.py
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from core.errors import DimensionMismatchError, NonFiniteError
from .latent import LatentMap, WorldConfig


@dataclass(frozen=True, eq=False)
class EnvSpec:
    """Static description of a task: spaces, timing, goal and latent map

    ``state_dim`` is the size of the flattened state the policies see;
    ``raw_dim`` is the size of the integrator state.
    """
    env_id: str
    state_dim: int
    raw_dim: int
    action_dim: int
    action_bound: float
    horizon: int
    dt: float
    goal: Tuple[float, ...]
    latent_map: LatentMap

    def __post_init__(self):
        if not (np.isfinite(self.action_bound) and self.action_bound > 0):
            raise ValueError(f"action bound must be finite and positive, got {self.action_bound}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def physical(self, config: WorldConfig) -> np.ndarray:
        return self.latent_map.physical(config.effective())

    def clip_action(self, action) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=float), -self.action_bound, self.action_bound)

    def with_horizon(self, horizon: int) -> 'EnvSpec':
        return replace(self, horizon=int(horizon))


@dataclass(frozen=True, eq=False)
class EnvState:
    """Integrator state plus the step counter"""
    vector: np.ndarray
    t: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'vector', np.array(self.vector, dtype=float).reshape(-1))

    def __eq__(self, other) -> bool:
        return (isinstance(other, EnvState) and self.t == other.t
                and np.array_equal(self.vector, other.vector))


class Dynamics(ABC):
    """Abstract base class for the physics of one environment family"""

    env_id: str = ""

    @abstractmethod
    def make_spec(self, horizon: int) -> EnvSpec:
        """Build the EnvSpec for this family"""

    @abstractmethod
    def initial_state(self, spec: EnvSpec, rng: np.random.Generator) -> EnvState:
        """Sample a start state"""

    @abstractmethod
    def advance(self, spec: EnvSpec, physical: np.ndarray, vector: np.ndarray,
                action: np.ndarray) -> Tuple[np.ndarray, float]:
        """One integration step: returns (next raw vector, task reward)"""

    @abstractmethod
    def observe(self, vector: np.ndarray) -> np.ndarray:
        """Flatten a raw vector into the policy-facing state"""

    def is_terminal(self, spec: EnvSpec, vector: np.ndarray) -> bool:
        return False


_REGISTRY: Dict[str, Dynamics] = {}


def register(dynamics: Dynamics) -> Dynamics:
    _REGISTRY[dynamics.env_id] = dynamics
    return dynamics


def dynamics_for(env_id: str) -> Dynamics:
    if env_id not in _REGISTRY:
        raise ValueError(f"Unknown environment: {env_id} (known: {sorted(_REGISTRY)})")
    return _REGISTRY[env_id]


def validate_state(spec: EnvSpec, state: EnvState) -> None:
    if state.vector.size != spec.raw_dim:
        raise DimensionMismatchError(f"{spec.env_id} state", spec.raw_dim, state.vector.size)
    if not np.all(np.isfinite(state.vector)):
        raise NonFiniteError(f"{spec.env_id} state contains non-finite values")
    if not 0 <= state.t <= spec.horizon:
        raise ValueError(f"step counter {state.t} outside [0, {spec.horizon}]")


def observe(spec: EnvSpec, state: EnvState) -> np.ndarray:
    return dynamics_for(spec.env_id).observe(state.vector)


def step(spec: EnvSpec, config: WorldConfig, state: EnvState, action) -> Tuple[EnvState, float, bool]:
    """Pure transition function: deterministic given its inputs

    Actions outside the bounds are clamped. ``done`` fires on the goal
    condition or when the step counter reaches the horizon.
    """
    validate_state(spec, state)
    action = np.asarray(action, dtype=float).reshape(-1)
    if action.size != spec.action_dim:
        raise DimensionMismatchError(f"{spec.env_id} action", spec.action_dim, action.size)
    if not np.all(np.isfinite(action)):
        raise NonFiniteError(f"{spec.env_id} action contains non-finite values")

    dyn = dynamics_for(spec.env_id)
    vector, reward = dyn.advance(spec, spec.physical(config), state.vector, spec.clip_action(action))
    t = state.t + 1
    done = dyn.is_terminal(spec, vector) or t >= spec.horizon
    return EnvState(vector, t), float(reward), bool(done)


class Environment:
    """Single-owner mutable wrapper around the pure transition function"""

    def __init__(self, spec: EnvSpec, config: WorldConfig):
        self.spec = spec
        self.config = config
        self.dynamics = dynamics_for(spec.env_id)
        self.state: EnvState = None

    def reset(self, rng: np.random.Generator) -> EnvState:
        self.state = self.dynamics.initial_state(self.spec, rng)
        return self.state

    def set_state(self, state: EnvState) -> None:
        validate_state(self.spec, state)
        self.state = EnvState(state.vector.copy(), state.t)

    def get_state(self) -> EnvState:
        return self.state

    def reconfigure(self, config: WorldConfig) -> None:
        self.config = config

    def observe(self, state: EnvState = None) -> np.ndarray:
        return self.dynamics.observe((self.state if state is None else state).vector)

    def step(self, action) -> Tuple[EnvState, float, bool, bool]:
        """Advance the owned state

        Returns:
            (next_state, task_reward, terminated, truncated)
        """
        if self.state is None:
            raise RuntimeError("Environment.step() called before reset() or set_state()")
        nxt, reward, done = step(self.spec, self.config, self.state, action)
        terminated = self.dynamics.is_terminal(self.spec, nxt.vector)
        self.state = nxt
        return nxt, reward, terminated, done and not terminated
