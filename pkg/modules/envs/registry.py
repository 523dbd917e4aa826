from typing import Optional

from .base import EnvSpec, Environment, dynamics_for
from .latent import WorldConfig

ENV_IDS = ("point_mass", "pendulum")
DEFAULT_HORIZON = 200


def make_spec(env_id: str, horizon: int = DEFAULT_HORIZON) -> EnvSpec:
    """
    Build the EnvSpec for an environment family

    Args:
        env_id: 'point_mass' or 'pendulum'
        horizon: episode length (200 desk-scale, 500 full-scale)
    """
    return dynamics_for(env_id).make_spec(horizon)


def create_env(env_id: str, config: WorldConfig, horizon: Optional[int] = None) -> Environment:
    """
    Create an environment instance

    Args:
        env_id: Type of environment ('point_mass' or 'pendulum')
        config: world parameters φ = [θ, μ]
        horizon: episode length override

    Returns:
        Environment instance
    """
    spec = make_spec(env_id, horizon or DEFAULT_HORIZON)
    return Environment(spec, config)
