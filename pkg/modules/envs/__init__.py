from .latent import (LATENT_DIM, GAP_SUPPORT, LatentParams, RealityGap, WorldConfig,
                     LatentMap, apply_gap)
from .base import (EnvSpec, EnvState, Environment, Dynamics, step, observe,
                   validate_state, dynamics_for)
from .point_mass import PointMassPutt
from .pendulum import PendulumSwingUp
from .registry import ENV_IDS, make_spec, create_env

__all__ = [
    'LATENT_DIM', 'GAP_SUPPORT', 'LatentParams', 'RealityGap', 'WorldConfig', 'LatentMap',
    'apply_gap', 'EnvSpec', 'EnvState', 'Environment', 'Dynamics', 'step', 'observe',
    'validate_state', 'dynamics_for', 'PointMassPutt', 'PendulumSwingUp',
    'ENV_IDS', 'make_spec', 'create_env',
]
