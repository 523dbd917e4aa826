# config/config.py
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional
import copy
import hashlib
import json
import math
import os

from dotenv import load_dotenv

from core.errors import ConfigError

FORMAT_VERSION = 1
ENV_PREFIX = "RATBENCH_"
# Sections that do not affect any trained model
TRAINING_HASH_EXCLUDES = ('system', 'eval', 'search')

# Ground-truth latent vector drawn uniformly in [0, 1) for all tasks
DEFAULT_THETA_G = [0.5488135, 0.71518937, 0.60276338, 0.54488318, 0.4236548]


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise ConfigError(key, message)


@dataclass
class NetworkConfig:
    """Policy / critic / regressor network shape"""
    hidden_width: int = 64
    depth: int = 2
    output_gain: float = 0.01
    upn_init_log_std: float = -0.5
    rat_init_log_std: float = -1.0

    def __post_init__(self):
        _require(self.hidden_width >= 1, "hidden_width", "must be a positive integer")
        _require(self.depth >= 1, "depth", "must be a positive integer")
        _require(self.output_gain > 0, "output_gain", "must be positive")

    def sizes(self, input_dim: int, output_dim: int) -> List[int]:
        return [input_dim] + [self.hidden_width] * self.depth + [output_dim]


@dataclass
class PpoHyperparams:
    """PPO + GAE settings (the ones the hyperparameter search tunes come first)"""
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    entcoeff: float = 0.0
    stepsize: float = 3e-4
    batch_size: int = 2000
    epochs: int = 10
    minibatches: int = 4
    vf_coef: float = 0.5

    def __post_init__(self):
        _require(0.0 < self.gamma <= 1.0, "gamma", "must lie in (0, 1]")
        _require(0.0 <= self.lam <= 1.0, "lam", "must lie in [0, 1]")
        _require(self.clip > 0, "clip", "must be positive")
        _require(self.entcoeff >= 0, "entcoeff", "must be non-negative")
        _require(self.stepsize > 0, "stepsize", "must be positive")
        _require(self.batch_size >= 1, "batch_size", "must be a positive integer")
        _require(self.epochs >= 1, "epochs", "must be a positive integer")
        _require(self.minibatches >= 1, "minibatches", "must be a positive integer")
        _require(self.vf_coef >= 0, "vf_coef", "must be non-negative")


@dataclass
class UpnConfig:
    """Universal policy training and ground-truth fine-tuning budgets"""
    total_steps: int = 300_000
    theta_low: List[float] = field(default_factory=lambda: [0.0] * 5)
    theta_high: List[float] = field(default_factory=lambda: [1.0] * 5)
    fine_tune_steps: int = 50_000
    fine_tune_chunk: int = 10_000
    improvement_threshold: float = 0.05
    ppo: PpoHyperparams = field(default_factory=PpoHyperparams)

    def __post_init__(self):
        _require(self.total_steps >= 0, "total_steps", "must be >= 0")
        _require(self.fine_tune_steps >= 0, "fine_tune_steps", "must be >= 0")
        _require(self.fine_tune_chunk >= 1, "fine_tune_chunk", "must be a positive integer")
        _require(len(self.theta_low) == 5 and len(self.theta_high) == 5,
                 "theta_low", "theta range bounds must have 5 entries")
        for lo, hi in zip(self.theta_low, self.theta_high):
            _require(0.0 <= lo <= hi <= 1.0, "theta_high", "theta range must satisfy 0 <= low <= high <= 1")


@dataclass
class RatConfig:
    """Correction-policy training (robust initialization and real-world training)"""
    init_episodes: int = 500
    gap_low: List[float] = field(default_factory=lambda: [0.0, 1.0, 0.0, 0.0, 0.0])
    gap_high: List[float] = field(default_factory=lambda: [1.0, 3.0, 0.0, 0.0, 0.0])
    reset: bool = True
    real_steps: int = 0
    scale_reward_by_state_dim: bool = False
    eps_max: float = 0.05
    ppo: PpoHyperparams = field(default_factory=lambda: PpoHyperparams(gamma=0.9, entcoeff=0.0))

    def __post_init__(self):
        _require(self.init_episodes >= 0, "init_episodes", "must be >= 0")
        _require(self.real_steps >= 0, "real_steps", "must be >= 0")
        _require(self.eps_max >= 0, "eps_max", "must be >= 0")
        _require(len(self.gap_low) == 5 and len(self.gap_high) == 5,
                 "gap_low", "gap bounds must have 5 entries")
        _require(all(lo <= hi for lo, hi in zip(self.gap_low, self.gap_high)),
                 "gap_high", "gap bounds must satisfy low <= high elementwise")


@dataclass
class SupRatConfig:
    """Inverse-dynamics regressor data collection and fitting"""
    dataset_steps: int = 100_000
    noise_fraction: float = 0.2
    epochs: int = 100
    minibatch_size: int = 256
    stepsize: float = 1e-3
    validation_fraction: float = 0.1
    patience: int = 10

    def __post_init__(self):
        _require(self.dataset_steps >= 0, "dataset_steps", "must be >= 0")
        _require(self.noise_fraction >= 0, "noise_fraction", "must be >= 0")
        _require(self.epochs >= 1, "epochs", "must be a positive integer")
        _require(self.minibatch_size >= 1, "minibatch_size", "must be a positive integer")
        _require(self.stepsize > 0, "stepsize", "must be positive")
        _require(0.0 < self.validation_fraction < 1.0, "validation_fraction", "must lie in (0, 1)")
        _require(self.patience >= 1, "patience", "must be a positive integer")


@dataclass
class EvalConfig:
    """Evaluation protocol"""
    episodes: int = 50
    deviation_levels: List[float] = field(default_factory=lambda: [0.0, 0.05, 0.10, 0.20])
    adjacent_samples: int = 50
    dr_samples: int = 10
    dr_deviation: float = 0.05
    workers: int = 1

    def __post_init__(self):
        _require(self.episodes >= 1, "episodes", "must be a positive integer")
        _require(all(d >= 0 for d in self.deviation_levels), "deviation_levels", "must be >= 0")
        _require(self.adjacent_samples >= 1, "adjacent_samples", "must be a positive integer")
        _require(self.dr_samples >= 1, "dr_samples", "must be a positive integer")
        _require(self.dr_deviation >= 0, "dr_deviation", "must be >= 0")
        _require(self.workers >= 1, "workers", "must be a positive integer")


@dataclass
class SearchSpaceConfig:
    """Random-search ranges for the correction policy's PPO settings"""
    clip: List[float] = field(default_factory=lambda: [0.1, 0.3])
    entcoeff: List[float] = field(default_factory=lambda: [0.0, 0.01])
    stepsize: List[float] = field(default_factory=lambda: [1e-4, 1e-3])
    lam: List[float] = field(default_factory=lambda: [0.9, 1.0])
    gamma: List[float] = field(default_factory=lambda: [0.8, 0.999])
    reset_options: List[bool] = field(default_factory=lambda: [True, False])
    trials: int = 40
    trial_episodes: int = 50
    objective_episodes: int = 10

    def __post_init__(self):
        for name in ('clip', 'entcoeff', 'stepsize', 'lam', 'gamma'):
            bounds = getattr(self, name)
            _require(len(bounds) == 2 and bounds[0] <= bounds[1], name, "range must be [low, high] with low <= high")
        _require(self.stepsize[0] > 0, "stepsize", "lower bound must be positive (sampled log-uniformly)")
        _require(len(self.reset_options) >= 1, "reset_options", "needs at least one option")
        _require(self.trials >= 1, "trials", "trial budget must be >= 1")
        _require(self.trial_episodes >= 0, "trial_episodes", "must be >= 0")
        _require(self.objective_episodes >= 1, "objective_episodes", "must be a positive integer")

    def is_degenerate(self) -> bool:
        return all(getattr(self, n)[0] == getattr(self, n)[1]
                   for n in ('clip', 'entcoeff', 'stepsize', 'lam', 'gamma')) and len(set(self.reset_options)) == 1


@dataclass
class SystemConfig:
    """Run-time settings that do not change results"""
    output_dir: str = "runs"
    log_level: str = "INFO"
    show_progress: bool = True


@dataclass
class ExperimentConfig:
    """Main configuration class"""
    env_id: str = "point_mass"
    seed: int = 0
    horizon: int = 200
    theta_g: List[float] = field(default_factory=lambda: list(DEFAULT_THETA_G))
    gap_factor: float = 4.0
    gap_dims: List[int] = field(default_factory=lambda: [0, 1])
    network: NetworkConfig = field(default_factory=NetworkConfig)
    upn: UpnConfig = field(default_factory=UpnConfig)
    rat: RatConfig = field(default_factory=RatConfig)
    suprat: SupRatConfig = field(default_factory=SupRatConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    search: SearchSpaceConfig = field(default_factory=SearchSpaceConfig)
    system: SystemConfig = field(default_factory=SystemConfig)

    def __post_init__(self):
        _require(self.env_id in ("point_mass", "pendulum"), "env_id", "must be 'point_mass' or 'pendulum'")
        _require(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        _require(self.horizon >= 1, "horizon", "must be a positive integer")
        _require(len(self.theta_g) == 5, "theta_g", "must have exactly 5 entries")
        for value in self.theta_g:
            _require(math.isfinite(value) and 0.0 <= value < 1.0, "theta_g",
                     f"entry {value} outside the [0, 1) bound")
        _require(self.gap_factor >= 0, "gap_factor", "must be >= 0")
        _require(all(d in (0, 1) for d in self.gap_dims), "gap_dims",
                 "only friction (0) and primary mass (1) may carry a gap")
        for section in ('upn', 'rat'):
            batch = getattr(self, section).ppo.batch_size
            _require(batch >= self.horizon, f"{section}.ppo.batch_size",
                     f"batch size {batch} must be >= horizon {self.horizon}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Create configuration from a (possibly partial) nested dictionary

        Unknown keys are rejected; errors name the dotted key path.
        """
        return _build(cls, data, prefix="")

    def config_hash(self, exclude=('system',)) -> str:
        """Hash of everything that influences results (the system section is excluded)

        Checkpoints are keyed with ``exclude=TRAINING_HASH_EXCLUDES`` so that
        evaluation-only changes reuse trained models.
        """
        data = self.to_dict()
        for section in exclude:
            data.pop(section, None)
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:12]

    def output_path(self) -> Path:
        path = Path(self.system.output_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def full_scale(self) -> 'ExperimentConfig':
        """Copy with the full evaluation protocol (500-step episodes, 100 episodes, 128x5 networks)"""
        cfg = copy.deepcopy(self)
        cfg.horizon = 500
        cfg.eval.episodes = 100
        cfg.eval.adjacent_samples = 100
        cfg.network.hidden_width = 128
        cfg.network.depth = 5
        cfg.upn.ppo.batch_size = 4000
        cfg.rat.ppo.batch_size = 4000
        return cfg

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        return replace(copy.deepcopy(self), seed=int(seed))

    def save(self, path: str = "config.json"):
        """Save configuration to file"""
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str = "config.json") -> 'ExperimentConfig':
        return load_config(path)


def _build(cls, data: Dict[str, Any], prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix.rstrip('.') or '<root>', "expected a mapping")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{prefix}{key}", "unknown configuration key")
        default = known[key].default_factory() if callable(known[key].default_factory) else None
        if default is not None and is_dataclass(default):
            if not isinstance(value, dict):
                raise ConfigError(f"{prefix}{key}", "expected a mapping")
            # partial sections keep the section's own defaults
            merged = {f.name: getattr(default, f.name) for f in fields(default)}
            for name, sub in merged.items():
                if is_dataclass(sub):
                    merged[name] = asdict(sub)
            merged.update(value)
            kwargs[key] = _build(type(default), merged, prefix=f"{prefix}{key}.")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as e:
        raise ConfigError(f"{prefix}{e.key}", e.message) from None
    except TypeError as e:
        raise ConfigError(prefix.rstrip('.') or '<root>', str(e)) from None


def _parse_env_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(data: Dict[str, Any], environ: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """
    Overlay RATBENCH_* variables on a config dictionary

    ``RATBENCH_SEED=3`` sets the top-level seed; ``RATBENCH_UPN__PPO__CLIP=0.1``
    sets a nested field. Values are JSON-decoded when possible.
    """
    environ = os.environ if environ is None else environ
    data = copy.deepcopy(data)
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        path = [part.lower() for part in name[len(ENV_PREFIX):].split('__') if part]
        if not path:
            continue
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError('.'.join(path), "override targets a non-section key")
        node[path[-1]] = _parse_env_value(raw)
    return data


def load_config(path: Optional[str] = None, environ: Optional[Dict[str, str]] = None,
                use_dotenv: bool = True) -> ExperimentConfig:
    """
    Load, override and validate an experiment configuration

    Args:
        path: JSON file; None or an empty file means all defaults
        environ: variables to read overrides from (default: os.environ)
        use_dotenv: read a ``.env`` file into the environment first

    Raises:
        ConfigError naming the offending key
    """
    if use_dotenv and environ is None:
        load_dotenv(override=False)

    data: Dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding='utf-8')
        except FileNotFoundError:
            raise ConfigError(str(path), "configuration file not found") from None
        if text.strip():
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(str(path), f"parse error: {e}") from None
    return ExperimentConfig.from_dict(apply_env_overrides(data, environ))
