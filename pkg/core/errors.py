# core/errors.py
from typing import Any, Dict, Optional


class RatBenchError(Exception):
    """Base class for all ratbench errors"""


class DimensionMismatchError(RatBenchError, ValueError):
    """Raised when a vector does not have the size a component expects"""

    def __init__(self, what: str, expected: int, actual: int):
        super().__init__(f"{what}: expected size {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class NonFiniteError(RatBenchError, ValueError):
    """NaN or inf found in inputs, states or gradients"""


class MissingActivationsError(RatBenchError, RuntimeError):
    """Backward pass requested without cached forward activations"""


class TrainingDivergedError(RatBenchError, RuntimeError):
    """PPO produced a non-finite loss or gradient

    Carries the last finite model so callers can persist it.
    """

    def __init__(self, message: str, last_good: Any = None,
                 diagnostics: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.last_good = last_good
        self.diagnostics = diagnostics or {}


class ZeroShotRefusedError(RatBenchError, ValueError):
    """Adjacent parameters lie further than eps_max from the ground truth"""


class ConfigError(RatBenchError, ValueError):
    """Invalid configuration value or unknown key"""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class CheckpointError(RatBenchError, IOError):
    """Checkpoint could not be read (truncated, wrong kind, wrong version)"""


class StageError(RatBenchError, RuntimeError):
    """A pipeline stage failed"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class SearchFailedError(RatBenchError, RuntimeError):
    """Every hyperparameter trial diverged"""

    def __init__(self, trials: list):
        lines = [f"trial {t['trial']}: {t.get('error', 'unknown')}" for t in trials]
        super().__init__("all trials failed:\n" + "\n".join(lines))
        self.trials = trials
