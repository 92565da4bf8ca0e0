"""Hybrid quantum-neuromorphic multi-agent reinforcement learning on a 3D grid world."""

from .errors import (ConfigError, InputError, MitigationError, QnmarlError, TrainingError,
                     UsageError)

__version__ = "0.1.0"

__all__ = ["ConfigError", "InputError", "MitigationError", "QnmarlError", "TrainingError",
           "UsageError", "__version__"]
