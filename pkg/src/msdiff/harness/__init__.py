"""Config parsing, experiment dispatch and report emission."""

from .config import ConfigError, ExperimentConfig
from .emit import emit
from .runner import run

__all__ = ["ConfigError", "ExperimentConfig", "emit", "run"]
