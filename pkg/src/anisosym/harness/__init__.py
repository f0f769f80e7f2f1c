"""Config-driven experiment runner and command line interface."""

from .config import ConfigError, ExperimentConfig, load_config
from .runner import run, sweep

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "run", "sweep"]
