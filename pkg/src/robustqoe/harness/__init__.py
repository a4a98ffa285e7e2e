"""Monte Carlo experiment harness and command-line interface."""

from .config import ConfigError, load_config
from .experiments import RUNNERS
from .report import Check, ExperimentReport

__all__ = ["Check", "ConfigError", "ExperimentReport", "RUNNERS", "load_config"]
