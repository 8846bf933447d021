"""Prototype-gated pseudo-labeling engine for imbalanced semi-supervised classification."""

from .config import ExperimentConfig, load_config, parse_config
from .orchestrator import run, RunResult

__all__ = ["ExperimentConfig", "load_config", "parse_config", "run", "RunResult"]
__version__ = "0.1.0"
