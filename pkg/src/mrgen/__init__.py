"""Evolving metamorphic relations for small functions written in a toy imperative language."""
from .config import ConfigError, PipelineConfig, load_config
from .pipeline import Pipeline, StageError, run_pipeline

__version__ = "0.1.0"

__all__ = ["ConfigError", "Pipeline", "PipelineConfig", "StageError", "load_config", "run_pipeline"]
