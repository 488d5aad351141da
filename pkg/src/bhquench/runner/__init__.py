from .config import ExperimentConfig, convert_time, load_config
from .pipeline import run_experiment

__all__ = ["ExperimentConfig", "convert_time", "load_config", "run_experiment"]
