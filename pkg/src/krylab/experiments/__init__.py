"""Declarative experiments E1-E6 with JSON reports and CSV traces."""
from .config import EXPERIMENTS, ExperimentConfig, load_config, parse_config
from .report import ExperimentReport, write_report
from .runners import RUNNERS, run_experiment

__all__ = ["EXPERIMENTS", "ExperimentConfig", "ExperimentReport", "RUNNERS", "load_config",
           "parse_config", "run_experiment", "write_report"]
