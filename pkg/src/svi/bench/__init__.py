"""Benchmark harness: configs, reference oracle, experiment runner, CLI."""

from .config import ExperimentConfig, ReferenceSpec, SchemeSpec
from .reference import reference_solution, saa_mean_map, smoothed_saa_mean_map
from .runner import ExperimentReport, run_experiment
from .stats import confidence_interval

__all__ = [
    "ExperimentConfig",
    "ReferenceSpec",
    "SchemeSpec",
    "reference_solution",
    "saa_mean_map",
    "smoothed_saa_mean_map",
    "ExperimentReport",
    "run_experiment",
    "confidence_interval",
]
