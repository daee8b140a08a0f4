"""Configuration, suite orchestration, law comparison and the command line."""

from .compare import DistanceReport, compare_laws, ks_distance, tv_distance
from .config import SUITES, ExperimentConfig
from .suites import WORKERS_ENV, ReplicateFailure, RunManifest, derived_quantities, run_suite

__all__ = [
    "SUITES",
    "WORKERS_ENV",
    "DistanceReport",
    "ExperimentConfig",
    "ReplicateFailure",
    "RunManifest",
    "compare_laws",
    "derived_quantities",
    "ks_distance",
    "run_suite",
    "tv_distance",
]
