"""Config-driven experiment runner."""

from .config import ExperimentConfig, dump_config, load_config, parse_config
from .runner import (
    OUT_DIR_ENV,
    TRACE_HEADER,
    ComparisonResult,
    ExperimentResult,
    compare_algorithms,
    run_experiment,
)

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "dump_config",
    "run_experiment",
    "compare_algorithms",
    "ExperimentResult",
    "ComparisonResult",
    "TRACE_HEADER",
    "OUT_DIR_ENV",
]
