"""Surrogate-assisted differential evolution toolkit."""

from ._surropt import (
    LAYOUT_DIM,
    VARIANTS,
    BoundsError,
    ConfigError,
    DimensionError,
    Error,
    oracle,
    rank_sum_test,
    run,
    run_pipeline,
    run_seed,
    run_sphere,
    table1_specs,
)

__all__ = [
    "LAYOUT_DIM",
    "VARIANTS",
    "BoundsError",
    "ConfigError",
    "DimensionError",
    "Error",
    "oracle",
    "rank_sum_test",
    "run",
    "run_pipeline",
    "run_seed",
    "run_sphere",
    "table1_specs",
]
