"""Python bindings for the flipcoop solvers and simulator."""

from ._flipcoop import (
    ConfigError,
    DomainError,
    SolverError,
    __version__,
    build_xi_a,
    build_xi_h,
    ne_select_a,
    ne_select_h,
    normalize_config,
    presets,
    run_config,
    simulate_scalar_lti,
    solve_scalar_lti,
    transition,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "SolverError",
    "__version__",
    "build_xi_a",
    "build_xi_h",
    "ne_select_a",
    "ne_select_h",
    "normalize_config",
    "presets",
    "run_config",
    "simulate_scalar_lti",
    "solve_scalar_lti",
    "transition",
]
