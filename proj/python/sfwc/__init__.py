"""Stochastic Frank-Wolfe training with compression-aware feasible regions."""

from ._core import (
    Error,
    FeasibleRegion,
    brute_force_lmo_value,
    budget_count,
    check_convergence,
    ensure_feasible,
    expand_grid,
    gauge,
    gradcheck,
    k_support_norm,
    lmo,
    parse_config,
    radius_from_diameter,
    rank_for_reduction,
    read_snapshot,
    run_experiment,
    run_sweep,
    select,
    svd_full,
    svd_topk,
    svt,
    theorem_bound,
    theorem_schedule,
    verify_lmo,
)

__all__ = [
    "Error",
    "FeasibleRegion",
    "brute_force_lmo_value",
    "budget_count",
    "check_convergence",
    "ensure_feasible",
    "expand_grid",
    "gauge",
    "gradcheck",
    "k_support_norm",
    "lmo",
    "parse_config",
    "radius_from_diameter",
    "rank_for_reduction",
    "read_snapshot",
    "run_experiment",
    "run_sweep",
    "select",
    "svd_full",
    "svd_topk",
    "svt",
    "theorem_bound",
    "theorem_schedule",
    "verify_lmo",
]
