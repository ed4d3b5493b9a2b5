"""Covering integer programs with core cost-shares from knapsack-cover duals."""

from .algorithms import (
    cross_monotone_mechanism,
    fit_greedy_fixed,
    fit_greedy_minimal,
    greedy_fit_fixed,
    greedy_fit_minimal,
    greedy_solve,
    min_cost_knapsack_pd,
    multi_user_primal_dual,
)
from .core import (
    CostShares,
    DualSolution,
    Instance,
    Selection,
    dual_objective,
    induce_cost_shares,
    is_dual_feasible,
    is_feasible,
    pathological_instance,
    residual_contribution,
    residual_requirement,
)
from .exact import kc_lp_exact, solve_ip_exact, verify_core
from .io import load_instance, save_instance
from .kclp import column_generation_solve, naive_lp_value
from .lorawan import GenConfig, RadioParams, generate_instance, hata_path_loss

__version__ = "0.1.0"

__all__ = [
    "CostShares", "DualSolution", "GenConfig", "Instance", "RadioParams", "Selection",
    "column_generation_solve", "cross_monotone_mechanism", "dual_objective", "fit_greedy_fixed",
    "fit_greedy_minimal", "generate_instance", "greedy_fit_fixed", "greedy_fit_minimal", "greedy_solve",
    "hata_path_loss", "induce_cost_shares", "is_dual_feasible", "is_feasible", "kc_lp_exact",
    "load_instance", "min_cost_knapsack_pd", "multi_user_primal_dual", "naive_lp_value",
    "pathological_instance", "residual_contribution", "residual_requirement", "save_instance",
    "solve_ip_exact", "verify_core",
]
