"""Simulation and verification toolkit for ROS-constrained auto-bidding
auctions: mechanism rules, best-response oracles, iterated-dynamics
equilibria, liquid-welfare accounting, and the matching analytic bounds."""

from .autobidder import (BestResponse, BidBoundReport, UndominatedReport,
                         best_response, check_equilibrium_bid_bounds,
                         check_undominated, evaluate_bids, fpa_best_response,
                         rfpa_best_response, rfpa_grid_best_response,
                         uniform_best_response)
from .bounds import (BoundEvaluation, BoundOptimum, LowerBoundCheck,
                     LowerBoundInstance, evaluate_welfare_bound,
                     make_deterministic_lb_instance, make_rtruth_lb_instance,
                     optimize_welfare_bound, rtruth_lower_bound_ratio,
                     shared_query_bound_rfpa, shared_query_bound_rtruth,
                     sweep_welfare_bound, verify_lower_bound)
from .core import (BidProfile, Instance, QueryOutcome, WelfareSummary,
                   liquid_welfare, load_instance, loads_instance, normalize,
                   optimal_welfare, ros_slack, save_instance, welfare_summary)
from .equilibrium import (EquilibriumReport, GammaEqCheck,
                          check_gamma_equilibrium, gamma_achieved,
                          run_dynamics)
from .errors import (AmbiguousOutcomeError, ArenaError, InvalidInstanceError,
                     NumericError, OraclePreconditionError)
from .experiments import (ExperimentConfig, ExperimentResult, gen_instance,
                          run_bound_report, run_experiment,
                          run_lower_bound_report)
from .mechanisms import (MechanismSpec, fpa_outcome, myerson_price_numeric,
                         outright_price_scale, profile_outcomes,
                         query_outcome, rfpa_outcome, rfpa_win_prob,
                         rtruth_outcome, spa_outcome)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousOutcomeError", "ArenaError", "BestResponse", "BidBoundReport",
    "BidProfile", "BoundEvaluation", "BoundOptimum", "EquilibriumReport",
    "ExperimentConfig", "ExperimentResult", "GammaEqCheck", "Instance",
    "InvalidInstanceError", "LowerBoundCheck", "LowerBoundInstance",
    "MechanismSpec", "NumericError", "OraclePreconditionError",
    "QueryOutcome", "UndominatedReport", "WelfareSummary", "best_response",
    "check_equilibrium_bid_bounds", "check_gamma_equilibrium",
    "check_undominated", "evaluate_bids", "evaluate_welfare_bound",
    "fpa_best_response", "fpa_outcome", "gamma_achieved", "gen_instance",
    "liquid_welfare", "load_instance", "loads_instance",
    "make_deterministic_lb_instance", "make_rtruth_lb_instance", "normalize",
    "optimal_welfare", "optimize_welfare_bound", "outright_price_scale",
    "myerson_price_numeric", "profile_outcomes", "query_outcome",
    "rfpa_best_response", "rfpa_grid_best_response", "rfpa_outcome",
    "rfpa_win_prob", "ros_slack", "rtruth_lower_bound_ratio",
    "rtruth_outcome", "run_bound_report", "run_dynamics", "run_experiment",
    "run_lower_bound_report", "save_instance", "shared_query_bound_rfpa",
    "shared_query_bound_rtruth", "spa_outcome", "sweep_welfare_bound",
    "uniform_best_response", "verify_lower_bound", "welfare_summary",
]
