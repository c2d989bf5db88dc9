# Core modules for wptcc
from .model import EnergyCovariance, Instance, Solution, check_feasible
from .special_fn import lambert_w0, one_plus_w
from .dual_core import DualPoint, eval_dual, feasibility_cut
from .ellipsoid import ellipsoid_minimize
from .primal_recovery import assemble_solution, solve_recovery_sdp
from .baselines import solve_equal_time, solve_local_only
from .refinement import multipliers_from_primal, refine_solution
from .oracle import EnergyFrontier, brute_force_small, kkt_residuals
from .scenarios import Geometry, InstanceTemplate, SweepConfig, run_sweep, sample_channels

__all__ = [
    "EnergyCovariance",
    "Instance",
    "Solution",
    "check_feasible",
    "lambert_w0",
    "one_plus_w",
    "DualPoint",
    "eval_dual",
    "feasibility_cut",
    "ellipsoid_minimize",
    "assemble_solution",
    "solve_recovery_sdp",
    "solve_equal_time",
    "solve_local_only",
    "multipliers_from_primal",
    "refine_solution",
    "EnergyFrontier",
    "brute_force_small",
    "kkt_residuals",
    "Geometry",
    "InstanceTemplate",
    "SweepConfig",
    "run_sweep",
    "sample_channels",
]
