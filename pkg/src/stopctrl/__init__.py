"""Numerical laboratory for a zero-sum stopping vs. singular-control game.

A stopper picks when to quit and collect g(t); a controller pushes the
diffusion downward at proportional cost, trying to cut the stopper's
take. The package solves the value surface of this game as a doubly
obstructed parabolic problem, extracts the two moving boundaries that
split the strip into stop / continue / act regions, solves the gradient's
own optimal stopping problem as an independent cross-check, simulates the
candidate saddle strategies, and measures the regularity the value is
supposed to have.

Typical use:

    from stopctrl import catalog, make_grid, solve_vi, extract_boundaries
    model = catalog("ou-quadratic")
    grid = make_grid(model, -1.0, 2.0, 400, 400)
    surface = solve_vi(model, grid)
    fb = extract_boundaries(surface)
"""

from .boundaries import FreeBoundaries, check_boundary_shape, extract_boundaries
from .diagnostics import (RegularityReport, check_c1_across_a,
                          check_growth_bounds, check_monotonicity_suite,
                          check_smooth_fit_b, check_vxx_jump_a,
                          cross_validate_vx, run_diagnostics)
from .faults import (ArtifactMismatch, AssumptionError, SolverFault,
                     TopologyFault)
from .grid import GridError, LatticeGrid, make_grid
from .model import (GameModel, ModelError, AssumptionReport, catalog,
                    catalog_param_names, default_window, lambda_rate, theta,
                    theta_root, validate_assumptions)
from .os_solver import OsSurface, extract_b_os, solve_vx_os
from .simulate import (ControlledPath, McReport, PathBundle, SimulatedPaths,
                       default_approach, first_hitting, mc_payoff,
                       moment_growth_experiment, no_control,
                       reflect_along_b, reflect_at_boundary,
                       saddle_deviation_test, simulate_uncontrolled,
                       simulate_Y, skorokhod_running_sup, stop_at_boundary,
                       stop_at_time, stop_never, stopping_time_convergence)
from .vi_solver import (REGION_ACTION, REGION_INTERIOR, REGION_LABELS,
                        REGION_STOP, ValueSurface, residual_report, solve_vi,
                        solve_vi_penalty)

__version__ = "0.1.0"

__all__ = [
    "ArtifactMismatch", "AssumptionError", "AssumptionReport",
    "ControlledPath", "FreeBoundaries", "GameModel", "GridError",
    "LatticeGrid", "McReport", "ModelError", "OsSurface", "PathBundle",
    "RegularityReport", "REGION_ACTION", "REGION_INTERIOR", "REGION_LABELS",
    "REGION_STOP", "SimulatedPaths", "SolverFault", "TopologyFault",
    "ValueSurface", "catalog", "catalog_param_names", "check_boundary_shape",
    "check_c1_across_a", "check_growth_bounds", "check_monotonicity_suite",
    "check_smooth_fit_b", "check_vxx_jump_a", "cross_validate_vx",
    "default_approach", "default_window", "extract_b_os",
    "extract_boundaries", "first_hitting", "lambda_rate", "make_grid",
    "mc_payoff", "moment_growth_experiment", "no_control", "reflect_along_b",
    "reflect_at_boundary", "residual_report", "run_diagnostics",
    "saddle_deviation_test", "simulate_Y", "simulate_uncontrolled",
    "skorokhod_running_sup", "solve_vi", "solve_vi_penalty", "solve_vx_os",
    "stop_at_boundary", "stop_at_time", "stop_never",
    "stopping_time_convergence", "theta", "theta_root",
    "validate_assumptions",
]
