"""Vanishing-viscosity laboratory for Hamilton–Jacobi equations with Neumann walls.

The viscous problem ``−∂_t u − εΔu + H(Du) = f`` on a box, with a terminal
datum at ``t = T`` and ``∂_ν u = 0`` on the walls, is solved by a monotone
implicit-explicit scheme.  Its adjoint Fokker–Planck density, the
certificates built from the two, and ε-sweeps comparing measured rates
with the a priori bounds are available from the top-level namespace.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CatalogError,
    CompatibilityError,
    ConfigError,
    DegenerateFitError,
    HJLabError,
    HypothesisError,
    InconclusiveResolution,
    InputError,
    InvalidDomainError,
    PositivityFault,
    RangeError,
    ResolutionError,
    SolverError,
    StabilityError,
)
from .grid import Grid, ScalarField, build_grid, gradient, laplacian  # noqa: E402
from .hamiltonian import HamiltonianSpec  # noqa: E402
from .hj_solver import ProblemSpec, SpaceTimeField, solve_inviscid, solve_viscous, stable_dt  # noqa: E402
from .fp_adjoint import Drift, DensityTrajectory, drift_from_solution, mass, pair, solve_adjoint  # noqa: E402
from .estimates import (  # noqa: E402
    delta_u_plus_bound,
    duality_residual,
    lipschitz_certificate,
    lower_bound_constant,
    second_order_K,
    weighted_second_order,
)
from .rate_lab import RateReport, SweepPlan, fit_rate, heat_baseline, one_sided_rates, run_sweep  # noqa: E402
from .cli_io import RunConfig, emit_report, load_report, parse_config, run  # noqa: E402

__all__ = [
    "CatalogError", "CompatibilityError", "ConfigError", "DegenerateFitError", "HJLabError",
    "HypothesisError", "InconclusiveResolution", "InputError", "InvalidDomainError", "PositivityFault",
    "RangeError", "ResolutionError", "SolverError", "StabilityError",
    "Grid", "ScalarField", "build_grid", "gradient", "laplacian",
    "HamiltonianSpec",
    "ProblemSpec", "SpaceTimeField", "solve_inviscid", "solve_viscous", "stable_dt",
    "Drift", "DensityTrajectory", "drift_from_solution", "mass", "pair", "solve_adjoint",
    "delta_u_plus_bound", "duality_residual", "lipschitz_certificate", "lower_bound_constant",
    "second_order_K", "weighted_second_order",
    "RateReport", "SweepPlan", "fit_rate", "heat_baseline", "one_sided_rates", "run_sweep",
    "RunConfig", "emit_report", "load_report", "parse_config", "run",
]
