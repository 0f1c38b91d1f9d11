"""How far does the heat flow move a kink?

With H = 0 the viscous problem is the backward heat equation with Neumann
walls, and the distance from the terminal datum is the classical yardstick:
for a Lipschitz kink it scales like √(εT).  This script measures it over
two decades of ε and fits the slope on a log-log scale.
"""

import numpy as np

from hjlab import HamiltonianSpec, ProblemSpec, build_grid
from hjlab.rate_lab import SweepPlan, run_sweep

problem = ProblemSpec(build_grid((0, 1), 1024), 1.0, HamiltonianSpec.zero(), "kink")
report = run_sweep(SweepPlan(problem, tuple(np.logspace(-2, -4, 5)), kind="heat_baseline"))

print("epsilon      sup error    C*sqrt(eps*T)")
for row in report.rows:
    print(f"{row.epsilon:.3e}    {row.sup_error:.4e}   {row.bound_upper:.4e}")

fit = report.fits["sup"]
print(f"\nfitted exponent {fit['exponent']:.3f}, constant {fit['constant']:.3f}")
print(f"the continuum kink gives exponent 1/2 and constant 2/sqrt(pi) = {2 / np.sqrt(np.pi):.3f}")
