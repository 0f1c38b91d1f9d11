"""The √ε rate for a quadratic Hamiltonian, with a measured constant.

For H(p) = |p|² and a kinked terminal datum the sup distance between the
viscous and inviscid solutions is bounded by 2√(n C_L)·√(εT), where C_L is
a Lipschitz certificate: sup|Du_ε| plus a density-weighted integral of the
Hessian along the adjoint Fokker-Planck flow.  C_L should not depend on ε.

At N=2048 this takes about a minute.  Smaller grids run faster but let the
scheme's own viscosity (about σh/2) blur C_L across ε.
"""

import sys

from hjlab import HamiltonianSpec, ProblemSpec, build_grid
from hjlab.errors import InconclusiveResolution
from hjlab.rate_lab import SweepPlan, run_sweep

cells = int(sys.argv[1]) if len(sys.argv) > 1 else 2048
problem = ProblemSpec(build_grid((0, 1), cells), 1.0, HamiltonianSpec.quadratic(), "kink")
plan = SweepPlan(problem, (0.1, 0.05, 0.025, 0.0125))
try:
    report = run_sweep(plan)
except InconclusiveResolution as exc:
    report = exc.report
    print(f"inconclusive at N={cells}: {exc}")

print("epsilon     sup error    bound        C_L")
for row in report.rows:
    print(f"{row.epsilon:.4f}     {row.sup_error:.4e}   {row.bound_upper:.4e}   {row.C_L:.4f}")
cl = report.column("C_L")
print(f"\nC_L spread across eps: {100 * (cl.max() - cl.min()) / cl.max():.1f}%")
print(f"fitted exponent {report.fits['sup']['exponent']:.3f}; status {report.status}")
