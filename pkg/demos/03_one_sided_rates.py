"""One-sided rates when the data are semi-superharmonic.

With u_T ≡ 0 and the source f = −t·cos(πx), every hypothesis of the
one-sided theorem holds: the Laplacian of u_ε stays below M_0 + ∫c_f, the
error from above decays like ε and the error from below like ε^β with an
explicit constant built from K and C_L.  The script prints both sides
next to their bounds.
"""

from hjlab import HamiltonianSpec, ProblemSpec, build_grid
from hjlab.rate_lab import SweepPlan, run_sweep

problem = ProblemSpec(build_grid((0, 1), 1024), 1.0, HamiltonianSpec.quadratic(), "constant", "cos_source")
report = run_sweep(SweepPlan(problem, (0.1, 0.05, 0.025, 0.0125, 0.00625), kind="one_sided"))

print("epsilon     (u_eps-u)+   bound       (u-u_eps)+   bound")
for r in report.rows:
    print(f"{r.epsilon:.5f}    {r.pos_error:.3e}   {r.bound_upper:.3e}   {r.neg_error:.3e}   {r.bound_lower:.3e}")
print(f"\nfrom above: exponent {report.fits['pos']['exponent']:.3f} (theory 1)")
print(f"from below: exponent {report.fits['neg']['exponent']:.3f} (theory at least 1/2)")
print(f"K = {report.constants['K']:.3f}, max weighted second-order integral "
      f"{max(report.column('second_order')):.3f}")
