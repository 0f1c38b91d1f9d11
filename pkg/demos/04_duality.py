"""The duality identity behind every estimate.

Differentiating u_ε in ε gives v = ∂_ε u_ε, which solves the linearized
equation with source Δu_ε.  Pairing v with the adjoint density ρ_ε started
at a point mass gives v(x0, τ) = ∫v(T)ρ(T) + ∬Δu_ε ρ_ε.  Here v is a
divided difference in ε, so the identity holds up to a residual that
shrinks when the grid, the step and the ε increment are halved together.
"""

from hjlab import HamiltonianSpec, ProblemSpec, build_grid, stable_dt
from hjlab.estimates import duality_residual

for H, terminal in ((HamiltonianSpec.zero(), "kink"), (HamiltonianSpec.quadratic(), "cos")):
    previous = None
    for cells, eta in ((128, 5e-3), (256, 2.5e-3), (512, 1.25e-3)):
        problem = ProblemSpec(build_grid((0, 1), cells), 1.0, H, terminal)
        res = duality_residual(problem, 1e-2, eta, (0.3,), 0.0, stable_dt(problem))
        gain = f"  ({previous / res:.2f}x smaller)" if previous else ""
        print(f"H={H.name:9s} u_T={terminal:4s} N={cells:4d} eta={eta:.2e}  residual {res:.2e}{gain}")
        previous = res
