import math

import numpy as np
import pytest

from hjlab import HamiltonianSpec, ProblemSpec, build_grid, drift_from_solution, solve_adjoint, solve_viscous
from hjlab.errors import HypothesisError, InputError
from hjlab.estimates import (
    LipschitzCertificate,
    delta_u_plus_bound,
    duality_residual,
    lipschitz_certificate,
    lower_bound_constant,
    one_sided_sup,
    second_order_K,
    weighted_second_order,
)
from hjlab.grid import ScalarField

Q = HamiltonianSpec.quadratic()


def certify(P, eps, x0=(0.5,)):
    u = solve_viscous(P, eps)
    rho = solve_adjoint(drift_from_solution(u), eps, x0, 0.0, u.dt, T=P.T)
    return u, rho


def test_lipschitz_certificate_of_constant_solution_is_zero():
    P = ProblemSpec(build_grid((0, 1), 64), 1.0, Q, "constant", terminal_params={"value": 3.0})
    u, rho = certify(P, 1e-2)
    c = lipschitz_certificate(u, rho, 1e-2)
    assert max(c.sup_grad, c.weighted_hess, c.C_L) <= 1e-10


def test_lipschitz_certificate_sees_the_slope_of_a_linear_region():
    P = ProblemSpec(build_grid((0, 1), 256), 0.05, HamiltonianSpec.zero(), "half_parabola")
    u, rho = certify(P, 1e-3, (0.5,))
    assert lipschitz_certificate(u, rho, 1e-3).sup_grad == pytest.approx(1.0, rel=0.01)


def test_certificate_rejects_negative_entries():
    with pytest.raises(InputError):
        LipschitzCertificate(-1.0, 0.0, 0.0, 1e-2)


def test_certificates_are_deterministic():
    P = ProblemSpec(build_grid((0, 1), 64), 1.0, Q, "kink")
    a = lipschitz_certificate(*certify(P, 1e-2), 1e-2)
    b = lipschitz_certificate(*certify(P, 1e-2), 1e-2)
    assert a == b


def test_k_examples():
    assert second_order_K(1, 1.5, 1.0, 0.0, 0.0) == pytest.approx(1.125)
    assert second_order_K(1, 1.5, 1.0, 2.0, 0.0) == pytest.approx(3.125)


def test_k_monotonicity():
    base = second_order_K(1, 1.5, 1.0, 1.0, 1.0)
    assert second_order_K(1, 1.5, 1.0, 2.0, 1.0) > base
    assert second_order_K(1, 1.5, 1.0, 1.0, 2.0) > base
    assert second_order_K(1, 1.5, 2.0, 1.0, 1.0) > base
    assert second_order_K(1, 1.01, 1.0, 1.0, 1.0) > base
    with pytest.raises(InputError):
        second_order_K(1, 2.0, 1.0, 0.0, 0.0)


def test_lower_bound_constant_examples():
    # (1/β)·√(nK/(2(1−β)))·ε^β = (4/3)·√(1.125/0.5)·1e-3 = 2e-3
    assert lower_bound_constant(0.75, 1, 1.125, 0.0, 1e-4) == pytest.approx(2e-3, rel=1e-12)
    assert lower_bound_constant(0.75, 1, 0.0, 0.0, 0.3) == 0.0
    assert lower_bound_constant(0.75, 1, 0.0, 1.0, 1e-2) == pytest.approx(1e-2)
    with pytest.raises(InputError):
        lower_bound_constant(0.5, 1, 1.0, 1.0, 1e-2)


def test_one_sided_sup_examples():
    g = build_grid((0, 1), 16)
    u = ScalarField(g, np.sin(g.centers[0]))
    assert one_sided_sup(u, u) == (0.0, 0.0)
    pos, neg = one_sided_sup(ScalarField(g, u.values + 0.3), u)
    assert pos == pytest.approx(0.3) and neg == 0.0


def test_laplacian_bound_with_m0_one():
    P = ProblemSpec(build_grid((0, 1), 128), 1.0, Q, "half_parabola")
    u = solve_viscous(P, 1e-2)
    measured, bound, ok = delta_u_plus_bound(u, P.M0, P.c_f_integral())
    assert bound == 1.0 and measured <= 1.05 and ok


def test_laplacian_bound_with_cos_source():
    P = ProblemSpec(build_grid((0, 1), 128), 1.0, Q, "half_parabola", "cos_source")
    u = solve_viscous(P, 1e-2)
    measured, bound, ok = delta_u_plus_bound(u, P.M0, P.c_f_integral())
    assert bound == pytest.approx(1.0 + math.pi**2 / 2)
    assert measured <= 1.05 * bound and ok


def test_laplacian_bound_refuses_uncertified_data():
    # a − x²/2 has ∂_ν u_T = −1 on the right wall; the Neumann layer makes Δu large there
    P = ProblemSpec(build_grid((0, 1), 128), 1.0, Q, "concave_quadratic")
    u = solve_viscous(P, 1e-2)
    with pytest.raises(HypothesisError, match="semi_superharmonic_terminal"):
        delta_u_plus_bound(u, P.M0, P.c_f_integral())
    measured, _, ok = delta_u_plus_bound(u, P.M0, P.c_f_integral(), check_hypotheses=False)
    assert measured > 1.0 and not ok


def test_weighted_second_order_below_k(certified_problem):
    P = certified_problem
    u, rho = certify(P, 1e-3, (0.3,))
    cert = weighted_second_order(u, rho, 1e-3, 1.5, 0.0, P.M0, P.c_f_sup())
    assert cert.K == pytest.approx(second_order_K(1, 1.5, 1.0, 0.0, math.pi**2))
    assert cert.passed and cert.measured <= cert.K
    with pytest.raises(InputError):
        weighted_second_order(u, rho, 1e-3, 2.5, 0.0, P.M0, P.c_f_sup())


def test_weighted_second_order_needs_quadratic_h():
    P = ProblemSpec(build_grid((0, 1), 64), 1.0, HamiltonianSpec.power(3.0), "constant", "cos_source")
    u, rho = certify(P, 1e-2)
    with pytest.raises(HypothesisError, match="quadratic"):
        weighted_second_order(u, rho, 1e-2, 1.5, 0.0, 0.0, 1.0)


def test_duality_residual_of_constant_problem_is_zero():
    P = ProblemSpec(build_grid((0, 1), 64), 1.0, Q, "constant", terminal_params={"value": 5.0})
    assert duality_residual(P, 1e-2, 2.5e-3, (0.3,), 0.0) <= 1e-12


def test_duality_residual_heat_case():
    P = ProblemSpec(build_grid((0, 1), 256), 1.0, HamiltonianSpec.zero(), "kink")
    assert duality_residual(P, 1e-2, 2.5e-3, (0.3,), 0.0) <= 0.05
