import numpy as np
import pytest

from conftest import eoc
from hjlab import HamiltonianSpec, ProblemSpec, build_grid, solve_inviscid, solve_viscous, stable_dt
from hjlab.errors import InputError, StabilityError
from hjlab.grid import ScalarField, boundary_normal_difference, central_gradient
from hjlab.hj_solver import SpaceTimeField, epsilon_derivative
from hjlab.rate_lab import restrict

Q = HamiltonianSpec.quadratic()


def problem(n=64, H=Q, terminal="kink", source="zero", T=1.0, tp=None, sp=None, extents=(0.0, 1.0)):
    return ProblemSpec(build_grid(extents, n), T, H, terminal, source, tp or {}, sp or {})


@pytest.mark.parametrize("eps", [1e-1, 1e-4, 1e-8])
def test_constant_terminal_is_preserved(eps):
    u = solve_viscous(problem(terminal="constant", tp={"value": 5.0}), eps)
    assert np.max(np.abs(u.values - 5.0)) <= 1e-10


def test_inviscid_unit_source_gives_time_to_go():
    u = solve_inviscid(problem(terminal="constant", source="unit"))
    expected = u.T - u.times
    assert np.max(np.abs(u.values - expected[:, None])) <= 1e-10


@pytest.mark.parametrize("dim", [1, 2])
def test_constant_data_follow_the_ode(dim):
    H = HamiltonianSpec.power(3.0, delta=0.25)
    ext = (0.0, 1.0) if dim == 1 else [(0.0, 1.0), (0.0, 2.0)]
    n = 32 if dim == 1 else (16, 16)
    u = solve_viscous(problem(n=n, H=H, terminal="constant", source="unit", tp={"value": 2.0}, extents=ext), 1e-2)
    h0 = 0.25**1.5
    expected = 2.0 + (1.0 - h0) * (u.T - u.times)
    assert np.max(np.abs(u.values.reshape(len(u), -1) - expected[:, None])) <= 1e-10


def test_manufactured_solution_converges_at_first_order():
    eps, T = 0.05, 0.5
    errs, sizes = [], [32, 64, 128, 256]
    for n in sizes:
        P = problem(n, terminal="cos", source="mms_cos", T=T, tp={"amplitude": 1.0}, sp={"eps": eps})
        u = solve_viscous(P, eps)
        x = P.grid.centers[0]
        exact = np.cos(np.pi * x)[None, :] * (1 + T - u.times[:, None])
        errs.append(np.max(np.abs(u.values - exact)))
    assert np.min(eoc(errs, sizes)) >= 0.9


def test_inviscid_self_refinement():
    T = 0.25
    fine = solve_inviscid(problem(4096, terminal="tent", T=T)).values[-1]
    errs, sizes = [], [128, 256, 512]
    for n in sizes:
        coarse = solve_inviscid(problem(n, terminal="tent", T=T)).values[-1]
        errs.append(np.max(np.abs(coarse - restrict(fine, build_grid((0, 1), n)))))
    assert np.min(eoc(errs, sizes)) >= 0.8


def test_numpy_and_compiled_backends_agree():
    for H in (Q, HamiltonianSpec.power(1.5, 1e-8), HamiltonianSpec.power(3.0), HamiltonianSpec.zero()):
        P = problem(96, H=H, terminal="kink", source="cos_source")
        a = solve_viscous(P, 1e-3)
        b = solve_viscous(P, 1e-3, backend="numpy")
        assert np.max(np.abs(a.values - b.values)) <= 1e-12


def test_comparison_principle():
    probs = [problem(terminal="constant", tp={"value": -0.1}), problem(terminal="kink"),
             problem(terminal="kink", source="unit")]
    dt = min(stable_dt(p) for p in probs)
    lo, mid, hi = (solve_viscous(p, 1e-3, dt) for p in probs)
    assert np.all(lo.values <= mid.values + 1e-10)
    assert np.all(mid.values <= hi.values + 1e-10)


def test_symmetric_data_give_symmetric_solutions():
    u = solve_viscous(problem(100, terminal="kink", source="unit"), 1e-3)
    assert np.max(np.abs(u.values - u.values[:, ::-1])) <= 1e-12
    g = build_grid([(0, 1), (0, 1)], (24, 24))
    v = solve_viscous(ProblemSpec(g, 0.5, Q, "radial_bump"), 1e-3)
    assert np.max(np.abs(v.values - np.swapaxes(v.values, 1, 2))) <= 1e-12


def test_maximum_principle_for_quadratic_h():
    P = problem(128, terminal="kink")
    uT = P.terminal_values()
    for eps in (1e-1, 1e-3, 1e-6):
        u = solve_viscous(P, eps)
        assert uT.min() - 1e-8 <= u.values.min() and u.values.max() <= uT.max() + 1e-8


def test_viscous_approaches_inviscid_for_tiny_eps():
    P = problem(512, terminal="kink")
    assert np.max(np.abs(solve_viscous(P, 1e-7).values - solve_inviscid(P).values)) <= 2e-3


def test_explicit_step_violating_cfl_is_rejected():
    P = problem(64)
    with pytest.raises(StabilityError):
        solve_viscous(P, 1e-3, dt=8 * stable_dt(P))


def test_input_validation():
    P = problem(32)
    with pytest.raises(InputError):
        solve_viscous(P, 0.0)
    with pytest.raises(InputError):
        solve_viscous(P, 1e-2, backend="fortran")
    with pytest.raises(InputError):
        ProblemSpec(P.grid, -1.0, Q)
    with pytest.raises(InputError):
        SpaceTimeField(P.grid, np.array([1.0, 1.0]), np.zeros((2, 32)), 0.1)


def test_trajectory_orientation():
    u = solve_viscous(problem(32), 1e-2, save_every=5)
    assert u.times[0] == 1.0 and u.times[-1] == 0.0
    assert np.all(np.diff(u.times) < 0)
    np.testing.assert_array_equal(u.values[0], u.problem.terminal_values())


def test_epsilon_derivative_of_constant_problem_vanishes():
    v = epsilon_derivative(problem(32, terminal="constant", tp={"value": 5.0}), 1e-2, 5e-3)
    assert np.max(np.abs(v.values)) <= 1e-9


def test_epsilon_derivative_terminal_slice_is_zero():
    v = epsilon_derivative(problem(64, terminal="kink", source="cos_source"), 1e-2, 2.5e-3)
    assert np.all(v.values[0] == 0)


def test_epsilon_derivative_heat_case():
    P = problem(128, H=HamiltonianSpec.zero())
    eps = 1e-2
    v = epsilon_derivative(P, eps, eps / 4)
    u0 = solve_viscous(P, eps)
    u1 = solve_viscous(P, eps + eps / 4, u0.info["step"])
    np.testing.assert_allclose(v.values, (u1.values - u0.values) / (eps / 4), atol=1e-12)
    w = epsilon_derivative(P, eps, eps / 8)
    change = np.max(np.abs(w.values[-1] - v.values[-1])) / np.max(np.abs(v.values[-1]))
    assert change <= 0.10


def test_epsilon_derivative_rejects_large_eta():
    with pytest.raises(InputError):
        epsilon_derivative(problem(32), 1e-2, 1e-2)


@pytest.mark.parametrize("terminal,source", [("kink", "zero"), ("cos", "zero"), ("constant", "cos_source")])
def test_squared_gradient_does_not_grow_towards_the_wall(terminal, source):
    P = problem(256, terminal=terminal, source=source)
    for eps in (1e-1, 1e-2):
        u = solve_viscous(P, eps, save_every=64)
        for v in u.values[1:]:
            w = np.sum(central_gradient(v, P.grid.h) ** 2, axis=-1)
            assert np.max(boundary_normal_difference(ScalarField(P.grid, w))) <= 1e-6
