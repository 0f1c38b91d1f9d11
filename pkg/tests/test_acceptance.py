"""The ten acceptance criteria at their stated tolerances.

Each test records a one-line verdict that is printed in the terminal
summary, then asserts it.  Run alone with ``pytest -m acceptance``.
"""

import time

import numpy as np
import pytest

from conftest import eoc
from hjlab import HamiltonianSpec, ProblemSpec, build_grid, solve_viscous, stable_dt
from hjlab.errors import InconclusiveResolution
from hjlab.estimates import delta_u_plus_bound, duality_residual, weighted_second_order
from hjlab.fp_adjoint import Drift, backward_step, drift_from_solution, face_velocities, fp_step, solve_adjoint
from hjlab.grid import ScalarField, bochner_residual, boundary_normal_difference, central_gradient
from hjlab.rate_lab import SweepPlan, run_sweep

pytestmark = pytest.mark.acceptance

Q = HamiltonianSpec.quadratic()
Z = HamiltonianSpec.zero()
ONE_SIDED_EPS = (1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3)
CERT_EPS = (1e-2, 1e-3, 1e-4)


def sweep(plan):
    try:
        return run_sweep(plan)
    except InconclusiveResolution as exc:
        return exc.report


def drifts(grid):
    """Ten drifts: six closed-form fields and four ``−D_pH(Du_ε)`` from solves."""
    out = [
        Drift.constant(grid, 0.0),
        Drift.constant(grid, 1.0),
        Drift.constant(grid, -1.0),
        Drift.from_function(grid, lambda x, t: x - 0.5, "outward"),
        Drift.from_function(grid, lambda x, t: 0.5 - x, "inward"),
        Drift.from_function(grid, lambda x, t: 0.8 * np.sin(2 * np.pi * x) * np.cos(3 * t), "oscillating"),
    ]
    for H, terminal, source, eps in ((Q, "kink", "zero", 1e-2), (Q, "kink", "zero", 1e-4),
                                     (Q, "constant", "cos_source", 1e-3),
                                     (HamiltonianSpec.power(3.0), "tent", "zero", 1e-3)):
        u = solve_viscous(ProblemSpec(grid, 1.0, H, terminal, source), eps)
        out.append(drift_from_solution(u))
    return out


@pytest.fixture(scope="module")
def density_runs():
    grid = build_grid((0, 1), 512)
    t0 = time.perf_counter()
    runs = []
    for d in drifts(grid):
        bmax = max(float(np.max(np.abs(d.sample(t)))) for t in (0.0, 0.5, 1.0))
        dt = min(2e-3, 0.4 * grid.h[0] / max(bmax, 1e-12))
        runs.append(solve_adjoint(d, 1e-3, (0.3,), 0.0, dt))
    return runs, time.perf_counter() - t0


def test_criterion_01_mass(density_runs, record):
    runs, seconds = density_runs
    worst = max(float(np.max(np.abs(r.mass_ledger - 1.0))) for r in runs)
    ok = len(runs) == 10 and worst <= 1e-12 and seconds < 10
    assert record(1, ok, f"mass: max |m(t)-1| = {worst:.1e} over {len(runs)} drifts, {seconds:.1f} s")


def test_criterion_02_positivity(density_runs, record):
    runs, _ = density_runs
    low = min(float(r.min_ledger.min()) for r in runs)
    assert record(2, low >= -1e-14, f"positivity: min rho = {low:.1e}")


def test_criterion_03_heat_baseline(record):
    t0 = time.perf_counter()
    P = ProblemSpec(build_grid((0, 1), 1024), 1.0, Z, "kink")
    rep = run_sweep(SweepPlan(P, tuple(np.logspace(-2, -4, 5)), kind="heat_baseline"))
    s = time.perf_counter() - t0
    p, C = rep.fits["sup"]["exponent"], rep.fits["sup"]["constant"]
    ok = 0.45 <= p <= 0.60 and rep.criteria["bound_every_eps"] and s < 30
    assert record(3, ok, f"heat baseline: exponent {p:.3f}, C = {C:.3f}, {s:.1f} s")


def test_criterion_04_two_sided_bound(record):
    t0 = time.perf_counter()
    P = ProblemSpec(build_grid((0, 1), 2048), 1.0, Q, "kink")
    rep = sweep(SweepPlan(P, (1e-1, 5e-2, 2.5e-2, 1.25e-2)))
    s = time.perf_counter() - t0
    cl = rep.column("C_L")
    spread = (cl.max() - cl.min()) / cl.max()
    ratio = max(rep.column("sup_error") / rep.column("bound_upper"))
    ok = rep.status == "pass" and rep.criteria["bound_every_eps"] and spread <= 0.10 and s < 120
    assert record(4, ok, f"two-sided: max error/bound = {ratio:.3f}, C_L spread {100 * spread:.1f}%, {s:.0f} s")


@pytest.fixture(scope="module")
def one_sided_report():
    P = ProblemSpec(build_grid((0, 1), 1024), 1.0, Q, "constant", "cos_source")
    return sweep(SweepPlan(P, ONE_SIDED_EPS, kind="one_sided"))


def test_criterion_05_upper_one_sided(one_sided_report, record):
    rep = one_sided_report
    p = rep.fits["pos"]["exponent"]
    ratio = max(rep.column("pos_error") / rep.column("bound_upper"))
    ok = rep.criteria["upper_bound_every_eps"] and p is not None and p >= 0.9
    assert record(5, ok, f"upper one-sided: pos exponent {p:.3f}, max error/bound = {ratio:.3f}")


def test_criterion_06_lower_one_sided(one_sided_report, record):
    rep = one_sided_report
    p = rep.fits["neg"]["exponent"]
    ratio = max(rep.column("neg_error") / rep.column("bound_lower"))
    ok = rep.criteria["lower_bound_every_eps"] and p is not None and p >= 0.5
    assert record(6, ok, f"lower one-sided: neg exponent {p:.3f}, max error/bound = {ratio:.3f}")


def test_criterion_07_second_order(record):
    P = ProblemSpec(build_grid((0, 1), 512), 1.0, Q, "constant", "cos_source")
    worst, K = 0.0, None
    for eps in CERT_EPS:
        u = solve_viscous(P, eps)
        drift = drift_from_solution(u)
        for x0 in (0.25, 0.5, 0.75):
            rho = solve_adjoint(drift, eps, (x0,), 0.0, u.dt, T=P.T)
            c = weighted_second_order(u, rho, eps, 1.5, 0.0, P.M0, P.c_f_sup())
            worst, K = max(worst, c.measured), c.K
    ok = worst <= 1.05 * K
    assert record(7, ok, f"second order: max integral {worst:.3f} against K = {K:.3f}")


def test_criterion_08_laplacian_bound(record):
    worst, bound, ok = 0.0, None, True
    for gamma in (1.5, 2.0, 3.0):
        P = ProblemSpec(build_grid((0, 1), 512), 1.0, HamiltonianSpec.power(gamma), "constant", "cos_source")
        for eps in CERT_EPS:
            m, bound, _ = delta_u_plus_bound(solve_viscous(P, eps), P.M0, P.c_f_integral())
            worst = max(worst, m)
            ok &= m <= 1.05 * bound
    assert record(8, ok, f"Laplacian: max (Lap u)+ = {worst:.3f} against {bound:.3f}")


def test_criterion_09_duality(record):
    lines, ok = [], True
    for H, terminal in ((Z, "kink"), (Q, "cos")):
        res = []
        for n, eta in ((256, 2.5e-3), (512, 1.25e-3)):
            P = ProblemSpec(build_grid((0, 1), n), 1.0, H, terminal)
            res.append(duality_residual(P, 1e-2, eta, (0.3,), 0.0, stable_dt(P)))
        ok &= res[0] <= 0.05 and res[0] / res[1] >= 1.5
        lines.append(f"{H.name}/{terminal} {res[0]:.1e} -> {res[1]:.1e}")
    assert record(9, ok, "duality: " + "; ".join(lines))


def _property_checks():
    checks = {}
    g = build_grid((0, 1), 64)
    # comparison with a common step
    probs = [ProblemSpec(g, 1.0, Q, "constant", terminal_params={"value": -0.1}),
             ProblemSpec(g, 1.0, Q, "kink"), ProblemSpec(g, 1.0, Q, "kink", "unit")]
    dt = min(stable_dt(p) for p in probs)
    lo, mid, hi = (solve_viscous(p, 1e-3, dt).values for p in probs)
    checks["comparison"] = bool(np.all(lo <= mid + 1e-10) and np.all(mid <= hi + 1e-10))
    const = solve_viscous(ProblemSpec(g, 1.0, Q, "constant", terminal_params={"value": 5.0}), 1e-4).values
    checks["constants"] = float(np.max(np.abs(const - 5.0))) <= 1e-10
    sym = solve_viscous(ProblemSpec(build_grid((0, 1), 100), 1.0, Q, "kink", "unit"), 1e-3).values
    checks["symmetry"] = float(np.max(np.abs(sym - sym[:, ::-1]))) <= 1e-12
    sizes = [32, 64, 128, 256]
    errs = [bochner_residual(ScalarField(build_grid((0, 1), n), np.cos(np.pi * build_grid((0, 1), n).centers[0])))
            for n in sizes]
    checks["bochner_order"] = bool(np.min(eoc(errs, sizes)) >= 1.8)
    rng = np.random.default_rng(7)
    g16 = build_grid((0, 1), 16)
    faces = [face_velocities(g16, rng.uniform(-1, 1, (16, 1))) for _ in range(5)]
    rho, phi = rng.random(16), rng.normal(size=16)
    fwd, back = rho, phi
    for f in faces:
        fwd = fp_step(fwd, f, g16, 0.03, 0.2 / 16)
    for f in reversed(faces):
        back = backward_step(back, f, g16, 0.03, 0.2 / 16)
    checks["adjointness"] = abs(np.dot(fwd, phi) - np.dot(rho, back)) <= 1e-12
    g256 = build_grid((0, 1), 256)
    worst = -np.inf
    for terminal, source in (("kink", "zero"), ("cos", "zero"), ("constant", "cos_source")):
        u = solve_viscous(ProblemSpec(g256, 1.0, Q, terminal, source), 1e-2, save_every=64)
        for v in u.values[1:]:
            w = np.sum(central_gradient(v, g256.h) ** 2, axis=-1)
            worst = max(worst, float(np.max(boundary_normal_difference(ScalarField(g256, w)))))
    checks["boundary_inequality"] = worst <= 1e-6
    eps, T, errs = 0.05, 0.5, []
    for n in sizes:
        P = ProblemSpec(build_grid((0, 1), n), T, Q, "cos", "mms_cos", {"amplitude": 1.0}, {"eps": eps})
        u = solve_viscous(P, eps)
        exact = np.cos(np.pi * P.grid.centers[0])[None, :] * (1 + T - u.times[:, None])
        errs.append(float(np.max(np.abs(u.values - exact))))
    checks["manufactured_order"] = bool(np.min(eoc(errs, sizes)) >= 0.9)
    return checks


def test_criterion_10_property_suites(record):
    checks = _property_checks()
    failed = [k for k, v in checks.items() if not v]
    detail = f"properties: {len(checks) - len(failed)}/{len(checks)} green" + (f", failed {failed}" if failed else "")
    assert record(10, not failed, detail)
