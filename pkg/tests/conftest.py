import numpy as np
import pytest

from hjlab import HamiltonianSpec, ProblemSpec, build_grid


def eoc(errors, sizes):
    """Observed orders between successive refinements."""
    e = np.asarray(errors, dtype=float)
    n = np.asarray(sizes, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(n[1:] / n[:-1])


@pytest.fixture
def unit_grid():
    return build_grid((0.0, 1.0), 64)


@pytest.fixture
def kink_problem():
    return ProblemSpec(build_grid((0.0, 1.0), 128), 1.0, HamiltonianSpec.quadratic(), "kink")


@pytest.fixture
def certified_problem():
    """Quadratic H, u_T ≡ 0 and f = −t·cos(πx): every one-sided hypothesis holds."""
    return ProblemSpec(build_grid((0.0, 1.0), 128), 1.0, HamiltonianSpec.quadratic(), "constant", "cos_source")


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """Store the one-line verdict of an acceptance criterion for the summary."""

    def _record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
