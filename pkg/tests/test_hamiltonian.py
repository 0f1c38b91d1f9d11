import numpy as np
import pytest

from hjlab.errors import InputError
from hjlab.hamiltonian import HamiltonianSpec, evaluate, grad, lax_friedrichs, partial_sup

Q = HamiltonianSpec.quadratic()


def test_eval_examples():
    assert evaluate(Q, [3.0, 4.0]) == 25.0
    assert evaluate(HamiltonianSpec.power(3), [2.0]) == pytest.approx(8.0)
    assert evaluate(HamiltonianSpec.power(3, delta=1.0), [0.0]) == pytest.approx(1.0)


def test_grad_examples():
    np.testing.assert_allclose(grad(Q, [3.0, 4.0]), [6.0, 8.0])
    np.testing.assert_allclose(grad(HamiltonianSpec.power(3), [2.0]), [12.0])


def test_grad_at_origin_selects_zero_subgradient():
    np.testing.assert_array_equal(grad(HamiltonianSpec.power(1.5), [0.0, 0.0]), [0.0, 0.0])


@pytest.mark.parametrize("spec", [Q, HamiltonianSpec.power(1.5, 0.1), HamiltonianSpec.power(3, 0.5),
                                  HamiltonianSpec.power(2.5, 1e-3)])
@pytest.mark.parametrize("dim", [1, 2])
def test_grad_matches_central_differences(spec, dim):
    rng = np.random.default_rng(11)
    p = rng.normal(size=(100, dim))
    p *= rng.random((100, 1)) / np.linalg.norm(p, axis=1, keepdims=True)
    h = 1e-5
    fd = np.stack([(evaluate(spec, p + h * e) - evaluate(spec, p - h * e)) / (2 * h) for e in np.eye(dim)], axis=-1)
    assert np.max(np.abs(grad(spec, p) - fd)) <= 1e-6


def test_quadratic_equals_power_two():
    p = np.random.default_rng(0).normal(size=(50, 2))
    P2 = HamiltonianSpec.power(2.0)
    np.testing.assert_allclose(evaluate(Q, p), evaluate(P2, p), rtol=1e-14)
    np.testing.assert_allclose(grad(Q, p), grad(P2, p), rtol=1e-14)


def test_lax_friedrichs_examples():
    assert lax_friedrichs(Q, [0.0], [2.0], [4.0]) == -3.0
    p = np.random.default_rng(2).normal(size=(20, 2))
    for spec in (Q, HamiltonianSpec.power(3, 0.2)):
        np.testing.assert_array_equal(lax_friedrichs(spec, p, p, [5.0, 1.0]), evaluate(spec, p))


def test_lax_friedrichs_is_monotone_under_the_sigma_condition():
    rng = np.random.default_rng(5)
    for spec in (Q, HamiltonianSpec.power(1.5, 1e-8), HamiltonianSpec.power(3.0)):
        pm = rng.uniform(-1, 1, size=(1000, 2))
        pp = rng.uniform(-1, 1, size=(1000, 2))
        sig = np.max(np.stack([partial_sup(spec, pm[i], pp[i]) for i in range(1000)]), axis=0) * 1.1
        step = 1e-3 * rng.random((1000, 2))
        base = lax_friedrichs(spec, pm, pp, sig)
        assert np.all(lax_friedrichs(spec, pm, pp + step, sig) <= base + 1e-13)
        assert np.all(lax_friedrichs(spec, pm + step, pp, sig) >= base - 1e-13)


def test_input_errors():
    with pytest.raises(InputError):
        lax_friedrichs(Q, [0.0], [1.0], [-1.0])
    with pytest.raises(InputError):
        evaluate(Q, [np.nan])
    with pytest.raises(InputError):
        HamiltonianSpec.power(1.0)
    with pytest.raises(InputError):
        HamiltonianSpec.power(2.0, delta=-1)
    with pytest.raises(InputError, match="choose from"):
        HamiltonianSpec("cubic")


def test_custom_table_is_piecewise_linear():
    spec = HamiltonianSpec.custom([-1.0, 0.0, 1.0], [1.0, 0.0, 2.0])
    np.testing.assert_allclose(evaluate(spec, [[-0.5], [0.5], [2.0]]), [0.5, 1.0, 4.0])
    np.testing.assert_allclose(grad(spec, [[-0.5], [0.5]]), [[-1.0], [2.0]])
