import numpy as np

from platekit.gradcheck import finite_diff_check, numeric_grad, rel_error
from platekit.tensor import make_rng


def test_numeric_grad_on_quadratic():
    rng = make_rng(0)
    a = rng.normal(size=(4, 4))
    f = lambda x: float(0.5 * x @ a @ a.T @ x)
    x = rng.normal(size=4)
    g = numeric_grad(f, x)
    assert np.allclose(g, a @ a.T @ x, atol=1e-6)


def test_numeric_grad_leaves_input_unchanged():
    x = np.ones(3)
    numeric_grad(lambda v: float((v ** 2).sum()), x)
    assert np.array_equal(x, np.ones(3))


def test_rel_error_uses_analytic_denominator():
    # denominator is max(1, |analytic|), so claiming 6.1 against a true
    # 6.0 scores 0.1/6.1
    assert np.isclose(rel_error(analytic=np.array([6.1]),
                                numeric=np.array([6.0])), 0.1 / 6.1)
    # below magnitude 1 the denominator clamps to 1
    assert np.isclose(rel_error(np.array([0.2]), np.array([0.3])), 0.1)


def test_known_wrong_gradient_is_flagged():
    """Quadratic with a deliberately wrong gradient: the reported error
    must land around 1.6e-2, far above the 1e-4 acceptance line."""
    x = np.array([3.0])
    f = lambda v: float(v[0] ** 2)
    err = finite_diff_check(f, x, np.array([6.1]))
    assert 0.015 < err < 0.018
    assert finite_diff_check(f, x, np.array([6.0])) < 1e-8


def test_finite_diff_check_passes_for_correct_gradients():
    rng = make_rng(5)
    for seed in range(10):
        w = make_rng(seed).normal(size=(3, 3))
        x = rng.normal(size=3)
        f = lambda v: float(np.sum(np.tanh(w @ v)))
        analytic = w.T @ (1 - np.tanh(w @ x) ** 2)
        assert finite_diff_check(f, x, analytic) < 1e-7
