"""Central-difference gradient verification used by the test suite."""

import numpy as np


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar-valued f at x, element by element.

    f must not mutate its argument; x is restored after probing."""
    g = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        hi = f(x)
        x[idx] = orig - eps
        lo = f(x)
        x[idx] = orig
        g[idx] = (hi - lo) / (2.0 * eps)
        it.iternext()
    return g


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst elementwise |numeric - analytic| / max(1, |analytic|).

    The unit floor makes near-zero entries compare absolutely instead of
    amplifying finite-difference noise."""
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    denom = np.maximum(1.0, np.abs(a))
    return float(np.max(np.abs(n - a) / denom))


def finite_diff_check(f, x: np.ndarray, analytic: np.ndarray,
                      eps: float = 1e-5) -> float:
    """Relative disagreement between an analytic gradient and central
    differences; small (around 1e-7 for smooth f) when the analytic
    gradient is right, order 1e-2 or worse when it is wrong."""
    return rel_error(analytic, numeric_grad(f, x, eps))
