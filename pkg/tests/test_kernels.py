"""Both kernel implementations must agree to float64 round-off; the
compiled path is what normally runs, the plain path is the oracle."""

import numpy as np
import pytest

from platekit import kernels_numba, kernels_numpy
from platekit.tensor import make_rng

PAIRS = [
    ("conv2d_fwd", "conv"),
    ("depthwise_fwd", "dw"),
]


def _rand_conv_case(rng):
    b = int(rng.integers(1, 4))
    h = int(rng.integers(4, 9))
    w = int(rng.integers(4, 9))
    ci = int(rng.integers(1, 5))
    co = int(rng.integers(1, 6))
    fh = int(rng.integers(1, min(4, h) + 1))
    fw = int(rng.integers(1, min(4, w) + 1))
    sh = int(rng.integers(1, 3))
    sw = int(rng.integers(1, 3))
    x = rng.normal(size=(b, h, w, ci))
    k = rng.normal(size=(fh, fw, ci, co))
    return x, k, sh, sw


def test_conv2d_paths_agree():
    for seed in range(15):
        rng = make_rng(seed)
        x, k, sh, sw = _rand_conv_case(rng)
        y1 = kernels_numpy.conv2d_fwd(x, k, sh, sw)
        y2 = kernels_numba.conv2d_fwd(x, k, sh, sw)
        assert np.allclose(y1, y2, atol=1e-12)
        d = rng.normal(size=y1.shape)
        g1 = kernels_numpy.conv2d_bwd_kernel(x, d, sh, sw, k.shape[0], k.shape[1])
        g2 = kernels_numba.conv2d_bwd_kernel(x, d, sh, sw, k.shape[0], k.shape[1])
        assert np.allclose(g1, g2, atol=1e-12)
        i1 = kernels_numpy.conv2d_bwd_input(d, k, sh, sw, x.shape[1], x.shape[2])
        i2 = kernels_numba.conv2d_bwd_input(d, k, sh, sw, x.shape[1], x.shape[2])
        assert np.allclose(i1, i2, atol=1e-12)


def test_depthwise_paths_agree():
    for seed in range(15):
        rng = make_rng(100 + seed)
        x, k4, sh, sw = _rand_conv_case(rng)
        k = k4[:, :, :, 0]  # (fh, fw, ch)
        k = np.ascontiguousarray(k[:, :, :x.shape[3]])
        y1 = kernels_numpy.depthwise_fwd(x, k, sh, sw)
        y2 = kernels_numba.depthwise_fwd(x, k, sh, sw)
        assert np.allclose(y1, y2, atol=1e-12)
        d = rng.normal(size=y1.shape)
        g1 = kernels_numpy.depthwise_bwd_kernel(x, d, sh, sw, k.shape[0], k.shape[1])
        g2 = kernels_numba.depthwise_bwd_kernel(x, d, sh, sw, k.shape[0], k.shape[1])
        assert np.allclose(g1, g2, atol=1e-12)
        i1 = kernels_numpy.depthwise_bwd_input(d, k, sh, sw, x.shape[1], x.shape[2])
        i2 = kernels_numba.depthwise_bwd_input(d, k, sh, sw, x.shape[1], x.shape[2])
        assert np.allclose(i1, i2, atol=1e-12)


def test_maxpool_paths_agree_and_back():
    for seed in range(15):
        rng = make_rng(200 + seed)
        b = int(rng.integers(1, 3))
        h = int(rng.integers(4, 9))
        w = int(rng.integers(4, 9))
        c = int(rng.integers(1, 4))
        fh, fw = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        sh, sw = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        x = rng.normal(size=(b, h, w, c))
        y1, a1 = kernels_numpy.maxpool_fwd(x, fh, fw, sh, sw)
        y2, a2 = kernels_numba.maxpool_fwd(x, fh, fw, sh, sw)
        assert np.allclose(y1, y2)
        assert np.array_equal(a1, a2)
        d = rng.normal(size=y1.shape)
        dx1 = kernels_numpy.maxpool_bwd(d, a1, h, w)
        dx2 = kernels_numba.maxpool_bwd(d, a2, h, w)
        assert np.allclose(dx1, dx2)


def test_maxpool_tie_breaks_to_first():
    x = np.zeros((1, 2, 2, 1))
    _, arg = kernels_numpy.maxpool_fwd(x, 2, 2, 2, 2)
    _, arg2 = kernels_numba.maxpool_fwd(x, 2, 2, 2, 2)
    assert arg[0, 0, 0, 0] == 0
    assert arg2[0, 0, 0, 0] == 0


def _direct_ctc_nll(logp, ext):
    """Plain-python forward recursion on the blank-interleaved target."""
    t_len, _ = logp.shape
    s = len(ext)
    alpha = np.full((t_len, s), -np.inf)
    alpha[0, 0] = logp[0, ext[0]]
    if s > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, t_len):
        for j in range(s):
            best = alpha[t - 1, j]
            if j > 0:
                best = np.logaddexp(best, alpha[t - 1, j - 1])
            if j > 1 and ext[j] != ext[j - 2]:
                best = np.logaddexp(best, alpha[t - 1, j - 2])
            alpha[t, j] = best + logp[t, ext[j]]
    tail = alpha[-1, -1]
    if s > 1:
        tail = np.logaddexp(tail, alpha[-1, -2])
    return -tail


def test_ctc_forward_backward_paths_agree():
    for seed in range(12):
        rng = make_rng(300 + seed)
        t_len = int(rng.integers(3, 8))
        n_cls = int(rng.integers(3, 6))
        u = int(rng.integers(1, 3))
        probs = rng.random((t_len, n_cls)) + 1e-3
        probs /= probs.sum(axis=1, keepdims=True)
        logp = np.log(probs)
        blank = n_cls - 1
        target = rng.integers(0, blank, size=u)
        ext = np.empty(2 * u + 1, dtype=np.int64)
        ext[0::2] = blank
        ext[1::2] = target
        n1, g1 = kernels_numpy.ctc_forward_backward(logp, ext)
        n2, g2 = kernels_numba.ctc_forward_backward(logp, ext)
        assert np.isclose(n1, n2, rtol=1e-12)
        assert np.allclose(g1, g2, atol=1e-12)
        assert np.isclose(n1, _direct_ctc_nll(logp, ext), rtol=1e-10)
