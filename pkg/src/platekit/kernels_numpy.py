"""Vectorized numpy implementations of the hot kernels.

This is the fallback path selected by ``PLATEKIT_NO_NUMBA=1`` (see
``accel``). Signatures, layouts and tie-break rules match
``kernels_numba`` exactly; the two paths agree to floating-point
round-off and the benchmark in ``benchmarks/`` compares them.

Layout conventions shared by both paths:
  feature maps   (B, H, W, C) float64, spatial padding already applied
  conv kernels   (Fh, Fw, M, N); depthwise kernels (Fh, Fw, M)
  pool argmax    flat index into the padded (Hp * Wp) plane, per channel
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NEG_INF = float("-inf")


def _windows(xp, fh, fw, sh, sw):
    win = sliding_window_view(xp, (fh, fw), axis=(1, 2))
    return win[:, ::sh, ::sw]  # (B, Ho, Wo, C, Fh, Fw)


def conv2d_fwd(xp, k, sh, sw):
    return np.einsum("bhwmij,ijmn->bhwn", _windows(xp, k.shape[0], k.shape[1], sh, sw),
                     k, optimize=True)


def conv2d_bwd_input(dout, k, sh, sw, hp, wp):
    b, ho, wo, _ = dout.shape
    fh, fw, m, _ = k.shape
    dxp = np.zeros((b, hp, wp, m))
    for i in range(fh):
        for j in range(fw):
            dxp[:, i:i + sh * ho:sh, j:j + sw * wo:sw, :] += \
                np.einsum("bhwn,mn->bhwm", dout, k[i, j])
    return dxp


def conv2d_bwd_kernel(xp, dout, sh, sw, fh, fw):
    return np.einsum("bhwmij,bhwn->ijmn", _windows(xp, fh, fw, sh, sw), dout,
                     optimize=True)


def depthwise_fwd(xp, k, sh, sw):
    return np.einsum("bhwmij,ijm->bhwm", _windows(xp, k.shape[0], k.shape[1], sh, sw),
                     k, optimize=True)


def depthwise_bwd_input(dout, k, sh, sw, hp, wp):
    b, ho, wo, m = dout.shape
    fh, fw, _ = k.shape
    dxp = np.zeros((b, hp, wp, m))
    for i in range(fh):
        for j in range(fw):
            dxp[:, i:i + sh * ho:sh, j:j + sw * wo:sw, :] += dout * k[i, j]
    return dxp


def depthwise_bwd_kernel(xp, dout, sh, sw, fh, fw):
    return np.einsum("bhwmij,bhwm->ijm", _windows(xp, fh, fw, sh, sw), dout,
                     optimize=True)


def maxpool_fwd(xp, wh, ww, sh, sw):
    b, hp, wp, c = xp.shape
    win = _windows(xp, wh, ww, sh, sw)  # (B, Ho, Wo, C, wh, ww)
    ho, wo = win.shape[1], win.shape[2]
    flat = win.reshape(b, ho, wo, c, wh * ww)
    local = flat.argmax(axis=-1)  # first max wins ties, same as the loop path
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    li, lj = local // ww, local % ww
    p = np.arange(ho).reshape(1, ho, 1, 1)
    q = np.arange(wo).reshape(1, 1, wo, 1)
    arg = (p * sh + li) * wp + (q * sw + lj)
    return out, arg.astype(np.int64)


def maxpool_bwd(dout, arg, hp, wp):
    b, ho, wo, c = dout.shape
    dflat = np.zeros((b, hp * wp, c))
    bi = np.arange(b).reshape(b, 1, 1, 1)
    ci = np.arange(c).reshape(1, 1, 1, c)
    np.add.at(dflat, (bi, arg, ci), dout)
    return dflat.reshape(b, hp, wp, c)


def _skip_allowed(ext):
    s = ext.shape[0]
    ok = np.zeros(s, dtype=bool)
    if s > 2:
        blank = ext[0]  # extended sequences always start with blank
        ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return ok


def ctc_forward_backward(logp, ext):
    """Log-space forward/backward over a blank-interleaved label sequence.

    Returns ``(nll, gamma)`` where ``gamma[t, k]`` is the total posterior
    probability of emitting class ``k`` at frame ``t``. The loss gradient
    with respect to pre-softmax logits is ``softmax - gamma``.
    """
    t_len, n_cls = logp.shape
    s_len = ext.shape[0]
    em = logp[:, ext]  # (T, S)
    skip_ok = _skip_allowed(ext)

    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = em[0, 0]
    if s_len > 1:
        alpha[0, 1] = em[0, 1]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        if s_len > 2:
            acc[2:] = np.where(skip_ok[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = em[t] + acc

    nll_tail = alpha[t_len - 1, s_len - 1]
    if s_len > 1:
        nll_tail = np.logaddexp(nll_tail, alpha[t_len - 1, s_len - 2])
    loglike = nll_tail
    if not np.isfinite(loglike):
        return np.inf, np.zeros((t_len, n_cls))

    # beta excludes the frame-t emission so alpha + beta counts it once
    beta = np.full((t_len, s_len), NEG_INF)
    beta[t_len - 1, s_len - 1] = 0.0
    if s_len > 1:
        beta[t_len - 1, s_len - 2] = 0.0
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1] + em[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if s_len > 2:
            acc[:-2] = np.where(skip_ok[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc

    post = np.exp(alpha + beta - loglike)
    gamma = np.zeros((t_len, n_cls))
    np.add.at(gamma, (np.arange(t_len)[:, None], ext[None, :]), post)
    return -loglike, gamma
