"""Numba-compiled twins of the kernels in ``kernels_numpy``.

Every function here matches its numpy twin in signature, layout and
tie-break behaviour; only the execution strategy differs (explicit
nested loops under ``@njit``). Importing this module requires numba;
``kernels`` only does so when the accelerated path is selected.
"""

import numpy as np
from numba import njit

NEG_INF = float("-inf")


@njit(cache=True)
def conv2d_fwd(xp, k, sh, sw):
    b, hp, wp, m = xp.shape
    fh, fw, _, n = k.shape
    ho = (hp - fh) // sh + 1
    wo = (wp - fw) // sw + 1
    out = np.zeros((b, ho, wo, n))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for i in range(fh):
                    for j in range(fw):
                        for c in range(m):
                            x = xp[bi, p * sh + i, q * sw + j, c]
                            for o in range(n):
                                out[bi, p, q, o] += x * k[i, j, c, o]
    return out


@njit(cache=True)
def conv2d_bwd_input(dout, k, sh, sw, hp, wp):
    b, ho, wo, n = dout.shape
    fh, fw, m, _ = k.shape
    dxp = np.zeros((b, hp, wp, m))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                g = dout[bi, p, q]
                for i in range(fh):
                    for j in range(fw):
                        for c in range(m):
                            acc = 0.0
                            for o in range(n):
                                acc += k[i, j, c, o] * g[o]
                            dxp[bi, p * sh + i, q * sw + j, c] += acc
    return dxp


@njit(cache=True)
def conv2d_bwd_kernel(xp, dout, sh, sw, fh, fw):
    b, ho, wo, n = dout.shape
    m = xp.shape[3]
    dk = np.zeros((fh, fw, m, n))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for i in range(fh):
                    for j in range(fw):
                        for c in range(m):
                            x = xp[bi, p * sh + i, q * sw + j, c]
                            for o in range(n):
                                dk[i, j, c, o] += x * dout[bi, p, q, o]
    return dk


@njit(cache=True)
def depthwise_fwd(xp, k, sh, sw):
    b, hp, wp, m = xp.shape
    fh, fw, _ = k.shape
    ho = (hp - fh) // sh + 1
    wo = (wp - fw) // sw + 1
    out = np.zeros((b, ho, wo, m))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for i in range(fh):
                    for j in range(fw):
                        for c in range(m):
                            out[bi, p, q, c] += xp[bi, p * sh + i, q * sw + j, c] * k[i, j, c]
    return out


@njit(cache=True)
def depthwise_bwd_input(dout, k, sh, sw, hp, wp):
    b, ho, wo, m = dout.shape
    fh, fw, _ = k.shape
    dxp = np.zeros((b, hp, wp, m))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for c in range(m):
                    g = dout[bi, p, q, c]
                    for i in range(fh):
                        for j in range(fw):
                            dxp[bi, p * sh + i, q * sw + j, c] += g * k[i, j, c]
    return dxp


@njit(cache=True)
def depthwise_bwd_kernel(xp, dout, sh, sw, fh, fw):
    b, ho, wo, m = dout.shape
    dk = np.zeros((fh, fw, m))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for i in range(fh):
                    for j in range(fw):
                        for c in range(m):
                            dk[i, j, c] += dout[bi, p, q, c] * xp[bi, p * sh + i, q * sw + j, c]
    return dk


@njit(cache=True)
def maxpool_fwd(xp, wh, ww, sh, sw):
    b, hp, wp, c = xp.shape
    ho = (hp - wh) // sh + 1
    wo = (wp - ww) // sw + 1
    out = np.empty((b, ho, wo, c))
    arg = np.empty((b, ho, wo, c), dtype=np.int64)
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for ch in range(c):
                    best = xp[bi, p * sh, q * sw, ch]
                    bidx = (p * sh) * wp + q * sw
                    for i in range(wh):
                        for j in range(ww):
                            v = xp[bi, p * sh + i, q * sw + j, ch]
                            if v > best:  # strict: first max wins ties
                                best = v
                                bidx = (p * sh + i) * wp + (q * sw + j)
                    out[bi, p, q, ch] = best
                    arg[bi, p, q, ch] = bidx
    return out, arg


@njit(cache=True)
def maxpool_bwd(dout, arg, hp, wp):
    b, ho, wo, c = dout.shape
    dxp = np.zeros((b, hp, wp, c))
    for bi in range(b):
        for p in range(ho):
            for q in range(wo):
                for ch in range(c):
                    flat = arg[bi, p, q, ch]
                    dxp[bi, flat // wp, flat % wp, ch] += dout[bi, p, q, ch]
    return dxp


@njit(cache=True)
def _logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + np.log1p(np.exp(b - a))


@njit(cache=True)
def ctc_forward_backward(logp, ext):
    t_len, n_cls = logp.shape
    s_len = ext.shape[0]
    blank = ext[0]

    skip_ok = np.zeros(s_len, dtype=np.bool_)
    for s in range(2, s_len):
        skip_ok[s] = ext[s] != blank and ext[s] != ext[s - 2]

    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, t_len):
        for s in range(s_len):
            a = alpha[t - 1, s]
            if s >= 1:
                a = _logaddexp(a, alpha[t - 1, s - 1])
            if s >= 2 and skip_ok[s]:
                a = _logaddexp(a, alpha[t - 1, s - 2])
            alpha[t, s] = a + logp[t, ext[s]]

    loglike = alpha[t_len - 1, s_len - 1]
    if s_len > 1:
        loglike = _logaddexp(loglike, alpha[t_len - 1, s_len - 2])
    if not np.isfinite(loglike):
        return np.inf, np.zeros((t_len, n_cls))

    beta = np.full((t_len, s_len), NEG_INF)
    beta[t_len - 1, s_len - 1] = 0.0
    if s_len > 1:
        beta[t_len - 1, s_len - 2] = 0.0
    for t in range(t_len - 2, -1, -1):
        for s in range(s_len):
            b = beta[t + 1, s] + logp[t + 1, ext[s]]
            if s + 1 < s_len:
                b = _logaddexp(b, beta[t + 1, s + 1] + logp[t + 1, ext[s + 1]])
            if s + 2 < s_len and skip_ok[s + 2]:
                b = _logaddexp(b, beta[t + 1, s + 2] + logp[t + 1, ext[s + 2]])
            beta[t, s] = b

    gamma = np.zeros((t_len, n_cls))
    for t in range(t_len):
        for s in range(s_len):
            v = alpha[t, s] + beta[t, s] - loglike
            if v != NEG_INF:
                gamma[t, ext[s]] += np.exp(v)
    return -loglike, gamma
