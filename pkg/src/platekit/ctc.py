"""Connectionist temporal classification: loss, gradient and decoders.

A frame distribution is a (T, C) float64 array whose rows are
probability vectors over the label alphabet plus blank; the blank class
is the last one unless passed explicitly. The loss gradient is
expressed with respect to pre-softmax logits, which for probabilities
p and label posteriors gamma is p - gamma.
"""

from collections import defaultdict

import numpy as np

from . import kernels
from .errors import (EmptyInputError, InfeasibleTargetError, InvalidArgumentError,
                     InvalidLabelError, InvalidRangeError, OracleSizeError,
                     ShapeError)


def _check_probs(probs: np.ndarray, blank) -> tuple:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2:
        raise ShapeError(f"frame distribution must be 2-d, got {probs.shape}")
    if probs.shape[0] == 0:
        raise EmptyInputError("no frames")
    if blank is None:
        blank = probs.shape[1] - 1
    if not 0 <= blank < probs.shape[1]:
        raise InvalidLabelError(f"blank id {blank} outside {probs.shape[1]} classes")
    if np.any(probs < 0):
        raise InvalidRangeError("negative probability entry")
    if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-6:
        raise InvalidRangeError("frame rows must each sum to 1")
    return probs, blank


def _check_target(target, blank: int, n_classes: int) -> np.ndarray:
    target = np.asarray(target, dtype=np.int64)
    if target.ndim != 1:
        raise ShapeError(f"target must be 1-d, got shape {target.shape}")
    if target.size and (target.min() < 0 or target.max() >= n_classes):
        raise InvalidLabelError("target id outside class range")
    if np.any(target == blank):
        raise InvalidLabelError("target may not contain the blank id")
    return target


def collapse(path, blank: int) -> list:
    """Merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for p in path:
        p = int(p)
        if p != prev:
            if p != blank:
                out.append(p)
            prev = p
    return out


def path_probability(probs: np.ndarray, path) -> float:
    """Product of the per-frame probabilities along one alignment path."""
    probs = np.asarray(probs, dtype=float)
    path = np.asarray(path, dtype=np.int64)
    if path.shape[0] != probs.shape[0]:
        raise ShapeError("path length must equal the frame count")
    if path.size and (path.min() < 0 or path.max() >= probs.shape[1]):
        raise InvalidLabelError("path id outside class range")
    return float(np.prod(probs[np.arange(probs.shape[0]), path]))


def extend_with_blanks(target: np.ndarray, blank: int) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    return ext


def min_frames(target) -> int:
    """Shortest path that can collapse to the target: one frame per
    label plus a separating blank inside every adjacent repeat."""
    target = np.asarray(target, dtype=np.int64)
    reps = int(np.sum(target[1:] == target[:-1])) if len(target) > 1 else 0
    return len(target) + reps


def ctc_loss(probs: np.ndarray, target, blank: int | None = None):
    """Negative log total probability of all paths collapsing to target,
    with the analytic gradient taken with respect to pre-softmax logits.

    Returns (loss, grad); grad is shaped like probs."""
    probs, blank = _check_probs(probs, blank)
    target = _check_target(target, blank, probs.shape[1])
    need = min_frames(target)
    if need > probs.shape[0]:
        raise InfeasibleTargetError(
            f"target needs at least {need} frames, have {probs.shape[0]}")
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    nll, gamma = kernels.ctc_forward_backward(logp, extend_with_blanks(target, blank))
    return float(nll), probs - gamma


def brute_force_label_probability(probs: np.ndarray, target,
                                  blank: int | None = None,
                                  limit: int = 10_000_000) -> float:
    """Oracle: total probability of the target labelling, by explicit
    enumeration over all C**T alignment paths.

    Paths that use a symbol outside the target (other than blank)
    contribute exactly zero, so enumeration is restricted to the used
    symbols without changing the sum. The guard still prices the full
    C**T path space; instances beyond ``limit`` are refused."""
    probs, blank = _check_probs(probs, blank)
    target = _check_target(target, blank, probs.shape[1])
    t_len, n_cls = probs.shape
    if n_cls ** t_len > limit:
        raise OracleSizeError(
            f"{n_cls}**{t_len} paths exceeds the {limit} budget")
    alphabet = np.array(sorted(set(int(v) for v in target)) + [blank], dtype=np.int64)
    base = len(alphabet)
    n_paths = base ** t_len

    u = len(target)
    total = 0.0
    chunk = 1 << 16
    frame_idx = np.arange(t_len)
    for start in range(0, n_paths, chunk):
        idx = np.arange(start, min(start + chunk, n_paths))
        digits = np.empty((idx.size, t_len), dtype=np.int64)
        rem = idx.copy()
        for t in range(t_len - 1, -1, -1):
            rem, digits[:, t] = np.divmod(rem, base)
        sym = alphabet[digits]
        keep = np.ones_like(sym, dtype=bool)
        keep[:, 1:] = sym[:, 1:] != sym[:, :-1]
        emit = keep & (sym != blank)
        ok = emit.sum(axis=1) == u
        if u:
            pos = np.cumsum(emit, axis=1) - 1
            match = ~emit | (target[np.clip(pos, 0, u - 1)] == sym)
            ok &= match.all(axis=1)
        if np.any(ok):
            total += float(np.prod(probs[frame_idx, sym[ok]], axis=1).sum())
    return total


def best_path_decode(probs: np.ndarray, blank: int | None = None) -> list:
    """Collapse the per-frame argmax path; ties go to the lowest id."""
    probs, blank = _check_probs(probs, blank)
    return collapse(np.argmax(probs, axis=1), blank)


def beam_search_topn(probs: np.ndarray, n: int, beam_width: int = 16,
                     blank: int | None = None):
    """Beam search over labellings, merging alignment paths that
    collapse to the same prefix, so scores are labelling probabilities
    rather than single-path ones. Returns the top n distinct labellings
    as (label list, probability), best first; ties break toward the
    lexicographically smaller labelling, making output deterministic and
    the top-(n-1) list a prefix of the top-n list."""
    probs, blank = _check_probs(probs, blank)
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if beam_width < n:
        raise InvalidArgumentError(f"beam width {beam_width} smaller than n={n}")
    t_len, n_cls = probs.shape
    beams = {(): (1.0, 0.0)}  # prefix -> (blank-ending, label-ending) mass
    for t in range(t_len):
        row = probs[t]
        nxt = defaultdict(lambda: [0.0, 0.0])
        for prefix, (pb, pnb) in beams.items():
            both = pb + pnb
            if row[blank] > 0.0:
                nxt[prefix][0] += both * row[blank]
            for c in range(n_cls):
                if c == blank or row[c] == 0.0:
                    continue
                if prefix and prefix[-1] == c:
                    nxt[prefix][1] += pnb * row[c]
                    nxt[prefix + (c,)][1] += pb * row[c]
                else:
                    nxt[prefix + (c,)][1] += both * row[c]
        ranked = sorted(nxt.items(), key=lambda kv: (-(kv[1][0] + kv[1][1]), kv[0]))
        beams = {k: (v[0], v[1]) for k, v in ranked[:beam_width]}
    final = sorted(beams.items(), key=lambda kv: (-(kv[1][0] + kv[1][1]), kv[0]))
    return [(list(prefix), pb + pnb) for prefix, (pb, pnb) in final[:n]]
