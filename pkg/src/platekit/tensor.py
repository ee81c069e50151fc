"""Shared numeric helpers and seeded random number generation.

All arrays are float64 ``np.ndarray``; float32 appears only inside
checkpoint files. Randomness flows exclusively through
``np.random.Generator`` objects created here, never the global numpy
state.
"""

import numpy as np

from .errors import ShapeError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def derive_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-item stream: the same (seed, index) pair always
    yields the same stream regardless of processing order."""
    return np.random.default_rng([seed, index])


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def pad_hw(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    """Zero-pad the two spatial axes of a (B, H, W, C) map."""
    if x.ndim != 4:
        raise ShapeError(f"expected a 4-d feature map, got shape {x.shape}")
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def unpad_hw(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    h, w = x.shape[1], x.shape[2]
    return x[:, ph:h - ph, pw:w - pw, :]
