"""Plate grammar, procedural rendering, and photometric augmentation.

Grammar (length L >= 3, default 7): position 1 is a province mark,
position 2 is a letter, and the remaining L-2 tail positions hold at
most two letters (I and O barred there), digits elsewhere. The tail
letter count is drawn uniformly from {0, 1, 2} and placed uniformly.

Rendering blits glyphs left to right at fixed slots on a solid field;
the blue style is light-on-dark, the yellow style dark-on-light, and
the glyph mask is identical between the two.
"""

from dataclasses import dataclass
import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .alphabet import GLYPH_H, GLYPH_W, Alphabet
from .dataio import write_manifest, write_ppm
from .errors import (InvalidRangeError, InvalidTokenError, InvalidTransformError,
                     LayoutError)
from .tensor import derive_rng

STYLES = {
    "blue": {"bg": (0.05, 0.08, 0.45), "fg": (0.92, 0.94, 0.97)},
    "yellow": {"bg": (0.93, 0.80, 0.15), "fg": (0.08, 0.08, 0.08)},
}

MAX_TAIL_LETTERS = 2


def sample_plate_string(alphabet: Alphabet, rng, length: int = 7) -> list:
    if length < 3:
        raise InvalidRangeError("plates need at least 3 positions")
    if not (alphabet.n_provinces and alphabet.n_letters and alphabet.n_digits):
        raise InvalidTokenError("alphabet must have all three token groups")
    ids = [int(rng.choice(alphabet.provinces)), int(rng.choice(alphabet.letters))]
    tail = length - 2
    excluded = set(alphabet.excluded_letter_ids())
    tail_letters = [i for i in alphabet.letters if i not in excluded]
    n_letters = int(rng.integers(0, min(MAX_TAIL_LETTERS, tail) + 1))
    letter_slots = set(rng.choice(tail, size=n_letters, replace=False).tolist())
    for slot in range(tail):
        if slot in letter_slots:
            ids.append(int(rng.choice(tail_letters)))
        else:
            ids.append(int(rng.choice(alphabet.digits)))
    return ids


def validate_plate(ids, alphabet: Alphabet, length: int = 7) -> list:
    """Returns the list of violated rule names; empty means valid.
    Names: length, first-province, second-letter, tail-type,
    letter-count, excluded-letter."""
    ids = [int(i) for i in ids]
    for i in ids:
        if not 0 <= i < len(alphabet):
            raise InvalidTokenError(f"unknown token id {i}")
    violations = []
    if len(ids) != length:
        violations.append("length")
    if ids and ids[0] not in alphabet.provinces:
        violations.append("first-province")
    if len(ids) >= 2 and ids[1] not in alphabet.letters:
        violations.append("second-letter")
    tail = ids[2:]
    letters = set(alphabet.letters)
    digits = set(alphabet.digits)
    if any(i not in letters and i not in digits for i in tail):
        violations.append("tail-type")
    if sum(1 for i in tail if i in letters) > MAX_TAIL_LETTERS:
        violations.append("letter-count")
    if any(i in alphabet.excluded_letter_ids() for i in tail):
        violations.append("excluded-letter")
    return violations


def slot_layout(n_slots: int, geometry: tuple) -> tuple:
    """Integer glyph scale and per-slot pixel boxes for a geometry.
    Slots are one glyph wide with a one-glyph-width gap, centered."""
    h, w = geometry
    span = 6 * n_slots - 1  # slot widths plus gaps, in glyph-width units
    scale = min((h - 2) // GLYPH_H, (w - 2) // span)
    if scale < 1:
        raise LayoutError(f"geometry {h}x{w} too small for {n_slots} slots")
    y0 = (h - scale * GLYPH_H) // 2
    left = (w - scale * span) // 2
    boxes = []
    for k in range(n_slots):
        x0 = left + k * 6 * scale
        boxes.append((y0, y0 + scale * GLYPH_H, x0, x0 + scale * GLYPH_W))
    return scale, boxes


def render_plate(ids, alphabet: Alphabet, geometry: tuple = (48, 160),
                 style: str = "blue") -> np.ndarray:
    if style not in STYLES:
        raise InvalidRangeError(f"style must be one of {sorted(STYLES)}")
    ids = [int(i) for i in ids]
    for i in ids:
        if not 0 <= i < len(alphabet):
            raise InvalidTokenError(f"unknown token id {i}")
    h, w = geometry
    scale, boxes = slot_layout(len(ids), geometry)
    colors = STYLES[style]
    img = np.empty((h, w, 3))
    img[:] = colors["bg"]
    fg = np.array(colors["fg"])
    for tok, (y0, y1, x0, x1) in zip(ids, boxes):
        mask = np.kron(alphabet.glyphs[tok], np.ones((scale, scale), dtype=bool))
        img[y0:y1, x0:x1][mask] = fg
    return img


@dataclass
class AugmentSpec:
    noise_sigma: float = 0.0
    blur_len: int = 1
    blur_angle: float = 0.0  # degrees; 0 blurs horizontally
    affine: np.ndarray = None  # 2x2 forward map about the image center

    def __post_init__(self):
        if self.affine is None:
            self.affine = np.eye(2)
        self.affine = np.asarray(self.affine, dtype=float)
        if self.blur_len < 1:
            raise InvalidRangeError("blur length must be >= 1")
        if self.noise_sigma < 0:
            raise InvalidRangeError("noise sigma must be >= 0")


def sample_augment_spec(rng) -> AugmentSpec:
    """Mild ranges: rotation within 5 degrees, shear within 0.1,
    isotropic scale 0.9-1.1, blur length 1-3, noise sigma up to 0.05."""
    theta = np.deg2rad(rng.uniform(-5.0, 5.0))
    shear = rng.uniform(-0.1, 0.1)
    scale = rng.uniform(0.9, 1.1)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    shr = np.array([[1.0, shear], [0.0, 1.0]])
    mat = rot @ shr * scale
    return AugmentSpec(noise_sigma=float(rng.uniform(0.0, 0.05)),
                       blur_len=int(rng.integers(1, 4)),
                       blur_angle=float(rng.uniform(0.0, 180.0)),
                       affine=mat)


def _warp_affine(img: np.ndarray, mat: np.ndarray) -> np.ndarray:
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if abs(det) < 1e-8:
        raise InvalidTransformError("affine matrix is singular")
    if np.allclose(mat, np.eye(2)):
        return img.copy()
    h, w = img.shape[:2]
    inv = np.linalg.inv(mat)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    # sample the source at the inverse-mapped output coordinates
    sy = inv[0, 0] * yy + inv[0, 1] * xx + cy
    sx = inv[1, 0] * yy + inv[1, 1] * xx + cx
    sy = np.clip(sy, 0.0, h - 1.0)  # border replicate
    sx = np.clip(sx, 0.0, w - 1.0)
    y0 = np.clip(np.floor(sy).astype(int), 0, h - 2) if h > 1 else np.zeros_like(sy, int)
    x0 = np.clip(np.floor(sx).astype(int), 0, w - 2) if w > 1 else np.zeros_like(sx, int)
    fy = (sy - y0)[..., None]
    fx = (sx - x0)[..., None]
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def motion_blur_kernel(length: int, angle_deg: float) -> np.ndarray:
    """Directional box filter: unit mass spread evenly along a segment
    of the given pixel length, rasterized bilinearly."""
    if length < 1:
        raise InvalidRangeError("blur length must be >= 1")
    if length == 1:
        return np.ones((1, 1))
    k = np.zeros((length, length))
    c = (length - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    dy, dx = np.sin(theta), np.cos(theta)
    for d in np.linspace(-c, c, 2 * length + 1):
        y, x = c + d * dy, c + d * dx
        y0, x0 = int(np.floor(y)), int(np.floor(x))
        fy, fx = y - y0, x - x0
        for oy, wy in ((0, 1 - fy), (1, fy)):
            for ox, wx in ((0, 1 - fx), (1, fx)):
                yy, xx = y0 + oy, x0 + ox
                if 0 <= yy < length and 0 <= xx < length and wy * wx > 0:
                    k[yy, xx] += wy * wx
    return k / k.sum()


def _convolve_same(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(img, ((ph, kh - 1 - ph), (pw, kw - 1 - pw), (0, 0)), mode="edge")
    win = sliding_window_view(padded, (kh, kw), axis=(0, 1))
    return np.einsum("hwcij,ij->hwc", win, kernel)


def augment(img: np.ndarray, spec: AugmentSpec, rng) -> np.ndarray:
    """Affine warp, then directional blur, then additive Gaussian noise;
    the result is clamped back to [0, 1]."""
    out = _warp_affine(img, spec.affine)
    if spec.blur_len > 1:
        out = _convolve_same(out, motion_blur_kernel(spec.blur_len, spec.blur_angle))
    if spec.noise_sigma > 0:
        out = out + rng.normal(0.0, spec.noise_sigma, out.shape)
    return np.clip(out, 0.0, 1.0)


def crop_jitter(geometry: tuple) -> int:
    """Margin used by 4x crop expansion; about 6 % of the height, the
    ratio of the reference 143-to-128 scale-and-crop."""
    return max(1, round(0.059 * geometry[0]))


def generate_dataset(n: int, alphabet: Alphabet, geometry: tuple, seed: int,
                     out_dir: str, length: int = 7, styles=("blue", "yellow"),
                     augment_images: bool = True, crop4: bool = False) -> str:
    """Writes n rendered plates (4n images when crop4 is set) plus a
    manifest; sample i depends only on (seed, i), so regeneration is
    byte-identical regardless of worker count."""
    if n < 1:
        raise InvalidRangeError("need n >= 1 samples")
    os.makedirs(out_dir, exist_ok=True)
    h, w = geometry
    j = crop_jitter(geometry) if crop4 else 0
    records = []
    for i in range(n):
        rng = derive_rng(seed, i)
        ids = sample_plate_string(alphabet, rng, length)
        style = str(rng.choice(list(styles)))
        base = render_plate(ids, alphabet, (h + 2 * j, w + 2 * j), style)
        if augment_images:
            base = augment(base, sample_augment_spec(rng), rng)
        if crop4:
            for k in range(4):
                oy = int(rng.integers(0, 2 * j + 1))
                ox = int(rng.integers(0, 2 * j + 1))
                name = f"plate_{i:05d}_c{k}.ppm"
                write_ppm(os.path.join(out_dir, name),
                          base[oy:oy + h, ox:ox + w])
                records.append((name, ids))
        else:
            name = f"plate_{i:05d}.ppm"
            write_ppm(os.path.join(out_dir, name), base)
            records.append((name, ids))
    manifest = os.path.join(out_dir, "manifest.tsv")
    header = [f"geometry {h} {w}", f"length {length}",
              f"styles {' '.join(styles)}", f"seed {seed}"]
    write_manifest(manifest, records, header)
    return manifest
