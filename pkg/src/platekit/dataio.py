"""File formats: binary pixmaps, dataset manifests, loss histories.

Images on disk are 8-bit binary pixmaps (magic P6 for color, P5 for
grayscale); in memory they are float64 in [0, 1]. A dataset is a
directory of image files plus a manifest text file, one record per
line: relative path, tab, space-separated token IDs. Lines starting
with '#' are header comments and are preserved on round-trip.
"""

import os

import numpy as np

from .errors import DataError, InvalidRangeError


def write_ppm(path: str, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"color pixmap needs (H,W,3), got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise InvalidRangeError("image values must lie in [0,1]")
    h, w, _ = img.shape
    data = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_pgm(path: str, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise DataError(f"grayscale pixmap needs (H,W), got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise InvalidRangeError("image values must lie in [0,1]")
    h, w = img.shape
    data = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _read_pnm_header(fh, path):
    # magic, dimensions, maxval; '#' comments legal between tokens
    tokens = []
    while len(tokens) < 4:
        line = fh.readline()
        if not line:
            raise DataError(f"{path}: truncated pixmap header")
        text = line.split(b"#", 1)[0]
        tokens.extend(text.split())
    return tokens[:4]


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, w, h, maxval = _read_pnm_header(fh, path)
        if magic != b"P6":
            raise DataError(f"{path}: expected magic P6, got {magic!r}")
        w, h, maxval = int(w), int(h), int(maxval)
        if maxval != 255:
            raise DataError(f"{path}: only 8-bit pixmaps supported")
        raw = fh.read(w * h * 3)
    if len(raw) != w * h * 3:
        raise DataError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).astype(float) / 255.0


def write_manifest(path: str, records, header_lines=()) -> None:
    """records: iterable of (relative_path, token_id_list)."""
    with open(path, "w", encoding="ascii") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for rel, ids in records:
            fh.write(f"{rel}\t{' '.join(str(int(i)) for i in ids)}\n")


def read_manifest(path: str):
    """Returns (records, header_lines); records are (relpath, id list)."""
    records, header = [], []
    try:
        with open(path, encoding="ascii") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    header.append(line[1:].strip())
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(f"{path}:{ln}: expected path<TAB>ids")
                ids = [int(t) for t in parts[1].split()] if parts[1].strip() else []
                records.append((parts[0], ids))
    except FileNotFoundError as e:
        raise DataError(f"manifest not found: {path}") from e
    except ValueError as e:
        raise DataError(f"{path}: malformed token id ({e})") from e
    return records, header


def load_dataset(manifest_path: str):
    """Loads every image named by a manifest; returns list of
    (image array, id list) in manifest order."""
    records, _ = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    out = []
    for rel, ids in records:
        out.append((read_ppm(os.path.join(base, rel)), ids))
    return out


def write_loss_history(path: str, records, header_lines=()) -> None:
    """records: iterable of (step, phase, loss values); comma-separated."""
    with open(path, "w", encoding="ascii") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for step, phase, values in records:
            vals = ",".join(f"{v:.10g}" for v in values)
            fh.write(f"{step},{phase},{vals}\n")


def read_loss_history(path: str):
    records = []
    with open(path, encoding="ascii") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise DataError(f"{path}:{ln}: expected step,phase,losses")
            records.append((int(parts[0]), parts[1],
                            [float(v) for v in parts[2:]]))
    return records
