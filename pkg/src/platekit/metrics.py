"""Recognition scoring and the random-input confidence probe.

Plate-level accuracy is exact match. Character-level accuracy runs on a
capped edit distance so that predictions of any length score sensibly:
each plate contributes max(0, len(truth) - distance) correct characters.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, InvalidArgumentError, InvalidRangeError
from .dataio import write_pgm


def levenshtein(a, b) -> int:
    """Token-level edit distance (insert, delete, substitute at cost 1)."""
    a, b = list(a), list(b)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def recognition_accuracy(pairs) -> float:
    """Fraction of (truth, prediction) pairs that match exactly."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInputError("no evaluation pairs")
    hits = sum(list(t) == list(p) for t, p in pairs)
    return hits / len(pairs)


def character_recognition_accuracy(pairs) -> float:
    """1 - (summed per-plate edit distance, capped at the truth length) /
    (summed truth lengths)."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInputError("no evaluation pairs")
    total = sum(len(list(t)) for t, _ in pairs)
    if total == 0:
        raise EmptyInputError("all truths are empty")
    wrong = sum(min(levenshtein(t, p), len(list(t))) for t, p in pairs)
    return 1.0 - wrong / total


def topn_accuracy(records, n: int) -> float:
    """Fraction of (truth, candidates) records whose truth appears among
    the first n candidates. Shorter candidate lists are used as-is."""
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    records = list(records)
    if not records:
        raise EmptyInputError("no evaluation records")
    hits = 0
    for truth, cands in records:
        truth = list(truth)
        hits += any(list(c) == truth for c in list(cands)[:n])
    return hits / len(records)


@dataclass
class EvalReport:
    ra: float
    cra: float
    top_n: dict
    records: list    # (truth ids, predicted ids, candidate list)


def evaluate(records, ns=(1, 3, 5)) -> EvalReport:
    """records: (truth, best-path prediction, ranked candidate list)."""
    records = [(list(t), list(p), [list(c) for c in cands])
               for t, p, cands in records]
    pairs = [(t, p) for t, p, _ in records]
    topn = [(t, c) for t, _, c in records]
    return EvalReport(
        ra=recognition_accuracy(pairs),
        cra=character_recognition_accuracy(pairs),
        top_n={n: topn_accuracy(topn, n) for n in ns},
        records=records)


def write_report(path: str, report: EvalReport, alphabet=None) -> None:
    """One line per plate: truth, prediction, candidate list, hit flag;
    then a summary footer."""
    fmt = (alphabet.format_ids if alphabet is not None
           else lambda ids: " ".join(str(i) for i in ids))
    with open(path, "w", encoding="utf-8") as fh:
        for truth, pred, cands in report.records:
            ok = "1" if truth == pred else "0"
            fh.write(f"{fmt(truth)}\t{fmt(pred)}\t"
                     f"{'|'.join(fmt(c) for c in cands)}\t{ok}\n")
        fh.write(f"# ra {report.ra:.6f}\n")
        fh.write(f"# cra {report.cra:.6f}\n")
        for n in sorted(report.top_n):
            fh.write(f"# top{n} {report.top_n[n]:.6f}\n")


def confidence_map(model, n_random: int, geometry, rng,
                   batch: int = 64) -> np.ndarray:
    """Feeds uniform-random images and averages the per-frame output
    distributions. Returns (classes, frames); each column sums to 1."""
    if n_random < 1:
        raise InvalidRangeError("need at least one random image")
    h, w = geometry
    acc, done = None, 0
    while done < n_random:
        m = min(batch, n_random - done)
        imgs = rng.random((m, h, w, model.in_ch))
        probs = model.predict_probs(imgs)            # (m, T, classes)
        s = probs.sum(axis=0)
        acc = s if acc is None else acc + s
        done += m
    return (acc / n_random).T


def write_confmap(csv_path: str, image_path: str, cm: np.ndarray) -> None:
    """CSV, one class per row; plus an 8-bit grayscale image scaled so
    the largest entry is white."""
    with open(csv_path, "w", encoding="ascii") as fh:
        for row in cm:
            fh.write(",".join(f"{v:.8g}" for v in row) + "\n")
    peak = float(cm.max())
    img = np.zeros_like(cm) if peak == 0 else cm / peak
    write_pgm(image_path, img)
