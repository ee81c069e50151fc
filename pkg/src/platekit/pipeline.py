"""Orchestration: stand-in real domain, curriculum training, dataset
mixing with a single extra class for unlabeled samples, and batched
prediction helpers shared by the command-line front end.
"""

import os

import numpy as np

from . import ctc
from .dataio import load_dataset, read_manifest, write_manifest
from .errors import ConfigError, DataError, DivergenceError
from .metrics import evaluate
from .optim import SGD, Adadelta, Adam, RMSProp
from .tensor import derive_rng, softmax


# Channel remap, gains, gamma: all held out of the script-side augmenter
# so the two domains genuinely differ in distribution.
_PROXY_GAINS = (0.85, 1.0, 0.70)
_PROXY_GAMMA = 0.8
_PROXY_BAND_AMP = 0.04
_PROXY_NOISE = 0.02


def domain_proxy(img: np.ndarray, rng) -> np.ndarray:
    """Deterministic photo-like restyling of a rendered plate: swap the
    color channels, bend the contrast curve, add horizontal banding and
    sensor noise. Labels are untouched by construction."""
    out = img[..., ::-1] * np.asarray(_PROXY_GAINS)
    out = np.clip(out, 0.0, 1.0) ** _PROXY_GAMMA
    h = out.shape[0]
    phase = rng.uniform(0.0, 2.0 * np.pi)
    band = _PROXY_BAND_AMP * np.sin(np.arange(h) * (2.0 * np.pi / 7.0) + phase)
    out = out + band[:, None, None]
    out = out + rng.normal(0.0, _PROXY_NOISE, out.shape)
    return np.clip(out, 0.0, 1.0)


def images_and_labels(manifest_path: str):
    """(images (N,H,W,C) float array, list of id lists), manifest order."""
    items = load_dataset(manifest_path)
    if not items:
        raise DataError(f"{manifest_path}: dataset is empty")
    shapes = {img.shape for img, _ in items}
    if len(shapes) != 1:
        raise DataError(f"{manifest_path}: mixed image shapes {sorted(shapes)}")
    return (np.stack([img for img, _ in items]),
            [list(ids) for _, ids in items])


def make_proxy_dataset(src_manifest: str, out_dir: str, seed: int) -> str:
    """Rewrites a dataset through domain_proxy; labels copied verbatim."""
    from .dataio import read_ppm, write_ppm
    records, header = read_manifest(src_manifest)
    if not records:
        raise DataError(f"{src_manifest}: dataset is empty")
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.dirname(os.path.abspath(src_manifest))
    for i, (rel, ids) in enumerate(records):
        img = read_ppm(os.path.join(base, rel))
        out = domain_proxy(img, derive_rng(seed, i))
        dst = os.path.join(out_dir, os.path.basename(rel))
        write_ppm(dst, out)
    out_records = [(os.path.basename(rel), ids) for rel, ids in records]
    manifest = os.path.join(out_dir, "manifest.tsv")
    write_manifest(manifest, out_records, header + [f"proxy-seed {seed}"])
    return manifest


def resolve_class_count(label_lists, alphabet) -> int:
    """Network output count for a mix of datasets. Ordinary labels need
    |alphabet|+1 (blank); the presence of the reserved extra class id
    |alphabet| bumps it to |alphabet|+2, blank last either way."""
    top = max((max(ids) for ids in label_lists if ids), default=0)
    n = len(alphabet.names)
    if top < n:
        return alphabet.n_classes
    if top == n:
        return n + 2
    raise ConfigError(f"label id {top} outside alphabet of {n} tokens")


def make_optimizer(spec: str, params):
    """"adadelta" | "adam:LR" | "sgd:LR[:MOMENTUM]" | "rmsprop:LR"."""
    name, _, rest = spec.partition(":")
    args = [a for a in rest.split(":") if a] if rest else []
    try:
        if name == "adadelta" and not args:
            return Adadelta(params)
        if name == "adam" and len(args) == 1:
            return Adam(params, float(args[0]))
        if name == "sgd" and len(args) in (1, 2):
            return SGD(params, float(args[0]),
                       float(args[1]) if len(args) == 2 else 0.0)
        if name == "rmsprop" and len(args) == 1:
            return RMSProp(params, float(args[0]))
    except ValueError:
        pass
    raise ConfigError(f"bad optimizer spec {spec!r}")


def check_targets_feasible(labels, t_frames: int, source: str) -> None:
    """Fails up front, naming the first sample whose label cannot fit
    the frame count."""
    for i, ids in enumerate(labels):
        need = ctc.min_frames(ids)
        if need > t_frames:
            raise DataError(
                f"{source}: sample {i} needs {need} frames for label "
                f"{ids} but the network emits {t_frames}")


def ctc_batch_step(net, images, labels, opt):
    """One optimizer step on a batch; returns the mean loss."""
    logits = net.forward(images, train=True)
    probs = softmax(logits, axis=2)
    d_logits = np.zeros_like(logits)
    total = 0.0
    for i, ids in enumerate(labels):
        loss_i, g_i = ctc.ctc_loss(probs[i], ids, blank=net.blank_id)
        total += loss_i
        d_logits[i] = g_i
    mean = total / len(labels)
    opt.zero_grad()
    net.backward(d_logits / len(labels))
    opt.step()
    return mean


def predict_records(net, images, labels, beam_width: int = 16, topn: int = 5,
                    batch: int = 32):
    """(truth, best-path decode, ranked beam candidates) per image."""
    out = []
    for s in range(0, images.shape[0], batch):
        probs = net.predict_probs(images[s:s + batch])
        for i in range(probs.shape[0]):
            best = ctc.best_path_decode(probs[i], blank=net.blank_id)
            cands = ctc.beam_search_topn(probs[i], topn,
                                         beam_width=max(beam_width, topn),
                                         blank=net.blank_id)
            out.append((labels[s + i], best, [c for c, _ in cands]))
    return out


def holdout_ra(net, images, labels, batch: int = 32) -> float:
    hits = 0
    for s in range(0, images.shape[0], batch):
        probs = net.predict_probs(images[s:s + batch])
        for i in range(probs.shape[0]):
            pred = ctc.best_path_decode(probs[i], blank=net.blank_id)
            hits += pred == list(labels[s + i])
    return hits / len(labels)


def train_recognizer(net, stages, rng, batch: int = 16, holdout=None,
                     log_every: int = 0):
    """Runs curriculum stages in order over one network, parameters
    carried forward, a fresh optimizer per stage.

    stages: (name, images, labels, epochs, optimizer spec) tuples.
    Returns history rows (step, phase, values): per-epoch "<name>" rows
    carry [mean epoch loss]; with a holdout set, "<name>-val" rows carry
    [plate accuracy].
    """
    history, step = [], 0
    for name, images, labels, epochs, opt_spec in stages:
        if images.shape[0] == 0:
            raise DataError(f"stage {name}: dataset is empty")
        check_targets_feasible(labels, net.t_frames, f"stage {name}")
        opt = make_optimizer(opt_spec, net.parameters())
        n = images.shape[0]
        for epoch in range(epochs):
            order = rng.permutation(n)
            losses = []
            for s in range(0, n, batch):
                idx = order[s:s + batch]
                if len(idx) < 2:
                    continue    # batch statistics need two samples
                loss = ctc_batch_step(net, images[idx],
                                      [labels[i] for i in idx], opt)
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"stage {name}: non-finite loss at step {step}")
                losses.append(loss)
                if log_every and len(losses) % log_every == 0:
                    history.append((step, f"{name}-batch", [loss]))
                step += 1
            history.append((step, name, [float(np.mean(losses))]))
            if holdout is not None:
                ra = holdout_ra(net, holdout[0], holdout[1])
                history.append((step, f"{name}-val", [ra]))
    return history


def all_in_one_mix(real_manifest: str, generated_manifest: str, out_path: str,
                   alphabet, rng, label_len: int) -> tuple:
    """Combines a labeled dataset with unlabeled generated images by
    assigning every generated sample a constant label: label_len
    repetitions of the reserved class id |alphabet|. The shuffled order
    is a pure function of the seed. Returns (n_real, n_generated)."""
    real, real_hdr = read_manifest(real_manifest)
    gen, _ = read_manifest(generated_manifest)
    if not real or not gen:
        raise DataError("both datasets must be non-empty")
    out_dir = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(out_dir, exist_ok=True)

    def rebase(manifest, rel):
        src = os.path.join(os.path.dirname(os.path.abspath(manifest)), rel)
        return os.path.relpath(src, out_dir)

    extra = len(alphabet.names)
    rows = [(rebase(real_manifest, rel), ids) for rel, ids in real]
    rows += [(rebase(generated_manifest, rel), [extra] * label_len)
             for rel, _ in gen]
    order = rng.permutation(len(rows))
    header = [f"extra-class {extra}",
              f"outputs {extra + 2}",
              f"real {len(real)} generated {len(gen)}"]
    write_manifest(out_path, [rows[i] for i in order], header)
    return len(real), len(gen)


def eval_dataset(net, manifest_path: str, beam_width: int = 16,
                 topn: int = 5):
    images, labels = images_and_labels(manifest_path)
    records = predict_records(net, images, labels, beam_width, topn)
    return evaluate(records, ns=tuple(sorted({1, min(3, topn), topn})))
