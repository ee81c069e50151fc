"""Command-line front end.

    platekit <subcommand> [--config PATH] [--seed N] [--out DIR]

Exit codes: 0 success, 2 configuration problem, 3 data or checkpoint
problem, 4 numeric divergence during training.
"""

import argparse
import glob
import os
import sys

import numpy as np

from . import gan, metrics, pipeline, plates
from .alphabet import load_alphabet, make_standard_alphabet, make_toy_alphabet
from .config import parse_config, parse_stages
from .costmodel import cost_ratio, count_macs
from .dataio import read_manifest, write_loss_history, write_manifest, write_ppm
from .errors import (CheckpointError, ConfigError, DataError, DivergenceError,
                     InvalidArgumentError, InvalidRangeError, PlatekitError)
from .networks import build_crnn, build_lightcrnn, load_checkpoint, param_count, save_checkpoint
from .pipeline import images_and_labels
from .tensor import make_rng


def resolve_alphabet(spec: str):
    if spec == "toy":
        return make_toy_alphabet()
    if spec == "standard":
        return make_standard_alphabet()
    return load_alphabet(spec)


def _geometry(cfg):
    return (cfg["image.height"], cfg["image.width"])


def cmd_synth(cfg, seed, out):
    alphabet = resolve_alphabet(cfg["alphabet"])
    styles = tuple(s.strip() for s in cfg["synth.styles"].split(",") if s.strip())
    manifest = plates.generate_dataset(
        cfg["synth.n"], alphabet, _geometry(cfg), seed, out,
        length=cfg["synth.length"], styles=styles,
        augment_images=cfg["synth.augment"], crop4=cfg["synth.crop4"])
    domain = cfg["synth.domain"]
    if domain == "proxy":
        # offset keeps the restyling stream disjoint from generation
        manifest = pipeline.make_proxy_dataset(manifest, out, seed + 10 ** 9)
    elif domain != "script":
        raise ConfigError(f"synth.domain must be script or proxy, got {domain!r}")
    records, _ = read_manifest(manifest)
    print(f"wrote {len(records)} images to {out} ({domain} domain)")
    return 0


def _gan_config(cfg):
    lr = cfg["gan.lr"]
    return gan.GanConfig(
        variant=cfg["gan.variant"], lam=cfg["gan.lambda"],
        d_iter=cfg["gan.d_iter"], clip_c=cfg["gan.clip"],
        lr=None if lr == 0 else lr,
        geometry=(cfg["gan.height"], cfg["gan.width"]),
        base=cfg["gan.base"], d_base=cfg["gan.d_base"],
        d_layers=cfg["gan.d_layers"],
        resblocks=cfg["gan.resblocks"], batch=cfg["gan.batch"])


def cmd_gan_train(cfg, seed, out):
    s_images, _ = images_and_labels(cfg.require("gan.source"))
    r_images, _ = images_and_labels(cfg.require("gan.target"))
    gcfg = _gan_config(cfg)
    os.makedirs(out, exist_ok=True)
    spe = cfg["gan.steps_per_epoch"]
    models, history = gan.train_cyclegan(
        gcfg, s_images, r_images, cfg["gan.epochs"], make_rng(seed),
        out_dir=out, steps_per_epoch=None if spe == 0 else spe)
    write_loss_history(os.path.join(out, "gan_history.csv"), history,
                       [f"variant {gcfg.variant}", f"seed {seed}"])
    probe_s = s_images[:min(16, s_images.shape[0]), :gcfg.geometry[0], :gcfg.geometry[1]]
    probe_r = r_images[:min(16, r_images.shape[0]), :gcfg.geometry[0], :gcfg.geometry[1]]
    final = gan.cycle_loss(probe_s, probe_r, models)
    print(f"trained {cfg['gan.epochs']} epochs ({gcfg.variant}); "
          f"round-trip error {final:.4f}; checkpoints in {out}")
    return 0


def cmd_gan_generate(cfg, seed, out):
    model_dir = cfg.require("gan.models")
    paths = sorted(glob.glob(os.path.join(model_dir, "g_epoch_*.ckpt")))
    if not paths:
        raise DataError(f"no generator checkpoints under {model_dir}")
    k = min(cfg["gan.last_k"], len(paths))
    gens = [load_checkpoint(p)[0] for p in paths[-k:]]
    manifest = cfg.require("gan.source")
    images, labels = images_and_labels(manifest)
    gh, gw = gens[0].geometry
    ih, iw = images.shape[1:3]
    if ih < gh or iw < gw:
        raise DataError(f"images {(ih, iw)} smaller than generator {(gh, gw)}")
    oy, ox = (ih - gh) // 2, (iw - gw) // 2
    images = images[:, oy:oy + gh, ox:ox + gw]
    os.makedirs(out, exist_ok=True)
    records = []
    # inputs are split round-robin across the checkpoint ensemble
    for j, g in enumerate(gens):
        idx = np.arange(j, images.shape[0], k)
        if idx.size == 0:
            continue
        for i, img in zip(idx, gan.translate(g, images[idx])):
            name = f"gen_{i:05d}.ppm"
            write_ppm(os.path.join(out, name), np.clip(img, 0.0, 1.0))
            records.append((name, labels[i]))
    records.sort(key=lambda r: r[0])
    out_manifest = os.path.join(out, "manifest.tsv")
    write_manifest(out_manifest, records,
                   [f"translated-from {manifest}", f"checkpoints {k}"])
    print(f"translated {len(records)} images with {k} checkpoint(s) -> {out}")
    return 0


def _build_recognizer(cfg, n_classes, rng):
    kind = cfg["train.network"]
    if kind == "crnn":
        return build_crnn(_geometry(cfg), 3, n_classes, rng=rng)
    if kind == "lightcrnn":
        return build_lightcrnn(_geometry(cfg), 3, n_classes,
                               alpha=cfg["train.alpha"], rng=rng)
    raise ConfigError(f"train.network must be crnn or lightcrnn, got {kind!r}")


def cmd_train(cfg, seed, out):
    rng = make_rng(seed)
    stages_cfg = parse_stages(cfg.require("train.stages"))
    loaded = []
    for i, (path, epochs, opt) in enumerate(stages_cfg, 1):
        images, labels = images_and_labels(path)
        loaded.append((f"stage{i}", images, labels, epochs, opt))
    alphabet = resolve_alphabet(cfg["alphabet"])
    n_classes = pipeline.resolve_class_count(
        [ids for _, _, labels, _, _ in loaded for ids in labels], alphabet)
    init = cfg["train.init"]
    if init:
        net, meta = load_checkpoint(init, rng=rng)
        if net.n_classes != n_classes:
            raise ConfigError(
                f"checkpoint has {net.n_classes} outputs, data needs {n_classes}")
    else:
        net = _build_recognizer(cfg, n_classes, rng)
    holdout = None
    if cfg["train.holdout"]:
        holdout = images_and_labels(cfg["train.holdout"])
    os.makedirs(out, exist_ok=True)
    history = pipeline.train_recognizer(net, loaded, rng,
                                        batch=cfg["train.batch"],
                                        holdout=holdout)
    save_checkpoint(os.path.join(out, "model.ckpt"), net)
    write_loss_history(os.path.join(out, "train_history.csv"), history,
                       [f"network {net.kind}", f"seed {seed}"])
    tail = {phase: vals[0] for _, phase, vals in history}
    summary = " ".join(f"{k}={v:.4f}" for k, v in sorted(tail.items()))
    print(f"trained {net.kind} ({param_count(net)} parameters); last {summary}")
    print(f"model and history in {out}")
    return 0


def cmd_eval(cfg, seed, out):
    net, _ = load_checkpoint(cfg.require("eval.model"))
    alphabet = resolve_alphabet(cfg["alphabet"])
    report = pipeline.eval_dataset(net, cfg.require("eval.data"),
                                   beam_width=cfg["eval.beam_width"],
                                   topn=cfg["eval.topn"])
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "eval_report.txt")
    metrics.write_report(path, report, alphabet)
    tops = " ".join(f"top{n}={v:.4f}" for n, v in sorted(report.top_n.items()))
    print(f"ra={report.ra:.4f} cra={report.cra:.4f} {tops}")
    print(f"report written to {path}")
    return 0


def cmd_decode(cfg, seed, out):
    net, _ = load_checkpoint(cfg.require("decode.model"))
    alphabet = resolve_alphabet(cfg["alphabet"])
    manifest = cfg.require("decode.data")
    images, labels = images_and_labels(manifest)
    records, _ = read_manifest(manifest)
    preds = pipeline.predict_records(net, images, labels,
                                     beam_width=cfg["decode.beam_width"],
                                     topn=cfg["decode.topn"])
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "decode.txt")
    with open(path, "w", encoding="utf-8") as fh:
        for (rel, _), (_, best, cands) in zip(records, preds):
            fh.write(f"{rel}\t{alphabet.format_ids(best)}\t"
                     f"{'|'.join(alphabet.format_ids(c) for c in cands)}\n")
    print(f"decoded {len(preds)} images -> {path}")
    return 0


def cmd_confmap(cfg, seed, out):
    net, _ = load_checkpoint(cfg.require("confmap.model"))
    cm = metrics.confidence_map(net, cfg["confmap.n"], net.geometry,
                                make_rng(seed))
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "confmap.csv")
    img_path = os.path.join(out, "confmap.pgm")
    metrics.write_confmap(csv_path, img_path, cm)
    print(f"confidence map {cm.shape[0]} classes x {cm.shape[1]} frames; "
          f"peak {cm.max():.4f}; written to {csv_path} and {img_path}")
    return 0


def cmd_cost(cfg, seed, out):
    alphabet = resolve_alphabet(cfg["alphabet"])
    geometry = _geometry(cfg)
    alpha = cfg["cost.alpha"]
    rng = make_rng(seed)
    standard = build_crnn(geometry, 3, alphabet.n_classes, rng=rng)
    light = build_lightcrnn(geometry, 3, alphabet.n_classes, alpha=alpha, rng=rng)
    b_std = count_macs(standard, geometry, 3)
    b_sep = count_macs(light, geometry, 3)
    lines = [f"standard conv stack ({geometry[0]}x{geometry[1]}):",
             b_std.table(), "",
             f"separable conv stack (alpha={alpha}):",
             b_sep.table(), "",
             f"measured ratio {b_sep.total / b_std.total:.6f}",
             f"closed-form single-layer ratio (F=3, N=512, alpha={alpha}): "
             f"{cost_ratio(3, 512, alpha):.6f}"]
    text = "\n".join(lines)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "cost.txt")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text + "\n")
    print(text)
    print(f"table written to {path}")
    return 0


def cmd_mix(cfg, seed, out):
    alphabet = resolve_alphabet(cfg["alphabet"])
    os.makedirs(out, exist_ok=True)
    out_path = os.path.join(out, "mixed_manifest.tsv")
    n_real, n_gen = pipeline.all_in_one_mix(
        cfg.require("mix.real"), cfg.require("mix.generated"), out_path,
        alphabet, make_rng(seed), label_len=cfg["synth.length"])
    print(f"mixed {n_real} labeled + {n_gen} extra-class samples -> {out_path}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "gan-train": cmd_gan_train,
    "gan-generate": cmd_gan_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "decode": cmd_decode,
    "confmap": cmd_confmap,
    "cost": cmd_cost,
    "mix-all-in-one": cmd_mix,
}


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key=value config file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    parser = argparse.ArgumentParser(prog="platekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        return COMMANDS[args.command](cfg, args.seed, args.out)
    except (ConfigError, InvalidArgumentError, InvalidRangeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        return 4
    except (DataError, CheckpointError, PlatekitError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
