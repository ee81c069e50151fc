"""Config parsing and subcommand round-trips through main(), including
the exit-code contract."""

import os

import numpy as np
import pytest

from platekit.cli import main
from platekit.config import SCHEMA, parse_config, parse_stages
from platekit.dataio import read_manifest, read_ppm
from platekit.errors import ConfigError


def write_cfg(path, **kv):
    with open(path, "w") as fh:
        fh.write("# test configuration\n")
        for k, v in kv.items():
            fh.write(f"{k.replace('_DOT_', '.')}={v}\n")
    return str(path)


def cfg_file(tmp_path, name="run.cfg", **kv):
    return write_cfg(tmp_path / name, **kv)


# --- config parsing ----------------------------------------------------------

def test_defaults_without_file():
    cfg = parse_config(None)
    for key, (_, default) in SCHEMA.items():
        assert cfg[key] == default


def test_unknown_key_lookup():
    cfg = parse_config(None)
    with pytest.raises(ConfigError):
        cfg["nonsense.key"]


def test_require_rejects_unset():
    cfg = parse_config(None)
    with pytest.raises(ConfigError):
        cfg.require("eval.model")


def test_parse_config_file(tmp_path):
    path = cfg_file(tmp_path, **{"synth.n": 7, "gan.lambda": 2.5,
                                 "synth.augment": "off"})
    cfg = parse_config(path)
    assert cfg["synth.n"] == 7
    assert cfg["gan.lambda"] == 2.5
    assert cfg["synth.augment"] is False
    assert cfg["image.height"] == 16     # untouched default


def test_parse_config_errors_carry_location(tmp_path):
    path = str(tmp_path / "bad.cfg")
    with open(path, "w") as fh:
        fh.write("synth.n=4\nno.such.key=1\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert "bad.cfg:2" in str(err.value)

    with open(path, "w") as fh:
        fh.write("synth.n=many\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert "bad.cfg:1" in str(err.value)

    with open(path, "w") as fh:
        fh.write("just a line\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_parse_config_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/run.cfg")


def test_parse_stages_fixtures():
    got = parse_stages("a.tsv,3;b.tsv,2,adam:1e-3")
    assert got == [("a.tsv", 3, "adadelta"), ("b.tsv", 2, "adam:1e-3")]
    for bad in ["", "a.tsv", "a.tsv,x", "a.tsv,0", ",3", "a,1,b,c"]:
        with pytest.raises(ConfigError):
            parse_stages(bad)


# --- subcommand round-trips --------------------------------------------------

def synth_cfg(tmp_path, name="synth.cfg", n=6, **extra):
    kv = {"alphabet": "toy", "synth.n": n, "synth.length": 3,
          "image.height": 16, "image.width": 64}
    kv.update(extra)
    return cfg_file(tmp_path, name, **kv)


def test_synth_round_trip_and_determinism(tmp_path):
    cfg = synth_cfg(tmp_path, n=4)
    out1, out2 = str(tmp_path / "d1"), str(tmp_path / "d2")
    assert main(["synth", "--config", cfg, "--seed", "3", "--out", out1]) == 0
    assert main(["synth", "--config", cfg, "--seed", "3", "--out", out2]) == 0
    m1, m2 = os.path.join(out1, "manifest.tsv"), os.path.join(out2, "manifest.tsv")
    records, _ = read_manifest(m1)
    assert len(records) == 4
    assert open(m1).read() == open(m2).read()
    name = records[0][0]
    assert (open(os.path.join(out1, name), "rb").read()
            == open(os.path.join(out2, name), "rb").read())


def test_synth_seed_changes_output(tmp_path):
    cfg = synth_cfg(tmp_path, n=3)
    out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
    assert main(["synth", "--config", cfg, "--seed", "1", "--out", out1]) == 0
    assert main(["synth", "--config", cfg, "--seed", "2", "--out", out2]) == 0
    r1, _ = read_manifest(os.path.join(out1, "manifest.tsv"))
    r2, _ = read_manifest(os.path.join(out2, "manifest.tsv"))
    diff = [a for a, b in zip(r1, r2) if a[1] != b[1]]
    assert diff      # some plate strings differ across seeds


def test_synth_proxy_domain(tmp_path):
    cfg = synth_cfg(tmp_path, n=3, **{"synth.domain": "proxy"})
    out = str(tmp_path / "proxy")
    assert main(["synth", "--config", cfg, "--seed", "0", "--out", out]) == 0
    _, header = read_manifest(os.path.join(out, "manifest.tsv"))
    assert any(h.startswith("proxy-seed") for h in header)


def test_synth_bad_domain_exits_2(tmp_path):
    cfg = synth_cfg(tmp_path, n=2, **{"synth.domain": "real"})
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    path = str(tmp_path / "bad.cfg")
    with open(path, "w") as fh:
        fh.write("bogus=1\n")
    assert main(["synth", "--config", path]) == 2


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One synth + train run shared by the read-only subcommand tests."""
    root = tmp_path_factory.mktemp("flow")
    cfg = synth_cfg(root, n=6)
    data = str(root / "data")
    assert main(["synth", "--config", cfg, "--seed", "1", "--out", data]) == 0
    manifest = os.path.join(data, "manifest.tsv")
    tcfg = cfg_file(root, "train.cfg", alphabet="toy",
                    **{"image.height": 16, "image.width": 64,
                       "train.stages": f"{manifest},1,adam:0.001",
                       "train.batch": 3, "synth.length": 3})
    model_dir = str(root / "model")
    assert main(["train", "--config", tcfg, "--seed", "0",
                 "--out", model_dir]) == 0
    return {"root": root, "manifest": manifest,
            "model": os.path.join(model_dir, "model.ckpt"),
            "history": os.path.join(model_dir, "train_history.csv")}


def test_train_writes_model_and_history(trained):
    assert os.path.exists(trained["model"])
    lines = [l for l in open(trained["history"]) if not l.startswith("#")]
    assert len(lines) >= 1


def test_eval_subcommand(trained, tmp_path):
    cfg = cfg_file(tmp_path, "eval.cfg", alphabet="toy",
                   **{"eval.model": trained["model"],
                      "eval.data": trained["manifest"],
                      "eval.beam_width": 4, "eval.topn": 3})
    out = str(tmp_path / "eval")
    assert main(["eval", "--config", cfg, "--out", out]) == 0
    text = open(os.path.join(out, "eval_report.txt")).read()
    assert "# ra " in text and "# cra " in text and "# top3 " in text
    body = [l for l in text.splitlines() if not l.startswith("#")]
    assert len(body) == 6


def test_decode_subcommand(trained, tmp_path):
    cfg = cfg_file(tmp_path, "decode.cfg", alphabet="toy",
                   **{"decode.model": trained["model"],
                      "decode.data": trained["manifest"],
                      "decode.beam_width": 4, "decode.topn": 2})
    out = str(tmp_path / "dec")
    assert main(["decode", "--config", cfg, "--out", out]) == 0
    lines = open(os.path.join(out, "decode.txt")).read().splitlines()
    assert len(lines) == 6
    for line in lines:
        rel, best, cands = line.split("\t")
        assert rel.endswith(".ppm")
        assert 1 <= len(cands.split("|")) <= 2


def test_confmap_subcommand(trained, tmp_path):
    cfg = cfg_file(tmp_path, "cm.cfg",
                   **{"confmap.model": trained["model"], "confmap.n": 8})
    out = str(tmp_path / "cm")
    assert main(["confmap", "--config", cfg, "--seed", "2", "--out", out]) == 0
    rows = open(os.path.join(out, "confmap.csv")).read().splitlines()
    assert len(rows) == 17                    # toy classes + blank
    cols = np.array([[float(v) for v in r.split(",")] for r in rows])
    assert np.allclose(cols.sum(axis=0), 1.0, atol=1e-6)
    assert open(os.path.join(out, "confmap.pgm"), "rb").read(2) == b"P5"


def test_cost_subcommand(tmp_path):
    cfg = cfg_file(tmp_path, "cost.cfg", alphabet="toy",
                   **{"image.height": 16, "image.width": 64})
    out = str(tmp_path / "cost")
    assert main(["cost", "--config", cfg, "--out", out]) == 0
    text = open(os.path.join(out, "cost.txt")).read()
    assert "0.113064" in text
    assert "total" in text and "depthwise" in text


def test_mix_subcommand(trained, tmp_path):
    gen_dir = str(tmp_path / "gen")
    cfg = synth_cfg(tmp_path, "gen.cfg", n=3)
    assert main(["synth", "--config", cfg, "--seed", "9",
                 "--out", gen_dir]) == 0
    mix_cfg = cfg_file(tmp_path, "mix.cfg", alphabet="toy",
                       **{"mix.real": trained["manifest"],
                          "mix.generated": os.path.join(gen_dir, "manifest.tsv"),
                          "synth.length": 3})
    out = str(tmp_path / "mix")
    assert main(["mix-all-in-one", "--config", mix_cfg, "--out", out]) == 0
    records, header = read_manifest(os.path.join(out, "mixed_manifest.tsv"))
    assert len(records) == 9
    assert "real 6 generated 3" in header


def test_eval_missing_model_exits_3(trained, tmp_path):
    cfg = cfg_file(tmp_path, "e.cfg",
                   **{"eval.model": str(tmp_path / "gone.ckpt"),
                      "eval.data": trained["manifest"]})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_train_without_stages_exits_2(tmp_path):
    cfg = cfg_file(tmp_path, "t.cfg", alphabet="toy")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_gan_train_and_generate(tmp_path):
    scfg = synth_cfg(tmp_path, "a.cfg", n=4,
                     **{"image.height": 36, "image.width": 36})
    src, dst = str(tmp_path / "src"), str(tmp_path / "dst")
    assert main(["synth", "--config", scfg, "--seed", "1", "--out", src]) == 0
    pcfg = synth_cfg(tmp_path, "b.cfg", n=4,
                     **{"image.height": 36, "image.width": 36,
                        "synth.domain": "proxy"})
    assert main(["synth", "--config", pcfg, "--seed", "2", "--out", dst]) == 0

    gcfg = cfg_file(tmp_path, "gan.cfg",
                    **{"gan.source": os.path.join(src, "manifest.tsv"),
                       "gan.target": os.path.join(dst, "manifest.tsv"),
                       "gan.variant": "lsgan", "gan.epochs": 1,
                       "gan.steps_per_epoch": 1, "gan.base": 2,
                       "gan.d_base": 2, "gan.resblocks": 1, "gan.batch": 2,
                       "gan.height": 32, "gan.width": 32})
    gan_out = str(tmp_path / "gan")
    assert main(["gan-train", "--config", gcfg, "--seed", "0",
                 "--out", gan_out]) == 0
    assert os.path.exists(os.path.join(gan_out, "g_epoch_001.ckpt"))
    assert os.path.exists(os.path.join(gan_out, "gan_history.csv"))

    tcfg = cfg_file(tmp_path, "tr.cfg",
                    **{"gan.models": gan_out,
                       "gan.source": os.path.join(src, "manifest.tsv"),
                       "gan.last_k": 1})
    trans = str(tmp_path / "trans")
    assert main(["gan-generate", "--config", tcfg, "--out", trans]) == 0
    records, header = read_manifest(os.path.join(trans, "manifest.tsv"))
    assert len(records) == 4
    src_records, _ = read_manifest(os.path.join(src, "manifest.tsv"))
    assert [ids for _, ids in records] == [ids for _, ids in src_records]
    img = read_ppm(os.path.join(trans, records[0][0]))
    assert img.shape == (32, 32, 3)


def test_gan_generate_without_checkpoints_exits_3(tmp_path):
    cfg = cfg_file(tmp_path, "g.cfg",
                   **{"gan.models": str(tmp_path / "none"),
                      "gan.source": str(tmp_path / "none.tsv")})
    assert main(["gan-generate", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 3
