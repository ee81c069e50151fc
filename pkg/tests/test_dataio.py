"""Pixmap, manifest, and loss-history file round-trips with their
malformed-input failure modes."""

import os

import numpy as np
import pytest

from platekit.dataio import (load_dataset, read_loss_history, read_manifest,
                             read_ppm, write_loss_history, write_manifest,
                             write_pgm, write_ppm)
from platekit.errors import DataError, InvalidRangeError
from platekit.tensor import make_rng


def test_ppm_round_trip(tmp_path):
    img = make_rng(0).random((5, 7, 3))
    path = str(tmp_path / "img.ppm")
    write_ppm(path, img)
    back = read_ppm(path)
    assert back.shape == (5, 7, 3)
    # 8-bit quantization: within half a step
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12


def test_ppm_quantization_is_stable(tmp_path):
    img = make_rng(1).random((4, 4, 3))
    p1, p2 = str(tmp_path / "a.ppm"), str(tmp_path / "b.ppm")
    write_ppm(p1, img)
    write_ppm(p2, read_ppm(p1))
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_ppm_write_validation(tmp_path):
    path = str(tmp_path / "x.ppm")
    with pytest.raises(DataError):
        write_ppm(path, np.zeros((4, 4)))
    with pytest.raises(InvalidRangeError):
        write_ppm(path, np.full((2, 2, 3), 1.5))
    with pytest.raises(DataError):
        write_pgm(path, np.zeros((4, 4, 3)))
    with pytest.raises(InvalidRangeError):
        write_pgm(path, np.full((2, 2), -0.1))


def test_pgm_header(tmp_path):
    path = str(tmp_path / "g.pgm")
    write_pgm(path, np.linspace(0, 1, 12).reshape(3, 4))
    blob = open(path, "rb").read()
    assert blob.startswith(b"P5\n4 3\n255\n")
    assert len(blob) == len(b"P5\n4 3\n255\n") + 12


def test_read_ppm_rejects_bad_files(tmp_path):
    bad_magic = str(tmp_path / "m.ppm")
    with open(bad_magic, "wb") as fh:
        fh.write(b"P3\n2 2\n255\n")
    with pytest.raises(DataError):
        read_ppm(bad_magic)

    truncated = str(tmp_path / "t.ppm")
    with open(truncated, "wb") as fh:
        fh.write(b"P6\n4 4\n255\n\x00\x01")
    with pytest.raises(DataError):
        read_ppm(truncated)

    deep = str(tmp_path / "d.ppm")
    with open(deep, "wb") as fh:
        fh.write(b"P6\n1 1\n65535\n\x00\x00\x00")
    with pytest.raises(DataError):
        read_ppm(deep)


def test_read_ppm_allows_header_comments(tmp_path):
    path = str(tmp_path / "c.ppm")
    with open(path, "wb") as fh:
        fh.write(b"P6\n# a comment\n2 1\n255\n" + bytes(6))
    img = read_ppm(path)
    assert img.shape == (1, 2, 3)
    assert np.all(img == 0.0)


def test_manifest_round_trip(tmp_path):
    path = str(tmp_path / "manifest.tsv")
    records = [("a.ppm", [1, 2, 3]), ("sub/b.ppm", []), ("c.ppm", [7])]
    write_manifest(path, records, header_lines=["geometry 4 4", "seed 9"])
    back, header = read_manifest(path)
    assert back == records
    assert header == ["geometry 4 4", "seed 9"]


def test_manifest_malformed(tmp_path):
    path = str(tmp_path / "m.tsv")
    with open(path, "w") as fh:
        fh.write("only-one-column\n")
    with pytest.raises(DataError):
        read_manifest(path)
    with open(path, "w") as fh:
        fh.write("a.ppm\tnot_an_id\n")
    with pytest.raises(DataError):
        read_manifest(path)
    with pytest.raises(DataError):
        read_manifest(str(tmp_path / "missing.tsv"))


def test_load_dataset_resolves_relative_paths(tmp_path):
    sub = tmp_path / "data"
    os.makedirs(str(sub))
    img = make_rng(3).random((4, 6, 3))
    write_ppm(str(sub / "p.ppm"), img)
    manifest = str(sub / "manifest.tsv")
    write_manifest(manifest, [("p.ppm", [5, 6])])
    data = load_dataset(manifest)
    assert len(data) == 1
    got, ids = data[0]
    assert ids == [5, 6]
    assert got.shape == (4, 6, 3)


def test_load_dataset_missing_image(tmp_path):
    manifest = str(tmp_path / "manifest.tsv")
    write_manifest(manifest, [("gone.ppm", [1])])
    with pytest.raises(FileNotFoundError):
        load_dataset(manifest)


def test_loss_history_round_trip(tmp_path):
    path = str(tmp_path / "loss.csv")
    records = [(0, "d", [1.5, 2.0]), (1, "g", [0.25, 0.5, 0.125]),
               (2, "g-val", [1.0])]
    write_loss_history(path, records, header_lines=["variant wgan"])
    back = read_loss_history(path)
    assert back == records
    assert open(path).readline() == "# variant wgan\n"


def test_loss_history_malformed(tmp_path):
    path = str(tmp_path / "loss.csv")
    with open(path, "w") as fh:
        fh.write("0,d\n")
    with pytest.raises(DataError):
        read_loss_history(path)
