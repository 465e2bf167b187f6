"""Every file pyfeatures emits must validate against the partmap readers."""

import csv

import numpy as np
import pytest

import partmap.formats as partmap_formats
from pyfeatures import extract, occlude, softmax
from pyfeatures.data import resize_short_edge
from pyfeatures import fmapio


def test_resize_rule_example():
    # the contract's worked example: 448x300 at short edge 224 -> 224x334
    image = np.zeros((300, 448), dtype=np.uint8)
    assert resize_short_edge(image, 224).shape == (224, 334)
    image = np.zeros((448, 300), dtype=np.uint8)
    assert resize_short_edge(image, 224).shape == (334, 224)


def test_fmap_writer_matches_partmap_reader(tmp_path):
    rng = np.random.default_rng(0)
    maps = rng.normal(size=(3, 4, 5, 6)).astype(np.float32)
    path = tmp_path / "x.fmap"
    fmapio.write_fmap(maps, path)
    loaded = partmap_formats.read_feature_maps(path)
    assert len(loaded) == 3
    for i, fm in enumerate(loaded):
        assert np.array_equal(fm.data, maps[i])
    # and our own reader agrees byte for byte
    assert np.array_equal(fmapio.read_fmap(path), maps)


def test_extract_output_round_trips_through_partmap(tmp_path):
    fmap_path = tmp_path / "digits.fmap"
    labels_path = tmp_path / "labels.csv"
    patches_path = tmp_path / "patches.csv"
    extract.main(
        ["--dataset", "sklearn-digits", "--split", "test", "--limit", "6",
         "--backbone", "smallnet", "--weights", "random",
         "--short-edge", "112", "--out", str(fmap_path),
         "--labels-out", str(labels_path), "--patch-index", str(patches_path)]
    )
    maps = partmap_formats.read_feature_maps(fmap_path)
    assert len(maps) == 6
    assert maps[0].data.shape == (7, 7, 64)
    labeled = partmap_formats.read_labels(labels_path)
    assert len(labeled) == 6
    with open(patches_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["source_id", "row", "col", "y0", "x0", "y1", "x1"]
    assert len(rows) == 1 + 6 * 49  # one box per grid position per image


def test_occlude_outputs_feed_the_pipeline(tmp_path):
    out_dir = tmp_path / "occ"
    occlude.main(
        ["--dataset", "sklearn-digits", "--split", "test", "--limit", "4",
         "--level", "1", "--kind", "white", "--seed", "3",
         "--short-edge", "112", "--out-dir", str(out_dir)]
    )
    labeled = partmap_formats.read_labels(out_dir / "labels.csv")
    conditions = partmap_formats.read_conditions(out_dir / "conditions.csv")
    assert len(labeled) == 4
    assert set(conditions.values()) == {"level1-white"}
    with open(out_dir / "fractions.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    for _, fraction in rows:
        assert 0.20 <= float(fraction) <= 0.40
    # the occluded directory itself is a loadable dataset
    fmap_path = tmp_path / "occ.fmap"
    extract.main(
        ["--dataset", "image-dir", "--data-dir", str(out_dir),
         "--backbone", "smallnet", "--weights", "random",
         "--short-edge", "112", "--out", str(fmap_path)]
    )
    assert len(partmap_formats.read_feature_maps(fmap_path)) == 4


def test_softmax_output_round_trips_through_partmap(tmp_path):
    probs_path = tmp_path / "probs.csv"
    softmax.main(
        ["--dataset", "sklearn-digits", "--split", "test", "--limit", "5",
         "--backbone", "smallnet", "--weights", "random",
         "--short-edge", "112", "--out", str(probs_path)]
    )
    ids, probs = partmap_formats.read_probabilities(probs_path)
    assert len(ids) == 5
    assert probs.shape == (5, 10)
    assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-4)


def test_canvases_mode(tmp_path):
    out_dir = tmp_path / "bg"
    occlude.main(
        ["--canvases", "3", "--kind", "texture", "--seed", "1",
         "--canvas-size", "64", "--out-dir", str(out_dir)]
    )
    labeled = partmap_formats.read_labels(out_dir / "labels.csv")
    assert len(labeled) == 3
    conditions = partmap_formats.read_conditions(out_dir / "conditions.csv")
    assert set(conditions.values()) == {"canvas-texture"}
