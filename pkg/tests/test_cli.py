"""CLI thin client: subcommands drive the in-process service."""

import csv
import json

import numpy as np
from click.testing import CliRunner

from partmap import formats
from partmap.cli import main


def run(*args):
    result = CliRunner().invoke(main, list(args), catch_exceptions=False)
    return result


def run_json(*args):
    result = run(*args)
    assert result.exit_code == 0, result.output
    return json.loads(result.output)


def test_full_pipeline_via_cli(feature_world, tmp_path):
    train_fmap, train_labels, _, _ = feature_world.write_labeled("train", per_class=8)
    test_fmap, test_labels, test_ids, test_truth = feature_world.write_labeled("test", per_class=4)
    bg_fmap = feature_world.write_background("bg")
    dict_path = tmp_path / "dict.json"
    model_path = tmp_path / "model.json"
    pred_path = tmp_path / "pred.csv"

    body = run_json(
        "build-dict",
        "--features", str(train_fmap),
        "--labels", str(train_labels),
        "--k-per-class", "3",
        "--seed", "2",
        "--out", str(dict_path),
    )
    assert body["parts"] == 9

    body = run_json(
        "encode",
        "--features", str(train_fmap),
        "--dict", str(dict_path),
        "--out", str(tmp_path / "train.bmap"),
    )
    assert body["maps"] == 24

    body = run_json(
        "train",
        "--features", str(train_fmap),
        "--labels", str(train_labels),
        "--dict", str(dict_path),
        "--mixtures", "2",
        "--iters", "5",
        "--seed", "4",
        "--bg-features", f"noise={bg_fmap}",
        "--out", str(model_path),
    )
    assert body["backgrounds"] == ["noise"]

    body = run_json(
        "classify",
        "--features", str(test_fmap),
        "--model", str(model_path),
        "--ids", str(test_labels),
        "--occlusion", "on",
        "--out", str(pred_path),
    )
    predicted = {p["source_id"]: p["label"] for p in body["predictions"]}
    assert predicted == dict(zip(test_ids, test_truth))
    with open(pred_path, newline="") as fh:
        header = next(csv.reader(fh))
    assert header[:2] == ["source_id", "predicted_label"]
    assert header[2:] == [f"score_class{i}" for i in range(3)]

    body = run_json(
        "explain",
        "--features", str(test_fmap),
        "--model", str(model_path),
        "--index", "1",
        "--out-prefix", str(tmp_path / "why"),
    )
    assert (tmp_path / "why.pgm").exists()
    assert (tmp_path / "why_parts.csv").exists()

    # synthetic external classifier: always label 0, never confident
    probs_path = tmp_path / "probs.csv"
    formats.write_probabilities(
        test_ids, np.tile([0.4, 0.3, 0.3], (len(test_ids), 1)), probs_path
    )
    fused_path = tmp_path / "fused.csv"
    body = run_json(
        "fuse",
        "--dcnn-probs", str(probs_path),
        "--comp-pred", str(pred_path),
        "--tau", "0.6",
        "--out", str(fused_path),
    )
    assert body["branch_usage"] == {"compositional": 1.0}

    report = run_json(
        "eval",
        "--pred", str(fused_path),
        "--labels", str(test_labels),
        "--out", str(tmp_path / "report.json"),
    )
    assert report["per_condition"]["all"]["accuracy"] == 1.0
    assert report["branch_usage"] == {"compositional": 1.0}


def test_synth_subcommand(tmp_path):
    spec = {
        "height": 2,
        "width": 3,
        "parts": 4,
        "seed": 8,
        "classes": [
            {"modes": [[[0.9, 0.05, 0.05, 0.05]] * 6]},
            {"modes": [[[0.05, 0.9, 0.05, 0.05]] * 6]},
        ],
        "background": [0.4, 0.4, 0.4, 0.4],
        "draws": [{"class": 0, "n": 5}, {"class": 1, "n": 5}],
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    body = run_json(
        "synth",
        "--spec", str(spec_path),
        "--out", str(tmp_path / "maps.bmap"),
        "--labels-out", str(tmp_path / "labels.csv"),
    )
    assert body["maps"] == 10
    labeled = formats.read_labels(tmp_path / "labels.csv")
    assert sorted(set(labeled.labels)) == [0, 1]


def test_cli_error_paths_exit_nonzero(tmp_path):
    result = run(
        "encode",
        "--features", str(tmp_path / "missing.fmap"),
        "--dict", str(tmp_path / "missing.json"),
        "--out", str(tmp_path / "out.bmap"),
    )
    assert result.exit_code == 1
    assert "error" in result.output


def test_help_lists_subcommands():
    result = run("--help")
    assert result.exit_code == 0
    for command in ("build-dict", "encode", "train", "classify", "explain", "fuse", "eval", "synth", "serve"):
        assert command in result.output
