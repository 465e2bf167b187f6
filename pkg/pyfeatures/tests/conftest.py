"""Pipeline harness shared by the pyfeatures tests.

The full flow (backbone training, occlusion synthesis, extraction, partmap
dictionary/mixture training, classification, softmax export, fusion,
evaluation) runs once per session; the partmap side is driven exclusively
through its CLI, which is the interface contract between the two packages.
"""

import json
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

from pyfeatures import extract, occlude, softmax, train_backbone


def partmap_cli(*args) -> dict:
    """Run a partmap CLI command; return its JSON response."""
    result = subprocess.run(
        [sys.executable, "-m", "partmap.cli", *map(str, args)],
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(result.stdout)


@dataclass
class PipelineResult:
    work: Path
    weights: Path
    manifest: dict
    accuracies: dict[str, float]  # branch/condition -> mean accuracy
    branch_usage_clean: dict[str, float]


def run_pipeline(
    work: Path,
    dataset: str,
    data_dir: str | None = None,
    train_limit: int | None = None,
    test_limit: int | None = None,
    epochs: int = 8,
    short_edge: int = 112,
    occlude_short_edge: int | None = 112,
    k_per_class: int = 10,
    mixtures: int = 2,
    iters: int = 5,
    seed: int = 0,
) -> PipelineResult:
    work.mkdir(parents=True, exist_ok=True)
    weights = work / "weights.pt"
    manifest_path = work / "manifest.json"
    data_args = ["--dataset", dataset] + (["--data-dir", str(data_dir)] if data_dir else [])

    train_backbone.main(
        data_args
        + ["--split", "train", "--short-edge", str(short_edge), "--epochs", str(epochs)]
        + (["--limit", str(train_limit)] if train_limit else [])
        + ["--seed", str(seed), "--out", str(weights), "--manifest", str(manifest_path)]
    )

    occ_dir = work / "occluded"
    occlude.main(
        data_args
        + ["--split", "test", "--level", "2", "--kind", "noise", "--seed", str(seed + 1)]
        + (["--limit", str(test_limit)] if test_limit else [])
        + ["--short-edge", str(occlude_short_edge or 0), "--out-dir", str(occ_dir)]
    )
    bg_dir = work / "bg-canvases"
    occlude.main(
        ["--canvases", "40", "--kind", "noise", "--seed", str(seed + 2)]
        + ["--canvas-size", str(short_edge), "--out-dir", str(bg_dir)]
    )

    backbone_args = ["--backbone", "smallnet", "--weights", str(weights)]
    resize_args = ["--short-edge", str(short_edge)]

    def extract_to(stem: str, *source_args) -> tuple[Path, Path]:
        fmap, labels = work / f"{stem}.fmap", work / f"{stem}-labels.csv"
        extract.main(
            [*source_args, *backbone_args, *resize_args, "--layer", "pool4",
             "--out", str(fmap), "--labels-out", str(labels)]
        )
        return fmap, labels

    train_fmap, train_labels = extract_to(
        "train", *data_args, "--split", "train",
        *(["--limit", str(train_limit)] if train_limit else []),
    )
    test_fmap, test_labels = extract_to(
        "test", *data_args, "--split", "test",
        *(["--limit", str(test_limit)] if test_limit else []),
    )
    occ_fmap, occ_labels = extract_to("occ", "--dataset", "image-dir", "--data-dir", str(occ_dir))
    bg_fmap, _ = extract_to("bg", "--dataset", "image-dir", "--data-dir", str(bg_dir))

    dict_path = work / "dict.json"
    model_path = work / "model.json"
    partmap_cli(
        "build-dict", "--features", train_fmap, "--labels", train_labels,
        "--k-per-class", k_per_class, "--delta", 0.45, "--seed", seed + 3,
        "--out", dict_path,
    )
    partmap_cli(
        "train", "--features", train_fmap, "--labels", train_labels,
        "--dict", dict_path, "--mixtures", mixtures, "--iters", iters,
        "--prior", 0.7, "--seed", seed + 4, "--bg-features", f"noise={bg_fmap}",
        "--out", model_path,
    )

    def classify_to(stem, fmap, labels, occlusion) -> Path:
        out = work / f"{stem}.csv"
        partmap_cli(
            "classify", "--features", fmap, "--model", model_path, "--ids", labels,
            "--occlusion", occlusion, "--prior", 0.7, "--out", out,
        )
        return out

    comp_occ = classify_to("comp-occ", occ_fmap, occ_labels, "on")
    comp_occ_plain = classify_to("comp-occ-plain", occ_fmap, occ_labels, "off")
    comp_clean = classify_to("comp-clean", test_fmap, test_labels, "on")

    probs_occ = work / "probs-occ.csv"
    softmax.main(
        ["--dataset", "image-dir", "--data-dir", str(occ_dir), *backbone_args,
         *resize_args, "--out", str(probs_occ)]
    )
    probs_clean = work / "probs-clean.csv"
    softmax.main(
        data_args
        + ["--split", "test", *(["--limit", str(test_limit)] if test_limit else [])]
        + [*backbone_args, *resize_args, "--out", str(probs_clean)]
    )

    def fuse_to(stem, probs, comp, tau) -> tuple[Path, dict]:
        out = work / f"{stem}.csv"
        body = partmap_cli(
            "fuse", "--dcnn-probs", probs, "--comp-pred", comp, "--tau", tau, "--out", out
        )
        return out, body

    dcnn_occ, _ = fuse_to("dcnn-occ", probs_occ, comp_occ, 0)  # tau=0: softmax-only
    dcnn_clean, _ = fuse_to("dcnn-clean", probs_clean, comp_clean, 0)
    fused_occ, _ = fuse_to("fused-occ", probs_occ, comp_occ, 0.6)
    fused_clean, clean_fusion = fuse_to("fused-clean", probs_clean, comp_clean, 0.6)

    def accuracy(pred: Path, labels: Path) -> float:
        body = partmap_cli("eval", "--pred", pred, "--labels", labels)
        return body["mean_accuracy"]

    accuracies = {
        "comp_occ": accuracy(comp_occ, occ_labels),
        "comp_occ_plain": accuracy(comp_occ_plain, occ_labels),
        "comp_clean": accuracy(comp_clean, test_labels),
        "dcnn_occ": accuracy(dcnn_occ, occ_labels),
        "dcnn_clean": accuracy(dcnn_clean, test_labels),
        "fused_occ": accuracy(fused_occ, occ_labels),
        "fused_clean": accuracy(fused_clean, test_labels),
    }
    return PipelineResult(
        work=work,
        weights=weights,
        manifest=json.loads(manifest_path.read_text()),
        accuracies=accuracies,
        branch_usage_clean=clean_fusion["branch_usage"],
    )


@pytest.fixture(scope="session")
def digits_pipeline(tmp_path_factory) -> PipelineResult:
    return run_pipeline(tmp_path_factory.mktemp("digits-e2e"), dataset="sklearn-digits")
