"""File-level orchestration of the full train/classify/fuse/evaluate flow.

These functions are the single implementation behind both the HTTP service
and the CLI: every argument is a path or a plain value, every result is a
JSON-friendly dict.
"""

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import formats
from .bernoulli import (
    classify_single,
    estimate_background,
    position_log_likelihood,
)
from .dictionary import encode, learn_dictionary
from .errors import ParameterError, ShapeError, ValidationError
from .fusion import evaluate, fuse
from .mixtures import fit_mixture
from .rng import class_seed
from .synth import load_synth_job, run_synth_job
from .types import (
    ClassModel,
    FeatureMap,
    Hyperparameters,
    LabeledSet,
    Model,
    PartDetectionMap,
)


def _read_ids(path) -> list[str]:
    """First column of any headered CSV, used to attach ids to binary files."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return [row[0] for row in rows[1:] if row]


def build_dictionary(
    features_path: str,
    labels_path: str,
    out_path: str,
    k_per_class: int = 50,
    delta: float = 0.45,
    seed: int = 0,
    max_iters: int = 100,
    class_names: Sequence[str] | None = None,
) -> dict:
    """Learn the part dictionary and write a model fragment (no class models yet)."""
    maps = formats.read_feature_maps(features_path)
    labeled = formats.read_labels(labels_path, class_names)
    dictionary = learn_dictionary(maps, labeled, k_per_class, seed=seed, max_iters=max_iters)
    fragment = Model(
        dictionary=dictionary,
        class_models=(),
        background_models=(),
        hyperparameters=Hyperparameters(delta=delta, k_per_class=k_per_class),
        class_names=labeled.class_names,
    )
    formats.save_model(fragment, out_path)
    return {
        "out_path": str(out_path),
        "parts": dictionary.k,
        "classes": len(labeled.class_names),
        "channels": dictionary.channels,
    }


def encode_features(features_path: str, model_path: str, out_path: str) -> dict:
    """Binarize a feature-map file against a model's dictionary."""
    model = formats.load_model(model_path)
    maps = formats.read_feature_maps(features_path)
    detections = [encode(m, model.dictionary, model.hyperparameters.delta) for m in maps]
    formats.write_detection_maps(detections, out_path)
    active = float(np.mean([d.bits.mean(axis=2).mean() for d in detections])) if detections else 0.0
    return {
        "out_path": str(out_path),
        "maps": len(detections),
        "height": detections[0].height if detections else 0,
        "width": detections[0].width if detections else 0,
        "parts": model.dictionary.k,
        "mean_active_fraction": active,
    }


def train(
    features_path: str,
    labels_path: str,
    dict_path: str,
    out_path: str,
    mixtures: int = 4,
    iters: int = 10,
    prior: float = 0.7,
    tau: float = 0.6,
    seed: int = 0,
    bg_features: Sequence[tuple[str, str]] = (),
) -> dict:
    """Fit per-class mixtures on encoded features and attach background models.

    ``bg_features`` pairs an occluder kind with an FMAP path of off-object
    features; each file becomes one named background model. Per-class mixture
    fits draw their seeds from per-class substreams of ``seed``.
    """
    fragment = formats.load_model(dict_path)
    feature_maps = formats.read_feature_maps(features_path)
    labeled = formats.read_labels(labels_path, fragment.class_names or None)
    if len(feature_maps) != len(labeled):
        raise ShapeError(f"{len(feature_maps)} feature maps vs {len(labeled)} label rows")
    delta = fragment.hyperparameters.delta
    detections = [
        encode(FeatureMap(data=m.data, source_id=sid), fragment.dictionary, delta)
        for m, sid in zip(feature_maps, labeled.ids)
    ]
    class_models = []
    objectives = {}
    for label, name in enumerate(labeled.class_names):
        members = [d for d, lab in zip(detections, labeled.labels) if lab == label]
        if not members:
            raise ValidationError(f"class {label} ({name}) has no training maps")
        m_eff = min(mixtures, len(members))
        fitted = fit_mixture(
            members, m=m_eff, iters=iters, seed=class_seed(seed, label), class_label=label
        )
        class_models.append(ClassModel(class_label=label, components=fitted.components))
        objectives[name] = list(fitted.objective_history)
    backgrounds = []
    for kind, path in bg_features:
        bg_maps = formats.read_feature_maps(path)
        vectors = np.concatenate(
            [
                encode(m, fragment.dictionary, delta).bits.reshape(-1, fragment.dictionary.k)
                for m in bg_maps
            ]
        )
        backgrounds.append(estimate_background(vectors, occluder_kind=kind))
    model = Model(
        dictionary=fragment.dictionary,
        class_models=tuple(class_models),
        background_models=tuple(backgrounds),
        hyperparameters=Hyperparameters(
            delta=delta,
            mixtures=mixtures,
            k_per_class=fragment.hyperparameters.k_per_class,
            occlusion_prior=prior,
            tau=tau,
        ),
        class_names=labeled.class_names,
    )
    formats.save_model(model, out_path)
    return {
        "out_path": str(out_path),
        "classes": len(class_models),
        "mixtures": mixtures,
        "backgrounds": [bg.occluder_kind for bg in backgrounds],
        "objectives": objectives,
    }


def _load_model_and_detections(
    features_path: str, model_path: str, ids_path: str | None
) -> tuple[Model, list[PartDetectionMap]]:
    model = formats.load_model(model_path)
    feature_maps = formats.read_feature_maps(features_path)
    if ids_path:
        ids = _read_ids(ids_path)
        if len(ids) != len(feature_maps):
            raise ShapeError(f"{len(ids)} ids for {len(feature_maps)} feature maps")
        feature_maps = [
            FeatureMap(data=m.data, source_id=sid) for m, sid in zip(feature_maps, ids)
        ]
    delta = model.hyperparameters.delta
    return model, [encode(m, model.dictionary, delta) for m in feature_maps]


def classify(
    features_path: str,
    model_path: str,
    out_path: str | None = None,
    prior: float = 0.7,
    use_occlusion: bool = True,
    background: str = "pooled",
    ids_path: str | None = None,
) -> dict:
    """Classify every map in a feature file; optionally write the CSV."""
    model, detections = _load_model_and_detections(features_path, model_path, ids_path)
    if not model.class_models:
        raise ValidationError(f"{model_path}: model has no class models; train first")
    bg = model.background(background) if use_occlusion else None
    rows = []
    for det in detections:
        result = classify_single(
            det, model.class_models, bg, prior=prior, use_occlusion=use_occlusion
        )
        rows.append(
            {
                "source_id": det.source_id,
                "label": result.label,
                "scores": [float(s) for s in result.scores],
                "visible_fraction": result.occlusion.visible_fraction,
            }
        )
    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            n_classes = len(model.class_models)
            writer.writerow(
                ["source_id", "predicted_label"] + [f"score_class{i}" for i in range(n_classes)]
            )
            for row in rows:
                writer.writerow(
                    [row["source_id"], row["label"]] + [repr(s) for s in row["scores"]]
                )
    return {"out_path": str(out_path) if out_path else None, "predictions": rows}


def _ratio_to_pgm(ratio: np.ndarray) -> bytes:
    """P5 grayscale with a ratio of 0 mapped to gray 128 (occluder = bright)."""
    finite = ratio[np.isfinite(ratio)]
    scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    if scale == 0.0:
        scale = 1.0
    pixels = np.clip(np.round(128.0 + 127.0 * ratio / scale), 0, 255)
    pixels = np.where(np.isneginf(ratio), 0.0, pixels).astype(np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def explain(
    features_path: str,
    model_path: str,
    index: int,
    out_prefix: str,
    prior: float = 0.7,
    background: str = "pooled",
    top: int = 5,
) -> dict:
    """Explain one classification: occlusion heatmap plus the top part detections.

    Writes ``<prefix>.pgm`` (ratio map, 0 -> gray 128) and ``<prefix>_parts.csv``
    listing the positions whose foreground branch scored highest, each with
    its strongest active part and that part's source class.
    """
    model, detections = _load_model_and_detections(features_path, model_path, None)
    if not 0 <= index < len(detections):
        raise ParameterError(f"index {index} outside the {len(detections)} stored maps")
    det = detections[index]
    bg = model.background(background)
    result = classify_single(det, model.class_models, bg, prior=prior, use_occlusion=True)
    grid = model.class_models[result.label].components[result.best_mixture]
    heatmap_path = Path(f"{out_prefix}.pgm")
    heatmap_path.write_bytes(_ratio_to_pgm(result.occlusion.ratio_map))
    fg = position_log_likelihood(det.bits, grid.alpha) + math.log(prior)
    masked_alpha = np.where(det.bits, grid.alpha, -1.0)
    best_part = np.argmax(masked_alpha, axis=2)
    order = np.argsort(fg.ravel())[::-1][:top]
    parts_path = Path(f"{out_prefix}_parts.csv")
    with open(parts_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "part_index", "part_class", "fg_score"])
        for flat in order:
            r, c = divmod(int(flat), det.width)
            part = int(best_part[r, c])
            writer.writerow(
                [r, c, part, model.dictionary.class_of_part[part], repr(float(fg[r, c]))]
            )
    return {
        "heatmap_path": str(heatmap_path),
        "parts_path": str(parts_path),
        "source_id": det.source_id,
        "label": result.label,
        "class_name": model.class_names[result.label] if model.class_names else str(result.label),
        "best_mixture": result.best_mixture,
        "log_likelihood": result.occlusion.log_likelihood,
        "visible_fraction": result.occlusion.visible_fraction,
    }


def fuse_files(
    dcnn_probs_path: str, comp_pred_path: str, out_path: str, tau: float = 0.6
) -> dict:
    """Gate external probabilities against compositional predictions, row by row."""
    ids, probs = formats.read_probabilities(dcnn_probs_path)
    comp_ids, comp_labels, _ = formats.read_predictions(comp_pred_path)
    comp_by_id = dict(zip(comp_ids, comp_labels))
    decisions = []
    for source_id, row in zip(ids, probs):
        if source_id not in comp_by_id:
            raise ValidationError(f"no compositional prediction for {source_id!r}")
        decisions.append((source_id, fuse(row, comp_by_id[source_id], tau)))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "predicted_label", "branch", "dcnn_confidence"])
        for source_id, decision in decisions:
            writer.writerow(
                [source_id, decision.label, decision.branch, repr(decision.dcnn_confidence)]
            )
    usage: dict[str, float] = {}
    for _, decision in decisions:
        usage[decision.branch] = usage.get(decision.branch, 0.0) + 1.0
    usage = {k: v / len(decisions) for k, v in usage.items()}
    return {"out_path": str(out_path), "n_items": len(decisions), "branch_usage": usage}


def evaluate_files(
    pred_path: str,
    labels_path: str,
    conditions_path: str | None = None,
    out_path: str | None = None,
    class_names: Sequence[str] | None = None,
) -> dict:
    """Score a predictions CSV against a labels CSV; optionally write the report."""
    ids, labels, branches = formats.read_predictions(pred_path)
    truth = formats.read_labels(labels_path, class_names)
    tags = formats.read_conditions(conditions_path) if conditions_path else None
    report = evaluate(list(zip(ids, labels)), truth, condition_tags=tags, branches=branches)
    doc = report.to_dict()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    doc["out_path"] = str(out_path) if out_path else None
    return doc


def synthesize(spec_path: str, out_path: str, labels_out: str | None = None) -> dict:
    """Materialize a synthetic-fixture spec into a detection-map file."""
    job = load_synth_job(spec_path)
    maps, labels = run_synth_job(job)
    formats.write_detection_maps(maps, out_path)
    if labels_out:
        labeled = LabeledSet(
            ids=tuple(m.source_id for m in maps),
            labels=tuple(labels),
            class_names=tuple(f"class{i}" for i in range(job.spec.n_classes)),
        )
        formats.write_labels(labeled, labels_out)
    return {
        "out_path": str(out_path),
        "labels_path": str(labels_out) if labels_out else None,
        "maps": len(maps),
    }
