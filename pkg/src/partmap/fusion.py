"""Confidence-gated fusion with an external classifier, and evaluation.

The external classifier contributes a per-class probability row; when its
top probability clears the gate threshold its argmax wins, otherwise the
compositional prediction does. Evaluation reports per-condition accuracies,
their unweighted mean, a confusion matrix, and branch-usage fractions.
"""

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError, ValidationError
from .types import LabeledSet

EXTERNAL = "external"
COMPOSITIONAL = "compositional"

PROB_SUM_TOLERANCE = 1e-4


@dataclass(frozen=True)
class FusionDecision:
    label: int
    branch: str  # EXTERNAL iff the gate fired
    dcnn_confidence: float
    comp_scores: tuple[float, ...] = ()


def fuse(
    dcnn_probs: Sequence[float] | np.ndarray,
    comp_label: int,
    tau: float,
    comp_scores: Sequence[float] = (),
) -> FusionDecision:
    """Gate on the external classifier's max probability.

    If max(dcnn_probs) > tau the external argmax decides (lowest index on
    ties), otherwise the compositional label does. Probabilities must be
    nonnegative and sum to 1 within 1e-4; they are never re-normalized.
    """
    probs = np.asarray(dcnn_probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ParameterError("dcnn_probs must be a non-empty probability vector")
    if float(probs.min()) < 0.0:
        raise ParameterError("dcnn_probs must be nonnegative")
    if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOLERANCE:
        raise ParameterError(
            f"dcnn_probs sum to {float(probs.sum()):.6f}, expected 1 within {PROB_SUM_TOLERANCE}"
        )
    if not 0.0 <= tau <= 1.0:
        raise ParameterError(f"tau must lie in [0, 1], got {tau}")
    confidence = float(probs.max())
    if confidence > tau:
        return FusionDecision(
            label=int(np.argmax(probs)),
            branch=EXTERNAL,
            dcnn_confidence=confidence,
            comp_scores=tuple(float(s) for s in comp_scores),
        )
    return FusionDecision(
        label=int(comp_label),
        branch=COMPOSITIONAL,
        dcnn_confidence=confidence,
        comp_scores=tuple(float(s) for s in comp_scores),
    )


@dataclass(frozen=True)
class EvalReport:
    per_condition: dict[str, tuple[float, int]]  # tag -> (accuracy, count)
    mean_accuracy: float  # unweighted mean over condition cells
    confusion: np.ndarray  # rows = truth, cols = prediction
    branch_usage: dict[str, float] = field(default_factory=dict)
    n_items: int = 0
    class_names: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "per_condition": {
                tag: {"accuracy": acc, "count": count}
                for tag, (acc, count) in self.per_condition.items()
            },
            "mean_accuracy": self.mean_accuracy,
            "confusion_matrix": self.confusion.tolist(),
            "branch_usage": dict(self.branch_usage),
            "n_items": self.n_items,
            "class_names": list(self.class_names),
        }


def evaluate(
    predictions: Sequence[tuple[str, int]],
    truth: LabeledSet,
    condition_tags: Mapping[str, str] | None = None,
    branches: Sequence[str] | None = None,
) -> EvalReport:
    """Score predictions against ground truth, grouped by condition tag.

    Items without a tag fall into the ``all`` condition. The reported mean is
    the unweighted mean over condition cells. Predictions for unknown source
    ids are an error.
    """
    if not predictions:
        raise ParameterError("evaluate needs at least one prediction")
    truth_by_id = dict(zip(truth.ids, truth.labels))
    n_classes = len(truth.class_names)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    hits: dict[str, int] = {}
    counts: dict[str, int] = {}
    for source_id, predicted in predictions:
        if source_id not in truth_by_id:
            raise ValidationError(f"prediction for unknown source_id {source_id!r}")
        if not 0 <= predicted < n_classes:
            raise ValidationError(
                f"predicted label {predicted} for {source_id!r} outside {n_classes} classes"
            )
        actual = truth_by_id[source_id]
        tag = condition_tags.get(source_id, "all") if condition_tags else "all"
        counts[tag] = counts.get(tag, 0) + 1
        hits[tag] = hits.get(tag, 0) + (1 if predicted == actual else 0)
        confusion[actual, predicted] += 1
    per_condition = {
        tag: (hits[tag] / counts[tag], counts[tag]) for tag in sorted(counts)
    }
    branch_usage: dict[str, float] = {}
    if branches is not None:
        if len(branches) != len(predictions):
            raise ParameterError("branches must align one-to-one with predictions")
        for branch in branches:
            branch_usage[branch] = branch_usage.get(branch, 0.0) + 1.0
        branch_usage = {b: c / len(branches) for b, c in branch_usage.items()}
    return EvalReport(
        per_condition=per_condition,
        mean_accuracy=float(np.mean([acc for acc, _ in per_condition.values()])),
        confusion=confusion,
        branch_usage=branch_usage,
        n_items=len(predictions),
        class_names=truth.class_names,
    )
