"""Bernoulli spatial models: estimation, likelihoods, occlusion inference.

A class is modeled as independent per-position, per-part Bernoulli variables
over the binary detection map. The occlusion-aware variant scores every
position under both the class grid (weighted by the visibility prior) and a
spatially constant background vector (weighted by its complement), keeps the
better branch, and reads the per-position winners off as the visibility mask.

All parameters are clamped to [EPS, 1 - EPS], so every score is finite. The
plain and occlusion-aware paths share one per-position accumulation helper;
with a visibility prior of exactly 1 the occlusion-aware score reduces to
the plain log-likelihood bit for bit.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError, ShapeError
from .types import (
    EPS,
    BackgroundModel,
    BernoulliGrid,
    ClassModel,
    OcclusionResult,
    PartDetectionMap,
)


def position_log_likelihood(bits: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Per-position log-likelihood, summed over parts: an H x W float array.

    ``probs`` may be a full H x W x K grid or a length-K background vector.
    """
    return np.where(bits, np.log(probs), np.log1p(-probs)).sum(axis=2)


_position_terms = position_log_likelihood


def estimate_bernoulli(
    maps: Sequence[PartDetectionMap], class_label: int = 0, mixture_index: int = 0
) -> BernoulliGrid:
    """Maximum-likelihood activation frequencies, clamped to [EPS, 1-EPS]."""
    if not maps:
        raise InsufficientDataError("estimate_bernoulli needs at least one map")
    shape = maps[0].bits.shape
    for m in maps:
        if m.bits.shape != shape:
            raise ShapeError(f"map shapes differ: {shape} vs {m.bits.shape}")
    counts = np.zeros(shape, dtype=np.float64)
    for m in maps:
        counts += m.bits
    alpha = np.clip(counts / len(maps), EPS, 1.0 - EPS)
    return BernoulliGrid(alpha=alpha, class_label=class_label, mixture_index=mixture_index)


def estimate_background(
    vectors: Sequence[np.ndarray] | np.ndarray, occluder_kind: str = "background"
) -> BackgroundModel:
    """Clamped mean of part activation vectors sampled off-object."""
    stacked = np.asarray(vectors, dtype=np.float64)
    if stacked.ndim == 1:
        stacked = stacked[None, :]
    if stacked.ndim != 2 or stacked.shape[0] == 0:
        raise InsufficientDataError("estimate_background needs at least one length-K vector")
    beta = np.clip(stacked.mean(axis=0), EPS, 1.0 - EPS)
    return BackgroundModel(beta=beta, occluder_kind=occluder_kind)


def _check_grid_match(b: PartDetectionMap, grid: BernoulliGrid) -> None:
    if b.bits.shape != grid.alpha.shape:
        raise ShapeError(f"map shape {b.bits.shape} vs model shape {grid.alpha.shape}")


def log_likelihood(b: PartDetectionMap, grid: BernoulliGrid) -> float:
    """Log-probability of the detection map under one Bernoulli grid."""
    _check_grid_match(b, grid)
    return float(_position_terms(b.bits, grid.alpha).sum())


def log_likelihood_occluded(
    b: PartDetectionMap,
    grid: BernoulliGrid,
    background: BackgroundModel,
    prior: float,
) -> OcclusionResult:
    """Occlusion-aware score with per-position ML visibility inference.

    Position p is scored as max(fg_p, bg_p) where fg_p adds ln(prior) to the
    class-grid term and bg_p adds ln(1 - prior) to the background term. Ties
    resolve to visible. ``ratio_map`` is bg_p - fg_p, positive where the
    occluder model wins. A prior of exactly 1 sends bg_p to -inf, reducing
    the total to the plain log-likelihood.
    """
    _check_grid_match(b, grid)
    if background.parts != b.parts:
        raise ShapeError(f"background has K={background.parts}, map has K={b.parts}")
    if not 0.0 < prior <= 1.0:
        raise ParameterError(f"visibility prior must lie in (0, 1], got {prior}")
    fg = _position_terms(b.bits, grid.alpha) + math.log(prior)
    if prior == 1.0:
        bg = np.full(fg.shape, -np.inf)
    else:
        bg = _position_terms(b.bits, background.beta) + math.log1p(-prior)
    z = fg >= bg
    total = float(np.maximum(fg, bg).sum())
    return OcclusionResult(log_likelihood=total, z=z, ratio_map=bg - fg)


def _degenerate_occlusion(b: PartDetectionMap, grid: BernoulliGrid) -> OcclusionResult:
    """Occlusion result for scoring without an occlusion model: all visible."""
    fg = _position_terms(b.bits, grid.alpha)
    return OcclusionResult(
        log_likelihood=float(fg.sum()),
        z=np.ones(fg.shape, dtype=bool),
        ratio_map=np.full(fg.shape, -np.inf),
    )


@dataclass(frozen=True)
class ClassificationResult:
    label: int
    scores: np.ndarray  # best per-class score, index = class label
    best_mixture: int  # mixture index of the winning component
    occlusion: OcclusionResult  # of the winning component

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)


def classify_single(
    b: PartDetectionMap,
    class_models: Sequence[ClassModel],
    background: BackgroundModel | None = None,
    prior: float = 0.7,
    use_occlusion: bool = True,
) -> ClassificationResult:
    """Best class under max-over-mixtures scoring; exact ties go to the lowest label."""
    if not class_models:
        raise ParameterError("classify_single needs at least one class model")
    if use_occlusion and background is None:
        raise ParameterError("occlusion-aware classification needs a background model")
    scores = np.empty(len(class_models), dtype=np.float64)
    per_class_best: list[tuple[int, OcclusionResult]] = []
    for ci, cm in enumerate(class_models):
        best_mix, best_result = 0, None
        for mi, grid in enumerate(cm.components):
            if use_occlusion:
                result = log_likelihood_occluded(b, grid, background, prior)
            else:
                result = _degenerate_occlusion(b, grid)
            if best_result is None or result.log_likelihood > best_result.log_likelihood:
                best_mix, best_result = mi, result
        scores[ci] = best_result.log_likelihood
        per_class_best.append((best_mix, best_result))
    label = int(np.argmax(scores))
    best_mix, best_result = per_class_best[label]
    return ClassificationResult(
        label=label, scores=scores, best_mixture=best_mix, occlusion=best_result
    )
