"""Part dictionary learning and feature-map binarization.

Feature vectors are pooled per class, L2-normalized, and clustered with
k-means (squared Euclidean on the unit sphere, k-means++ seeding). Encoding
thresholds cosine similarity against every centroid; positions where nothing
clears the threshold fall back to the single best part so that every
position carries at least one active bit.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError, ShapeError
from .rng import class_seed, generator
from .types import FeatureMap, LabeledSet, PartDetectionMap, PartDictionary


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia_history: tuple[float, ...]  # one entry per assignment step, non-increasing

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances; clip tiny negatives from the expansion
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ centroids.T)
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Classic D^2 seeding; duplicates degrade to lowest-index unused points."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a centroid; take the first unused
            used = set(chosen)
            idx = next(i for i in range(n) if i not in used)
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[chosen].copy()


def kmeans(
    x: np.ndarray, k: int, seed: int, max_iters: int = 100
) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding, deterministic given ``seed``.

    Stops when assignments no longer change or after ``max_iters`` rounds.
    Ties in the assignment step go to the lowest centroid index; a cluster
    left empty is reseeded to the point farthest from its current centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    centroids = _kmeans_pp_init(x, k, generator(seed))
    assignments = None
    history: list[float] = []
    for _ in range(max_iters):
        d2 = _squared_distances(x, centroids)
        new_assignments = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new_assignments].sum()))
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        point_d2 = d2[np.arange(n), assignments]
        for j in range(k):
            members = assignments == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
            else:
                centroids[j] = x[int(np.argmax(point_d2))]
    return KMeansResult(
        centroids=centroids, assignments=assignments, inertia_history=tuple(history)
    )


def _normalized_rows(vectors: np.ndarray) -> np.ndarray:
    """Drop zero vectors, L2-normalize the rest."""
    norms = np.linalg.norm(vectors, axis=1)
    keep = norms > 0.0
    return vectors[keep] / norms[keep, None]


def learn_dictionary(
    maps: Sequence[FeatureMap],
    labeled: LabeledSet,
    k_per_class: int,
    seed: int,
    max_iters: int = 100,
) -> PartDictionary:
    """Cluster each class's pooled feature vectors and concatenate the centroids.

    ``maps[i]`` carries the label ``labeled.labels[i]``. Each class is
    clustered independently (k-means++ from a per-class substream of
    ``seed``), its final centroids renormalized to unit length, and the
    per-class centroid blocks concatenated in class order.
    """
    if len(maps) != len(labeled):
        raise ShapeError(f"{len(maps)} feature maps vs {len(labeled)} labels")
    if k_per_class < 1:
        raise ParameterError(f"k_per_class must be positive, got {k_per_class}")
    channels = maps[0].channels
    n_classes = len(labeled.class_names)
    blocks = []
    for label in range(n_classes):
        pooled = [
            m.data.reshape(-1, channels).astype(np.float64)
            for m, lab in zip(maps, labeled.labels)
            if lab == label
        ]
        if not pooled:
            raise InsufficientDataError(f"class {label} has no training maps")
        vectors = _normalized_rows(np.concatenate(pooled, axis=0))
        distinct = np.unique(vectors, axis=0).shape[0]
        if distinct < k_per_class:
            raise InsufficientDataError(
                f"class {label} has {distinct} distinct feature vectors, needs {k_per_class}"
            )
        result = kmeans(vectors, k_per_class, seed=class_seed(seed, label), max_iters=max_iters)
        centroids = result.centroids
        norms = np.linalg.norm(centroids, axis=1)
        blocks.append(centroids / norms[:, None])
    return PartDictionary(
        centroids=np.concatenate(blocks, axis=0),
        class_of_part=tuple(
            label for label in range(n_classes) for _ in range(k_per_class)
        ),
        k_per_class=k_per_class,
    )


def encode(fmap: FeatureMap, dictionary: PartDictionary, delta: float) -> PartDetectionMap:
    """Binarize one feature map against the dictionary.

    A part bit is set where the cosine similarity between the position's
    feature vector and the centroid exceeds ``delta``. Positions where no
    centroid clears the threshold activate only the most similar part
    (lowest index on ties); a zero feature vector activates part 0.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if fmap.channels != dictionary.channels:
        raise ShapeError(
            f"feature map has C={fmap.channels}, dictionary expects C={dictionary.channels}"
        )
    h, w = fmap.height, fmap.width
    flat = fmap.data.reshape(-1, fmap.channels).astype(np.float64)
    norms = np.linalg.norm(flat, axis=1)
    sims = flat @ dictionary.centroids.T
    nonzero = norms > 0.0
    sims[nonzero] /= norms[nonzero, None]
    sims[~nonzero] = 0.0  # zero vectors score 0 against every part
    bits = sims > delta
    empty = ~bits.any(axis=1)
    if empty.any():
        # argmax fallback; for zero vectors all sims are 0, so part 0 wins
        bits[empty, np.argmax(sims[empty], axis=1)] = True
    return PartDetectionMap(
        bits=bits.reshape(h, w, dictionary.k), source_id=fmap.source_id
    )
