"""Mixtures of Bernoulli grids: spectral initialization + alternating ML.

Mixture assignments start from normalized-Laplacian spectral clustering over
Hamming distances between detection maps, then alternate between estimating
each component's grid from its assigned maps and re-assigning every map to
its best-scoring component (hard assignments throughout).

To make the fit independent of input order, all clustering runs in a
canonical order sorted by source id; results are mapped back to the caller's
order at the end.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bernoulli import estimate_bernoulli, log_likelihood
from .dictionary import kmeans
from .errors import ParameterError, ShapeError
from .types import EPS, BernoulliGrid, PartDetectionMap


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric nonnegative pairwise affinities with unit self-affinity."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ShapeError(f"affinity must be square, got shape {entries.shape}")
        if not np.allclose(entries, entries.T):
            raise ShapeError("affinity must be symmetric")
        if entries.size and float(entries.min()) < 0.0:
            raise ShapeError("affinity entries must be nonnegative")
        entries = np.ascontiguousarray(entries)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class MixtureModel:
    components: tuple[BernoulliGrid, ...]
    assignments: tuple[int, ...]  # component index per training map, input order
    class_label: int
    objective_history: tuple[float, ...]  # total assigned log-likelihood per iteration

    def __post_init__(self):
        m = len(self.components)
        if any(not 0 <= a < m for a in self.assignments):
            raise ParameterError("every assignment must index a component")


def hamming_affinity(maps: Sequence[PartDetectionMap]) -> AffinityMatrix:
    """Gaussian kernel over normalized Hamming distances (median bandwidth).

    d(i, j) is the fraction of differing bits; a(i, j) = exp(-d / sigma) with
    sigma the median off-diagonal distance, so identical maps always get
    affinity 1 regardless of bandwidth.
    """
    n = len(maps)
    if n < 2:
        raise ParameterError(f"hamming_affinity needs at least 2 maps, got {n}")
    shape = maps[0].bits.shape
    for m in maps:
        if m.bits.shape != shape:
            raise ShapeError(f"map shapes differ: {shape} vs {m.bits.shape}")
    flat = np.stack([m.bits.ravel() for m in maps]).astype(np.float64)
    total_bits = flat.shape[1]
    # XOR counts via two rank-1 products: ones where exactly one of the pair is set
    differing = flat @ (1.0 - flat).T
    distances = (differing + differing.T) / total_bits
    off_diagonal = distances[~np.eye(n, dtype=bool)]
    sigma = float(np.median(off_diagonal))
    if sigma <= 0.0:
        sigma = 1e-12  # all-duplicate corner: keep the kernel defined
    return AffinityMatrix(entries=np.exp(-distances / sigma))


def spectral_cluster(affinity: AffinityMatrix, m: int, seed: int) -> np.ndarray:
    """Normalized-Laplacian spectral clustering into ``m`` hard clusters.

    Embeds points with the eigenvectors of the m smallest eigenvalues of
    L_sym = I - D^(-1/2) A D^(-1/2), row-normalizes, and k-means the rows.
    Zero-degree nodes are relaxed by adding 1e-12 to the affinity diagonal.
    """
    n = affinity.size
    if not 1 <= m <= n:
        raise ParameterError(f"m must be in [1, {n}], got {m}")
    a = np.array(affinity.entries)
    degrees = a.sum(axis=1)
    if np.any(degrees == 0.0):
        a = a + 1e-12 * np.eye(n)
        degrees = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap = np.eye(n) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    _, vectors = np.linalg.eigh(lap)  # ascending eigenvalues
    embedding = vectors[:, :m]
    norms = np.linalg.norm(embedding, axis=1)
    keep = norms > 0.0
    embedding[keep] /= norms[keep, None]
    return kmeans(embedding, m, seed=seed).assignments


def _total_objective(
    maps: Sequence[PartDetectionMap], components: list[BernoulliGrid], assignments: np.ndarray
) -> float:
    return sum(log_likelihood(b, components[a]) for b, a in zip(maps, assignments))


def fit_mixture(
    maps: Sequence[PartDetectionMap],
    m: int,
    iters: int = 10,
    seed: int = 0,
    class_label: int = 0,
) -> MixtureModel:
    """Alternating hard-assignment maximum likelihood over ``m`` components.

    Assignments initialize from spectral clustering; each round re-estimates
    every component from its members and re-assigns every map to its
    best-scoring component (lowest index on ties). A component left empty is
    reseeded with the single worst-fit map. Stops early once assignments are
    stable. The recorded objective never decreases beyond the slack the
    parameter clamp can introduce (2 * EPS * H * W * K nats).
    """
    n = len(maps)
    if m > n:
        raise ParameterError(f"m={m} mixture components but only {n} maps")
    order = sorted(range(n), key=lambda i: maps[i].source_id)
    canonical = [maps[i] for i in order]
    if m == n:
        assignments = np.arange(n)
    elif m == 1:
        assignments = np.zeros(n, dtype=int)
    else:
        assignments = np.array(spectral_cluster(hamming_affinity(canonical), m, seed))
    _cover_all_components(assignments, m)
    components: list[BernoulliGrid] = []
    history: list[float] = []
    for _ in range(max(1, iters)):
        components = [
            estimate_bernoulli(
                [b for b, a in zip(canonical, assignments) if a == j],
                class_label=class_label,
                mixture_index=j,
            )
            for j in range(m)
        ]
        scores = np.array(
            [[log_likelihood(b, comp) for comp in components] for b in canonical]
        )
        new_assignments = np.argmax(scores, axis=1)
        history.append(float(scores[np.arange(n), new_assignments].sum()))
        for j in range(m):
            if not np.any(new_assignments == j):
                # reseed a dead component with the single worst-fit map, taken
                # from a cluster that can spare one
                fit = scores[np.arange(n), new_assignments]
                sizes = np.bincount(new_assignments, minlength=m)
                eligible = sizes[new_assignments] > 1
                worst = int(np.flatnonzero(eligible)[np.argmin(fit[eligible])])
                new_assignments[worst] = j
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
    back = np.empty(n, dtype=int)
    back[order] = assignments
    return MixtureModel(
        components=tuple(components),
        assignments=tuple(int(a) for a in back),
        class_label=class_label,
        objective_history=tuple(history),
    )


def _cover_all_components(assignments: np.ndarray, m: int) -> None:
    """Ensure every component index occurs, stealing from the largest cluster."""
    for j in range(m):
        if not np.any(assignments == j):
            sizes = np.bincount(assignments, minlength=m)
            donor = int(np.argmax(sizes))
            victim = int(np.flatnonzero(assignments == donor)[-1])
            assignments[victim] = j
