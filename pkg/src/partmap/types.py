"""Core value objects passed between modules.

All of these are immutable after construction and safe to share across
threads; the numpy payloads are flagged non-writeable at construction time.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError

# Bernoulli parameters are clamped to [EPS, 1 - EPS] everywhere so that
# log-likelihoods stay finite for any binary input.
EPS = 1e-3


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """One H x W x C grid of real-valued feature vectors for a single image."""

    data: np.ndarray  # float32, H x W x C
    source_id: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ShapeError(f"feature map must be H x W x C, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ShapeError(f"feature map dimensions must be positive, got {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = int(np.flatnonzero(~np.isfinite(data))[0])
            raise ValidationError(f"non-finite feature value at flat index {bad}")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PartDetectionMap:
    """Binary H x W x K tensor recording which parts fire at each position."""

    bits: np.ndarray  # bool, H x W x K
    source_id: str = ""

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 3:
            raise ShapeError(f"detection map must be H x W x K, got shape {bits.shape}")
        object.__setattr__(self, "bits", _freeze(bits))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def parts(self) -> int:
        return self.bits.shape[2]


@dataclass(frozen=True)
class LabeledSet:
    """Parallel (source_id, label) pairs plus the ordered class names."""

    ids: tuple[str, ...]
    labels: tuple[int, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.labels):
            raise ValidationError("ids and labels must have equal length")
        if not self.ids:
            raise ValidationError("labeled set must not be empty")
        for lab in self.labels:
            if not 0 <= lab < len(self.class_names):
                raise ValidationError(
                    f"label {lab} does not index class_names (n={len(self.class_names)})"
                )

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(zip(self.ids, self.labels))

    def label_of(self, source_id: str) -> int:
        try:
            return self.labels[self.ids.index(source_id)]
        except ValueError:
            raise KeyError(source_id) from None


def _check_unit_interval(arr: np.ndarray, name: str) -> None:
    if arr.size and (float(arr.min()) < EPS or float(arr.max()) > 1.0 - EPS):
        raise ValidationError(f"{name} entries must lie in [{EPS}, {1.0 - EPS}]")


@dataclass(frozen=True)
class PartDictionary:
    """K unit-norm centroid vectors in C dimensions, grouped by source class."""

    centroids: np.ndarray  # float64, K x C
    class_of_part: tuple[int, ...]
    k_per_class: int

    def __post_init__(self):
        cent = np.asarray(self.centroids, dtype=np.float64)
        if cent.ndim != 2:
            raise ShapeError(f"centroids must be K x C, got shape {cent.shape}")
        if len(self.class_of_part) != cent.shape[0]:
            raise ValidationError("class_of_part length must equal number of centroids")
        if self.k_per_class < 1:
            raise ValidationError("k_per_class must be positive")
        classes = len(set(self.class_of_part))
        if cent.shape[0] != classes * self.k_per_class:
            raise ValidationError(
                f"K={cent.shape[0]} must equal classes ({classes}) x k_per_class "
                f"({self.k_per_class})"
            )
        norms = np.linalg.norm(cent, axis=1)
        if cent.size and (np.any(norms == 0.0) or np.max(np.abs(norms - 1.0)) > 1e-6):
            raise ValidationError("every centroid must have unit L2 norm (within 1e-6)")
        object.__setattr__(self, "centroids", _freeze(cent))

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def channels(self) -> int:
        return self.centroids.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_of_part) // self.k_per_class if self.k_per_class else 0


@dataclass(frozen=True)
class BernoulliGrid:
    """Per-position, per-part activation probabilities for one class/mixture."""

    alpha: np.ndarray  # float64, H x W x K, clamped to [EPS, 1-EPS]
    class_label: int = 0
    mixture_index: int = 0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim != 3:
            raise ShapeError(f"alpha must be H x W x K, got shape {alpha.shape}")
        _check_unit_interval(alpha, "alpha")
        object.__setattr__(self, "alpha", _freeze(alpha))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.alpha.shape


@dataclass(frozen=True)
class BackgroundModel:
    """Position-independent part activation probabilities for occluders."""

    beta: np.ndarray  # float64, length K
    occluder_kind: str = "background"

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1:
            raise ShapeError(f"beta must be a vector, got shape {beta.shape}")
        _check_unit_interval(beta, "beta")
        object.__setattr__(self, "beta", _freeze(beta))

    @property
    def parts(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True)
class OcclusionResult:
    """Outcome of occlusion-aware scoring for one map against one grid."""

    log_likelihood: float
    z: np.ndarray  # bool, H x W; True where the object is inferred visible
    ratio_map: np.ndarray  # float64, H x W; positive where the occluder wins

    def __post_init__(self):
        z = _freeze(np.asarray(self.z, dtype=bool))
        ratio = _freeze(np.asarray(self.ratio_map, dtype=np.float64))
        if z.shape != ratio.shape:
            raise ShapeError("z and ratio_map must share their shape")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "ratio_map", ratio)

    @property
    def visible_fraction(self) -> float:
        return float(np.mean(self.z))


@dataclass(frozen=True)
class Hyperparameters:
    """Defaults for the whole pipeline; every field is user-settable."""

    delta: float = 0.45
    mixtures: int = 4
    k_per_class: int = 50
    occlusion_prior: float = 0.7
    tau: float = 0.6


@dataclass(frozen=True)
class ClassModel:
    """All mixture components for one class."""

    class_label: int
    components: tuple[BernoulliGrid, ...]

    def __post_init__(self):
        if not self.components:
            raise ValidationError("class model needs at least one mixture component")


@dataclass(frozen=True)
class Model:
    """A trained model: dictionary, per-class mixtures, named backgrounds."""

    dictionary: PartDictionary
    class_models: tuple[ClassModel, ...]
    background_models: tuple[BackgroundModel, ...]
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        k = self.dictionary.k
        for position, cm in enumerate(self.class_models):
            if cm.class_label != position:
                raise ValidationError(
                    f"class models must be ordered by label: slot {position} holds "
                    f"label {cm.class_label}"
                )
        for cm in self.class_models:
            for grid in cm.components:
                if grid.alpha.shape[2] != k:
                    raise ValidationError(
                        f"class {cm.class_label} alpha has K={grid.alpha.shape[2]}, dictionary has K={k}"
                    )
        for bg in self.background_models:
            if bg.parts != k:
                raise ValidationError(
                    f"background '{bg.occluder_kind}' has K={bg.parts}, dictionary has K={k}"
                )

    @property
    def n_classes(self) -> int:
        return len(self.class_models)

    def background(self, kind: str = "pooled") -> BackgroundModel:
        """Select a named background model, or the clamp-mean of all ('pooled')."""
        if kind == "pooled":
            if not self.background_models:
                raise ValidationError("model has no background models")
            if len(self.background_models) == 1:
                return self.background_models[0]
            stacked = np.stack([bg.beta for bg in self.background_models])
            pooled = np.clip(stacked.mean(axis=0), EPS, 1.0 - EPS)
            return BackgroundModel(beta=pooled, occluder_kind="pooled")
        for bg in self.background_models:
            if bg.occluder_kind == kind:
                return bg
        known = ", ".join(bg.occluder_kind for bg in self.background_models)
        raise ValidationError(f"no background model named '{kind}' (have: {known})")
