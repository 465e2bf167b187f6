"""Part-based Bernoulli compositional models over feature maps.

Feature maps come in as files, get binarized against a learned part
dictionary, and are scored by per-class Bernoulli grids (optionally mixtures,
optionally occlusion-aware). A confidence gate fuses the result with an
external classifier's softmax output. Everything is reachable three ways:
this library, the HTTP service in ``partmap.service``, and the ``partmap``
CLI, which is a thin client of the service.
"""

__version__ = "0.1.0"

from .bernoulli import (
    ClassificationResult,
    classify_single,
    estimate_background,
    estimate_bernoulli,
    log_likelihood,
    log_likelihood_occluded,
    position_log_likelihood,
)
from .dictionary import KMeansResult, encode, kmeans, learn_dictionary
from .errors import (
    CorruptionError,
    DataError,
    FormatError,
    InsufficientDataError,
    ParameterError,
    PartmapError,
    ShapeError,
    ValidationError,
)
from .fusion import EvalReport, FusionDecision, evaluate, fuse
from .mixtures import (
    AffinityMatrix,
    MixtureModel,
    fit_mixture,
    hamming_affinity,
    spectral_cluster,
)
from .synth import (
    Region,
    SyntheticSpec,
    brute_force_conditional_sum,
    brute_force_likelihood_sum,
    occlude_region,
    sample_maps,
)
from .types import (
    EPS,
    BackgroundModel,
    BernoulliGrid,
    ClassModel,
    FeatureMap,
    Hyperparameters,
    LabeledSet,
    Model,
    OcclusionResult,
    PartDetectionMap,
    PartDictionary,
)

__all__ = [
    "AffinityMatrix",
    "BackgroundModel",
    "BernoulliGrid",
    "ClassModel",
    "ClassificationResult",
    "CorruptionError",
    "DataError",
    "EPS",
    "EvalReport",
    "FeatureMap",
    "FormatError",
    "FusionDecision",
    "Hyperparameters",
    "InsufficientDataError",
    "KMeansResult",
    "LabeledSet",
    "MixtureModel",
    "Model",
    "OcclusionResult",
    "ParameterError",
    "PartDetectionMap",
    "PartDictionary",
    "PartmapError",
    "Region",
    "ShapeError",
    "SyntheticSpec",
    "ValidationError",
    "brute_force_conditional_sum",
    "brute_force_likelihood_sum",
    "classify_single",
    "encode",
    "estimate_background",
    "estimate_bernoulli",
    "evaluate",
    "fit_mixture",
    "fuse",
    "hamming_affinity",
    "kmeans",
    "learn_dictionary",
    "log_likelihood",
    "log_likelihood_occluded",
    "occlude_region",
    "position_log_likelihood",
    "sample_maps",
    "spectral_cluster",
]
