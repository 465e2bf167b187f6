"""Synthetic detection-map generators and exhaustive-enumeration oracles.

Everything here exists so the pipeline can be exercised and verified without
any feature extractor: samplers for known Bernoulli grids, feature-level
occlusion injection, and brute-force normalization checks on grids small
enough to enumerate.

Sampling is deterministic: map i of a (class, mode) request draws from the
PCG64 substream keyed (class, mode, i), so batches can be split across
workers without changing the output (see ``partmap.rng``).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ParameterError, ValidationError
from .rng import class_seed, generator
from .types import BackgroundModel, BernoulliGrid, PartDetectionMap

ENUMERATION_LIMIT = 20  # refuse brute force beyond 2^20 outcomes
_CHUNK = 1 << 16


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle in grid coordinates; may be empty."""

    row0: int
    col0: int
    height: int
    width: int

    def __post_init__(self):
        if min(self.row0, self.col0, self.height, self.width) < 0:
            raise ValidationError(f"region fields must be nonnegative: {self}")

    @property
    def area(self) -> int:
        return self.height * self.width

    def within(self, height: int, width: int) -> bool:
        return self.row0 + self.height <= height and self.col0 + self.width <= width

    def mask(self, height: int, width: int) -> np.ndarray:
        m = np.zeros((height, width), dtype=bool)
        m[self.row0 : self.row0 + self.height, self.col0 : self.col0 + self.width] = True
        return m


@dataclass(frozen=True)
class SyntheticSpec:
    """Ground-truth generators for a synthetic classification task."""

    height: int
    width: int
    parts: int
    class_modes: tuple[tuple[np.ndarray, ...], ...]  # [class][mode] -> H x W x K probs
    background: np.ndarray  # length-K probs
    seed: int
    occlusion: Region | None = None

    def __post_init__(self):
        shape = (self.height, self.width, self.parts)
        for ci, modes in enumerate(self.class_modes):
            if not modes:
                raise ValidationError(f"class {ci} has no generator modes")
            for alpha in modes:
                if alpha.shape != shape:
                    raise ValidationError(
                        f"class {ci} generator shape {alpha.shape}, expected {shape}"
                    )
                if float(alpha.min()) <= 0.0 or float(alpha.max()) >= 1.0:
                    raise ValidationError("generator probabilities must lie strictly in (0, 1)")
        bg = np.asarray(self.background, dtype=np.float64)
        if bg.shape != (self.parts,):
            raise ValidationError(f"background must have length {self.parts}")
        if float(bg.min()) <= 0.0 or float(bg.max()) >= 1.0:
            raise ValidationError("background probabilities must lie strictly in (0, 1)")
        if self.occlusion is not None and not self.occlusion.within(self.height, self.width):
            raise ValidationError(f"occlusion region {self.occlusion} exceeds the grid")

    @property
    def n_classes(self) -> int:
        return len(self.class_modes)


def _repair_empty_positions(bits: np.ndarray, probs: np.ndarray) -> None:
    """Set the most probable part wherever a position drew all zeros."""
    empty = ~bits.any(axis=2)
    if empty.any():
        best = np.broadcast_to(np.argmax(probs, axis=-1), empty.shape)
        rows, cols = np.nonzero(empty)
        bits[rows, cols, best[rows, cols]] = True


def sample_maps(
    spec: SyntheticSpec, class_index: int, mode: int = 0, n: int = 1
) -> list[PartDetectionMap]:
    """Draw n maps from one generator; every position keeps at least one bit."""
    alpha = spec.class_modes[class_index][mode]
    out = []
    for i in range(n):
        rng = generator(spec.seed, class_index, mode, i)
        bits = rng.random(alpha.shape) < alpha
        _repair_empty_positions(bits, alpha)
        out.append(
            PartDetectionMap(bits=bits, source_id=f"synth-{class_index}-{mode}-{i}")
        )
    return out


def occlude_region(
    b: PartDetectionMap, region: Region, background: np.ndarray, seed: int
) -> PartDetectionMap:
    """Replace bits inside the region with background draws; outside untouched."""
    if not region.within(b.height, b.width):
        raise ParameterError(
            f"region {region} exceeds the {b.height}x{b.width} grid"
        )
    beta = np.asarray(background, dtype=np.float64)
    if beta.shape != (b.parts,):
        raise ParameterError(f"background must have length {b.parts}, got {beta.shape}")
    if region.area == 0:
        return b
    rng = generator(seed)
    patch = rng.random((region.height, region.width, b.parts)) < beta
    _repair_empty_positions(patch, beta)
    bits = np.array(b.bits)
    bits[region.row0 : region.row0 + region.height, region.col0 : region.col0 + region.width] = patch
    return PartDetectionMap(bits=bits, source_id=b.source_id)


def _enumeration_sum(probs: np.ndarray) -> float:
    """Sum of exp(log-likelihood) over every binary outcome of ``probs``."""
    flat_log = np.log(probs.ravel())
    flat_log1m = np.log1p(-probs.ravel())
    n = flat_log.size
    if n > ENUMERATION_LIMIT:
        raise ParameterError(
            f"grid has {n} binary variables; enumeration is capped at {ENUMERATION_LIMIT}"
        )
    total_outcomes = 1 << n
    shifts = np.arange(n, dtype=np.uint32)
    partials = []
    for start in range(0, total_outcomes, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total_outcomes), dtype=np.uint32)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.float64)
        ll = bits @ flat_log + (1.0 - bits) @ flat_log1m
        partials.append(float(np.exp(ll).sum()))
    return math.fsum(partials)


def brute_force_likelihood_sum(grid: BernoulliGrid) -> float:
    """Exhaustive check that the Bernoulli grid normalizes to 1."""
    return _enumeration_sum(grid.alpha)


def brute_force_conditional_sum(
    grid: BernoulliGrid, background: BackgroundModel, z: np.ndarray
) -> float:
    """Normalization of the fixed-visibility conditional p(B | z, alpha, beta)."""
    z = np.asarray(z, dtype=bool)
    h, w, k = grid.alpha.shape
    if z.shape != (h, w):
        raise ParameterError(f"z must be {h}x{w}, got {z.shape}")
    if background.parts != k:
        raise ParameterError(f"background must have length {k}")
    effective = np.where(z[:, :, None], grid.alpha, background.beta[None, None, :])
    return _enumeration_sum(effective)


# ---------------------------------------------------------------------------
# Spec files for the synth CLI: a JSON document describing generators and the
# draws to emit, so CI fixtures are reproducible from one small text file.


@dataclass(frozen=True)
class DrawRequest:
    class_index: int
    mode: int = 0
    n: int = 1
    occlude: bool = False


@dataclass(frozen=True)
class SynthJob:
    spec: SyntheticSpec
    draws: tuple[DrawRequest, ...] = field(default_factory=tuple)


def load_synth_job(path) -> SynthJob:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    try:
        h, w, k = int(doc["height"]), int(doc["width"]), int(doc["parts"])
        class_modes = tuple(
            tuple(
                np.asarray(mode, dtype=np.float64).reshape(h, w, k)
                for mode in cls["modes"]
            )
            for cls in doc["classes"]
        )
        occlusion = None
        if doc.get("occlusion") is not None:
            occ = doc["occlusion"]
            occlusion = Region(
                row0=int(occ["row0"]),
                col0=int(occ["col0"]),
                height=int(occ["height"]),
                width=int(occ["width"]),
            )
        spec = SyntheticSpec(
            height=h,
            width=w,
            parts=k,
            class_modes=class_modes,
            background=np.asarray(doc["background"], dtype=np.float64),
            seed=int(doc["seed"]),
            occlusion=occlusion,
        )
        draws = tuple(
            DrawRequest(
                class_index=int(d["class"]),
                mode=int(d.get("mode", 0)),
                n=int(d.get("n", 1)),
                occlude=bool(d.get("occlude", False)),
            )
            for d in doc.get("draws", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed synth spec: {exc!r}") from None
    return SynthJob(spec=spec, draws=draws)


def run_synth_job(job: SynthJob) -> tuple[list[PartDetectionMap], list[int]]:
    """Materialize all requested draws; returns maps plus their class labels."""
    spec = job.spec
    maps: list[PartDetectionMap] = []
    labels: list[int] = []
    for draw in job.draws:
        batch = sample_maps(spec, draw.class_index, draw.mode, draw.n)
        if draw.occlude:
            if spec.occlusion is None:
                raise ValidationError("draw requests occlusion but the spec has no region")
            # occluder draws live on their own substream branch (trailing 1)
            batch = [
                occlude_region(
                    b,
                    spec.occlusion,
                    spec.background,
                    seed=class_seed(spec.seed, draw.class_index, draw.mode, i, 1),
                )
                for i, b in enumerate(batch)
            ]
        maps.extend(batch)
        labels.extend([draw.class_index] * len(batch))
    return maps, labels
