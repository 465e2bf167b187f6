"""Bit-exact file formats: feature maps, detection maps, CSV tables, models.

Binary layouts
--------------
FMAP: bytes 0-3 ASCII ``FMAP``; bytes 4-7 u32 LE version (=1); bytes 8-23
four u32 LE fields N, H, W, C; then N*H*W*C little-endian IEEE-754 binary32
values in (image, row, col, channel) row-major order.

BMAP: bytes 0-3 ASCII ``BMAP``; u32 LE version (=1); u32 LE N, H, W, K; then
ceil(N*H*W*K / 8) bytes where bit i of the stream is element i in
(image, row, col, part) order, LSB-first within each byte.

Text formats are UTF-8 CSV with a header line; the model file is a JSON
document with an explicit ``format_version`` so learned parameters stay
inspectable. Floats written to JSON round-trip exactly (shortest repr).
"""

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CorruptionError,
    DataError,
    FormatError,
    ShapeError,
    ValidationError,
)
from .types import (
    BackgroundModel,
    BernoulliGrid,
    ClassModel,
    FeatureMap,
    Hyperparameters,
    LabeledSet,
    Model,
    PartDetectionMap,
    PartDictionary,
)

FMAP_MAGIC = b"FMAP"
BMAP_MAGIC = b"BMAP"
FORMAT_VERSION = 1
MODEL_FORMAT = "partmap-model"

_HEADER = struct.Struct("<4sIIIII")  # magic, version, N, and three dims


def _read_header(raw: bytes, magic: bytes, path) -> tuple[int, int, int, int]:
    if len(raw) < _HEADER.size:
        raise CorruptionError(f"{path}: file shorter than the fixed header")
    got_magic, version, n, d1, d2, d3 = _HEADER.unpack_from(raw)
    if got_magic != magic:
        raise FormatError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {FORMAT_VERSION}")
    return n, d1, d2, d3


def read_feature_maps(path) -> list[FeatureMap]:
    """Read an FMAP file; source ids are the in-file indices as strings."""
    raw = Path(path).read_bytes()
    n, h, w, c = _read_header(raw, FMAP_MAGIC, path)
    payload = raw[_HEADER.size:]
    expected = n * h * w * c * 4
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    if n == 0:
        return []
    values = np.frombuffer(payload, dtype="<f4")
    finite = np.isfinite(values)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        per_map = h * w * c
        raise DataError(
            f"{path}: non-finite value in map {idx // per_map} at flat offset {idx % per_map}"
        )
    data = values.reshape(n, h, w, c)
    return [FeatureMap(data=data[i], source_id=str(i)) for i in range(n)]


def write_feature_maps(maps: Sequence[FeatureMap], path) -> None:
    """Write maps in order; all maps must share H, W, C. Empty list gives N=0."""
    if maps:
        h, w, c = maps[0].height, maps[0].width, maps[0].channels
        for m in maps:
            if (m.height, m.width, m.channels) != (h, w, c):
                raise ShapeError(
                    f"heterogeneous feature map shapes: {(h, w, c)} vs "
                    f"{(m.height, m.width, m.channels)}"
                )
    else:
        h = w = c = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FMAP_MAGIC, FORMAT_VERSION, len(maps), h, w, c))
        for m in maps:
            fh.write(np.ascontiguousarray(m.data, dtype="<f4").tobytes())


def read_detection_maps(path, ids: Sequence[str] | None = None) -> list[PartDetectionMap]:
    """Read a BMAP file; ids default to the in-file indices as strings."""
    raw = Path(path).read_bytes()
    n, h, w, k = _read_header(raw, BMAP_MAGIC, path)
    payload = raw[_HEADER.size:]
    total_bits = n * h * w * k
    expected = (total_bits + 7) // 8
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    if ids is not None and len(ids) != n:
        raise ShapeError(f"{path}: {len(ids)} ids supplied for {n} stored maps")
    if n == 0:
        return []
    bits = np.unpackbits(
        np.frombuffer(payload, dtype=np.uint8), bitorder="little", count=total_bits
    ).astype(bool).reshape(n, h, w, k)
    return [
        PartDetectionMap(bits=bits[i], source_id=ids[i] if ids else str(i))
        for i in range(n)
    ]


def write_detection_maps(maps: Sequence[PartDetectionMap], path) -> None:
    if maps:
        h, w, k = maps[0].height, maps[0].width, maps[0].parts
        for m in maps:
            if (m.height, m.width, m.parts) != (h, w, k):
                raise ShapeError(
                    f"heterogeneous detection map shapes: {(h, w, k)} vs "
                    f"{(m.height, m.width, m.parts)}"
                )
        stream = np.concatenate([m.bits.ravel() for m in maps])
        packed = np.packbits(stream.astype(np.uint8), bitorder="little")
    else:
        h = w = k = 0
        packed = np.empty(0, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BMAP_MAGIC, FORMAT_VERSION, len(maps), h, w, k))
        fh.write(packed.tobytes())


def _read_csv_rows(path, expected_header: Sequence[str] | None = None) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV, expected a header line")
    header = [col.strip() for col in rows[0]]
    if expected_header is not None and header[: len(expected_header)] != list(expected_header):
        raise FormatError(
            f"{path}: header {header} does not start with {list(expected_header)}"
        )
    return rows


def read_labels(path, class_names: Sequence[str] | None = None) -> LabeledSet:
    """Read a ``source_id,label_index`` CSV into a LabeledSet.

    Class names default to ``class0..class{n-1}`` sized by the largest label.
    """
    rows = _read_csv_rows(path, ("source_id", "label_index"))
    ids, labels = [], []
    for row in rows[1:]:
        if len(row) < 2:
            raise FormatError(f"{path}: label row needs 2 columns, got {row}")
        ids.append(row[0])
        try:
            labels.append(int(row[1]))
        except ValueError:
            raise FormatError(f"{path}: label_index {row[1]!r} is not an integer") from None
    if not ids:
        raise ValidationError(f"{path}: labels file holds no rows")
    if class_names is None:
        class_names = [f"class{i}" for i in range(max(labels) + 1)]
    return LabeledSet(ids=tuple(ids), labels=tuple(labels), class_names=tuple(class_names))


def write_labels(labeled: LabeledSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "label_index"])
        for source_id, label in labeled:
            writer.writerow([source_id, label])


def read_probabilities(path) -> tuple[list[str], np.ndarray]:
    """Read the external classifier's CSV: ``source_id,p_class0,...``."""
    rows = _read_csv_rows(path, ("source_id",))
    n_classes = len(rows[0]) - 1
    if n_classes < 1:
        raise FormatError(f"{path}: probability CSV needs at least one class column")
    ids, probs = [], []
    for row in rows[1:]:
        if len(row) != n_classes + 1:
            raise FormatError(f"{path}: row for {row[0]!r} has {len(row) - 1} class columns")
        ids.append(row[0])
        try:
            probs.append([float(v) for v in row[1:]])
        except ValueError:
            raise FormatError(f"{path}: non-numeric probability in row for {row[0]!r}") from None
    return ids, np.asarray(probs, dtype=np.float64).reshape(len(ids), n_classes)


def write_probabilities(ids: Sequence[str], probs: np.ndarray, path) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id"] + [f"p_class{i}" for i in range(probs.shape[1])])
        for source_id, row in zip(ids, probs):
            writer.writerow([source_id] + [repr(float(v)) for v in row])


def read_predictions(path) -> tuple[list[str], list[int], list[str] | None]:
    """Read any CSV with ``source_id`` and ``predicted_label`` columns.

    Returns (ids, labels, branches); branches is None when the file has no
    ``branch`` column.
    """
    rows = _read_csv_rows(path)
    header = [col.strip() for col in rows[0]]
    try:
        id_col = header.index("source_id")
        label_col = header.index("predicted_label")
    except ValueError:
        raise FormatError(
            f"{path}: predictions need 'source_id' and 'predicted_label' columns, got {header}"
        ) from None
    branch_col = header.index("branch") if "branch" in header else None
    ids, labels, branches = [], [], []
    for row in rows[1:]:
        ids.append(row[id_col])
        labels.append(int(row[label_col]))
        if branch_col is not None:
            branches.append(row[branch_col])
    return ids, labels, (branches if branch_col is not None else None)


def read_conditions(path) -> dict[str, str]:
    """Read a ``source_id,condition`` CSV mapping items to condition tags."""
    rows = _read_csv_rows(path, ("source_id",))
    if len(rows[0]) < 2:
        raise FormatError(f"{path}: conditions CSV needs a tag column")
    return {row[0]: row[1] for row in rows[1:]}


def write_conditions(tags: dict[str, str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "condition"])
        for source_id, tag in tags.items():
            writer.writerow([source_id, tag])


def _grid_to_json(grid: BernoulliGrid) -> dict:
    h, w, k = grid.shape
    return {
        "height": h,
        "width": w,
        "parts": k,
        "mixture_index": grid.mixture_index,
        "alpha": grid.alpha.reshape(h * w, k).tolist(),
    }


def _grid_from_json(obj: dict, class_label: int) -> BernoulliGrid:
    try:
        h, w, k = int(obj["height"]), int(obj["width"]), int(obj["parts"])
        alpha = np.asarray(obj["alpha"], dtype=np.float64).reshape(h, w, k)
        mixture_index = int(obj.get("mixture_index", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed mixture component: {exc}") from None
    return BernoulliGrid(alpha=alpha, class_label=class_label, mixture_index=mixture_index)


def save_model(model: Model, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "format_version": FORMAT_VERSION,
        "class_names": list(model.class_names),
        "hyperparameters": {
            "delta": model.hyperparameters.delta,
            "mixtures": model.hyperparameters.mixtures,
            "k_per_class": model.hyperparameters.k_per_class,
            "occlusion_prior": model.hyperparameters.occlusion_prior,
            "tau": model.hyperparameters.tau,
        },
        "dictionary": {
            "k_per_class": model.dictionary.k_per_class,
            "class_of_part": list(model.dictionary.class_of_part),
            "centroids": model.dictionary.centroids.tolist(),
        },
        "class_models": [
            {
                "class_label": cm.class_label,
                "components": [_grid_to_json(g) for g in cm.components],
            }
            for cm in model.class_models
        ],
        "background_models": [
            {"kind": bg.occluder_kind, "beta": bg.beta.tolist()}
            for bg in model.background_models
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))


def load_model(path) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"{path}: model format_version {doc.get('format_version')}, expected {FORMAT_VERSION}"
        )
    for section in ("hyperparameters", "dictionary", "class_models", "background_models"):
        if section not in doc:
            raise ValidationError(f"{path}: missing '{section}' section")
    hp = doc["hyperparameters"]
    try:
        hyper = Hyperparameters(
            delta=float(hp["delta"]),
            mixtures=int(hp["mixtures"]),
            k_per_class=int(hp["k_per_class"]),
            occlusion_prior=float(hp["occlusion_prior"]),
            tau=float(hp["tau"]),
        )
        dic = doc["dictionary"]
        dictionary = PartDictionary(
            centroids=np.asarray(dic["centroids"], dtype=np.float64),
            class_of_part=tuple(int(c) for c in dic["class_of_part"]),
            k_per_class=int(dic["k_per_class"]),
        )
        class_models = tuple(
            ClassModel(
                class_label=int(cm["class_label"]),
                components=tuple(
                    _grid_from_json(g, int(cm["class_label"])) for g in cm["components"]
                ),
            )
            for cm in doc["class_models"]
        )
        backgrounds = tuple(
            BackgroundModel(
                beta=np.asarray(bg["beta"], dtype=np.float64), occluder_kind=str(bg["kind"])
            )
            for bg in doc["background_models"]
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed model document: {exc!r}") from None
    return Model(
        dictionary=dictionary,
        class_models=class_models,
        background_models=backgrounds,
        hyperparameters=hyper,
        class_names=tuple(str(c) for c in doc.get("class_names", [])),
    )


def assign_ids(maps: Iterable, labeled: LabeledSet):
    """Return copies of maps carrying the labeled set's source ids, by position."""
    maps = list(maps)
    if len(maps) != len(labeled):
        raise ShapeError(f"{len(maps)} maps vs {len(labeled)} labeled rows")
    out = []
    for m, source_id in zip(maps, labeled.ids):
        if isinstance(m, FeatureMap):
            out.append(FeatureMap(data=m.data, source_id=source_id))
        else:
            out.append(PartDetectionMap(bits=m.bits, source_id=source_id))
    return out
