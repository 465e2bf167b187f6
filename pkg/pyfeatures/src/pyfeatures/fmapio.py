"""Writers for the partmap file formats, implemented from the format spec.

This module is deliberately independent of the partmap package: the byte
layouts and CSV schemas are the interface contract between the two sides,
and emitting them from a second implementation keeps that contract honest.

FMAP layout: ASCII ``FMAP``, u32 LE version (=1), u32 LE N/H/W/C, then
N*H*W*C little-endian float32 in (image, row, col, channel) order.
"""

import csv
import struct

import numpy as np

_HEADER = struct.Struct("<4sIIIII")
VERSION = 1


def write_fmap(maps: np.ndarray, path) -> None:
    """Write an (N, H, W, C) float array as an FMAP file."""
    maps = np.asarray(maps, dtype=np.float32)
    if maps.ndim != 4:
        raise ValueError(f"expected an (N, H, W, C) array, got shape {maps.shape}")
    if not np.all(np.isfinite(maps)):
        raise ValueError("feature maps must be finite")
    n, h, w, c = maps.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"FMAP", VERSION, n, h, w, c))
        fh.write(np.ascontiguousarray(maps, dtype="<f4").tobytes())


def read_fmap(path) -> np.ndarray:
    """Read an FMAP file back into an (N, H, W, C) float32 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n, h, w, c = _HEADER.unpack_from(raw)
    if magic != b"FMAP" or version != VERSION:
        raise ValueError(f"{path}: not an FMAP v{VERSION} file")
    payload = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return payload.reshape(n, h, w, c)


def write_labels_csv(ids, labels, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "label_index"])
        for source_id, label in zip(ids, labels):
            writer.writerow([source_id, int(label)])


def write_probabilities_csv(ids, probs: np.ndarray, path) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id"] + [f"p_class{i}" for i in range(probs.shape[1])])
        for source_id, row in zip(ids, probs):
            writer.writerow([source_id] + [repr(float(v)) for v in row])


def write_conditions_csv(ids, tags, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "condition"])
        for source_id, tag in zip(ids, tags):
            writer.writerow([source_id, tag])


def write_patch_index_csv(rows, path) -> None:
    """Rows of (source_id, row, col, y0, x0, y1, x1) receptive-field boxes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "row", "col", "y0", "x0", "y1", "x1"])
        writer.writerows(rows)
