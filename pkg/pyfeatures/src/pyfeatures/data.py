"""Datasets, resizing, and object masks.

Three sources share one loader surface:

- ``sklearn-digits``: the handwritten digits bundled with scikit-learn,
  fully offline (the stand-in for MNIST where downloads are unavailable).
- ``mnist``: IDX files in ``data_dir`` (train-images-idx3-ubyte[.gz] etc.),
  provisioned by the user; parsed directly, nothing is downloaded.
- ``image-dir``: a directory of PNG/JPG files plus a ``labels.csv``.

Object masks come from threshold segmentation (bright strokes on a dark
background), which is how occlusion levels are measured.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class ImageSet:
    images: list[np.ndarray]  # uint8, (H, W) or (H, W, 3); sizes may vary
    labels: np.ndarray  # int64
    ids: list[str]
    class_names: list[str]
    rejects: list[tuple[str, str]]  # (source_id, reason) for unreadable inputs

    def __len__(self) -> int:
        return len(self.images)


def load_dataset(
    name: str, data_dir: str | None = None, split: str = "train", limit: int | None = None
) -> ImageSet:
    if name == "sklearn-digits":
        dataset = _load_digits(split)
    elif name == "mnist":
        if data_dir is None:
            raise ValueError("mnist needs --data-dir with the IDX files")
        dataset = _load_mnist(data_dir, split)
    elif name == "image-dir":
        if data_dir is None:
            raise ValueError("image-dir needs --data-dir")
        dataset = _load_image_dir(data_dir)
    else:
        raise ValueError(f"unknown dataset {name!r} (have: sklearn-digits, mnist, image-dir)")
    if limit is not None and limit < len(dataset):
        dataset = ImageSet(
            images=dataset.images[:limit],
            labels=dataset.labels[:limit],
            ids=dataset.ids[:limit],
            class_names=dataset.class_names,
            rejects=dataset.rejects,
        )
    return dataset


def _load_digits(split: str) -> ImageSet:
    from sklearn.datasets import load_digits

    bunch = load_digits()
    # deterministic interleaved split: every third sample is held out
    indices = np.arange(len(bunch.images))
    keep = indices[(indices % 3 == 0) == (split == "test")]
    images = [
        np.clip(bunch.images[i] * (255.0 / 16.0), 0, 255).astype(np.uint8) for i in keep
    ]
    return ImageSet(
        images=images,
        labels=bunch.target[keep].astype(np.int64),
        ids=[f"digits-{split}-{i}" for i in keep],
        class_names=[str(d) for d in range(10)],
        rejects=[],
    )


def _read_idx(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    magic, = struct.unpack(">I", raw[:4])
    kind, ndim = (magic >> 8) & 0xFF, magic & 0xFF
    if kind != 0x08:
        raise ValueError(f"{path}: unsupported IDX element type 0x{kind:02x}")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    return np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim).reshape(dims)


def _find_idx(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / stem, data_dir / f"{stem}.gz", data_dir / "raw" / stem,
                      data_dir / "raw" / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{stem}[.gz] not found under {data_dir}")


def mnist_available(data_dir: str) -> bool:
    try:
        for stem in MNIST_FILES["train"] + MNIST_FILES["test"]:
            _find_idx(Path(data_dir), stem)
        return True
    except (FileNotFoundError, TypeError):
        return False


def _load_mnist(data_dir: str, split: str) -> ImageSet:
    image_stem, label_stem = MNIST_FILES[split]
    images = _read_idx(_find_idx(Path(data_dir), image_stem))
    labels = _read_idx(_find_idx(Path(data_dir), label_stem)).astype(np.int64)
    return ImageSet(
        images=[images[i] for i in range(images.shape[0])],
        labels=labels,
        ids=[f"mnist-{split}-{i}" for i in range(images.shape[0])],
        class_names=[str(d) for d in range(10)],
        rejects=[],
    )


def _load_image_dir(data_dir: str) -> ImageSet:
    root = Path(data_dir)
    labels_csv = root / "labels.csv"
    import csv as _csv

    with open(labels_csv, newline="", encoding="utf-8") as fh:
        rows = list(_csv.reader(fh))[1:]
    images, labels, ids, rejects = [], [], [], []
    for source_id, label in (row[:2] for row in rows if row):
        path = None
        for ext in (".png", ".jpg", ".jpeg"):
            if (root / f"{source_id}{ext}").exists():
                path = root / f"{source_id}{ext}"
                break
        if path is None:
            rejects.append((source_id, "no image file"))
            continue
        try:
            with Image.open(path) as img:
                arr = np.asarray(img.convert("L") if img.mode in ("L", "1", "I;16") else img.convert("RGB"))
        except Exception as exc:  # unreadable image: record and move on
            rejects.append((source_id, f"unreadable: {exc}"))
            continue
        images.append(arr.astype(np.uint8))
        labels.append(int(label))
        ids.append(source_id)
    n_classes = (max(labels) + 1) if labels else 0
    return ImageSet(
        images=images,
        labels=np.asarray(labels, dtype=np.int64),
        ids=ids,
        class_names=[f"class{i}" for i in range(n_classes)],
        rejects=rejects,
    )


def resize_short_edge(image: np.ndarray, short_edge: int) -> np.ndarray:
    """Resize so the short edge hits ``short_edge``, preserving aspect ratio.

    The long edge is truncated (a 448x300 image at 224 becomes 224x334).
    """
    h, w = image.shape[:2]
    if h <= w:
        new_h, new_w = short_edge, int(w * short_edge / h)
    else:
        new_h, new_w = int(h * short_edge / w), short_edge
    pil = Image.fromarray(image)
    return np.asarray(pil.resize((new_w, new_h), Image.BILINEAR)).astype(np.uint8)


def object_mask(image: np.ndarray, threshold_fraction: float = 0.2) -> np.ndarray:
    """Threshold segmentation: bright strokes on a dark background."""
    gray = image if image.ndim == 2 else image.mean(axis=2)
    mask = gray > threshold_fraction * 255.0
    if not mask.any():
        raise ValueError("object mask is empty; image has no foreground above threshold")
    return mask
