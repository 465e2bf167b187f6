"""Shared argparse groups and batching for the pipeline scripts."""

import argparse

import numpy as np

from .data import ImageSet, load_dataset, resize_short_edge


def add_dataset_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument(
        "--dataset",
        choices=["sklearn-digits", "mnist", "image-dir"],
        required=required,
        help="Image source: bundled digits, MNIST IDX files, or a PNG/JPG directory.",
    )
    parser.add_argument("--data-dir", default=None, help="Dataset root (mnist, image-dir).")
    parser.add_argument("--split", choices=["train", "test"], default="train")
    parser.add_argument("--limit", type=int, default=None, help="Use only the first N images.")


def add_backbone_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backbone", choices=["smallnet", "vgg16"], default="smallnet")
    parser.add_argument(
        "--weights",
        required=True,
        help="Checkpoint path; 'download' fetches vgg16's published weights, "
        "'random' builds an untrained net (smoke tests only).",
    )
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu", help="Torch device tag.")


def add_resize_args(parser: argparse.ArgumentParser, default_short_edge: int = 224) -> None:
    parser.add_argument(
        "--short-edge",
        type=int,
        default=default_short_edge,
        help="Resize so the short edge has this many pixels (aspect preserved).",
    )
    parser.add_argument(
        "--crop",
        choices=["square", "none"],
        default="square",
        help="Center-crop the long edge so all maps share a grid shape.",
    )


def prepare_images(dataset: ImageSet, short_edge: int, crop: str) -> list[np.ndarray]:
    """Resize (and optionally center-crop) every image."""
    prepared = []
    for image in dataset.images:
        resized = resize_short_edge(image, short_edge) if short_edge else np.asarray(image)
        if crop == "square":
            h, w = resized.shape[:2]
            side = min(h, w)
            y0, x0 = (h - side) // 2, (w - side) // 2
            resized = resized[y0 : y0 + side, x0 : x0 + side]
        prepared.append(resized)
    if crop == "none":
        shapes = {img.shape for img in prepared}
        if len(shapes) > 1:
            raise ValueError(
                f"--crop none needs uniformly sized images, got shapes {sorted(shapes)}"
            )
    return prepared


def batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]
