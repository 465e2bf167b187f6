"""Synthesize occluded images: rectangles over the object up to a level band.

Writes into --out-dir:
  {source_id}.png           occluded images
  labels.csv                source_id,label_index
  conditions.csv            source_id,condition  (e.g. level2-noise, clean)
  fractions.csv             source_id,occluded_object_fraction

With --canvases N the dataset flags are ignored and N pure-occluder canvases
are emitted instead (for background-model estimation); their labels are 0.

Example:
  python -m pyfeatures.occlude --dataset sklearn-digits --split test \
      --level 2 --kind noise --seed 7 --short-edge 112 --out-dir occluded/
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

from . import cliutil, fmapio
from .data import load_dataset, object_mask
from .occlusion import KINDS, condition_tag, occlude_image, _fill


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    cliutil.add_dataset_args(parser, required=False)
    parser.add_argument("--level", type=int, choices=[0, 1, 2, 3], default=0)
    parser.add_argument("--kind", choices=list(KINDS), default="noise")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--short-edge",
        type=int,
        default=0,
        help="Resize before occluding (0 = occlude at native resolution).",
    )
    parser.add_argument("--mask-threshold", type=float, default=0.2)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument(
        "--canvases",
        type=int,
        default=0,
        help="Emit N full-frame occluder canvases instead of dataset images.",
    )
    parser.add_argument("--canvas-size", type=int, default=112)
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    if args.canvases:
        ids, labels, tags, fractions = [], [], [], []
        for i in range(args.canvases):
            canvas = _fill((args.canvas_size, args.canvas_size), args.kind, rng, channels=1)
            source_id = f"canvas-{args.kind}-{i}"
            Image.fromarray(canvas).save(out_dir / f"{source_id}.png")
            ids.append(source_id)
            labels.append(0)
            tags.append(f"canvas-{args.kind}")
            fractions.append(1.0)
        _write_sidecars(out_dir, ids, labels, tags, fractions)
        print(f"wrote {args.canvases} {args.kind} canvases to {out_dir}")
        return

    if args.dataset is None:
        parser.error("--dataset is required unless --canvases is used")
    dataset = load_dataset(args.dataset, args.data_dir, args.split, args.limit)
    images = cliutil.prepare_images(dataset, args.short_edge, crop="square")
    ids, labels, tags, fractions = [], [], [], []
    for i, (image, source_id, label) in enumerate(zip(images, dataset.ids, dataset.labels)):
        if args.level == 0:
            occluded, fraction = image, 0.0
        else:
            mask = object_mask(image, args.mask_threshold)
            # per-image substream so output does not depend on processing order
            image_rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(i,)))
            occluded, _, fraction = occlude_image(image, mask, args.level, args.kind, image_rng)
        Image.fromarray(occluded).save(out_dir / f"{source_id}.png")
        ids.append(source_id)
        labels.append(int(label))
        tags.append(condition_tag(args.level, args.kind))
        fractions.append(fraction)
    _write_sidecars(out_dir, ids, labels, tags, fractions)
    print(f"wrote {len(ids)} images at {condition_tag(args.level, args.kind)} to {out_dir}")


def _write_sidecars(out_dir: Path, ids, labels, tags, fractions) -> None:
    fmapio.write_labels_csv(ids, labels, out_dir / "labels.csv")
    fmapio.write_conditions_csv(ids, tags, out_dir / "conditions.csv")
    with open(out_dir / "fractions.csv", "w", encoding="utf-8") as fh:
        fh.write("source_id,occluded_object_fraction\n")
        for source_id, fraction in zip(ids, fractions):
            fh.write(f"{source_id},{fraction!r}\n")


if __name__ == "__main__":
    main()
