"""Export the backbone head's softmax probabilities as a partmap CSV.

Each row is ``source_id,p_class0,...`` and sums to 1 within 1e-4 (softmax).
With --labels the class count is checked against the labels file first.

Example:
  python -m pyfeatures.softmax --dataset image-dir --data-dir occluded/ \
      --backbone smallnet --weights weights.pt --short-edge 112 --out probs.csv
"""

import argparse

import numpy as np

from . import cliutil, fmapio
from .backbone import load_backbone
from .data import load_dataset


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    cliutil.add_dataset_args(parser)
    cliutil.add_backbone_args(parser)
    cliutil.add_resize_args(parser)
    parser.add_argument("--labels", default=None, help="Labels CSV to check class count against.")
    parser.add_argument("--out", required=True, help="Output probability CSV.")
    args = parser.parse_args(argv)

    backbone = load_backbone(args.backbone, args.weights)
    if backbone.head is None:
        parser.error(f"backbone {args.backbone} has no task head; train one with train_backbone")
    if args.labels:
        import csv

        with open(args.labels, newline="", encoding="utf-8") as fh:
            labels = [int(row[1]) for row in list(csv.reader(fh))[1:] if row]
        n_classes = max(labels) + 1
        if n_classes != backbone.n_classes:
            parser.error(
                f"labels file has {n_classes} classes, backbone head has {backbone.n_classes}"
            )

    dataset = load_dataset(args.dataset, args.data_dir, args.split, args.limit)
    images = cliutil.prepare_images(dataset, args.short_edge, args.crop)
    rows = []
    for batch in cliutil.batches(images, args.batch_size):
        rows.append(backbone.softmax(np.stack(batch)))
    probs = np.concatenate(rows) if rows else np.zeros((0, backbone.n_classes))
    fmapio.write_probabilities_csv(dataset.ids, probs, args.out)
    print(f"wrote {probs.shape[0]} probability rows to {args.out}")


if __name__ == "__main__":
    main()
