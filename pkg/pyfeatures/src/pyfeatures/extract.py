"""Extract feature-grid maps from a backbone's pooling stage into an FMAP file.

Outputs, all in the partmap formats:
  --out          FMAP file, one map per readable image, input order
  --labels-out   source_id,label_index CSV aligned with the FMAP rows
  --patch-index  source_id,row,col,y0,x0,y1,x1 receptive-field boxes
  --rejects      source_id,reason CSV for unreadable inputs (image-dir)

Example:
  python -m pyfeatures.extract --dataset sklearn-digits --split train \
      --backbone smallnet --weights weights.pt --layer pool4 \
      --short-edge 112 --out train.fmap --labels-out train-labels.csv
"""

import argparse
import sys

import numpy as np

from . import cliutil, fmapio
from .backbone import load_backbone
from .data import load_dataset


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    cliutil.add_dataset_args(parser)
    cliutil.add_backbone_args(parser)
    cliutil.add_resize_args(parser)
    parser.add_argument("--layer", default="pool4", help="Pooling stage to tap.")
    parser.add_argument("--out", required=True, help="Output FMAP path.")
    parser.add_argument("--labels-out", default=None, help="Write aligned labels CSV here.")
    parser.add_argument("--patch-index", default=None, help="Write receptive-field boxes here.")
    parser.add_argument("--rejects", default=None, help="Write skipped inputs here.")
    args = parser.parse_args(argv)

    dataset = load_dataset(args.dataset, args.data_dir, args.split, args.limit)
    for source_id, reason in dataset.rejects:
        print(f"warning: skipping {source_id}: {reason}", file=sys.stderr)
    if args.rejects:
        with open(args.rejects, "w", encoding="utf-8") as fh:
            fh.write("source_id,reason\n")
            for source_id, reason in dataset.rejects:
                fh.write(f"{source_id},{reason}\n")
    backbone = load_backbone(args.backbone, args.weights)
    backbone.check_layer(args.layer)
    images = cliutil.prepare_images(dataset, args.short_edge, args.crop)

    chunks = []
    for batch in cliutil.batches(images, args.batch_size):
        chunks.append(backbone.extract(np.stack(batch), layer=args.layer))
    features = np.concatenate(chunks) if chunks else np.zeros((0, 0, 0, 0), np.float32)
    fmapio.write_fmap(features, args.out)

    if args.labels_out:
        fmapio.write_labels_csv(dataset.ids, dataset.labels, args.labels_out)
    if args.patch_index and len(images):
        img_h, img_w = images[0].shape[:2]
        boxes = backbone.patch_boxes(args.layer, features.shape[1], features.shape[2], img_h, img_w)
        rows = [
            (source_id, r, c, y0, x0, y1, x1)
            for source_id in dataset.ids
            for (r, c, y0, x0, y1, x1) in boxes
        ]
        fmapio.write_patch_index_csv(rows, args.patch_index)
    print(
        f"extracted {features.shape[0]} maps of "
        f"{features.shape[1]}x{features.shape[2]}x{features.shape[3]} to {args.out}"
    )


if __name__ == "__main__":
    main()
