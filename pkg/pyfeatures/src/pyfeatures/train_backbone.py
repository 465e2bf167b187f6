"""Train the small backbone on a labeled image set; write weights + manifest.

The manifest JSON pins the produced weight file (sha256), the training
configuration, and the clean test accuracy, so downstream runs can verify
exactly which backbone they used. The published vgg16 weight file is never
vendored; its torchvision filename (vgg16-397923af.pth) already embeds its
hash fragment and is recorded here for reference.

Example:
  python -m pyfeatures.train_backbone --dataset sklearn-digits \
      --epochs 6 --short-edge 112 --seed 0 --out weights.pt --manifest manifest.json
"""

import argparse
import json

import numpy as np
import torch
from torch import nn

from . import cliutil
from .backbone import VGG16_WEIGHTS_FILE, build_smallnet, save_smallnet
from .data import load_dataset


def _accuracy(backbone, images, labels, batch_size) -> float:
    hits = 0
    for start in range(0, len(images), batch_size):
        batch = np.stack(images[start : start + batch_size])
        probs = backbone.softmax(batch)
        hits += int(np.sum(np.argmax(probs, axis=1) == labels[start : start + len(batch)]))
    return hits / len(images)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    cliutil.add_dataset_args(parser)
    cliutil.add_resize_args(parser, default_short_edge=112)
    parser.add_argument("--epochs", type=int, default=6)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--lr", type=float, default=3e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="Weights checkpoint path.")
    parser.add_argument("--manifest", default=None, help="Manifest JSON path.")
    args = parser.parse_args(argv)

    torch.manual_seed(args.seed)
    train = load_dataset(args.dataset, args.data_dir, "train", args.limit)
    test = load_dataset(args.dataset, args.data_dir, "test", args.limit)
    train_images = cliutil.prepare_images(train, args.short_edge, args.crop)
    test_images = cliutil.prepare_images(test, args.short_edge, args.crop)
    channels = 1 if train_images[0].ndim == 2 else 3
    n_classes = len(train.class_names)
    backbone, net = build_smallnet(in_channels=channels, n_classes=n_classes)

    optimizer = torch.optim.Adam(net.parameters(), lr=args.lr)
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(args.seed)
    labels = np.asarray(train.labels)
    net.train()
    for epoch in range(args.epochs):
        order = order_rng.permutation(len(train_images))
        total = 0.0
        for start in range(0, len(order), args.batch_size):
            take = order[start : start + args.batch_size]
            x = backbone.preprocess(np.stack([train_images[i] for i in take]))
            y = torch.from_numpy(labels[take])
            optimizer.zero_grad()
            loss = loss_fn(net(x), y)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(take)
        print(f"epoch {epoch + 1}/{args.epochs}: loss {total / len(order):.4f}")
    net.eval()

    accuracy = _accuracy(backbone, test_images, np.asarray(test.labels), args.batch_size)
    digest = save_smallnet(net, args.out)
    print(f"clean {args.dataset} test accuracy: {accuracy:.4f}; weights sha256 {digest[:12]}...")
    if args.manifest:
        manifest = {
            "backbone": "smallnet",
            "weights_file": str(args.out),
            "weights_sha256": digest,
            "dataset": args.dataset,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "seed": args.seed,
            "short_edge": args.short_edge,
            "clean_test_accuracy": accuracy,
            "reference_pretrained_backbone": VGG16_WEIGHTS_FILE,
        }
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)


if __name__ == "__main__":
    main()
