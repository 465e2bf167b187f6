"""Backbones: a small trainable CNN and the torchvision VGG-16 adapter.

Both expose the same surface: a flat feature stack with named pooling
stages (``pool1`` .. ``pool4``/``pool5``), an optional task head for softmax
export, and receptive-field arithmetic so every feature-grid position can be
mapped back to the image patch it looks at.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# torchvision vgg16.features end indices for each pooling stage, and the
# published weight file whose hash fragment is part of its filename
VGG16_POOL_ENDS = {"pool1": 5, "pool2": 10, "pool3": 17, "pool4": 24, "pool5": 31}
VGG16_WEIGHTS_FILE = "vgg16-397923af.pth"


class SmallNet(nn.Module):
    """Compact CNN with four pooling stages (stride 16 at pool4)."""

    stage_channels = (16, 32, 64, 64)

    def __init__(self, in_channels: int = 1, n_classes: int = 10):
        super().__init__()
        layers: list[nn.Module] = []
        self.pool_ends: dict[str, int] = {}
        prev = in_channels
        for stage, out in enumerate(self.stage_channels, start=1):
            layers += [
                nn.Conv2d(prev, out, kernel_size=3, padding=1),
                nn.BatchNorm2d(out),
                nn.ReLU(inplace=True),
                nn.Conv2d(out, out, kernel_size=3, padding=1),
                nn.BatchNorm2d(out),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(kernel_size=2, stride=2),
            ]
            self.pool_ends[f"pool{stage}"] = len(layers)
            prev = out
        self.features = nn.Sequential(*layers)
        self.head = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(self.stage_channels[-1], n_classes),
        )
        self.in_channels = in_channels
        self.n_classes = n_classes

    def forward(self, x):
        return self.head(self.features(x))


@dataclass
class Backbone:
    """A feature stack plus metadata, ready for extraction and softmax export."""

    name: str
    features: nn.Sequential
    pool_ends: dict[str, int]
    in_channels: int
    head: nn.Module | None = None
    n_classes: int | None = None
    normalize_mean: tuple = (0.0,)
    normalize_std: tuple = (1.0,)
    _module: nn.Module | None = field(default=None, repr=False)

    def check_layer(self, layer: str) -> None:
        if layer not in self.pool_ends:
            known = ", ".join(sorted(self.pool_ends))
            raise ValueError(f"backbone {self.name} has no layer {layer!r} (have: {known})")

    def preprocess(self, images: np.ndarray) -> torch.Tensor:
        """uint8 (B, H, W) or (B, H, W, 3) -> normalized float tensor (B, C, H, W)."""
        arr = np.asarray(images)
        if arr.ndim == 3:
            arr = arr[:, :, :, None]
        if arr.shape[3] == 1 and self.in_channels == 3:
            arr = np.repeat(arr, 3, axis=3)
        if arr.shape[3] != self.in_channels:
            raise ValueError(
                f"backbone {self.name} expects {self.in_channels} input channels, "
                f"got {arr.shape[3]}"
            )
        x = torch.from_numpy(arr.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
        mean = torch.tensor(self.normalize_mean).view(1, -1, 1, 1)
        std = torch.tensor(self.normalize_std).view(1, -1, 1, 1)
        return (x - mean) / std

    @torch.no_grad()
    def extract(self, images: np.ndarray, layer: str = "pool4") -> np.ndarray:
        """Feature grids (B, H', W', C) for a batch of images at one stage."""
        self.check_layer(layer)
        stack = self.features[: self.pool_ends[layer]]
        stack.eval()
        out = stack(self.preprocess(images))
        return out.permute(0, 2, 3, 1).contiguous().numpy().astype(np.float32)

    @torch.no_grad()
    def softmax(self, images: np.ndarray) -> np.ndarray:
        if self.head is None:
            raise ValueError(f"backbone {self.name} has no task head for softmax export")
        self.features.eval()
        self.head.eval()
        logits = self.head(self.features(self.preprocess(images)))
        return torch.softmax(logits, dim=1).numpy().astype(np.float64)

    def receptive_field(self, layer: str) -> tuple[float, float, float]:
        """(rf, jump, start): patch size, stride, and first-center offset in pixels."""
        self.check_layer(layer)
        rf, jump, start = 1.0, 1.0, 0.5
        for module in self.features[: self.pool_ends[layer]]:
            if isinstance(module, (nn.Conv2d, nn.MaxPool2d)):
                k = module.kernel_size if isinstance(module.kernel_size, int) else module.kernel_size[0]
                s = module.stride if isinstance(module.stride, int) else module.stride[0]
                p = module.padding if isinstance(module.padding, int) else module.padding[0]
                start += ((k - 1) / 2.0 - p) * jump
                rf += (k - 1) * jump
                jump *= s
        return rf, jump, start

    def patch_boxes(self, layer: str, grid_h: int, grid_w: int, img_h: int, img_w: int):
        """Clipped (y0, x0, y1, x1) receptive-field boxes for every grid position."""
        rf, jump, start = self.receptive_field(layer)
        boxes = []
        for r in range(grid_h):
            cy = start + r * jump
            y0 = max(0, int(round(cy - rf / 2)))
            y1 = min(img_h, int(round(cy + rf / 2)))
            for c in range(grid_w):
                cx = start + c * jump
                x0 = max(0, int(round(cx - rf / 2)))
                x1 = min(img_w, int(round(cx + rf / 2)))
                boxes.append((r, c, y0, x0, y1, x1))
        return boxes


def build_smallnet(in_channels: int = 1, n_classes: int = 10) -> tuple[Backbone, SmallNet]:
    net = SmallNet(in_channels=in_channels, n_classes=n_classes)
    backbone = Backbone(
        name="smallnet",
        features=net.features,
        pool_ends=dict(net.pool_ends),
        in_channels=in_channels,
        head=net.head,
        n_classes=n_classes,
        _module=net,
    )
    return backbone, net


def save_smallnet(net: SmallNet, path) -> str:
    """Save weights plus architecture meta; returns the file's sha256."""
    torch.save(
        {
            "arch": "smallnet",
            "in_channels": net.in_channels,
            "n_classes": net.n_classes,
            "state_dict": net.state_dict(),
        },
        path,
    )
    return sha256_of(path)


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_backbone(name: str, weights: str | None = None) -> Backbone:
    """Build a backbone by name.

    ``smallnet`` takes a checkpoint written by ``train_backbone`` (or
    ``random``/None for an untrained net). ``vgg16`` takes ``download``
    (torchvision fetches the published ImageNet weights, never vendored),
    ``random`` (architecture only), or a path to a local copy of
    ``vgg16-397923af.pth``.
    """
    if name == "smallnet":
        if weights is None or weights == "random":
            backbone, _ = build_smallnet()
            return backbone
        payload = torch.load(weights, map_location="cpu", weights_only=True)
        if payload.get("arch") != "smallnet":
            raise ValueError(f"{weights}: not a smallnet checkpoint")
        backbone, net = build_smallnet(
            in_channels=int(payload["in_channels"]), n_classes=int(payload["n_classes"])
        )
        net.load_state_dict(payload["state_dict"])
        return backbone
    if name == "vgg16":
        from torchvision import models

        if weights == "download":
            net = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1)
        elif weights is None or weights == "random":
            net = models.vgg16()
        else:
            net = models.vgg16()
            net.load_state_dict(torch.load(weights, map_location="cpu", weights_only=True))
        return Backbone(
            name="vgg16",
            features=net.features,
            pool_ends=dict(VGG16_POOL_ENDS),
            in_channels=3,
            head=None,  # the ImageNet head is not a task head; use smallnet for softmax
            normalize_mean=IMAGENET_MEAN,
            normalize_std=IMAGENET_STD,
            _module=net,
        )
    raise ValueError(f"unknown backbone {name!r} (have: smallnet, vgg16)")
