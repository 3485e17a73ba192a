"""Shared convolutional encoder with instance and cluster heads.

The default "tiny-conv" backbone is sized for the 32x32 synthetic
benchmark so a full training run finishes in minutes on a laptop CPU; a
"resnet18-style" backbone is available for larger imagery. Both feed two
two-layer MLP heads: the instance head emits L2-normalized embeddings
(so dot products are cosine similarities), the cluster head emits
softmax assignment probabilities.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F

ARCHITECTURES = ("tiny-conv", "resnet18-style")


@dataclass
class EncoderConfig:
    architecture: str = "tiny-conv"
    feature_dim: int = 96
    embedding_dim: int = 128
    n_clusters: int = 5

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.n_clusters < 2:
            raise ValueError("need at least 2 clusters")
        if self.architecture == "tiny-conv" and self.feature_dim % 8 != 0:
            raise ValueError("tiny-conv feature_dim must be divisible by 8")


def _norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(math.gcd(8, channels), channels)


class _SafePool(nn.Module):
    """2x2 max pool that becomes a no-op once the map hits 1 pixel."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] >= 2 and x.shape[-1] >= 2:
            return F.max_pool2d(x, 2)
        return x


class _TinyConv(nn.Module):
    """Four conv/pool blocks ending in global average pooling."""

    def __init__(self, feature_dim: int):
        super().__init__()
        widths = [feature_dim // 8, feature_dim // 4, feature_dim // 2, feature_dim]
        layers: list[nn.Module] = []
        c_in = 3
        for c_out in widths:
            layers += [
                nn.Conv2d(c_in, c_out, kernel_size=3, padding=1, bias=False),
                _norm(c_out),
                nn.ReLU(inplace=True),
                _SafePool(),
            ]
            c_in = c_out
        self.blocks = nn.Sequential(*layers)
        self.out_dim = feature_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.blocks(x)
        return F.adaptive_avg_pool2d(x, 1).flatten(1)


class _BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False), nn.BatchNorm2d(c_out)
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class _ResNet18Style(nn.Module):
    """Compact residual backbone for small inputs (3x3 stem, no early pooling)."""

    def __init__(self):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(3, 64, 3, padding=1, bias=False), nn.BatchNorm2d(64), nn.ReLU(inplace=True)
        )
        stages = []
        c_in = 64
        for c_out, stride in ((64, 1), (128, 2), (256, 2), (512, 2)):
            stages += [_BasicBlock(c_in, c_out, stride), _BasicBlock(c_out, c_out, 1)]
            c_in = c_out
        self.stages = nn.Sequential(*stages)
        self.out_dim = 512

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stages(self.stem(x))
        return F.adaptive_avg_pool2d(x, 1).flatten(1)


class TwoHeadNet(nn.Module):
    """Encoder plus instance and cluster heads.

    forward(images) -> (z, q) where z rows are unit L2 norm and q rows lie
    on the probability simplex.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        if config.architecture == "tiny-conv":
            self.encoder: nn.Module = _TinyConv(config.feature_dim)
        else:
            self.encoder = _ResNet18Style()
        h = self.encoder.out_dim
        self.instance_head = nn.Sequential(
            nn.Linear(h, h), nn.ReLU(inplace=True), nn.Linear(h, config.embedding_dim)
        )
        self.cluster_head = nn.Sequential(
            nn.Linear(h, h), nn.ReLU(inplace=True), nn.Linear(h, config.n_clusters)
        )

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ValueError(f"expected images of shape B x 3 x H x W, got {tuple(images.shape)}")
        if images.shape[0] == 0:
            raise ValueError("empty batch")
        features = self.encoder(images)
        z = F.normalize(self.instance_head(features), dim=1)
        q = F.softmax(self.cluster_head(features), dim=1)
        return z, q


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(directory, model: TwoHeadNet, metadata: dict) -> Path:
    """Write the weights blob plus a metadata.json next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(
        {"encoder_config": asdict(model.config), "state_dict": model.state_dict()},
        directory / "weights.pt",
    )
    with (directory / "metadata.json").open("w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory


def load_checkpoint(directory) -> tuple[TwoHeadNet, dict]:
    directory = Path(directory)
    blob = torch.load(directory / "weights.pt", map_location="cpu", weights_only=True)
    model = TwoHeadNet(EncoderConfig(**blob["encoder_config"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    metadata = json.loads((directory / "metadata.json").read_text(encoding="utf-8"))
    return model, metadata
