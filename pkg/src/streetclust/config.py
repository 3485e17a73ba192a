"""Pipeline configuration: one document, strict keys, flag overrides.

Defaults follow the published training recipe wherever one exists
(learning rate 2e-4, batch 128, temperatures 0.5/1.0, weights 2.0/0.2,
K=1, M=5, ~40 epochs); everything else is an artifact decision exposed
here so experiments stay reproducible from a single file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .data import AugmentationPolicy, SyntheticCitySpec
from .losses import LossConfig
from .model import EncoderConfig
from .train import TrainConfig


@dataclass
class DataSection:
    extent: float = 3000.0
    n_zones: int = 5
    n_categories: int = 5
    image_size: int = 32
    samples_per_zone: int = 400
    distractor_prob: float = 0.4
    dedupe_eps: float = 10.0
    augmentation: AugmentationPolicy = field(default_factory=AugmentationPolicy)


@dataclass
class ModelSection:
    architecture: str = "tiny-conv"
    feature_dim: int = 96
    embedding_dim: int = 128
    n_clusters: int = 5


@dataclass
class TrainSection:
    k_neighbors: int = 1
    neighbor_distance: float = 150.0
    batch_size: int = 128
    epochs: int = 40
    learning_rate: float = 2e-4
    weight_decay: float = 0.0
    self_pair_baseline: bool = False


@dataclass
class EvalSection:
    moran_threshold: float = 100.0


@dataclass
class MapSection:
    cell_size: float = 100.0
    top_n_representatives: int = 12


@dataclass
class PipelineConfig:
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    loss: LossConfig = field(default_factory=LossConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    map: MapSection = field(default_factory=MapSection)

    # ------------------------------------------------------------- loading

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        return _build(cls, raw, path="")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config root must be a mapping")
        return cls.from_dict(raw)

    def apply_overrides(self, overrides: list[str]) -> "PipelineConfig":
        """Apply dotted key=value strings (values parsed as YAML scalars)."""
        raw = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise ValueError(f"override {item!r} is not of the form section.key=value")
            dotted, value = item.split("=", 1)
            node = raw
            *parents, leaf = dotted.split(".")
            for part in parents:
                if part not in node or not isinstance(node[part], dict):
                    raise ValueError(f"unknown config section {dotted!r}")
                node = node[part]
            if leaf not in node:
                raise ValueError(f"unknown config key {dotted!r}")
            node[leaf] = yaml.safe_load(value)
        return PipelineConfig.from_dict(raw)

    # ------------------------------------------------------------ exports

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def city_spec(self) -> SyntheticCitySpec:
        d = self.data
        return SyntheticCitySpec(
            extent=d.extent,
            n_zones=d.n_zones,
            n_categories=d.n_categories,
            image_size=d.image_size,
            samples_per_zone=d.samples_per_zone,
            distractor_prob=d.distractor_prob,
            seed=self.seed,
        )

    def encoder_config(self) -> EncoderConfig:
        m = self.model
        return EncoderConfig(
            architecture=m.architecture,
            feature_dim=m.feature_dim,
            embedding_dim=m.embedding_dim,
            n_clusters=m.n_clusters,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            encoder=self.encoder_config(),
            loss=dataclasses.replace(self.loss),
            augmentation=dataclasses.replace(self.data.augmentation),
            k_neighbors=t.k_neighbors,
            neighbor_distance=t.neighbor_distance,
            batch_size=t.batch_size,
            epochs=t.epochs,
            learning_rate=t.learning_rate,
            weight_decay=t.weight_decay,
            seed=self.seed,
            self_pair_baseline=t.self_pair_baseline,
        )


_SUBSECTIONS = {
    PipelineConfig: {
        "data": DataSection,
        "model": ModelSection,
        "train": TrainSection,
        "loss": LossConfig,
        "eval": EvalSection,
        "map": MapSection,
    },
    DataSection: {"augmentation": AugmentationPolicy},
}


def _build(cls, raw: dict, path: str):
    """Construct a dataclass from a dict, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ValueError(f"config section {path or '<root>'} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config key(s) {unknown} at {path or 'top level'}")
    subs = _SUBSECTIONS.get(cls, {})
    kwargs = {}
    for key, value in raw.items():
        child = f"{path + '.' if path else ''}{key}"
        if key in subs:
            kwargs[key] = _build(subs[key], value, child)
        else:
            kwargs[key] = _coerce(value)
    return cls(**kwargs)


def _coerce(value):
    if isinstance(value, list):
        return tuple(_coerce(v) for v in value)
    return value
