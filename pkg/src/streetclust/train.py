"""Training loop: spatial positive mining, augmentation, optimization.

Each step draws a mini-batch of anchors, samples one cached spatial
neighbor per anchor as its positive (re-sampled every epoch), augments
both sides independently, and minimizes the combined contrastive
objective with Adam. Anchors with no neighbor in range fall back to a
second augmentation of themselves, which is also the behaviour of the
``self_pair_baseline`` mode used as the no-prior reference.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import AugmentationPolicy, GeoImageRecord, augment, derive_rng, derive_seed
from .geo import NeighborTable, build_index
from .losses import (
    LossConfig,
    PositiveStructure,
    cluster_loss,
    entropy_regularizer,
    instance_loss,
    total_loss,
)
from .model import EncoderConfig, TwoHeadNet, save_checkpoint


@dataclass
class TrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    augmentation: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    k_neighbors: int = 1
    neighbor_distance: float = 150.0
    batch_size: int = 128
    epochs: int = 40
    learning_rate: float = 2e-4
    weight_decay: float = 0.0
    seed: int = 0
    self_pair_baseline: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    @property
    def n_clusters(self) -> int:
        return self.encoder.n_clusters

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class TrainReport:
    epoch_losses: list[dict]
    fallback_counts: list[int]
    wall_time_s: float
    checkpoint_dir: str | None

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


@dataclass
class AssignmentMatrix:
    """Per-record soft cluster probabilities plus argmax labels."""

    record_ids: list[str]
    probs: np.ndarray  # N x M, rows sum to 1

    @property
    def labels(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    def save(self, path) -> None:
        payload = {
            "record_ids": self.record_ids,
            "probs": [[float(v) for v in row] for row in self.probs],
        }
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "AssignmentMatrix":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(payload["record_ids"], np.asarray(payload["probs"], dtype=np.float64))


def cache_neighbors(records: list[GeoImageRecord], k: int, d: float) -> NeighborTable:
    """Precompute each record's spatial neighbors once, before training."""
    if len(records) < 2:
        raise ValueError("need at least 2 records to cache neighbors")
    index = build_index(records)
    table = NeighborTable()
    for rec in records:
        table.rows[rec.id] = index.knn(rec.id, k=k, d=d)
    return table


def make_batch(
    images: np.ndarray,
    records: list[GeoImageRecord],
    table: NeighborTable | None,
    batch_indices: np.ndarray,
    epoch: int,
    config: TrainConfig,
):
    """Augmented anchor and positive views for one mini-batch.

    Returns (anchor_views, neighbor_views, structure, n_fallback) where the
    views are float32 B x H x W x 3 arrays and the structure mutually pairs
    anchor view i with neighbor view B + i. Neighbor choice and both
    augmentations are keyed on (seed, epoch, record, view), so the batch
    content is independent of execution order.
    """
    row_of = {rec.id: i for i, rec in enumerate(records)}
    anchors = []
    positives = []
    n_fallback = 0
    for i in batch_indices:
        rec = records[i]
        j = int(i)
        if not config.self_pair_baseline:
            row = table.rows[rec.id] if table is not None else []
            if row:
                pick = derive_rng("pick", config.seed, epoch, rec.id)
                j = row_of[row[int(pick.integers(len(row)))][0]]
            else:
                n_fallback += 1
        anchors.append(augment(images[i], config.augmentation, (config.seed, epoch, rec.id, 0)))
        positives.append(augment(images[j], config.augmentation, (config.seed, epoch, rec.id, 1)))
    structure = PositiveStructure.matching(len(batch_indices))
    return np.stack(anchors), np.stack(positives), structure, n_fallback


def _to_tensor(views: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(views).permute(0, 3, 1, 2).contiguous()


def train(
    config: TrainConfig,
    records: list[GeoImageRecord],
    images: np.ndarray,
    out_dir=None,
    dataset_hash: str = "",
) -> tuple[TwoHeadNet, TrainReport]:
    """Run the full optimization and return the trained model and report.

    ``images`` must align with ``records`` (float32, values in [0, 1]).
    When ``out_dir`` is given, a rolling checkpoint is written after every
    epoch and a diagnostic dump is left behind if the loss degenerates.
    """
    if len(records) < config.batch_size:
        raise ValueError(
            f"need at least batch_size={config.batch_size} records, got {len(records)}"
        )
    if len(images) != len(records):
        raise ValueError("images and records are misaligned")

    start = time.perf_counter()
    torch.manual_seed(derive_seed("model-init", config.seed) % 2**63)
    model = TwoHeadNet(config.encoder)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )

    table = None
    if not config.self_pair_baseline:
        table = cache_neighbors(records, config.k_neighbors, config.neighbor_distance)

    out_dir = Path(out_dir) if out_dir is not None else None
    epoch_losses: list[dict] = []
    fallback_counts: list[int] = []
    n = len(records)

    model.train()
    for epoch in range(config.epochs):
        order = derive_rng("shuffle", config.seed, epoch).permutation(n)
        sums = {"instance": 0.0, "cluster": 0.0, "entropy": 0.0, "total": 0.0}
        steps = 0
        fallbacks = 0
        for lo in range(0, n, config.batch_size):
            batch_idx = order[lo : lo + config.batch_size]
            if len(batch_idx) < 2:
                continue
            anchors, positives, structure, n_fb = make_batch(
                images, records, table, batch_idx, epoch, config
            )
            fallbacks += n_fb
            views = torch.cat([_to_tensor(anchors), _to_tensor(positives)])
            z, q = model(views)
            b = len(batch_idx)
            inst = instance_loss(z, structure, config.loss.instance_temperature)
            clus = cluster_loss(
                q[:b], q[b:], config.loss.cluster_temperature, config.loss.symmetric_cluster_loss
            )
            ent = entropy_regularizer(q, config.loss.entropy_form)
            try:
                loss = total_loss(
                    inst, clus, ent, config.loss.cluster_weight, config.loss.entropy_weight
                )
            except ValueError as exc:
                _dump_bad_batch(out_dir, epoch, steps, batch_idx, records, inst, clus, ent)
                raise RuntimeError(f"aborting at epoch {epoch} step {steps}: {exc}") from exc
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sums["instance"] += inst.item()
            sums["cluster"] += clus.item()
            sums["entropy"] += ent.item()
            sums["total"] += loss.item()
            steps += 1
        epoch_losses.append({k: v / steps for k, v in sums.items()})
        fallback_counts.append(fallbacks)
        if out_dir is not None:
            save_checkpoint(
                out_dir,
                model,
                {
                    "config": json.loads(json.dumps(asdict(config), default=str)),
                    "config_hash": config.config_hash(),
                    "m": config.n_clusters,
                    "epoch": epoch + 1,
                    "dataset_hash": dataset_hash,
                    "seed": config.seed,
                },
            )

    model.eval()
    report = TrainReport(
        epoch_losses=epoch_losses,
        fallback_counts=fallback_counts,
        wall_time_s=time.perf_counter() - start,
        checkpoint_dir=str(out_dir) if out_dir is not None else None,
    )
    return model, report


def _dump_bad_batch(out_dir, epoch, step, batch_idx, records, inst, clus, ent) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    def scalar(v):
        return float(v.detach()) if isinstance(v, torch.Tensor) else float(v)

    dump = {
        "epoch": epoch,
        "step": step,
        "record_ids": [records[i].id for i in batch_idx],
        "instance": scalar(inst),
        "cluster": scalar(clus),
        "entropy": scalar(ent),
    }
    with (Path(out_dir) / "diagnostic_dump.json").open("w", encoding="utf-8") as fh:
        json.dump(dump, fh, indent=2)


def predict(model: TwoHeadNet, records: list[GeoImageRecord], images: np.ndarray) -> AssignmentMatrix:
    """Eval-mode cluster probabilities for un-augmented images."""
    if len(images) != len(records):
        raise ValueError("images and records are misaligned")
    model.eval()
    probs = []
    with torch.no_grad():
        for lo in range(0, len(images), 256):
            chunk = _to_tensor(images[lo : lo + 256])
            _, q = model(chunk)
            probs.append(q.numpy())
    return AssignmentMatrix([r.id for r in records], np.concatenate(probs).astype(np.float64))
