"""Contrastive training objectives.

Three terms, combined by :func:`total_loss`:

* :func:`instance_loss` pulls each embedding toward the embeddings of its
  spatial positives against all other views in the batch.
* :func:`cluster_loss` treats the columns of the batch assignment matrix
  as cluster representations and contrasts matching columns of the anchor
  and neighbor views.
* :func:`entropy_regularizer` penalizes unbalanced batch-level cluster
  usage to keep assignments from collapsing.

Similarities are cosine throughout: instance embeddings arrive L2
normalized from the model, and cluster columns are normalized here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import torch

ENTROPY_FORMS = ("kl_uniform", "mean_entropy")


@dataclass
class LossConfig:
    instance_temperature: float = 0.5
    cluster_temperature: float = 1.0
    cluster_weight: float = 2.0
    entropy_weight: float = 0.2
    entropy_form: str = "kl_uniform"
    symmetric_cluster_loss: bool = True

    def __post_init__(self) -> None:
        if self.instance_temperature <= 0 or self.cluster_temperature <= 0:
            raise ValueError("temperatures must be > 0")
        if self.cluster_weight < 0 or self.entropy_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if self.entropy_form not in ENTROPY_FORMS:
            raise ValueError(f"entropy_form must be one of {ENTROPY_FORMS}")


class PositiveStructure:
    """Per-view sets of positive view indices within one batch.

    A view is never its own positive. Sets may be asymmetric in principle,
    but the trainer always produces mutual anchor/neighbor pairs.
    """

    def __init__(self, positives: list[frozenset[int]] | list[set[int]]):
        self.positives = tuple(frozenset(p) for p in positives)
        n = len(self.positives)
        for i, pos in enumerate(self.positives):
            if i in pos:
                raise ValueError(f"view {i} lists itself as a positive")
            if any(j < 0 or j >= n for j in pos):
                raise ValueError(f"view {i} references an out-of-range positive")

    def __len__(self) -> int:
        return len(self.positives)

    @classmethod
    def matching(cls, n_pairs: int) -> "PositiveStructure":
        """Mutual pairing of view i with view n_pairs + i."""
        return cls(
            [{n_pairs + i} for i in range(n_pairs)] + [{i} for i in range(n_pairs)]
        )

    def mask(self, device=None) -> torch.Tensor:
        m = torch.zeros(len(self), len(self), dtype=torch.bool, device=device)
        for i, pos in enumerate(self.positives):
            for j in pos:
                m[i, j] = True
        return m

    def permuted(self, perm: list[int]) -> "PositiveStructure":
        """Structure after reordering views by ``perm`` (new index of old i is perm[i])."""
        new = [set() for _ in range(len(self))]
        for i, pos in enumerate(self.positives):
            new[perm[i]] = {perm[j] for j in pos}
        return PositiveStructure(new)


def instance_loss(
    embeddings: torch.Tensor, structure: PositiveStructure, temperature: float = 0.5
) -> torch.Tensor:
    """Spatial-positive contrastive loss over instance embeddings.

    For each view i, averages -log softmax similarity over its positives,
    with the denominator running over every other view in the batch; the
    per-view terms are averaged so the value is batch-size invariant.
    """
    v = embeddings.shape[0]
    if v < 2:
        raise ValueError("need at least two views")
    if len(structure) != v:
        raise ValueError("positive structure does not match batch size")
    empties = [i for i, pos in enumerate(structure.positives) if not pos]
    if empties:
        raise ValueError(
            f"views {empties} have no positives; the trainer must supply a fallback view"
        )

    logits = embeddings @ embeddings.T / temperature
    eye = torch.eye(v, dtype=torch.bool, device=embeddings.device)
    log_denom = torch.logsumexp(logits.masked_fill(eye, float("-inf")), dim=1)
    pos_mask = structure.mask(embeddings.device)
    per_pair = torch.where(pos_mask, log_denom.unsqueeze(1) - logits, logits.new_zeros(()))
    per_anchor = per_pair.sum(dim=1) / pos_mask.sum(dim=1)
    return per_anchor.mean()


def _normalize_columns(q: torch.Tensor) -> torch.Tensor:
    norms = q.norm(dim=0)
    zero = norms == 0
    if bool(zero.any()):
        warnings.warn(
            f"{int(zero.sum())} cluster column(s) carry no probability mass; "
            "nudging by 1e-12 before normalization",
            stacklevel=3,
        )
        q = q + zero.to(q.dtype) * 1e-12
        norms = q.norm(dim=0)
    return q / norms


def cluster_loss(
    q_anchor: torch.Tensor,
    q_neighbor: torch.Tensor,
    temperature: float = 1.0,
    symmetric: bool = True,
) -> torch.Tensor:
    """Column-space contrastive loss between two assignment matrices.

    Column m of one matrix should match column m of the other and differ
    from the rest. With ``symmetric`` the mirrored direction is averaged in.
    """
    if q_anchor.shape != q_neighbor.shape:
        raise ValueError("assignment matrices must share a shape")
    b, m = q_anchor.shape
    if b < m:
        warnings.warn(
            f"batch of {b} rows is smaller than the {m} clusters; "
            "column statistics will be noisy",
            stacklevel=2,
        )
    cols_a = _normalize_columns(q_anchor)
    cols_n = _normalize_columns(q_neighbor)
    sim = cols_a.T @ cols_n / temperature
    diag = sim.diagonal()
    loss = (torch.logsumexp(sim, dim=1) - diag).mean()
    if symmetric:
        mirrored = (torch.logsumexp(sim, dim=0) - diag).mean()
        loss = 0.5 * (loss + mirrored)
    return loss


def entropy_regularizer(q: torch.Tensor, form: str = "kl_uniform") -> torch.Tensor:
    """Balance penalty on the aggregate cluster-usage distribution.

    The column sums of ``q`` are normalized into a distribution Z over
    clusters. ``kl_uniform`` returns KL(Z || uniform) = log M + sum Z log Z,
    which is 0 for balanced usage and log M at full collapse.
    ``mean_entropy`` returns log M + H(Z)/M instead, which *rewards*
    collapse relative to balance; it is kept selectable for comparison
    runs but is not the default.
    """
    if form not in ENTROPY_FORMS:
        raise ValueError(f"entropy_form must be one of {ENTROPY_FORMS}")
    m = q.shape[1]
    col = q.sum(dim=0)
    z = col / col.sum()
    plogp = torch.xlogy(z, z).sum()
    if form == "kl_uniform":
        return math.log(m) + plogp
    return math.log(m) - plogp / m


def _check_component(value, name: str) -> None:
    scalar = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
    if math.isnan(scalar) or math.isinf(scalar):
        raise ValueError(f"{name} loss component is not finite: {scalar}")


def total_loss(
    instance,
    cluster,
    entropy,
    cluster_weight: float = 2.0,
    entropy_weight: float = 0.2,
):
    """Weighted sum of the three training objectives."""
    _check_component(instance, "instance")
    _check_component(cluster, "cluster")
    _check_component(entropy, "entropy")
    return instance + cluster_weight * cluster + entropy_weight * entropy
