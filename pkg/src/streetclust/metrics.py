"""Clustering quality metrics and spatial autocorrelation statistics."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree


def _as_labels(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if arr.size and arr.min() < 0:
        raise ValueError("labels must be nonnegative")
    return arr


def _check_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p, t = _as_labels(pred), _as_labels(truth)
    if len(p) != len(t):
        raise ValueError(f"label arrays differ in length: {len(p)} vs {len(t)}")
    if len(p) == 0:
        raise ValueError("empty labelings")
    return p, t


def _contingency(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    np_, nt = int(pred.max()) + 1, int(truth.max()) + 1
    table = np.zeros((np_, nt), dtype=np.int64)
    np.add.at(table, (pred, truth), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalized by the arithmetic mean of entropies."""
    p, t = _check_pair(pred, truth)
    table = _contingency(p, t).astype(np.float64)
    n = table.sum()
    joint = table / n
    pi = joint.sum(axis=1, keepdims=True)
    pj = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / (pi @ pj)[nz])).sum())
    hp = _entropy(table.sum(axis=1))
    ht = _entropy(table.sum(axis=0))
    denom = 0.5 * (hp + ht)
    if denom == 0.0:
        # Both sides are a single cluster: the partitions coincide.
        return 1.0
    return max(0.0, min(1.0, mi / denom))


def ari(pred, truth) -> float:
    """Pair-counting Rand index adjusted for chance."""
    p, t = _check_pair(pred, truth)
    table = _contingency(p, t)
    n = table.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table.astype(np.float64)).sum()
    sum_i = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_j = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    if total == 0:
        return 1.0
    expected = sum_i * sum_j / total
    maximum = 0.5 * (sum_i + sum_j)
    if maximum == expected:
        # Degenerate: both partitions trivial; identical iff equal pair sets.
        return 1.0 if sum_ij == sum_i == sum_j else 0.0
    return float((sum_ij - expected) / (maximum - expected))


def hungarian_align(pred, truth, n_classes: int):
    """Optimal one-to-one cluster-to-class map, overall ACC and macro F1.

    Returns (mapping, acc, mf1) where mapping[cluster] = class. The macro
    F1 averages per-class F1 over classes present in the ground truth,
    computed after relabeling predictions through the mapping.
    """
    p, t = _check_pair(pred, truth)
    distinct = max(len(np.unique(p)), len(np.unique(t)))
    if n_classes < distinct:
        raise ValueError(f"n_classes={n_classes} smaller than distinct label count {distinct}")
    if p.max() >= n_classes or t.max() >= n_classes:
        raise ValueError("labels must be < n_classes")

    table = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    rows, cols = linear_sum_assignment(-table)
    mapping = np.empty(n_classes, dtype=np.int64)
    mapping[rows] = cols
    acc = float(table[rows, cols].sum() / len(p))

    mapped = mapping[p]
    f1s = []
    for cls in np.unique(t):
        tp = int(((mapped == cls) & (t == cls)).sum())
        fp = int(((mapped == cls) & (t != cls)).sum())
        fn = int(((mapped != cls) & (t == cls)).sum())
        f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0
        f1s.append(f1)
    return mapping, acc, float(np.mean(f1s))


def morans_i(values, coords, threshold: float = 100.0) -> float:
    """Global Moran's I with inverse-distance weights inside a cutoff.

    w_ij = 1/d_ij for 0 < d_ij <= threshold, zero otherwise (coincident
    points get zero weight since 1/0 is undefined). Neighbor pairs are
    gathered with a KD-tree; the result equals the literal double loop.
    """
    x = np.asarray(values, dtype=np.float64)
    xy = np.asarray(coords, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two observations")
    if xy.shape != (n, 2):
        raise ValueError("coords must be N x 2, aligned with values")
    dev = x - x.mean()
    ss = float((dev**2).sum())
    if ss == 0.0:
        raise ValueError("undefined Moran's I: zero variance in values")

    tree = cKDTree(xy)
    pairs = tree.query_pairs(r=threshold, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        dist = np.hypot(*(xy[i] - xy[j]).T)
        keep = dist > 0.0
        i, j, dist = i[keep], j[keep], dist[keep]
    else:
        i = j = dist = np.empty(0)
    if len(dist) == 0:
        raise ValueError("no neighbor pairs within threshold; Moran's I undefined")
    w = 1.0 / dist
    num = float(2.0 * (w * dev[i] * dev[j]).sum())
    w_sum = float(2.0 * w.sum())
    return (n / w_sum) * (num / ss)


def weighted_morans_i(
    labels,
    coords,
    n_classes: int,
    threshold: float = 100.0,
    weight_labels=None,
) -> float:
    """Class-frequency weighted Moran's I over binarized class indicators.

    Each class present is binarized to a 0/1 field and scored with
    :func:`morans_i`; the per-class values are combined with weights
    n_m / N. Class counts n_m come from ``labels`` itself unless
    ``weight_labels`` supplies a different labeling to take the class
    distribution from. Classes with zero binarized variance are skipped
    and the weights renormalized.
    """
    lab = _as_labels(labels)
    if lab.max() >= n_classes:
        raise ValueError("labels must be < n_classes")
    if len(np.unique(lab)) < 2:
        raise ValueError("weighted Moran's I needs at least two classes present")
    src = lab if weight_labels is None else _as_labels(weight_labels)
    if len(src) != len(lab):
        raise ValueError("weight_labels must align with labels")

    parts = []
    skipped = []
    for cls in range(n_classes):
        indicator = (lab == cls).astype(np.float64)
        count = int((src == cls).sum())
        if indicator.sum() in (0, len(lab)):
            skipped.append(cls)
            continue
        parts.append((count, morans_i(indicator, coords, threshold)))
    if skipped:
        warnings.warn(
            f"classes {skipped} have zero binarized variance; skipped with weight renormalization",
            stacklevel=2,
        )
    total = sum(c for c, _ in parts)
    if total == 0:
        raise ValueError("no class with nonzero weight")
    return float(sum((c / total) * i_m for c, i_m in parts))


def metrics_report(pred, truth, coords, n_classes: int, threshold: float = 100.0) -> dict:
    """Bundle every evaluation metric into a JSON-serializable report."""
    p, t = _check_pair(pred, truth)
    mapping, acc, mf1 = hungarian_align(p, t, n_classes)
    mapped = mapping[p]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (t, mapped), 1)
    per_class = []
    for cls in range(n_classes):
        tp = int(confusion[cls, cls])
        fp = int(confusion[:, cls].sum() - tp)
        fn = int(confusion[cls, :].sum() - tp)
        per_class.append(2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0)
    return {
        "nmi": nmi(p, t),
        "ari": ari(p, t),
        "acc": acc,
        "mf1": mf1,
        "moran_weighted": weighted_morans_i(p, coords, n_classes, threshold),
        "per_class_f1": per_class,
        "confusion_matrix": confusion.tolist(),
    }
