"""Independent brute-force / scalar-loop oracles used by the test suite.

Everything here is deliberately written as naive double-precision loops,
independent of the implementations under test.
"""

from __future__ import annotations

import itertools
import math


def knn_scan(coords, ids, query_idx, k, d):
    """O(N^2)-style linear scan: all other points within d, sorted by (dist, id)."""
    qx, qy = coords[query_idx]
    out = []
    for i, (x, y) in enumerate(coords):
        if i == query_idx:
            continue
        dist = math.hypot(x - qx, y - qy)
        if dist <= d:
            out.append((dist, ids[i]))
    out.sort()
    return [(rid, dist) for dist, rid in out[:k]]


def instance_loss_scalar(z, positives, temperature):
    """Scalar-loop transcription of the spatial instance contrastive loss.

    z: list of unit vectors (lists of floats), one per view.
    positives: list of sets of view indices.
    """
    n = len(z)
    total = 0.0
    anchors = 0
    for i in range(n):
        pos = positives[i]
        if not pos:
            raise ValueError("oracle requires every anchor to have a positive")
        inner = 0.0
        denom = 0.0
        for a in range(n):
            if a == i:
                continue
            denom += math.exp(dot(z[i], z[a]) / temperature)
        for j in pos:
            sim = dot(z[i], z[j])
            inner += -math.log(math.exp(sim / temperature) / denom)
        total += inner / len(pos)
        anchors += 1
    return total / anchors


def cluster_loss_scalar(q_a, q_n, temperature, symmetric=True):
    """Scalar-loop transcription of the cluster-level contrastive loss.

    q_a, q_n: B x M row-stochastic matrices as nested lists. Columns are
    L2-normalized, then column i of q_a is contrasted against all columns
    of q_n (and mirrored when symmetric).
    """
    b = len(q_a)
    m = len(q_a[0])
    cols_a = [_unit([q_a[r][c] for r in range(b)]) for c in range(m)]
    cols_n = [_unit([q_n[r][c] for r in range(b)]) for c in range(m)]

    def one_direction(anchor_cols, other_cols):
        total = 0.0
        for i in range(m):
            denom = 0.0
            for j in range(m):
                denom += math.exp(dot(anchor_cols[i], other_cols[j]) / temperature)
            total += -math.log(
                math.exp(dot(anchor_cols[i], other_cols[i]) / temperature) / denom
            )
        return total / m

    loss = one_direction(cols_a, cols_n)
    if symmetric:
        loss = 0.5 * (loss + one_direction(cols_n, cols_a))
    return loss


def entropy_regularizer_scalar(q, form):
    """Scalar-loop transcription of the cluster-balance regularizer."""
    n = len(q)
    m = len(q[0])
    col = [sum(q[r][c] for r in range(n)) for c in range(m)]
    total = sum(col)
    z = [c / total for c in col]
    plogp = sum(v * math.log(v) for v in z if v > 0.0)
    if form == "kl_uniform":
        return math.log(m) + plogp
    if form == "mean_entropy":
        return math.log(m) - plogp / m
    raise ValueError(form)


def ari_pair_counting(pred, truth):
    """Adjusted Rand index via explicit O(N^2) pair counting."""
    n = len(pred)
    a = b = c = d = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_p = pred[i] == pred[j]
            same_t = truth[i] == truth[j]
            if same_p and same_t:
                a += 1
            elif same_p and not same_t:
                b += 1
            elif not same_p and same_t:
                c += 1
            else:
                d += 1
    total = a + b + c + d
    if total == 0:
        return 1.0
    expected = (a + b) * (a + c) / total
    maximum = 0.5 * ((a + b) + (a + c))
    if maximum == expected:
        return 1.0 if (b == 0 and c == 0) else 0.0
    return (a - expected) / (maximum - expected)


def best_permutation_acc(pred, truth, m):
    """Cluster accuracy by exhaustive search over all M! cluster->class maps."""
    n = len(pred)
    best = -1.0
    for perm in itertools.permutations(range(m)):
        hits = sum(1 for p, t in zip(pred, truth) if perm[p] == t)
        acc = hits / n
        best = max(best, acc)
    return best


def morans_i_double_loop(values, coords, threshold):
    """Literal double-loop Moran's I with inverse-distance weights."""
    n = len(values)
    mean = sum(values) / n
    dev = [v - mean for v in values]
    ss = sum(d * d for d in dev)
    if ss == 0:
        raise ValueError("zero variance")
    num = 0.0
    w_sum = 0.0
    for i in range(n):
        xi, yi = coords[i]
        for j in range(n):
            if i == j:
                continue
            xj, yj = coords[j]
            dist = math.hypot(xi - xj, yi - yj)
            if 0.0 < dist <= threshold:
                w = 1.0 / dist
                w_sum += w
                num += w * dev[i] * dev[j]
    if w_sum == 0:
        raise ValueError("no neighbors within threshold")
    return (n / w_sum) * (num / ss)


def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _unit(v):
    norm = math.sqrt(sum(x * x for x in v))
    if norm == 0.0:
        v = [x + 1e-12 for x in v]
        norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v]
