"""Independent reference implementations used to check the package.

Everything here is deliberately naive: plain Python loops, ``math``,
``fractions``, ``itertools``, and mpmath for high-precision values. None of
it shares code paths with the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def matmul_triple_loop(a, b):
    a = [[float(x) for x in row] for row in np.asarray(a)]
    b = [[float(x) for x in row] for row in np.asarray(b)]
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for t in range(inner):
                acc += a[i][t] * b[t][j]
            out[i][j] = acc
    return np.asarray(out)


def softmax_row_mp(row, dps: int = 50):
    import mpmath

    with mpmath.workdps(dps):
        values = [mpmath.e ** mpmath.mpf(repr(float(v))) for v in row]
        total = mpmath.fsum(values)
        return [float(v / total) for v in values]


def cosine_mp(a, b, dps: int = 50) -> float:
    import mpmath

    with mpmath.workdps(dps):
        av = [mpmath.mpf(repr(float(x))) for x in a]
        bv = [mpmath.mpf(repr(float(x))) for x in b]
        dot = mpmath.fsum(x * y for x, y in zip(av, bv))
        na = mpmath.sqrt(mpmath.fsum(x * x for x in av))
        nb = mpmath.sqrt(mpmath.fsum(x * x for x in bv))
        return float(dot / (na * nb))


def _cos(u, v) -> float:
    dot = math.fsum(float(a) * float(b) for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(float(a) * float(a) for a in u))
    nv = math.sqrt(math.fsum(float(b) * float(b) for b in v))
    return dot / (nu * nv)


def sample_loss_reference(z1, z2, tau: float, include_self_pair: bool = True) -> float:
    """Paired-instance contrastive loss, transcribed term by term."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    n = z1.shape[0]
    views = {1: z1, 2: z2}

    def one_side(a: int, b: int) -> float:
        total = 0.0
        for i in range(n):
            numer = math.exp(_cos(views[a][i], views[b][i]) / tau)
            denom = 0.0
            for j in range(n):
                same = math.exp(_cos(views[a][i], views[a][j]) / tau)
                if j == i and not include_self_pair:
                    same = 0.0
                denom += same + math.exp(_cos(views[a][i], views[b][j]) / tau)
            total += -math.log(numer / denom)
        return total

    return (one_side(1, 2) + one_side(2, 1)) / (2.0 * n)


def prototype_loss_reference(u1, u2, tau: float, bound: float) -> float:
    """Bounded prototype contrastive loss, transcribed term by term."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    k = u1.shape[0]
    views = {1: u1, 2: u2}

    first = 0.0
    for i in range(k):
        first += abs(_cos(u1[i], u2[i]) - bound) / tau
    first *= 2.0 / k

    second = 0.0
    for va in (1, 2):
        for vb in (1, 2):
            for i in range(k):
                inner = math.exp(abs(_cos(views[va][i], views[vb][i]) - bound) / tau)
                for j in range(k):
                    if j == i:
                        continue
                    inner += math.exp(_cos(views[va][i], views[vb][j]) / tau)
                second += math.log(inner)
    return first + second / k


def attention_reg_reference(attentions, weight: float) -> float:
    """Column-balance / row-sharpness regularizer with 0*log(0) = 0."""

    def xlogx(x: float) -> float:
        return 0.0 if x == 0.0 else x * math.log(x)

    total = 0.0
    for a in attentions:
        a = np.asarray(a, dtype=float)
        n, k = a.shape
        for j in range(k):
            col = math.fsum(float(a[i, j]) for i in range(n))
            entries = math.fsum(xlogx(float(a[i, j])) for i in range(n))
            total += xlogx(col) - weight * entries
    return total


def adam_first_step(theta: float, grad: float, lr: float, eps: float = 1e-8) -> float:
    """Closed-form position after one Adam step from a fresh state."""
    return theta - lr * grad / (abs(grad) + eps)


def adam_sequence_scalar(theta: float, grads, lr: float, beta1: float = 0.9,
                         beta2: float = 0.999, eps: float = 1e-8) -> float:
    """Hand-rolled scalar Adam with bias correction."""
    m = 0.0
    v = 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        theta -= lr * m_hat / (math.sqrt(v_hat) + eps)
    return theta


def brute_force_assignment(cost) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum assignment; rows <= cols."""
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    best = None
    best_cost = math.inf
    for perm in itertools.permutations(range(m), n):
        total = math.fsum(cost[i, perm[i]] for i in range(n))
        if total < best_cost:
            best_cost = total
            best = perm
    return best, best_cost


def exhaustive_kmeans_optimum(points, k: int, chunk: int = 50000) -> float:
    """Minimum inertia over every assignment of points to at most k clusters."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    sq_norms = (points * points).sum(axis=1)
    best = math.inf
    labels = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.intp)
    for start in range(0, labels.shape[0], chunk):
        block = labels[start : start + chunk]
        one_hot = block[:, :, None] == np.arange(k)[None, None, :]
        counts = one_hot.sum(axis=1)  # chunk x k
        sums = np.einsum("cnk,nd->ckd", one_hot.astype(float), points)
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = (sums * sums).sum(axis=2) / counts
        contrib = np.where(counts > 0, contrib, 0.0)
        inertia = sq_norms.sum() - contrib.sum(axis=1)
        best = min(best, float(inertia.min()))
    return best


def contingency_table(pred, truth) -> np.ndarray:
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    table = np.zeros((pred.max() + 1, truth.max() + 1), dtype=np.int64)
    for p, t in zip(pred, truth):
        table[p, t] += 1
    return table


def accuracy_brute(pred, truth) -> float:
    """Best matched fraction, maximizing over all label permutations."""
    table = contingency_table(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    best = 0
    for perm in itertools.permutations(range(size)):
        best = max(best, sum(padded[i, perm[i]] for i in range(size)))
    return best / len(np.asarray(pred))


def nmi_reference(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the entropies."""
    table = contingency_table(pred, truth)
    n = int(table.sum())
    row_totals = table.sum(axis=1)
    col_totals = table.sum(axis=0)

    def entropy(counts) -> float:
        return -math.fsum(
            (c / n) * math.log(c / n) for c in counts if c > 0
        )

    h_pred = entropy(row_totals)
    h_truth = entropy(col_totals)
    if h_pred == 0.0 and h_truth == 0.0:
        return 1.0
    mi = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            if table[i, j] == 0:
                continue
            p_ij = table[i, j] / n
            mi += p_ij * math.log(p_ij * n * n / (row_totals[i] * col_totals[j]))
    return mi / ((h_pred + h_truth) / 2.0)


def ari_reference(pred, truth) -> float:
    """Adjusted Rand index via exact rational arithmetic."""
    table = contingency_table(pred, truth)
    n = int(table.sum())

    def comb2(x: int) -> int:
        return x * (x - 1) // 2

    sum_cells = sum(comb2(int(v)) for v in table.reshape(-1))
    sum_rows = sum(comb2(int(v)) for v in table.sum(axis=1))
    sum_cols = sum(comb2(int(v)) for v in table.sum(axis=0))
    total = comb2(n)
    if total == 0:
        return 1.0
    expected = Fraction(sum_rows * sum_cols, total)
    maximum = Fraction(sum_rows + sum_cols, 2)
    if maximum == expected:
        return 1.0
    return float((Fraction(sum_cells) - expected) / (maximum - expected))
