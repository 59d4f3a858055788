"""Assembled representations, k-means, and clustering quality metrics.

The final representation concatenates both views' sample representations;
missing views are imputed from prototypes and inherited attention. k-means
uses D^2-weighted seeding, Lloyd iterations to an assignment fixpoint, and
keeps the best of several independently seeded restarts. Accuracy matches
labels with an exact assignment solve; mutual information is normalized by
the arithmetic mean of the entropies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .assignment import linear_assignment
from .data import MultiViewDataset
from .errors import ConfigError, ContractError, ShapeError
from .model import DualStreamModel, RecoveryStrategy, dual_attention, encode, impute
from .numerics import Matrix
from .seeding import seed_sequence

KMEANS_MAX_ITER = 300


@dataclass
class ClusteringResult:
    assignments: np.ndarray  # per-instance cluster index in [0, k)
    centroids: np.ndarray  # k x dim
    inertia: float
    inertia_history: list[float]  # per Lloyd iteration of the winning restart


@dataclass
class MetricScores:
    acc: float
    nmi: float
    ari: float


def assemble_representation(
    model: DualStreamModel,
    dataset: MultiViewDataset,
    strategy: RecoveryStrategy = RecoveryStrategy.DEFAULT,
) -> np.ndarray:
    """Per-instance concatenation [view-1 rep | view-2 rep] in dataset order.

    Observed views contribute their attention-enriched representations;
    missing views are recovered with the requested strategy from the
    observed side's encoding and attention.
    """
    d = model.config.feature_dim
    out = np.zeros((dataset.n, 2 * d))
    encoded = []
    attention = []
    observed = []
    for v in (0, 1):
        obs = dataset.observed_indices(v)
        x = encode(Matrix(dataset.view(v)[obs]), model.views[v].encoder)
        att = dual_attention(x, model.views[v])
        out[obs, v * d : (v + 1) * d] = att.samples.data
        encoded.append(x.data)
        attention.append(att.attention.data)
        observed.append(obs)

    for v in (0, 1):
        lonely = dataset.only_indices(v)
        if lonely.size == 0:
            continue
        positions = np.searchsorted(observed[v], lonely)
        recovered = impute(
            Matrix(encoded[v][positions]),
            Matrix(attention[v][positions]),
            missing_view=model.views[1 - v],
            strategy=strategy,
            observed_view=model.views[v],
        )
        out[lonely, (1 - v) * d : (2 - v) * d] = recovered.data
    return out


def _squared_distances(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        (data * data).sum(axis=1, keepdims=True)
        - 2.0 * data @ centroids.T
        + (centroids * centroids).sum(axis=1)
    )
    return np.maximum(d2, 0.0)


def _plusplus_init(
    data: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    centroids[0] = data[rng.integers(n)]
    closest = _squared_distances(data, centroids[:1]).min(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total > 0.0:
            choice = rng.choice(n, p=closest / total)
        else:
            choice = rng.integers(n)
        centroids[i] = data[choice]
        closest = np.minimum(closest, _squared_distances(data, centroids[i : i + 1])[:, 0])
    return centroids


def _lloyd(
    data: np.ndarray, k: int, rng: np.random.Generator, max_iter: int
) -> ClusteringResult:
    centroids = _plusplus_init(data, k, rng)
    assignments = np.full(data.shape[0], -1, dtype=np.intp)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _squared_distances(data, centroids)
        new_assignments = d2.argmin(axis=1)
        inertia = float(d2[np.arange(data.shape[0]), new_assignments].sum())
        history.append(inertia)

        reseeded = False
        point_cost = d2[np.arange(data.shape[0]), new_assignments]
        for j in range(k):
            members = new_assignments == j
            if members.any():
                centroids[j] = data[members].mean(axis=0)
            else:
                # Reseed an empty cluster at the point farthest from its
                # centroid (first index on ties), then keep iterating.
                farthest = int(point_cost.argmax())
                centroids[j] = data[farthest]
                point_cost[farthest] = -1.0
                reseeded = True
        if not reseeded and (new_assignments == assignments).all():
            assignments = new_assignments
            break
        assignments = new_assignments
    d2 = _squared_distances(data, centroids)
    inertia = float(d2[np.arange(data.shape[0]), assignments].sum())
    history.append(inertia)
    return ClusteringResult(
        assignments=assignments,
        centroids=centroids,
        inertia=inertia,
        inertia_history=history,
    )


def kmeans(
    data: np.ndarray,
    k: int,
    seed: int,
    restarts: int = 10,
    max_iter: int = KMEANS_MAX_ITER,
) -> ClusteringResult:
    """Best-of-restarts k-means; each restart gets its own split of the seed."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError("kmeans expects a 2-D data matrix")
    if not 1 <= k <= data.shape[0]:
        raise ConfigError(f"kmeans requires 1 <= k <= n, got k={k}, n={data.shape[0]}")
    if restarts < 1:
        raise ConfigError("restarts must be at least 1")
    best: ClusteringResult | None = None
    children = seed_sequence(seed, "kmeans").spawn(restarts)
    for child in children:
        result = _lloyd(data, k, np.random.default_rng(child), max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def _contingency(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    table = np.zeros((int(pred.max()) + 1, int(truth.max()) + 1), dtype=np.int64)
    np.add.at(table, (pred, truth), 1)
    return table


def _validate_labelings(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.intp).reshape(-1)
    truth = np.asarray(truth, dtype=np.intp).reshape(-1)
    if pred.size != truth.size:
        raise ShapeError(f"label lengths differ: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ShapeError("labelings are empty")
    if pred.min() < 0 or truth.min() < 0:
        raise ContractError("labels must be nonnegative integers")
    return pred, truth


def accuracy(pred, truth) -> float:
    """Fraction of correctly clustered instances under the best label matching."""
    pred, truth = _validate_labelings(pred, truth)
    table = _contingency(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.float64)
    padded[: table.shape[0], : table.shape[1]] = table
    matching = linear_assignment(-padded)
    matched = padded[np.arange(size), matching].sum()
    return float(matched / pred.size)


def nmi(pred, truth) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies.

    Two identical single-cluster partitions score 1; if exactly one side is
    a single cluster the mutual information (and hence the score) is 0.
    """
    pred, truth = _validate_labelings(pred, truth)
    table = _contingency(pred, truth)
    n = pred.size
    p_rows = table.sum(axis=1) / n
    p_cols = table.sum(axis=0) / n
    h_pred = float(-(p_rows[p_rows > 0] * np.log(p_rows[p_rows > 0])).sum())
    h_truth = float(-(p_cols[p_cols > 0] * np.log(p_cols[p_cols > 0])).sum())
    if h_pred == 0.0 and h_truth == 0.0:
        return 1.0
    joint = table / n
    outer = np.outer(p_rows, p_cols)
    nonzero = joint > 0
    mi = float((joint[nonzero] * np.log(joint[nonzero] / outer[nonzero])).sum())
    return mi / ((h_pred + h_truth) / 2.0)


def _pairs(counts) -> int:
    return sum(int(c) * (int(c) - 1) // 2 for c in counts)


def ari(pred, truth) -> float:
    """Rand index adjusted for chance, computed exactly from the contingency table."""
    pred, truth = _validate_labelings(pred, truth)
    table = _contingency(pred, truth)
    n = pred.size
    sum_cells = _pairs(table.reshape(-1))
    sum_rows = _pairs(table.sum(axis=1))
    sum_cols = _pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    expected = Fraction(sum_rows * sum_cols, total)
    maximum = Fraction(sum_rows + sum_cols, 2)
    if maximum == expected:
        # Both partitions are at an extreme (all-singletons or one cluster
        # on each side); they agree exactly in that case.
        return 1.0
    return float(Fraction(sum_cells) - expected) / float(maximum - expected)


def score(pred, truth) -> MetricScores:
    return MetricScores(acc=accuracy(pred, truth), nmi=nmi(pred, truth), ari=ari(pred, truth))
