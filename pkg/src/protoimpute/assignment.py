"""Exact solver for the linear assignment problem.

Classic O(n^2 m) shortest augmenting path formulation with row/column
potentials. Costs may be negative; the solver is exact, which matters both
for prototype matching across views and for the label matching inside the
clustering accuracy metric.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError, ShapeError


def linear_assignment(cost) -> np.ndarray:
    """Minimum-cost assignment of each row to a distinct column.

    ``cost`` must be rectangular with rows <= cols. Returns an array
    ``col`` with ``col[i]`` the column matched to row ``i``.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ShapeError(f"linear_assignment: expected a 2-D cost matrix, got ndim={c.ndim}")
    n, m = c.shape
    if n < 1 or m < 1:
        raise ShapeError("linear_assignment: empty cost matrix")
    if n > m:
        raise ShapeError(f"linear_assignment: more rows than columns ({n} > {m})")
    if not np.isfinite(c).all():
        raise NonFiniteError("linear_assignment: cost matrix has non-finite entries")

    inf = float("inf")
    # 1-based arrays with a virtual column 0 used as the augmenting-path root.
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    match = [0] * (m + 1)  # match[j] = row assigned to column j (0 = free)
    way = [0] * (m + 1)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    result = np.full(n, -1, dtype=np.intp)
    for j in range(1, m + 1):
        if match[j] != 0:
            result[match[j] - 1] = j - 1
    return result


def assignment_cost(cost, columns: np.ndarray) -> float:
    """Total cost of an assignment returned by ``linear_assignment``."""
    c = np.asarray(cost, dtype=np.float64)
    return float(c[np.arange(len(columns)), columns].sum())
