"""Shared fixtures and the finite-difference gradient checker."""

from __future__ import annotations

import numpy as np
import pytest

from protoimpute.numerics import Matrix, gradient


def finite_difference_check(
    build_loss,
    params,
    rng: np.random.Generator,
    samples_per_param: int = 3,
    step: float = 1e-4,
    rel_tol: float = 1e-4,
    abs_floor: float = 1e-7,
    max_skip_fraction: float = 0.1,
) -> None:
    """Compare analytic gradients against central finite differences.

    ``build_loss`` must rebuild the forward pass from the parameters'
    current data. Entries where the two one-sided differences disagree
    (a kink from ReLU or an absolute value sitting inside the step) are
    skipped; the skip budget guards against that hiding real failures.
    """
    grads = gradient(build_loss(), params)
    checked = 0
    skipped = 0
    worst = 0.0
    for p in params:
        rows, cols = p.shape
        for _ in range(samples_per_param):
            i = int(rng.integers(rows))
            j = int(rng.integers(cols))
            original = p.data[i, j]
            f0 = build_loss().item()
            p.data[i, j] = original + step
            f_plus = build_loss().item()
            p.data[i, j] = original - step
            f_minus = build_loss().item()
            p.data[i, j] = original

            d_plus = (f_plus - f0) / step
            d_minus = (f0 - f_minus) / step
            if abs(d_plus - d_minus) > 1e-2 * max(abs(d_plus), abs(d_minus), 1e-8):
                skipped += 1
                continue
            checked += 1
            fd = (f_plus - f_minus) / (2.0 * step)
            analytic = float(grads[p][i, j])
            err = abs(fd - analytic)
            scale = max(abs(fd), abs(analytic))
            if err >= abs_floor:
                assert err < rel_tol * scale, (
                    f"gradient mismatch at {p.name}[{i},{j}]: "
                    f"fd={fd!r} analytic={analytic!r}"
                )
            worst = max(worst, err / scale if scale > 0 else 0.0)
    assert checked > 0, "no differentiable entries were checked"
    assert skipped <= max_skip_fraction * (checked + skipped), (
        f"too many nondifferentiable samples: {skipped}/{checked + skipped}"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_matrix(rng: np.random.Generator, rows: int, cols: int, scale: float = 1.0) -> Matrix:
    return Matrix(scale * rng.standard_normal((rows, cols)))
