"""Training objectives: sample contrast, bounded prototype contrast, attention balance.

All three losses are built from the differentiable matrix operations in
``numerics`` and return 1x1 matrices, so gradients flow back through the
attention layer and the encoders. The ``*_from_similarities`` variants take
precomputed cosine-similarity matrices, which keeps the arithmetic testable
in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError, DegenerateInputError, ShapeError
from .numerics import (
    Matrix,
    absval,
    add,
    add_scalar,
    col_sums,
    diagonal,
    exp,
    l2_normalize_rows,
    log,
    matmul,
    row_sums,
    scale,
    sub,
    total_sum,
    transpose,
    xlogx,
)


@dataclass(frozen=True)
class LossConfig:
    """Temperatures, bounds, and term toggles for the overall objective."""

    sample_temperature: float = 0.5
    prototype_temperature: float = 2.0
    similarity_bound: float = 0.75  # target cross-view prototype similarity
    balance_weight: float = 0.02  # trades attention-column balance vs row sharpness
    enable_sample_loss: bool = True
    enable_prototype_loss: bool = True
    enable_attention_regularizer: bool = True
    include_self_pair: bool = True

    def __post_init__(self):
        if not self.sample_temperature > 0.0:
            raise ConfigError("sample_temperature must be positive")
        if not self.prototype_temperature > 0.0:
            raise ConfigError("prototype_temperature must be positive")
        if not 0.0 <= self.similarity_bound <= 1.0:
            raise ConfigError("similarity_bound must lie in [0, 1]")
        if self.balance_weight < 0.0:
            raise ConfigError("balance_weight must be nonnegative")


@dataclass
class LossBreakdown:
    """Scalar values of the individual terms and their enabled sum."""

    l_sample: float
    l_prototype: float
    l_regularizer: float
    total: float


def _check_nonzero_rows(m: Matrix, what: str) -> None:
    norms = np.linalg.norm(m.data, axis=1)
    if (norms == 0.0).any():
        raise DegenerateInputError(f"{what} contains an all-zero row")


def sample_contrastive(z1: Matrix, z2: Matrix, cfg: LossConfig) -> Matrix:
    """Cross-view instance alignment loss over N paired sample rows.

    For each instance the positive is its own representation in the other
    view; the normalizer sums the exponentiated similarities to every
    same-view and cross-view sample. With ``include_self_pair`` the sum
    literally runs over all N indices, which adds the constant same-view
    self term exp(1/temperature) to the normalizer.
    """
    if z1.shape != z2.shape:
        raise ShapeError(f"paired samples differ in shape: {z1.shape} vs {z2.shape}")
    _check_nonzero_rows(z1, "first view samples")
    _check_nonzero_rows(z2, "second view samples")
    zh1 = l2_normalize_rows(z1)
    zh2 = l2_normalize_rows(z2)
    same1 = matmul(zh1, transpose(zh1))
    same2 = matmul(zh2, transpose(zh2))
    cross = matmul(zh1, transpose(zh2))
    return sample_contrastive_from_similarities(same1, same2, cross, cfg)


def sample_contrastive_from_similarities(
    same1: Matrix, same2: Matrix, cross: Matrix, cfg: LossConfig
) -> Matrix:
    """Sample loss on explicit similarity matrices; cross[i, j] = s(z_i^1, z_j^2)."""
    n = cross.rows
    if same1.shape != (n, n) or same2.shape != (n, n) or cross.cols != n:
        raise ShapeError("similarity matrices must all be N x N")
    inv_t = 1.0 / cfg.sample_temperature

    def one_direction(same: Matrix, cross_dir: Matrix) -> Matrix:
        e_same = exp(scale(same, inv_t))
        e_cross = exp(scale(cross_dir, inv_t))
        denom = add(row_sums(e_same), row_sums(e_cross))
        if not cfg.include_self_pair:
            denom = sub(denom, diagonal(e_same))
        positives = scale(diagonal(cross_dir), inv_t)
        return total_sum(sub(log(denom), positives))

    loss = add(
        one_direction(same1, cross),
        one_direction(same2, transpose(cross)),
    )
    return scale(loss, 1.0 / (2.0 * n))


def prototype_contrastive(u1: Matrix, u2: Matrix, cfg: LossConfig) -> Matrix:
    """Bounded contrastive loss over the K prototype rows of both views."""
    if u1.shape != u2.shape:
        raise ShapeError(f"prototype shapes differ: {u1.shape} vs {u2.shape}")
    _check_nonzero_rows(u1, "first view prototypes")
    _check_nonzero_rows(u2, "second view prototypes")
    uh1 = l2_normalize_rows(u1)
    uh2 = l2_normalize_rows(u2)
    same1 = matmul(uh1, transpose(uh1))
    same2 = matmul(uh2, transpose(uh2))
    cross = matmul(uh1, transpose(uh2))
    return prototype_contrastive_from_similarities(same1, same2, cross, cfg)


def prototype_contrastive_from_similarities(
    same1: Matrix, same2: Matrix, cross: Matrix, cfg: LossConfig
) -> Matrix:
    """Prototype loss on explicit similarity matrices; cross[i, j] = s(u_i^1, u_j^2).

    The positive part drives each cross-view pair's similarity toward the
    bound (not toward 1); the contrast part, summed over all four ordered
    view pairs, pushes every prototype away from the other K-1 prototypes.
    """
    k = cross.rows
    if same1.shape != (k, k) or same2.shape != (k, k) or cross.cols != k:
        raise ShapeError("similarity matrices must all be K x K")
    inv_t = 1.0 / cfg.prototype_temperature
    bound = cfg.similarity_bound

    positives = absval(add_scalar(diagonal(cross), -bound))
    term1 = scale(total_sum(positives), 2.0 * inv_t / k)

    contrast = None
    for sim in (same1, cross, transpose(cross), same2):
        e = exp(scale(sim, inv_t))
        off_diag = sub(row_sums(e), diagonal(e))
        bounded = exp(scale(absval(add_scalar(diagonal(sim), -bound)), inv_t))
        piece = total_sum(log(add(bounded, off_diag)))
        contrast = piece if contrast is None else add(contrast, piece)
    return add(term1, scale(contrast, 1.0 / k))


def attention_regularizer(attentions: Sequence[Matrix], cfg: LossConfig) -> Matrix:
    """Column-balance vs row-sharpness trade-off on attention matrices.

    Per view: the entropy-like sum over raw column totals rewards spreading
    mass across prototypes, while the subtracted (weighted) entropy of the
    individual entries rewards confident rows. Uses 0*log(0) = 0. Sums are
    not averaged over views or batch size.
    """
    if len(attentions) == 0:
        raise ShapeError("attention_regularizer needs at least one attention matrix")
    loss = None
    for a in attentions:
        if (a.data < 0.0).any():
            raise ContractError("attention entries must be nonnegative")
        column_term = total_sum(xlogx(col_sums(a)))
        entry_term = total_sum(xlogx(a))
        piece = sub(column_term, scale(entry_term, cfg.balance_weight))
        loss = piece if loss is None else add(loss, piece)
    return loss


def combine_terms(
    cfg: LossConfig,
    sample_term: Matrix | None,
    prototype_term: Matrix | None,
    regularizer_term: Matrix | None,
) -> tuple[LossBreakdown, Matrix]:
    """Sum the enabled terms; disabled or unavailable terms contribute 0."""
    values = []
    node = None
    for enabled, term in (
        (cfg.enable_sample_loss, sample_term),
        (cfg.enable_prototype_loss, prototype_term),
        (cfg.enable_attention_regularizer, regularizer_term),
    ):
        if enabled and term is not None:
            values.append(term.item())
            node = term if node is None else add(node, term)
        else:
            values.append(0.0)
    if node is None:
        node = Matrix([[0.0]])
    breakdown = LossBreakdown(
        l_sample=values[0],
        l_prototype=values[1],
        l_regularizer=values[2],
        total=node.item(),
    )
    return breakdown, node


def total_loss(
    z1: Matrix,
    z2: Matrix,
    u1: Matrix,
    u2: Matrix,
    attentions: Sequence[Matrix],
    cfg: LossConfig,
) -> tuple[LossBreakdown, Matrix]:
    """Overall objective on one batch's dual-attention outputs."""
    sample_term = sample_contrastive(z1, z2, cfg) if cfg.enable_sample_loss else None
    prototype_term = (
        prototype_contrastive(u1, u2, cfg) if cfg.enable_prototype_loss else None
    )
    regularizer_term = (
        attention_regularizer(attentions, cfg)
        if cfg.enable_attention_regularizer
        else None
    )
    return combine_terms(cfg, sample_term, prototype_term, regularizer_term)


def mean_cross_view_prototype_similarity(u1: np.ndarray, u2: np.ndarray) -> float:
    """Average cosine similarity of matched prototype rows across views."""
    if u1.shape != u2.shape:
        raise ShapeError(f"prototype shapes differ: {u1.shape} vs {u2.shape}")
    n1 = np.linalg.norm(u1, axis=1)
    n2 = np.linalg.norm(u2, axis=1)
    if (n1 == 0.0).any() or (n2 == 0.0).any():
        raise DegenerateInputError("prototype rows must be nonzero")
    sims = (u1 * u2).sum(axis=1) / (n1 * n2)
    return float(np.clip(sims, -1.0, 1.0).mean())
