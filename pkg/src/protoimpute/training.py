"""Two-phase training: warm-up, prototype alignment, full objective.

Warm-up optimizes the sample loss (on complete instances) plus the
attention regularizer. The prototypes of the second view are then matched
to the first view's with an exact assignment solve, and the remaining
epochs run the full objective. Everything is deterministic given the
dataset, the config, and the seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assignment import linear_assignment
from .data import MultiViewDataset
from .errors import ConfigError, ContractError, NonFiniteError, TrainingAbortError
from .losses import LossBreakdown, LossConfig, combine_terms
from .model import DualStreamModel, dual_attention, encode
from .numerics import Adam, Matrix, gradient, take_rows
from .seeding import rng_for


@dataclass(frozen=True)
class TrainConfig:
    total_epochs: int = 150
    warmup_epochs: int = 50
    batch_size: int = 1024
    learning_rate: float = 1e-3
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    feature_dim: int = 64
    encoder_widths: tuple[int, ...] = (64,)
    # Warm-up loss settings; derived from `loss` with the prototype term off
    # when not given explicitly.
    warmup_loss: LossConfig | None = None

    def __post_init__(self):
        if not 0 <= self.warmup_epochs <= self.total_epochs:
            raise ConfigError("need 0 <= warmup_epochs <= total_epochs")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if not self.learning_rate > 0.0:
            raise ConfigError("learning_rate must be positive")

    def resolved_warmup_loss(self) -> LossConfig:
        if self.warmup_loss is None:
            return replace(self.loss, enable_prototype_loss=False)
        if self.warmup_loss.enable_prototype_loss:
            raise ConfigError("the prototype loss cannot be enabled during warm-up")
        return self.warmup_loss


@dataclass
class Batch:
    """One batch's dataset positions and per-view bookkeeping."""

    indices: np.ndarray  # dataset positions, in batch order
    view_rows: tuple[np.ndarray, np.ndarray]  # positions into `indices` observed per view
    complete_rows: tuple[np.ndarray, np.ndarray]  # positions into each view's row list

    @property
    def complete_count(self) -> int:
        return len(self.complete_rows[0])


@dataclass
class EpochRecord:
    epoch: int
    phase: str  # "warmup" or "full"
    losses: LossBreakdown
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    alignment: np.ndarray | None = None
    metrics: object | None = None

    def write_log(self, path) -> None:
        """One JSON record per epoch; timing is deliberately not included."""
        lines = [
            json.dumps(
                {
                    "epoch": rec.epoch,
                    "phase": rec.phase,
                    "l_sample": rec.losses.l_sample,
                    "l_prototype": rec.losses.l_prototype,
                    "l_regularizer": rec.losses.l_regularizer,
                    "total": rec.losses.total,
                },
                sort_keys=True,
            )
            for rec in self.epochs
        ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def make_batches(
    dataset: MultiViewDataset, batch_size: int, seed: int, epoch: int
) -> list[Batch]:
    """Deterministic shuffled batches for one (seed, epoch) pair.

    Each batch records which of its instances are observed in each view and
    which are complete; order within a batch is preserved across views, so
    the complete selections of the two views pair the same instances.
    """
    if dataset.n == 0:
        raise ContractError("dataset is empty")
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    order = rng_for(seed, "batches", epoch).permutation(dataset.n)
    batches = []
    for start in range(0, dataset.n, batch_size):
        indices = order[start : start + batch_size]
        mask = dataset.mask[indices]
        complete = mask.all(axis=1)
        view_rows = tuple(np.flatnonzero(mask[:, v]) for v in (0, 1))
        complete_rows = tuple(
            np.flatnonzero(complete[view_rows[v]]) for v in (0, 1)
        )
        batches.append(
            Batch(indices=indices, view_rows=view_rows, complete_rows=complete_rows)
        )
    return batches


def _guarded(compute, term: str, epoch: int, phase: str) -> Matrix:
    try:
        return compute()
    except NonFiniteError as err:
        raise TrainingAbortError(
            f"non-finite value in the {term} at epoch {epoch} ({phase} phase): {err}"
        ) from err


def _batch_loss(
    model: DualStreamModel,
    dataset: MultiViewDataset,
    batch: Batch,
    loss_cfg: LossConfig,
    epoch: int,
    phase: str,
) -> tuple[LossBreakdown, Matrix]:
    from .losses import (
        attention_regularizer,
        prototype_contrastive,
        sample_contrastive,
    )

    outputs = []
    for v in (0, 1):
        rows = batch.view_rows[v]
        if rows.size == 0:
            outputs.append(None)
            continue
        raw = Matrix(dataset.view(v)[batch.indices[rows]])
        x = _guarded(
            lambda raw=raw, v=v: encode(raw, model.views[v].encoder),
            "encoder output",
            epoch,
            phase,
        )
        outputs.append(
            _guarded(
                lambda x=x, v=v: dual_attention(x, model.views[v]),
                "attention layer",
                epoch,
                phase,
            )
        )

    sample_term = None
    if (
        loss_cfg.enable_sample_loss
        and outputs[0] is not None
        and outputs[1] is not None
        and batch.complete_count > 0
    ):
        z1 = take_rows(outputs[0].samples, batch.complete_rows[0])
        z2 = take_rows(outputs[1].samples, batch.complete_rows[1])
        sample_term = _guarded(
            lambda: sample_contrastive(z1, z2, loss_cfg),
            "sample contrastive loss",
            epoch,
            phase,
        )

    prototype_term = None
    if (
        loss_cfg.enable_prototype_loss
        and outputs[0] is not None
        and outputs[1] is not None
    ):
        prototype_term = _guarded(
            lambda: prototype_contrastive(
                outputs[0].prototypes, outputs[1].prototypes, loss_cfg
            ),
            "prototype contrastive loss",
            epoch,
            phase,
        )

    regularizer_term = None
    attentions = [out.attention for out in outputs if out is not None]
    if loss_cfg.enable_attention_regularizer and attentions:
        regularizer_term = _guarded(
            lambda: attention_regularizer(attentions, loss_cfg),
            "attention regularizer",
            epoch,
            phase,
        )

    return combine_terms(loss_cfg, sample_term, prototype_term, regularizer_term)


def _run_phase(
    model: DualStreamModel,
    dataset: MultiViewDataset,
    cfg: TrainConfig,
    loss_cfg: LossConfig,
    first_epoch: int,
    last_epoch: int,
    phase: str,
) -> list[EpochRecord]:
    if last_epoch < first_epoch:
        return []
    params = model.parameters()
    optimizer = Adam(params, learning_rate=cfg.learning_rate)
    records = []
    for epoch in range(first_epoch, last_epoch + 1):
        started = time.perf_counter()
        sums = np.zeros(4)
        batches = make_batches(dataset, cfg.batch_size, cfg.seed, epoch)
        for batch in batches:
            breakdown, node = _batch_loss(model, dataset, batch, loss_cfg, epoch, phase)
            grads = gradient(node, params)
            for p, g in grads.items():
                if not np.isfinite(g).all():
                    raise TrainingAbortError(
                        f"non-finite gradient for {p.name or '<unnamed>'} "
                        f"at epoch {epoch} ({phase} phase)"
                    )
            optimizer.step(grads)
            sums += (
                breakdown.l_sample,
                breakdown.l_prototype,
                breakdown.l_regularizer,
                breakdown.total,
            )
        mean = sums / len(batches)
        records.append(
            EpochRecord(
                epoch=epoch,
                phase=phase,
                losses=LossBreakdown(*(float(v) for v in mean)),
                seconds=time.perf_counter() - started,
            )
        )
    return records


def warmup(
    model: DualStreamModel, dataset: MultiViewDataset, cfg: TrainConfig
) -> tuple[DualStreamModel, list[EpochRecord]]:
    """Train on the sample loss and regularizer only, for cfg.warmup_epochs."""
    loss_cfg = cfg.resolved_warmup_loss()
    records = _run_phase(
        model, dataset, cfg, loss_cfg, first_epoch=1, last_epoch=cfg.warmup_epochs,
        phase="warmup",
    )
    return model, records


def match_prototypes(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Permutation sigma minimizing total -cos(u1[i], u2[sigma[i]]); exact."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    n1 = np.linalg.norm(u1, axis=1, keepdims=True)
    n2 = np.linalg.norm(u2, axis=1, keepdims=True)
    if (n1 == 0.0).any() or (n2 == 0.0).any():
        raise ContractError("prototype representations must be nonzero")
    cost = -(u1 / n1) @ (u2 / n2).T
    return linear_assignment(cost)


def match_prototypes_by_attention(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Permutation maximizing attention co-activation over shared instances.

    Column j of view 1 and column j' of view 2 describe the same cluster
    when the same instances put attention mass on both, so the assignment
    maximizes sum_i A1[i, j] * A2[i, sigma(j)]. Unlike comparing prototype
    representations across views (which live in different projection
    spaces), this signal is present even while the attention is still soft.
    """
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise ContractError(
            f"attention shapes differ across views: {a1.shape} vs {a2.shape}"
        )
    return linear_assignment(-(a1.T @ a2))


def align_prototypes(model: DualStreamModel, dataset: MultiViewDataset) -> np.ndarray:
    """Reorder the second view's prototypes to match the first view's.

    Both views' attention is computed over all complete instances as a
    single evaluation batch and matched by co-activation; only the rows of
    the second view's prototype matrix are permuted.
    """
    complete = dataset.complete_indices()
    if complete.size == 0:
        raise TrainingAbortError(
            "prototype alignment requires at least one complete instance"
        )
    attention = []
    for v in (0, 1):
        x = encode(Matrix(dataset.view(v)[complete]), model.views[v].encoder)
        attention.append(dual_attention(x, model.views[v]).attention.data)
    permutation = match_prototypes_by_attention(attention[0], attention[1])
    prototypes = model.views[1].prototypes
    prototypes.data[:] = prototypes.data[permutation]
    return permutation


def train_full(
    model: DualStreamModel, dataset: MultiViewDataset, cfg: TrainConfig
) -> tuple[DualStreamModel, TrainReport]:
    """Optimize the full objective for the epochs after warm-up."""
    records = _run_phase(
        model,
        dataset,
        cfg,
        cfg.loss,
        first_epoch=cfg.warmup_epochs + 1,
        last_epoch=cfg.total_epochs,
        phase="full",
    )
    return model, TrainReport(epochs=records)


def fit(
    model: DualStreamModel, dataset: MultiViewDataset, cfg: TrainConfig
) -> tuple[DualStreamModel, TrainReport]:
    """Warm-up, align prototypes across views, then train the full objective."""
    model, warmup_records = warmup(model, dataset, cfg)
    permutation = align_prototypes(model, dataset)
    model, report = train_full(model, dataset, cfg)
    report.epochs = warmup_records + report.epochs
    report.alignment = permutation
    return model, report
