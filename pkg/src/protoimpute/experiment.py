"""End-to-end experiment runs: dataset -> training -> clustering -> metrics.

One experiment seed drives everything downstream of it: synthetic
generation, the missing mask, parameter initialization, batch shuffling,
and the k-means restarts. Re-running with the same configuration
reproduces every output byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clustering import (
    ClusteringResult,
    MetricScores,
    assemble_representation,
    kmeans,
    score,
)
from .data import (
    MultiViewDataset,
    SyntheticSpec,
    apply_missing,
    generate_synthetic,
    load_dataset,
)
from .errors import ConfigError
from .losses import mean_cross_view_prototype_similarity
from .model import (
    DualStreamModel,
    ModelConfig,
    RecoveryStrategy,
    dual_attention,
    encode,
    save_checkpoint,
)
from .numerics import Matrix
from .training import TrainConfig, TrainReport, fit

METRICS_SCHEMA_VERSION = 1

# Settings applied instead of the configured batch size / learning rate once
# the missing rate reaches the override threshold.
HIGH_MISSING_BATCH_SIZE = 128
HIGH_MISSING_LEARNING_RATE = 3e-4


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one CLI run needs: data source, training, outputs."""

    out_dir: Path
    data_dir: Path | None = None
    synthetic: SyntheticSpec | None = None
    missing_rate: float = 0.0
    train: TrainConfig = field(default_factory=TrainConfig)
    strategy: RecoveryStrategy = RecoveryStrategy.DEFAULT
    restarts: int = 10
    seeds: tuple[int, ...] = (0,)
    override_threshold: float = 0.7

    def __post_init__(self):
        if (self.data_dir is None) == (self.synthetic is None):
            raise ConfigError("exactly one of data_dir or synthetic must be given")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError("missing_rate must lie in [0, 1)")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")


@dataclass
class RunResult:
    model: DualStreamModel
    report: TrainReport
    clustering: ClusteringResult
    metrics: MetricScores | None
    representation: np.ndarray


def dataset_for_seed(cfg: ExperimentConfig, seed: int) -> MultiViewDataset:
    """Materialize the (possibly masked) dataset for one experiment seed."""
    if cfg.synthetic is not None:
        dataset = generate_synthetic(replace(cfg.synthetic, seed=seed))
    else:
        dataset = load_dataset(cfg.data_dir)
    if cfg.missing_rate > 0.0:
        dataset = apply_missing(dataset, cfg.missing_rate, seed)
    return dataset


def train_config_for_rate(cfg: ExperimentConfig, missing_rate: float, seed: int) -> TrainConfig:
    """Per-seed training config, applying the high-missing-rate overrides."""
    train = replace(cfg.train, seed=seed)
    if missing_rate >= cfg.override_threshold:
        train = replace(
            train,
            batch_size=HIGH_MISSING_BATCH_SIZE,
            learning_rate=HIGH_MISSING_LEARNING_RATE,
        )
    return train


def run_single(
    dataset: MultiViewDataset,
    train_cfg: TrainConfig,
    strategy: RecoveryStrategy = RecoveryStrategy.DEFAULT,
    restarts: int = 10,
) -> RunResult:
    """Train one model on one dataset and cluster the assembled representation."""
    k = dataset.resolved_cluster_count()
    model = DualStreamModel.build(
        ModelConfig(
            cluster_count=k,
            input_dims=dataset.view_dims,
            feature_dim=train_cfg.feature_dim,
            encoder_widths=train_cfg.encoder_widths,
            seed=train_cfg.seed,
        )
    )
    model, report = fit(model, dataset, train_cfg)
    return evaluate_model(model, dataset, train_cfg.seed, strategy, restarts, report)


def evaluate_model(
    model: DualStreamModel,
    dataset: MultiViewDataset,
    seed: int,
    strategy: RecoveryStrategy = RecoveryStrategy.DEFAULT,
    restarts: int = 10,
    report: TrainReport | None = None,
) -> RunResult:
    """Assemble, cluster, and score an already trained model."""
    representation = assemble_representation(model, dataset, strategy)
    clustering = kmeans(
        representation, dataset.resolved_cluster_count(), seed=seed, restarts=restarts
    )
    metrics = None
    if dataset.labels is not None:
        metrics = score(clustering.assignments, dataset.labels)
    if report is None:
        report = TrainReport()
    report.metrics = metrics
    return RunResult(
        model=model,
        report=report,
        clustering=clustering,
        metrics=metrics,
        representation=representation,
    )


def cross_view_prototype_similarity(
    model: DualStreamModel, dataset: MultiViewDataset
) -> float:
    """Mean matched-prototype similarity, evaluated on the complete subset."""
    complete = dataset.complete_indices()
    if complete.size == 0:
        raise ConfigError("prototype similarity needs at least one complete instance")
    reps = []
    for v in (0, 1):
        x = encode(Matrix(dataset.view(v)[complete]), model.views[v].encoder)
        reps.append(dual_attention(x, model.views[v]).prototypes.data)
    return mean_cross_view_prototype_similarity(reps[0], reps[1])


def metrics_payload(result: RunResult, seed: int) -> dict:
    metrics = result.metrics
    return {
        "schema_version": METRICS_SCHEMA_VERSION,
        "acc": None if metrics is None else metrics.acc,
        "nmi": None if metrics is None else metrics.nmi,
        "ari": None if metrics is None else metrics.ari,
        "inertia": result.clustering.inertia,
        "seed": seed,
    }


def write_run_outputs(result: RunResult, seed: int, out_dir: Path) -> None:
    """checkpoint.json, train_log.jsonl, report.json, metrics.json for one seed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.model, out_dir / "checkpoint.json")
    result.report.write_log(out_dir / "train_log.jsonl")
    alignment = result.report.alignment
    (out_dir / "report.json").write_text(
        json.dumps(
            {
                "alignment": None if alignment is None else [int(v) for v in alignment],
                "epochs_run": len(result.report.epochs),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    (out_dir / "metrics.json").write_text(
        json.dumps(metrics_payload(result, seed), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def aggregate_metrics(per_seed: dict[int, dict]) -> dict:
    """Mean and population standard deviation per metric over the seeds."""
    summary: dict = {"seeds": sorted(per_seed), "metrics": {}}
    for key in ("acc", "nmi", "ari", "inertia"):
        values = [m[key] for m in per_seed.values() if m.get(key) is not None]
        if values:
            summary["metrics"][key] = {
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
            }
    return summary
