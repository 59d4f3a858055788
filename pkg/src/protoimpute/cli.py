"""Command-line interface: generate, train, evaluate, impute, and sweeps.

Every command is a pure function of its flags, input files, and seeds;
re-running a command reproduces its outputs byte for byte. A JSON config
file can provide any of the experiment fields; explicit flags override it.
"""

from __future__ import annotations

import csv
import functools
import json
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .data import SyntheticSpec, generate_synthetic, save_dataset
from .errors import ProtoImputeError
from .experiment import (
    ExperimentConfig,
    aggregate_metrics,
    cross_view_prototype_similarity,
    dataset_for_seed,
    evaluate_model,
    metrics_payload,
    run_single,
    train_config_for_rate,
    write_run_outputs,
)
from .losses import LossConfig
from .model import RecoveryStrategy, load_checkpoint
from .training import TrainConfig

STRATEGY_CHOICES = [s.value for s in RecoveryStrategy]

# Ablation row orders (loss toggles, then recovery strategies).
LOSS_ROWS = (
    ("regularizer-only", dict(enable_sample_loss=False, enable_prototype_loss=False)),
    ("sample+regularizer", dict(enable_prototype_loss=False)),
    ("prototype+regularizer", dict(enable_sample_loss=False)),
    ("full", dict()),
)
RECOVERY_ROWS = (
    RecoveryStrategy.PROTOTYPES_FROM_OBSERVED,
    RecoveryStrategy.PROTOTYPES_FROM_MISSING_ONLY,
    RecoveryStrategy.SAMPLES_FROM_OBSERVED_ONLY,
    RecoveryStrategy.DEFAULT,
)


def _friendly_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ProtoImputeError as err:
            raise click.ClickException(str(err)) from err

    return wrapper


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _parse_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _experiment_options(fn):
    options = [
        click.option("--config", "config_path", default=None,
                     type=click.Path(exists=True, dir_okay=False),
                     help="JSON config file; explicit flags override its values."),
        click.option("--data", "data_dir", default=None,
                     type=click.Path(exists=True, file_okay=False),
                     help="Dataset directory (view1.csv, view2.csv, mask.csv, ...)."),
        click.option("--synthetic", is_flag=True, default=False,
                     help="Generate a synthetic dataset per seed instead of loading one."),
        click.option("--n", type=int, default=None, help="Synthetic: instance count."),
        click.option("--clusters", type=int, default=None, help="Synthetic: cluster count."),
        click.option("--latent-dim", type=int, default=None, help="Synthetic: latent dimension."),
        click.option("--view-dims", default=None, help="Synthetic: view dims, e.g. '12,10'."),
        click.option("--separation", type=float, default=None,
                     help="Synthetic: minimum latent centroid distance."),
        click.option("--hidden-width", type=int, default=None,
                     help="Synthetic: width of the view-map hidden layer."),
        click.option("--noise", type=float, default=None, help="Synthetic: view noise scale."),
        click.option("--missing-rate", type=float, default=None,
                     help="Fraction of instances to strip of one view."),
        click.option("--seeds", default=None, help="Comma-separated experiment seeds."),
        click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
                     help="Output directory."),
        click.option("--epochs", type=int, default=None, help="Total training epochs."),
        click.option("--warmup-epochs", type=int, default=None, help="Warm-up epochs."),
        click.option("--batch-size", type=int, default=None),
        click.option("--learning-rate", type=float, default=None),
        click.option("--feature-dim", type=int, default=None, help="Shared representation dim."),
        click.option("--encoder-widths", default=None, help="Hidden widths, e.g. '256,256'."),
        click.option("--sample-temperature", type=float, default=None),
        click.option("--prototype-temperature", type=float, default=None),
        click.option("--similarity-bound", type=float, default=None,
                     help="Target cross-view prototype similarity in [0, 1]."),
        click.option("--balance-weight", type=float, default=None,
                     help="Weight of the attention sharpness term (must be >= 0)."),
        click.option("--disable-sample-loss", is_flag=True, default=False),
        click.option("--disable-prototype-loss", is_flag=True, default=False),
        click.option("--disable-regularizer", is_flag=True, default=False),
        click.option("--exclude-self-pair", is_flag=True, default=False,
                     help="Drop the same-view self term from the sample-loss normalizer."),
        click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default=None,
                     help="Recovery strategy for missing views."),
        click.option("--restarts", type=int, default=None, help="k-means restarts."),
        click.option("--override-threshold", type=float, default=None,
                     help="Missing rate at which batch 128 / lr 3e-4 kick in."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_experiment(kw: dict) -> ExperimentConfig:
    file_cfg: dict = {}
    if kw.get("config_path"):
        file_cfg = json.loads(Path(kw["config_path"]).read_text(encoding="utf-8"))

    synth_cfg = dict(file_cfg.get("synthetic") or {})
    synth_flags = {
        "n": kw.get("n"),
        "k": kw.get("clusters"),
        "latent_dim": kw.get("latent_dim"),
        "separation": kw.get("separation"),
        "hidden_width": kw.get("hidden_width"),
        "noise_scale": kw.get("noise"),
    }
    for key, value in synth_flags.items():
        if value is not None:
            synth_cfg[key] = value
    if kw.get("view_dims") is not None:
        synth_cfg["view_dims"] = _parse_ints(kw["view_dims"])
    use_synthetic = kw.get("synthetic") or file_cfg.get("synthetic") is not None

    data_dir = kw.get("data_dir") or file_cfg.get("data")

    train_cfg = dict(file_cfg.get("train") or {})
    for flag, key in (
        ("epochs", "total_epochs"),
        ("warmup_epochs", "warmup_epochs"),
        ("batch_size", "batch_size"),
        ("learning_rate", "learning_rate"),
        ("feature_dim", "feature_dim"),
    ):
        if kw.get(flag) is not None:
            train_cfg[key] = kw[flag]
    if kw.get("encoder_widths") is not None:
        train_cfg["encoder_widths"] = _parse_ints(kw["encoder_widths"])

    loss_cfg = dict(file_cfg.get("loss") or {})
    for flag, key in (
        ("sample_temperature", "sample_temperature"),
        ("prototype_temperature", "prototype_temperature"),
        ("similarity_bound", "similarity_bound"),
        ("balance_weight", "balance_weight"),
    ):
        if kw.get(flag) is not None:
            loss_cfg[key] = kw[flag]
    if kw.get("disable_sample_loss"):
        loss_cfg["enable_sample_loss"] = False
    if kw.get("disable_prototype_loss"):
        loss_cfg["enable_prototype_loss"] = False
    if kw.get("disable_regularizer"):
        loss_cfg["enable_attention_regularizer"] = False
    if kw.get("exclude_self_pair"):
        loss_cfg["include_self_pair"] = False

    seeds = file_cfg.get("seeds")
    if kw.get("seeds") is not None:
        seeds = _parse_ints(kw["seeds"])
    if seeds is None:
        seeds = [0]

    missing_rate = kw.get("missing_rate")
    if missing_rate is None:
        missing_rate = float(file_cfg.get("missing_rate") or 0.0)

    out_dir = kw.get("out_dir") or file_cfg.get("out")
    if out_dir is None:
        raise click.ClickException("an output directory is required (--out)")

    strategy = kw.get("strategy") or file_cfg.get("strategy") or "default"
    restarts = kw.get("restarts")
    if restarts is None:
        restarts = int(file_cfg.get("restarts") or 10)
    threshold = kw.get("override_threshold")
    if threshold is None:
        threshold = float(file_cfg.get("override_threshold") or 0.7)

    train_kwargs = dict(train_cfg)
    if "encoder_widths" in train_kwargs:
        train_kwargs["encoder_widths"] = tuple(train_kwargs["encoder_widths"])
    train = TrainConfig(loss=LossConfig(**loss_cfg), **train_kwargs)

    synthetic = None
    if use_synthetic:
        if "view_dims" in synth_cfg:
            synth_cfg["view_dims"] = tuple(synth_cfg["view_dims"])
        synthetic = SyntheticSpec(**synth_cfg)

    return ExperimentConfig(
        out_dir=Path(out_dir),
        data_dir=None if data_dir is None else Path(data_dir),
        synthetic=synthetic,
        missing_rate=float(missing_rate),
        train=train,
        strategy=RecoveryStrategy(strategy),
        restarts=int(restarts),
        seeds=tuple(int(s) for s in seeds),
        override_threshold=float(threshold),
    )


def _effective_rate(cfg: ExperimentConfig, dataset) -> float:
    if cfg.missing_rate > 0.0:
        return cfg.missing_rate
    return float(dataset.missing_rate or 0.0)


@click.group()
def main():
    """Incomplete bi-view clustering with prototype-based imputation."""


@main.command()
@click.option("--n", type=int, default=600, show_default=True)
@click.option("--clusters", type=int, default=3, show_default=True)
@click.option("--latent-dim", type=int, default=4, show_default=True)
@click.option("--view-dims", default="12,10", show_default=True)
@click.option("--separation", type=float, default=8.0, show_default=True)
@click.option("--hidden-width", type=int, default=32, show_default=True)
@click.option("--noise", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_friendly_errors
def generate(n, clusters, latent_dim, view_dims, separation, hidden_width, noise, seed, out_dir):
    """Write a synthetic bi-view dataset directory."""
    spec = SyntheticSpec(
        n=n,
        k=clusters,
        latent_dim=latent_dim,
        view_dims=tuple(_parse_ints(view_dims)),
        separation=separation,
        hidden_width=hidden_width,
        noise_scale=noise,
        seed=seed,
    )
    dataset = generate_synthetic(spec)
    save_dataset(dataset, out_dir)
    meta = json.loads((Path(out_dir) / "meta.json").read_text(encoding="utf-8"))
    click.echo(json.dumps(meta, sort_keys=True))


@main.command()
@_experiment_options
@_friendly_errors
def train(**kw):
    """Run the full pipeline per seed: train, cluster, score."""
    cfg = _build_experiment(kw)
    per_seed: dict[int, dict] = {}
    for seed in cfg.seeds:
        dataset = dataset_for_seed(cfg, seed)
        train_cfg = train_config_for_rate(cfg, _effective_rate(cfg, dataset), seed)
        result = run_single(dataset, train_cfg, cfg.strategy, cfg.restarts)
        write_run_outputs(result, seed, cfg.out_dir / f"seed_{seed}")
        per_seed[seed] = metrics_payload(result, seed)
        click.echo(json.dumps(per_seed[seed], sort_keys=True))
    summary = aggregate_metrics(per_seed)
    (cfg.out_dir / "aggregate.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default="default",
              show_default=True)
@click.option("--restarts", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_friendly_errors
def evaluate(checkpoint, data_dir, strategy, restarts, seed, out_dir):
    """Cluster an existing checkpoint's representation and score it."""
    from .data import load_dataset

    model = load_checkpoint(checkpoint)
    dataset = load_dataset(data_dir)
    result = evaluate_model(
        model, dataset, seed, RecoveryStrategy(strategy), restarts
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "assignments.csv", result.clustering.assignments, fmt="%d")
    (out / "metrics.json").write_text(
        json.dumps(metrics_payload(result, seed), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    click.echo(json.dumps(metrics_payload(result, seed), sort_keys=True))


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default="default",
              show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_friendly_errors
def impute(checkpoint, data_dir, strategy, out_dir):
    """Write the completed per-instance representation (observed + recovered)."""
    from .clustering import assemble_representation
    from .data import load_dataset

    model = load_checkpoint(checkpoint)
    dataset = load_dataset(data_dir)
    representation = assemble_representation(model, dataset, RecoveryStrategy(strategy))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "representation.csv", representation, fmt="%.17g", delimiter=",")
    click.echo(
        json.dumps(
            {"rows": int(representation.shape[0]), "cols": int(representation.shape[1])},
            sort_keys=True,
        )
    )


@main.command("sweep-missing")
@click.option("--rates", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
              show_default=True, help="Comma-separated missing rates in [0, 0.9].")
@_experiment_options
@_friendly_errors
def sweep_missing(rates, **kw):
    """Train across missing rates; one CSV row per (rate, seed)."""
    cfg = _build_experiment(kw)
    rate_values = _parse_floats(rates)
    if any(not 0.0 <= r <= 0.9 for r in rate_values):
        raise click.ClickException("rates must lie in [0, 0.9]")
    rows = []
    by_rate: dict[float, dict[int, dict]] = {}
    for rate in rate_values:
        cell_cfg = replace(cfg, missing_rate=rate)
        for seed in cfg.seeds:
            dataset = dataset_for_seed(cell_cfg, seed)
            train_cfg = train_config_for_rate(cfg, rate, seed)
            result = run_single(dataset, train_cfg, cfg.strategy, cfg.restarts)
            payload = metrics_payload(result, seed)
            rows.append([rate, seed, payload["acc"], payload["nmi"], payload["ari"],
                         payload["inertia"]])
            by_rate.setdefault(rate, {})[seed] = payload
            click.echo(json.dumps({"rate": rate, **payload}, sort_keys=True))
    _write_csv(cfg.out_dir / "sweep_missing.csv",
               ["rate", "seed", "acc", "nmi", "ari", "inertia"], rows)
    summary_rows = []
    for rate in rate_values:
        agg = aggregate_metrics(by_rate[rate])["metrics"]
        summary_rows.append([
            rate,
            agg.get("acc", {}).get("mean"), agg.get("acc", {}).get("std"),
            agg.get("nmi", {}).get("mean"), agg.get("nmi", {}).get("std"),
            agg.get("ari", {}).get("mean"), agg.get("ari", {}).get("std"),
        ])
    _write_csv(cfg.out_dir / "sweep_missing_summary.csv",
               ["rate", "acc_mean", "acc_std", "nmi_mean", "nmi_std", "ari_mean", "ari_std"],
               summary_rows)


@main.command("sweep-params")
@click.option("--similarity-bounds", "bounds", default="0,0.25,0.5,0.75,1",
              show_default=True, help="Comma-separated values in [0, 1].")
@click.option("--balance-weights", "weights", default="0.02", show_default=True,
              help="Comma-separated nonnegative values.")
@_experiment_options
@_friendly_errors
def sweep_params(bounds, weights, **kw):
    """Grid over the similarity bound and balance weight.

    Each row also reports the mean cross-view similarity of matched
    prototypes after training.
    """
    cfg = _build_experiment(kw)
    bound_values = _parse_floats(bounds)
    weight_values = _parse_floats(weights)
    if any(not 0.0 <= b <= 1.0 for b in bound_values):
        raise click.ClickException("similarity bounds must lie in [0, 1]")
    rows = []
    for bound in bound_values:
        for weight in weight_values:
            loss_cfg = replace(cfg.train.loss, similarity_bound=bound,
                               balance_weight=weight)
            for seed in cfg.seeds:
                dataset = dataset_for_seed(cfg, seed)
                train_cfg = train_config_for_rate(
                    cfg, _effective_rate(cfg, dataset), seed
                )
                train_cfg = replace(train_cfg, loss=loss_cfg)
                result = run_single(dataset, train_cfg, cfg.strategy, cfg.restarts)
                proto_sim = cross_view_prototype_similarity(result.model, dataset)
                payload = metrics_payload(result, seed)
                rows.append([bound, weight, seed, payload["acc"], payload["nmi"],
                             payload["ari"], proto_sim])
                click.echo(json.dumps(
                    {"similarity_bound": bound, "balance_weight": weight,
                     "prototype_similarity": proto_sim, **payload},
                    sort_keys=True,
                ))
    _write_csv(cfg.out_dir / "sweep_params.csv",
               ["similarity_bound", "balance_weight", "seed", "acc", "nmi", "ari",
                "prototype_similarity"], rows)


@main.command()
@_experiment_options
@_friendly_errors
def ablate(**kw):
    """Loss-term toggles and recovery-strategy variants on one dataset.

    Loss rows retrain with terms disabled; recovery rows reuse the fully
    trained model and vary only the imputation of missing views.
    """
    cfg = _build_experiment(kw)
    rows = []
    full_models: dict[int, tuple] = {}
    for label, toggles in LOSS_ROWS:
        loss_cfg = replace(cfg.train.loss, **toggles)
        for seed in cfg.seeds:
            dataset = dataset_for_seed(cfg, seed)
            train_cfg = train_config_for_rate(cfg, _effective_rate(cfg, dataset), seed)
            train_cfg = replace(train_cfg, loss=loss_cfg)
            result = run_single(dataset, train_cfg, RecoveryStrategy.DEFAULT, cfg.restarts)
            payload = metrics_payload(result, seed)
            rows.append(["loss", label, seed, payload["acc"], payload["nmi"],
                         payload["ari"]])
            click.echo(json.dumps({"section": "loss", "variant": label, **payload},
                                  sort_keys=True))
            if label == "full":
                full_models[seed] = (result.model, dataset, payload)
    for strategy in RECOVERY_ROWS:
        for seed in cfg.seeds:
            model, dataset, full_payload = full_models[seed]
            if strategy is RecoveryStrategy.DEFAULT:
                payload = full_payload
            else:
                result = evaluate_model(model, dataset, seed, strategy, cfg.restarts)
                payload = metrics_payload(result, seed)
            rows.append(["recovery", strategy.value, seed, payload["acc"],
                         payload["nmi"], payload["ari"]])
            click.echo(json.dumps(
                {"section": "recovery", "variant": strategy.value, **payload},
                sort_keys=True,
            ))
    _write_csv(cfg.out_dir / "ablate.csv",
               ["section", "variant", "seed", "acc", "nmi", "ari"], rows)


if __name__ == "__main__":
    main()
