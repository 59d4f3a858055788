"""Dual-stream model: encoders, sample-prototype attention, imputation.

Each view owns an MLP encoder, four d x d projections, and K learnable
prototypes. The attention layer produces a row-stochastic N x K matrix A,
prototype-enriched sample representations Z, and sample-enriched prototype
representations U. Missing views are recovered from the missing view's
prototypes weighted by the attention inherited from the observed view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, ShapeError
from .numerics import (
    Matrix,
    add,
    l2_normalize_rows,
    matmul,
    relu,
    scale,
    softmax_rows,
    transpose,
)
from .seeding import rng_for

CHECKPOINT_VERSION = 1

# Row sums of an attention matrix fed to impute() may be off by at most this.
ROW_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    cluster_count: int
    input_dims: tuple[int, int]
    feature_dim: int = 64
    encoder_widths: tuple[int, ...] = (256, 256)
    seed: int = 0

    def __post_init__(self):
        if self.cluster_count < 1:
            raise ConfigError("cluster_count must be at least 1")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be at least 1")
        if len(self.input_dims) != 2 or min(self.input_dims) < 1:
            raise ConfigError("input_dims must be two positive integers")
        if any(w < 1 for w in self.encoder_widths):
            raise ConfigError("encoder widths must be positive")


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _attention_proj_init(rng: np.random.Generator, d: int) -> np.ndarray:
    # Unit-norm inputs through two of these projections and the 1/sqrt(d)
    # scale must give O(1) attention logits; the plain fan-based limit
    # leaves them O(d^-1/2), too flat for the prototype columns to
    # specialize before the single cross-view alignment.
    limit = math.sqrt(48.0 / d)
    return rng.uniform(-limit, limit, size=(d, d))


class EncoderParams:
    """Affine layers with ReLU between consecutive layers (not after the last)."""

    def __init__(self, layers: list[tuple[Matrix, Matrix]]):
        if not layers:
            raise ConfigError("encoder needs at least one layer")
        for weight, bias in layers:
            if bias.shape != (1, weight.cols):
                raise ShapeError(
                    f"bias shape {bias.shape} does not match weight {weight.shape}"
                )
        for (w_prev, _), (w_next, _) in zip(layers, layers[1:]):
            if w_prev.cols != w_next.rows:
                raise ShapeError(
                    f"encoder layers do not chain: {w_prev.shape} then {w_next.shape}"
                )
        self.layers = layers

    @classmethod
    def build(
        cls,
        input_dim: int,
        widths: tuple[int, ...],
        output_dim: int,
        rng: np.random.Generator,
        name_prefix: str = "encoder",
    ) -> "EncoderParams":
        dims = [input_dim, *widths, output_dim]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            weight = Matrix.param(_xavier(rng, fan_in, fan_out), name=f"{name_prefix}.{i}.weight")
            bias = Matrix.param(np.zeros((1, fan_out)), name=f"{name_prefix}.{i}.bias")
            layers.append((weight, bias))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].rows

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].cols

    def parameters(self) -> list[Matrix]:
        return [m for layer in self.layers for m in layer]


class ViewParams:
    """All trainable state of one view."""

    def __init__(
        self,
        encoder: EncoderParams,
        sample_attn_proj: Matrix,
        proto_attn_proj: Matrix,
        sample_value_proj: Matrix,
        proto_value_proj: Matrix,
        prototypes: Matrix,
    ):
        d = encoder.output_dim
        for name, m in (
            ("sample_attn_proj", sample_attn_proj),
            ("proto_attn_proj", proto_attn_proj),
            ("sample_value_proj", sample_value_proj),
            ("proto_value_proj", proto_value_proj),
        ):
            if m.shape != (d, d):
                raise ShapeError(f"{name} must be {d}x{d}, got {m.shape}")
        if prototypes.cols != d:
            raise ShapeError(
                f"prototypes must have {d} columns, got {prototypes.shape}"
            )
        self.encoder = encoder
        self.sample_attn_proj = sample_attn_proj
        self.proto_attn_proj = proto_attn_proj
        self.sample_value_proj = sample_value_proj
        self.proto_value_proj = proto_value_proj
        self.prototypes = prototypes

    @classmethod
    def build(
        cls,
        input_dim: int,
        widths: tuple[int, ...],
        feature_dim: int,
        cluster_count: int,
        rng: np.random.Generator,
        name_prefix: str = "view",
    ) -> "ViewParams":
        encoder = EncoderParams.build(
            input_dim, widths, feature_dim, rng, name_prefix=f"{name_prefix}.encoder"
        )
        projs = {}
        for proj_name in ("sample_attn_proj", "proto_attn_proj"):
            projs[proj_name] = Matrix.param(
                _attention_proj_init(rng, feature_dim), name=f"{name_prefix}.{proj_name}"
            )
        for proj_name in ("sample_value_proj", "proto_value_proj"):
            projs[proj_name] = Matrix.param(
                _xavier(rng, feature_dim, feature_dim), name=f"{name_prefix}.{proj_name}"
            )
        raw = rng.standard_normal((cluster_count, feature_dim))
        raw /= np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-12)
        prototypes = Matrix.param(raw, name=f"{name_prefix}.prototypes")
        return cls(encoder, prototypes=prototypes, **projs)

    @property
    def feature_dim(self) -> int:
        return self.encoder.output_dim

    @property
    def cluster_count(self) -> int:
        return self.prototypes.rows

    def parameters(self) -> list[Matrix]:
        return [
            *self.encoder.parameters(),
            self.sample_attn_proj,
            self.proto_attn_proj,
            self.sample_value_proj,
            self.proto_value_proj,
            self.prototypes,
        ]


@dataclass
class DualAttentionOutput:
    attention: Matrix  # N x K, rows sum to 1
    samples: Matrix  # N x d
    prototypes: Matrix  # K x d


class RecoveryStrategy(Enum):
    """How a missing view's representation is rebuilt."""

    DEFAULT = "default"
    PROTOTYPES_FROM_OBSERVED = "prototypes-from-observed"
    PROTOTYPES_FROM_MISSING_ONLY = "prototypes-from-missing-only"
    SAMPLES_FROM_OBSERVED_ONLY = "samples-from-observed-only"


def encode(raw: Matrix, encoder: EncoderParams) -> Matrix:
    """Run the encoder and L2-normalize the output rows."""
    if raw.cols != encoder.input_dim:
        raise ShapeError(
            f"encoder expects {encoder.input_dim} input columns, got {raw.cols}"
        )
    h = raw
    last = len(encoder.layers) - 1
    for i, (weight, bias) in enumerate(encoder.layers):
        h = add(matmul(h, weight), bias)
        if i != last:
            h = relu(h)
    return l2_normalize_rows(h)


def projected_prototypes(vp: ViewParams) -> Matrix:
    """Value-projected prototypes with unit rows, as aggregated into samples."""
    return l2_normalize_rows(matmul(vp.prototypes, vp.proto_value_proj))


def dual_attention(x: Matrix, vp: ViewParams) -> DualAttentionOutput:
    """Attention between samples and prototypes plus both enriched streams.

    Logits are the scaled product of projected samples and projected
    prototypes; a row softmax over the K prototypes makes each sample's
    attention a distribution. Samples absorb their attended (normalized)
    prototypes; prototypes absorb their attention-weighted samples.
    """
    d = vp.feature_dim
    if x.cols != d:
        raise ShapeError(f"samples must have {d} columns, got {x.cols}")
    q = matmul(x, vp.sample_attn_proj)
    keys = matmul(vp.prototypes, vp.proto_attn_proj)
    logits = scale(matmul(q, transpose(keys)), 1.0 / math.sqrt(d))
    attention = softmax_rows(logits)
    samples = add(x, matmul(attention, projected_prototypes(vp)))
    prototypes = add(
        vp.prototypes,
        matmul(transpose(attention), matmul(x, vp.sample_value_proj)),
    )
    return DualAttentionOutput(attention=attention, samples=samples, prototypes=prototypes)


def impute(
    x_obs: Matrix,
    a_obs: Matrix,
    missing_view: ViewParams,
    strategy: RecoveryStrategy = RecoveryStrategy.DEFAULT,
    observed_view: ViewParams | None = None,
) -> Matrix:
    """Recover the missing view's representation for the given samples.

    ``x_obs`` and ``a_obs`` are the encoded samples and their attention in
    the observed view. The default strategy combines the observed samples
    with the missing view's projected prototypes weighted by the inherited
    attention; the variants swap out either ingredient and rescale by 2 so
    the result keeps the length of a sum of two unit-norm parts.
    """
    if a_obs.rows != x_obs.rows:
        raise ShapeError(
            f"attention rows {a_obs.rows} do not match sample rows {x_obs.rows}"
        )
    row_sums = a_obs.data.sum(axis=1)
    drift = np.abs(row_sums - 1.0).max()
    if drift > ROW_SUM_TOLERANCE:
        raise ContractError(
            f"attention rows must sum to 1 (max deviation {drift:.3g})"
        )
    if strategy is RecoveryStrategy.DEFAULT:
        return add(x_obs, matmul(a_obs, projected_prototypes(missing_view)))
    if strategy is RecoveryStrategy.PROTOTYPES_FROM_OBSERVED:
        if observed_view is None:
            raise ConfigError("strategy needs the observed view's parameters")
        return add(x_obs, matmul(a_obs, projected_prototypes(observed_view)))
    if strategy is RecoveryStrategy.PROTOTYPES_FROM_MISSING_ONLY:
        return scale(matmul(a_obs, projected_prototypes(missing_view)), 2.0)
    if strategy is RecoveryStrategy.SAMPLES_FROM_OBSERVED_ONLY:
        return scale(x_obs, 2.0)
    raise ConfigError(f"unknown recovery strategy: {strategy!r}")


class DualStreamModel:
    """The two views' parameters plus the shared configuration."""

    def __init__(self, config: ModelConfig, views: tuple[ViewParams, ViewParams]):
        for view, input_dim in zip(views, config.input_dims):
            if view.encoder.input_dim != input_dim:
                raise ShapeError(
                    f"view encoder expects {view.encoder.input_dim} inputs, "
                    f"config says {input_dim}"
                )
            if view.feature_dim != config.feature_dim:
                raise ShapeError("view feature dim does not match config")
            if view.cluster_count != config.cluster_count:
                raise ShapeError("view prototype count does not match config")
        self.config = config
        self.views = views

    @classmethod
    def build(cls, config: ModelConfig) -> "DualStreamModel":
        rng = rng_for(config.seed, "model-init")
        views = tuple(
            ViewParams.build(
                input_dim=config.input_dims[v],
                widths=config.encoder_widths,
                feature_dim=config.feature_dim,
                cluster_count=config.cluster_count,
                rng=rng,
                name_prefix=f"view{v + 1}",
            )
            for v in (0, 1)
        )
        return cls(config, views)

    def parameters(self) -> list[Matrix]:
        return [p for view in self.views for p in view.parameters()]


def save_checkpoint(model: DualStreamModel, path) -> None:
    """Serialize the model as JSON; floats round-trip bit-exactly."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": {
            "cluster_count": model.config.cluster_count,
            "input_dims": list(model.config.input_dims),
            "feature_dim": model.config.feature_dim,
            "encoder_widths": list(model.config.encoder_widths),
            "seed": model.config.seed,
        },
        "views": [
            {
                "encoder": [
                    {"weight": w.data.tolist(), "bias": b.data.tolist()}
                    for w, b in view.encoder.layers
                ],
                "sample_attn_proj": view.sample_attn_proj.data.tolist(),
                "proto_attn_proj": view.proto_attn_proj.data.tolist(),
                "sample_value_proj": view.sample_value_proj.data.tolist(),
                "proto_value_proj": view.proto_value_proj.data.tolist(),
                "prototypes": view.prototypes.data.tolist(),
            }
            for view in model.views
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path) -> DualStreamModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version: {version!r}")
    cfg = payload["config"]
    config = ModelConfig(
        cluster_count=int(cfg["cluster_count"]),
        input_dims=tuple(int(v) for v in cfg["input_dims"]),
        feature_dim=int(cfg["feature_dim"]),
        encoder_widths=tuple(int(v) for v in cfg["encoder_widths"]),
        seed=int(cfg["seed"]),
    )
    views = []
    for v, view_payload in enumerate(payload["views"]):
        layers = [
            (
                Matrix.param(layer["weight"], name=f"view{v + 1}.encoder.{i}.weight"),
                Matrix.param(layer["bias"], name=f"view{v + 1}.encoder.{i}.bias"),
            )
            for i, layer in enumerate(view_payload["encoder"])
        ]
        views.append(
            ViewParams(
                EncoderParams(layers),
                sample_attn_proj=Matrix.param(
                    view_payload["sample_attn_proj"], name=f"view{v + 1}.sample_attn_proj"
                ),
                proto_attn_proj=Matrix.param(
                    view_payload["proto_attn_proj"], name=f"view{v + 1}.proto_attn_proj"
                ),
                sample_value_proj=Matrix.param(
                    view_payload["sample_value_proj"], name=f"view{v + 1}.sample_value_proj"
                ),
                proto_value_proj=Matrix.param(
                    view_payload["proto_value_proj"], name=f"view{v + 1}.proto_value_proj"
                ),
                prototypes=Matrix.param(
                    view_payload["prototypes"], name=f"view{v + 1}.prototypes"
                ),
            )
        )
    return DualStreamModel(config, (views[0], views[1]))
