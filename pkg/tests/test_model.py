"""Encoder, dual attention layer, imputation strategies, checkpoints."""

import json
import math

import numpy as np
import pytest

from protoimpute.errors import ConfigError, ContractError, ShapeError
from protoimpute.model import (
    DualStreamModel,
    EncoderParams,
    ModelConfig,
    RecoveryStrategy,
    ViewParams,
    dual_attention,
    encode,
    impute,
    load_checkpoint,
    projected_prototypes,
    save_checkpoint,
)
from protoimpute.numerics import Matrix


def make_view(rng, d=4, k=3, input_dim=5, widths=(6,)):
    return ViewParams.build(
        input_dim=input_dim,
        widths=widths,
        feature_dim=d,
        cluster_count=k,
        rng=rng,
        name_prefix="view",
    )


class TestEncode:
    def test_identity_single_layer_keeps_unit_input(self, rng):
        d = 4
        enc = EncoderParams(
            [(Matrix.param(np.eye(d)), Matrix.param(np.zeros((1, d))))]
        )
        x = rng.standard_normal((3, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        out = encode(Matrix(x), enc)
        np.testing.assert_allclose(out.data, x, atol=1e-12)

    def test_output_rows_are_unit(self, rng):
        view = make_view(rng)
        out = encode(Matrix(rng.standard_normal((7, 5))), view.encoder)
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=1), 1.0, atol=1e-9)

    def test_matches_hand_evaluation(self, rng):
        w1 = rng.standard_normal((3, 4))
        b1 = rng.standard_normal((1, 4))
        w2 = rng.standard_normal((4, 2))
        b2 = rng.standard_normal((1, 2))
        enc = EncoderParams(
            [
                (Matrix.param(w1), Matrix.param(b1)),
                (Matrix.param(w2), Matrix.param(b2)),
            ]
        )
        x = rng.standard_normal((2, 3))
        hidden = np.maximum(x @ w1 + b1, 0.0)
        raw = hidden @ w2 + b2
        expected = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        out = encode(Matrix(x), enc)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        view = make_view(rng)
        with pytest.raises(ShapeError):
            encode(Matrix(rng.standard_normal((3, 9))), view.encoder)

    def test_layers_must_chain(self, rng):
        with pytest.raises(ShapeError):
            EncoderParams(
                [
                    (Matrix.param(np.zeros((3, 4))), Matrix.param(np.zeros((1, 4)))),
                    (Matrix.param(np.zeros((5, 2))), Matrix.param(np.zeros((1, 2)))),
                ]
            )


class TestDualAttention:
    def test_rows_are_stochastic(self, rng):
        view = make_view(rng)
        x = encode(Matrix(rng.standard_normal((6, 5))), view.encoder)
        out = dual_attention(x, view)
        np.testing.assert_allclose(out.attention.data.sum(axis=1), 1.0, atol=1e-9)
        assert (out.attention.data >= 0.0).all()
        assert out.samples.shape == (6, 4)
        assert out.prototypes.shape == (3, 4)

    def test_single_prototype_gives_constant_offset(self, rng):
        view = make_view(rng, k=1)
        x = encode(Matrix(rng.standard_normal((5, 5))), view.encoder)
        out = dual_attention(x, view)
        np.testing.assert_array_equal(out.attention.data, np.ones((5, 1)))
        offsets = out.samples.data - x.data
        np.testing.assert_allclose(offsets, offsets[0], atol=1e-12)
        np.testing.assert_allclose(
            offsets[0], projected_prototypes(view).data[0], atol=1e-12
        )

    def test_equal_logits_give_uniform_attention(self, rng):
        view = make_view(rng)
        view.sample_attn_proj.data[:] = 0.0
        x = encode(Matrix(rng.standard_normal((4, 5))), view.encoder)
        out = dual_attention(x, view)
        np.testing.assert_allclose(out.attention.data, 1.0 / 3.0, atol=1e-12)

    def test_matches_step_by_step_script(self, rng):
        d, k, n = 2, 2, 2
        view = make_view(rng, d=d, k=k, input_dim=2, widths=())
        x_data = np.array([[0.6, 0.8], [1.0, 0.0]])
        x = Matrix(x_data)
        out = dual_attention(x, view)

        # Independent straight-line evaluation with plain numpy.
        c = view.prototypes.data
        q = x_data @ view.sample_attn_proj.data
        keys = c @ view.proto_attn_proj.data
        logits = q @ keys.T / math.sqrt(d)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        a = e / e.sum(axis=1, keepdims=True)
        proj = c @ view.proto_value_proj.data
        proj = proj / np.linalg.norm(proj, axis=1, keepdims=True)
        z = x_data + a @ proj
        u = c + a.T @ (x_data @ view.sample_value_proj.data)

        np.testing.assert_allclose(out.attention.data, a, atol=1e-12)
        np.testing.assert_allclose(out.samples.data, z, atol=1e-12)
        np.testing.assert_allclose(out.prototypes.data, u, atol=1e-12)

    def test_prototype_relabeling_invariance(self, rng):
        view = make_view(rng)
        x = encode(Matrix(rng.standard_normal((5, 5))), view.encoder)
        out = dual_attention(x, view)

        perm = np.array([2, 0, 1])
        permuted = ViewParams(
            view.encoder,
            sample_attn_proj=view.sample_attn_proj,
            proto_attn_proj=view.proto_attn_proj,
            sample_value_proj=view.sample_value_proj,
            proto_value_proj=view.proto_value_proj,
            prototypes=Matrix.param(view.prototypes.data[perm]),
        )
        out_perm = dual_attention(x, permuted)
        np.testing.assert_allclose(
            out_perm.attention.data, out.attention.data[:, perm], atol=1e-12
        )
        np.testing.assert_allclose(out_perm.samples.data, out.samples.data, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        view = make_view(rng)
        with pytest.raises(ShapeError):
            dual_attention(Matrix(rng.standard_normal((3, 7))), view)


class TestImpute:
    def test_samples_only_is_doubling(self, rng):
        view = make_view(rng)
        x = Matrix(rng.standard_normal((4, 4)))
        a = Matrix(np.full((4, 3), 1.0 / 3.0))
        out = impute(x, a, view, RecoveryStrategy.SAMPLES_FROM_OBSERVED_ONLY, view)
        np.testing.assert_array_equal(out.data, 2.0 * x.data)

    def test_tied_parameters_reproduce_other_view(self, rng):
        view = make_view(rng)
        x = encode(Matrix(rng.standard_normal((5, 5))), view.encoder)
        out = dual_attention(x, view)
        recovered = impute(x, out.attention, view, RecoveryStrategy.DEFAULT, view)
        np.testing.assert_allclose(recovered.data, out.samples.data, atol=1e-12)

    def test_default_matches_reference_script(self, rng):
        observed = make_view(rng)
        missing = make_view(rng)
        x = rng.standard_normal((4, 4))
        a = rng.random((4, 3))
        a /= a.sum(axis=1, keepdims=True)
        out = impute(
            Matrix(x), Matrix(a), missing, RecoveryStrategy.DEFAULT, observed
        )
        proj = missing.prototypes.data @ missing.proto_value_proj.data
        proj /= np.linalg.norm(proj, axis=1, keepdims=True)
        np.testing.assert_allclose(out.data, x + a @ proj, atol=1e-12)

    def test_observed_prototype_variant(self, rng):
        observed = make_view(rng)
        missing = make_view(rng)
        x = rng.standard_normal((4, 4))
        a = rng.random((4, 3))
        a /= a.sum(axis=1, keepdims=True)
        out = impute(
            Matrix(x), Matrix(a), missing,
            RecoveryStrategy.PROTOTYPES_FROM_OBSERVED, observed,
        )
        proj = observed.prototypes.data @ observed.proto_value_proj.data
        proj /= np.linalg.norm(proj, axis=1, keepdims=True)
        np.testing.assert_allclose(out.data, x + a @ proj, atol=1e-12)

    def test_missing_prototypes_only_variant(self, rng):
        missing = make_view(rng)
        a = rng.random((4, 3))
        a /= a.sum(axis=1, keepdims=True)
        x = Matrix(rng.standard_normal((4, 4)))
        out = impute(
            x, Matrix(a), missing,
            RecoveryStrategy.PROTOTYPES_FROM_MISSING_ONLY, missing,
        )
        proj = missing.prototypes.data @ missing.proto_value_proj.data
        proj /= np.linalg.norm(proj, axis=1, keepdims=True)
        np.testing.assert_allclose(out.data, 2.0 * (a @ proj), atol=1e-12)

    def test_rejects_non_stochastic_attention(self, rng):
        view = make_view(rng)
        x = Matrix(rng.standard_normal((2, 4)))
        bad = Matrix(np.full((2, 3), 0.5))
        with pytest.raises(ContractError):
            impute(x, bad, view, RecoveryStrategy.DEFAULT, view)


class TestCheckpoint:
    def test_round_trip_is_exact(self, rng, tmp_path):
        model = DualStreamModel.build(
            ModelConfig(cluster_count=3, input_dims=(5, 4), feature_dim=4,
                        encoder_widths=(6,), seed=7)
        )
        path = tmp_path / "checkpoint.json"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.config == model.config
        for original, restored in zip(model.parameters(), loaded.parameters()):
            np.testing.assert_array_equal(original.data, restored.data)

    def test_resave_is_byte_identical(self, rng, tmp_path):
        model = DualStreamModel.build(
            ModelConfig(cluster_count=2, input_dims=(3, 3), feature_dim=3,
                        encoder_widths=(4,), seed=1)
        )
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_checkpoint(model, first)
        save_checkpoint(load_checkpoint(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format_version": 99}))
        with pytest.raises(ConfigError):
            load_checkpoint(path)


class TestModelConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            ModelConfig(cluster_count=0, input_dims=(3, 3))
        with pytest.raises(ConfigError):
            ModelConfig(cluster_count=2, input_dims=(3,))
        with pytest.raises(ConfigError):
            ModelConfig(cluster_count=2, input_dims=(3, 3), feature_dim=0)

    def test_build_is_seed_deterministic(self):
        cfg = ModelConfig(cluster_count=3, input_dims=(5, 4), feature_dim=4,
                          encoder_widths=(6,), seed=11)
        a = DualStreamModel.build(cfg)
        b = DualStreamModel.build(cfg)
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_prototype_rows_are_unit_at_init(self):
        model = DualStreamModel.build(
            ModelConfig(cluster_count=4, input_dims=(5, 4), feature_dim=6,
                        encoder_widths=(6,), seed=3)
        )
        for view in model.views:
            np.testing.assert_allclose(
                np.linalg.norm(view.prototypes.data, axis=1), 1.0, atol=1e-12
            )
