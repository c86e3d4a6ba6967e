import math

import numpy as np
import pytest

from conftest import make_params
from ticl.model import (
    DenseLayer,
    Mlp,
    MlpSpec,
    ModelParams,
    TAU_INIT,
    activation_forward,
    class_embedding_table,
    clone_params,
    image_embed,
    image_embed_rows,
    init_params,
    mlp_forward,
    normalize_rows,
    param_arrays,
    similarity_logits,
    time_embed,
)
from ticl.timecore import TimeLabelSpace, one_hot


class TestInit:
    def test_shapes_and_defaults(self):
        p = init_params(seed=0)
        assert p.num_classes == 24
        assert p.feature_dim == 768
        assert p.embed_dim == 768
        assert [l.weights.shape for l in p.time_encoder.layers] == [(512, 24), (768, 512)]
        assert [l.weights.shape for l in p.adaptor.layers] == [(1024, 768), (768, 1024)]
        assert p.adaptor.spec.residual  # input dim == embed dim
        assert math.isclose(p.tau, TAU_INIT)

    def test_xavier_bounds_and_zero_bias(self):
        p = init_params(seed=3, num_classes=6, feature_dim=10, embed_dim=12,
                        time_hidden=(20,), adaptor_hidden=(20,))
        for mlp in (p.time_encoder, p.adaptor):
            for layer in mlp.layers:
                fan_out, fan_in = layer.weights.shape
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                assert np.all(np.abs(layer.weights) <= limit)
                assert np.abs(layer.weights).max() > 0.5 * limit
                assert np.all(layer.bias == 0.0)

    def test_seed_determinism(self):
        a = init_params(seed=7, num_classes=4, feature_dim=6, embed_dim=6)
        b = init_params(seed=7, num_classes=4, feature_dim=6, embed_dim=6)
        for x, y in zip(param_arrays(a), param_arrays(b)):
            assert np.array_equal(x, y)
        c = init_params(seed=8, num_classes=4, feature_dim=6, embed_dim=6)
        assert not np.array_equal(param_arrays(a)[0], param_arrays(c)[0])

    def test_residual_requires_matching_dims(self):
        p = init_params(seed=0, num_classes=4, feature_dim=10, embed_dim=6)
        assert not p.adaptor.spec.residual
        with pytest.raises(ValueError):
            init_params(seed=0, num_classes=4, feature_dim=10, embed_dim=6, residual=True)


class TestActivations:
    def test_relu(self):
        z = np.array([-1.0, 0.0, 2.0])
        assert np.array_equal(activation_forward("relu", z), [0.0, 0.0, 2.0])

    def test_gelu_reference_values(self):
        # tanh form: 0.5*z*(1 + tanh(sqrt(2/pi)*(z + 0.044715 z^3)))
        def ref(z):
            return 0.5 * z * (1.0 + math.tanh(math.sqrt(2.0 / math.pi) * (z + 0.044715 * z**3)))

        for z in [-2.0, -0.5, 0.0, 0.3, 1.0, 3.0]:
            got = activation_forward("gelu-approx", np.array([z]))[0]
            assert got == pytest.approx(ref(z), abs=1e-12)

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            activation_forward("tanh", np.zeros(1))


class TestForward:
    def test_normalize_rows_unit(self, rng):
        x = rng.normal(size=(10, 5))
        u = normalize_rows(x)
        assert np.allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-12)

    def test_normalize_zero_raises(self):
        with pytest.raises(ValueError):
            normalize_rows(np.zeros((1, 4)))

    def test_embeddings_are_unit(self, rng):
        p = make_params(seed=1)
        for c in range(p.num_classes):
            assert np.linalg.norm(time_embed(p, c)) == pytest.approx(1.0, abs=1e-12)
        v = image_embed(p, rng.normal(size=p.feature_dim))
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_zero_feature_vector_goes_through_bias_path(self):
        p = make_params(seed=2)  # biases perturbed off zero
        v = image_embed(p, np.zeros(p.feature_dim))
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_one_hot_and_index_agree(self):
        p = make_params(seed=3)
        for c in range(p.num_classes):
            a = time_embed(p, c)
            b = time_embed(p, one_hot(c, p.num_classes))
            assert np.array_equal(a, b)

    def test_batched_matches_single(self, rng):
        p = make_params(seed=4)
        feats = rng.normal(size=(7, p.feature_dim))
        batch = image_embed_rows(p, feats)
        for i in range(7):
            assert np.allclose(batch[i], image_embed(p, feats[i]), atol=1e-12)

    def test_residual_passes_input_through_zeroed_layers(self):
        # zero weights and biases with a residual skip reduce to the identity
        # before normalization, so the normalized embed is x / |x|
        dims = (5, 5)
        layer = DenseLayer(weights=np.zeros((5, 5)), bias=np.zeros(5))
        mlp = Mlp(spec=MlpSpec(dims=dims, activation="relu", residual=True), layers=(layer,))
        x = np.array([3.0, 0.0, 4.0, 0.0, 0.0])
        out = mlp_forward(mlp, x[None, :])
        assert np.array_equal(out[0], x)
        assert np.allclose(normalize_rows(out)[0], x / 5.0, atol=1e-15)

    def test_class_table_and_logits(self):
        p = make_params(seed=5)
        table = class_embedding_table(p)
        assert table.shape == (p.num_classes, p.embed_dim)
        assert np.allclose(np.linalg.norm(table, axis=1), 1.0, atol=1e-12)
        vec = table[0]
        logits = similarity_logits(vec, table, p.tau)
        # cosine of a row with itself is 1, so that logit is exactly 1/tau
        assert logits[0] == pytest.approx(1.0 / p.tau, rel=1e-12)
        assert np.all(logits <= 1.0 / p.tau + 1e-12)

    def test_factor_space_table_runs_over_total_classes(self):
        space = TimeLabelSpace(12, attribute_factors=(("kind", 2),))
        p = make_params(seed=6, num_classes=24)
        table = class_embedding_table(p, space)
        assert table.shape == (24, p.embed_dim)


class TestParamPlumbing:
    def test_param_arrays_order_and_tail(self):
        p = make_params(seed=7, time_hidden=(4,), adaptor_hidden=(4, 4))
        arrays = param_arrays(p)
        # per layer a weight and a bias, temperature last
        n_layers = len(p.time_encoder.layers) + len(p.adaptor.layers)
        assert len(arrays) == 2 * n_layers + 1
        assert arrays[-1].shape == ()
        assert arrays[0] is p.time_encoder.layers[0].weights

    def test_clone_is_deep(self):
        p = make_params(seed=8)
        q = clone_params(p)
        q.time_encoder.layers[0].weights[0, 0] += 1.0
        assert p.time_encoder.layers[0].weights[0, 0] != q.time_encoder.layers[0].weights[0, 0]
        float(q.log_tau)  # still a scalar array

    def test_log_tau_is_mutable_scalar(self):
        p = init_params(seed=0, num_classes=4, feature_dim=4, embed_dim=4)
        before = p.tau
        p.log_tau[...] += 0.5
        assert p.tau == pytest.approx(before * math.exp(0.5))
