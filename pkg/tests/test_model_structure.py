import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fnsda.engine import ComplexTensor, Tensor, complex_mode_mul, no_grad
from fnsda.errors import ConfigError, ShapeError
from fnsda.model import (
    EnvContext,
    ModelConfig,
    condition_weights,
    count_adapted_params,
    count_params,
    default_model_config,
    init_params,
    manual_partition_gate,
    mode_indices,
    model_forward,
    spectral_kernel,
    split_complex,
    split_modes,
)


def tiny_config(**kw):
    base = dict(family="lv", layers=1, width=8, modes=4, context_dim=3, state_channels=2)
    base.update(kw)
    return ModelConfig(**base)


class TestModelConfig:
    def test_family_defaults(self):
        lv = default_model_config("lv")
        assert (lv.layers, lv.modes, lv.context_dim) == (2, 10, 10)
        go = default_model_config("go")
        assert (go.layers, go.modes, go.context_dim) == (2, 10, 20)
        gs = default_model_config("gs")
        assert (gs.layers, gs.modes, gs.context_dim) == (4, 12, 20)
        assert gs.spectral_axis == "spatial_2d"
        ns = default_model_config("ns")
        assert (ns.layers, ns.modes, ns.context_dim) == (4, 12, 10)

    def test_latent_mode_bound(self):
        with pytest.raises(ConfigError):
            tiny_config(width=8, modes=6)  # 6 > 8/2+1

    def test_latent_width_twice_modes(self):
        with pytest.raises(ConfigError):
            tiny_config(width=8, modes=5)

    def test_spatial_mode_bound(self):
        with pytest.raises(ConfigError):
            tiny_config(spectral_axis="spatial_2d", grid_side=8, modes=5)

    def test_width_power_of_two(self):
        with pytest.raises(ConfigError):
            tiny_config(width=12, modes=4)


class TestModeSplit:
    @given(st.lists(st.floats(-12, 12, allow_nan=False), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_completeness(self, logits):
        from fnsda.engine import hard_sigmoid

        rng = np.random.default_rng(0)
        zt = ComplexTensor(
            Tensor(rng.standard_normal((2, 4, 3))), Tensor(rng.standard_normal((2, 4, 3)))
        )
        gate = hard_sigmoid(Tensor(np.array(logits)))
        z_e, z_s = split_modes(zt, gate)
        np.testing.assert_allclose(z_e.re.data + z_s.re.data, zt.re.data, atol=1e-12)
        np.testing.assert_allclose(z_e.im.data + z_s.im.data, zt.im.data, atol=1e-12)

    def test_saturated_gates(self):
        from fnsda.engine import hard_sigmoid

        rng = np.random.default_rng(1)
        zt = ComplexTensor(Tensor(rng.standard_normal((1, 2, 3))), Tensor(rng.standard_normal((1, 2, 3))))
        z_e, z_s = split_modes(zt, hard_sigmoid(Tensor(np.array([-10.0, -10.0]))))
        np.testing.assert_array_equal(z_e.re.data, 0.0)
        np.testing.assert_array_equal(z_s.re.data, zt.re.data)
        z_e, z_s = split_modes(zt, hard_sigmoid(Tensor(np.array([10.0, 10.0]))))
        np.testing.assert_array_equal(z_e.re.data, zt.re.data)
        np.testing.assert_array_equal(z_s.re.data, 0.0)


class TestConditioning:
    def test_zero_context_zero_weights(self):
        rng = np.random.default_rng(2)
        w = Tensor(rng.standard_normal((4, 3, 3, 2, 5)))
        r = condition_weights(w, Tensor(np.zeros(5)))
        np.testing.assert_array_equal(r.re.data, 0.0)
        np.testing.assert_array_equal(r.im.data, 0.0)

    def test_one_hot_selects_slice(self):
        rng = np.random.default_rng(3)
        w = Tensor(rng.standard_normal((4, 3, 3, 2, 5)))
        e2 = np.zeros(5)
        e2[2] = 1.0
        r = condition_weights(w, Tensor(e2))
        np.testing.assert_allclose(r.re.data, w.data[..., 0, 2], atol=1e-15)
        np.testing.assert_allclose(r.im.data, w.data[..., 1, 2], atol=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        w = Tensor(rng.standard_normal((2, 3, 3, 2, 4)))
        c1 = rng.standard_normal(4)
        c2 = rng.standard_normal(4)
        a = 1.7
        lhs = condition_weights(w, Tensor(a * c1 + c2))
        r1 = condition_weights(w, Tensor(c1))
        r2 = condition_weights(w, Tensor(c2))
        np.testing.assert_allclose(lhs.re.data, a * r1.re.data + r2.re.data, atol=1e-12)
        np.testing.assert_allclose(lhs.im.data, a * r1.im.data + r2.im.data, atol=1e-12)

    def test_context_dim_mismatch(self):
        w = Tensor(np.zeros((2, 3, 3, 2, 4)))
        with pytest.raises(ShapeError):
            condition_weights(w, Tensor(np.zeros(5)))

    def test_kernel_affine_in_context(self):
        """spectral_kernel output is affine in c_e for a fixed gate and input."""
        config = tiny_config()
        params = init_params(config)
        rng = np.random.default_rng(5)
        z = Tensor(rng.standard_normal((2, config.seq_len, config.width)))
        c1 = rng.standard_normal(3)
        c2 = rng.standard_normal(3)
        with no_grad():
            f0 = spectral_kernel(z, 0, params, Tensor(np.zeros(3)), config).data
            f1 = spectral_kernel(z, 0, params, Tensor(c1), config).data
            f2 = spectral_kernel(z, 0, params, Tensor(c2), config).data
            fsum = spectral_kernel(z, 0, params, Tensor(c1 + c2), config).data
        np.testing.assert_allclose(fsum - f0, (f1 - f0) + (f2 - f0), atol=1e-12)


class TestFnoReduction:
    def _plain_fno_kernel(self, z, weights, config):
        """Reference spectral convolution: one weight set on all modes."""
        from fnsda.engine import irfft_1d, narrow, rfft_1d, zero_pad

        k, s = config.modes, config.seq_len
        zh = rfft_1d(z, axis=1)
        zt = ComplexTensor(narrow(zh.re, 1, 0, k), narrow(zh.im, 1, 0, k))
        out = complex_mode_mul(weights, zt)
        half = s // 2 + 1
        padded = ComplexTensor(zero_pad(out.re, 1, half, 0), zero_pad(out.im, 1, half, 0))
        return irfft_1d(padded, s, axis=1)

    def test_all_shared_equals_plain_fno(self):
        config = tiny_config(partition="all_shared")
        params = init_params(config)
        rng = np.random.default_rng(6)
        z = Tensor(rng.standard_normal((3, config.seq_len, config.width)))
        with no_grad():
            ours = spectral_kernel(z, 0, params, Tensor(np.zeros(3)), config).data
            ref = self._plain_fno_kernel(
                z, split_complex(params["layers.0.r_shared"]), config
            ).data
        np.testing.assert_allclose(ours, ref, atol=1e-12)

    def test_forced_env_gate_with_frozen_weights(self):
        """Gate pinned to 1 with R_e frozen reduces to plain FNO with R_e."""
        config = tiny_config(partition="automatic")
        params = init_params(config)
        params["layers.0.gate_logits"].data[:] = 100.0  # hard sigmoid saturates at 1
        ctx_c = Tensor(np.zeros(3))
        ctx_c.data[0] = 1.0  # R_e = W_env[..., 0]
        rng = np.random.default_rng(7)
        z = Tensor(rng.standard_normal((2, config.seq_len, config.width)))
        frozen = split_complex(
            Tensor(params["layers.0.w_env"].data[..., 0].copy())
        )
        with no_grad():
            ours = spectral_kernel(z, 0, params, ctx_c, config).data
            ref = self._plain_fno_kernel(z, frozen, config).data
        np.testing.assert_allclose(ours, ref, atol=1e-12)

    def test_zero_weights_zero_output(self):
        config = tiny_config()
        params = init_params(config)
        params["layers.0.r_shared"].data[:] = 0.0
        rng = np.random.default_rng(8)
        z = Tensor(rng.standard_normal((2, config.seq_len, config.width)))
        with no_grad():
            out = spectral_kernel(z, 0, params, Tensor(np.zeros(3)), config).data
        np.testing.assert_allclose(out, 0.0, atol=1e-15)


class TestForward:
    @pytest.mark.parametrize("family,shape", [("lv", (5, 2)), ("go", (4, 7))])
    def test_ode_shape_contract(self, family, shape):
        config = default_model_config(family, width=16, modes=8)
        params = init_params(config)
        ctx = EnvContext.fresh(config)
        with no_grad():
            out = model_forward(np.random.default_rng(0).uniform(1, 2, shape), ctx, params, config)
        assert out.shape == shape

    def test_spatial_shape_contract(self):
        config = ModelConfig(
            family="gs", layers=1, width=8, modes=3, context_dim=4,
            state_channels=2, spectral_axis="spatial_2d", grid_side=8,
        )
        params = init_params(config)
        ctx = EnvContext.fresh(config)
        u = np.random.default_rng(1).standard_normal((3, 2, 8, 8))
        with no_grad():
            out = model_forward(u, ctx, params, config)
        assert out.shape == (3, 2, 8, 8)

    def test_state_shape_mismatch(self):
        config = tiny_config()
        params = init_params(config)
        ctx = EnvContext.fresh(config)
        with pytest.raises(ShapeError):
            model_forward(np.zeros((3, 5)), ctx, params, config)

    def test_same_context_same_output(self):
        config = tiny_config()
        params = init_params(config)
        a = EnvContext.fresh(config, env_id=1)
        b = EnvContext.fresh(config, env_id=9)
        a.c.data[:] = 0.3
        b.c.data[:] = 0.3
        u = np.random.default_rng(2).uniform(1, 2, (4, 2))
        with no_grad():
            np.testing.assert_array_equal(
                model_forward(u, a, params, config).data,
                model_forward(u, b, params, config).data,
            )

    def test_zero_projection_zero_derivative(self):
        config = tiny_config()
        params = init_params(config)
        params["proj.w2"].data[:] = 0.0
        params["proj.b2"].data[:] = 0.0
        ctx = EnvContext.fresh(config)
        u = np.random.default_rng(3).uniform(1, 2, (4, 2))
        with no_grad():
            np.testing.assert_array_equal(model_forward(u, ctx, params, config).data, 0.0)


class TestCounts:
    def test_adapted_counts(self):
        assert count_adapted_params(default_model_config("lv")) == 12
        assert count_adapted_params(default_model_config("ns")) == 14
        assert count_adapted_params(default_model_config("go")) == 22
        assert count_adapted_params(default_model_config("gs")) == 24

    @pytest.mark.parametrize("family", ["lv", "go"])
    def test_adapted_fraction_below_permille(self, family):
        config = default_model_config(family)
        total = count_params(init_params(config))
        assert count_adapted_params(config) / total < 1e-3

    def test_count_is_config_function(self):
        c1 = tiny_config()
        a = count_params(init_params(c1))
        b = count_params(init_params(tiny_config()))
        assert a == b


class TestManualPartitions:
    def test_cross_1_1_alternates(self):
        config = ModelConfig(
            family="lv", layers=1, width=32, modes=10, context_dim=3,
            state_channels=2, partition="cross", cross_p=1, cross_q=1,
        )
        np.testing.assert_array_equal(
            manual_partition_gate(config), [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
        )

    def test_cross_4_1_two_env_modes(self):
        config = ModelConfig(
            family="lv", layers=1, width=32, modes=10, context_dim=3,
            state_channels=2, partition="cross", cross_p=4, cross_q=1,
        )
        gate = manual_partition_gate(config)
        assert gate.sum() == 2
        np.testing.assert_array_equal(np.nonzero(gate)[0], [4, 9])

    def test_cross_remainder_group(self):
        config = ModelConfig(
            family="lv", layers=1, width=32, modes=10, context_dim=3,
            state_channels=2, partition="cross", cross_p=2, cross_q=2,
        )
        gate = manual_partition_gate(config)
        np.testing.assert_array_equal(gate, [0, 0, 1, 1, 0, 0, 1, 1, 0, 0])

    def test_low_only_all_low_degenerate(self):
        config = tiny_config(partition="low_only", low_fraction=1.0)
        np.testing.assert_array_equal(manual_partition_gate(config), np.ones(4))

    def test_low_high_complementary(self):
        lo = manual_partition_gate(tiny_config(partition="low_only"))
        hi = manual_partition_gate(tiny_config(partition="high_only"))
        np.testing.assert_array_equal(lo, [1, 1, 0, 0])
        np.testing.assert_array_equal(hi, [0, 0, 1, 1])

    def test_all_shared_zero_gate(self):
        np.testing.assert_array_equal(
            manual_partition_gate(tiny_config(partition="all_shared")), np.zeros(4)
        )


class TestModeIndices:
    def test_ascending_by_k2_and_within_nyquist(self):
        config = ModelConfig(
            family="ns", layers=1, width=8, modes=12, context_dim=3,
            state_channels=1, spectral_axis="spatial_2d", grid_side=32,
        )
        rows, cols = mode_indices(config)
        assert len(rows) == 12
        ky = np.where(rows <= 16, rows, rows - 32)
        k2 = ky**2 + cols**2
        assert (np.diff(k2) >= 0).all()
        assert k2[0] == 0  # retains the DC pair first
        assert np.all(np.abs(ky) <= 16) and np.all(cols <= 16)

    def test_deterministic(self):
        config = ModelConfig(
            family="ns", layers=1, width=8, modes=6, context_dim=3,
            state_channels=1, spectral_axis="spatial_2d", grid_side=16,
        )
        a = mode_indices(config)
        b = mode_indices(config)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
