from types import SimpleNamespace

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from src.attention.exceptions import GroupDivisibilityException, NonFiniteInputException
from src.attention.modules import SpatialChannelAttention, SqueezeExcite, build_attention
from src.attention.schemas import Arrangement, AttentionConfig, AttentionKind, Pooling, SCAConfig
from src.attention.service import (
    channel_attention_forward,
    init_params,
    resolve_groups,
    sca_forward,
    spatial_attention_forward,
)
from tests.helpers import channel_oracle, spatial_oracle


def random_params(channels: int, cfg: SCAConfig, rng: np.random.Generator) -> SimpleNamespace:
    def vec(n: int, center: float) -> torch.Tensor:
        return torch.tensor(center + 0.5 * rng.standard_normal(n), dtype=torch.float64)

    return SimpleNamespace(
        spatial_scale=vec(cfg.g, 1.0),
        spatial_shift=vec(cfg.g, 0.0),
        gn_avg_weight=vec(channels, 1.0),
        gn_avg_bias=vec(channels, 0.0),
        gn_max_weight=vec(channels, 1.0),
        gn_max_bias=vec(channels, 0.0),
    )


def as_numpy(params: SimpleNamespace) -> dict[str, np.ndarray]:
    return {k: v.detach().numpy() for k, v in vars(params).items()}


class TestInitParams:
    def test_identity_initialization(self):
        params = init_params(64, SCAConfig(g=64))
        assert params.spatial_scale.shape == (64,)
        assert torch.all(params.spatial_scale == 1)
        assert torch.all(params.spatial_shift == 0)

    def test_gn_affine_sized_to_channels(self):
        params = init_params(4, SCAConfig(g=4, G=4))
        for name in ("gn_avg_weight", "gn_avg_bias", "gn_max_weight", "gn_max_bias"):
            assert getattr(params, name).shape == (4,)

    def test_non_dividing_groups_rejected(self):
        with pytest.raises(GroupDivisibilityException):
            init_params(6, SCAConfig(g=4, G=1))

    def test_default_block_allocates_two_g_plus_four_c(self):
        params = init_params(128, SCAConfig())
        assert sum(p.numel() for p in params.parameters()) == 2 * 64 + 4 * 128

    @pytest.mark.parametrize(
        ("arrangement", "pooling", "expected"),
        [
            (Arrangement.SPATIAL_ONLY, Pooling.BOTH, 2 * 4),
            (Arrangement.CHANNEL_ONLY, Pooling.BOTH, 4 * 16),
            (Arrangement.SPATIAL_THEN_CHANNEL, Pooling.AVG, 2 * 4 + 2 * 16),
            (Arrangement.PARALLEL, Pooling.MAX, 2 * 4 + 2 * 16),
        ],
    )
    def test_absent_branches_allocate_nothing(self, arrangement, pooling, expected):
        cfg = SCAConfig(g=4, G=4, arrangement=arrangement, channel_pooling=pooling)
        assert sum(p.numel() for p in init_params(16, cfg).parameters()) == expected

    def test_resolve_groups_clamps_to_gcd(self):
        cfg = resolve_groups(16, SCAConfig(g=64, G=4))
        assert (cfg.g, cfg.G) == (16, 4)
        cfg = resolve_groups(48, SCAConfig(g=64, G=8))
        assert (cfg.g, cfg.G) == (16, 8)

    def test_resolve_groups_strict(self):
        with pytest.raises(GroupDivisibilityException):
            resolve_groups(16, SCAConfig(g=64), clamp=False)


class TestSpatialAttention:
    def test_constant_positions_give_half(self):
        x = torch.arange(1.0, 9.0).view(1, 8, 1, 1).expand(2, 8, 3, 3).contiguous()
        cfg = SCAConfig(g=2, G=2)
        a_s, x_s = spatial_attention_forward(x, init_params(8, cfg), cfg)
        torch.testing.assert_close(a_s, torch.full((2, 2, 3, 3), 0.5))
        torch.testing.assert_close(x_s, 0.5 * x)

    def test_enumerated_single_group_matches_oracle(self):
        x = torch.arange(1.0, 9.0, dtype=torch.float64).view(1, 2, 2, 2)
        cfg = SCAConfig(g=1, G=1)
        params = init_params(2, cfg).double()
        a_s, _ = spatial_attention_forward(x, params, cfg)
        expected = spatial_oracle(x.numpy(), 1, cfg.eps_spatial, np.ones(1), np.zeros(1))
        np.testing.assert_allclose(a_s.detach().numpy(), expected, atol=1e-6)

    @pytest.mark.parametrize("seed", range(100))
    def test_random_tensors_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        g = int(rng.choice([1, 2, 4]))
        c = g * int(rng.integers(1, 3))
        h, w = (int(v) for v in rng.integers(1, 5, size=2))
        x = torch.tensor(rng.standard_normal((2, c, h, w)))
        cfg = SCAConfig(g=g, G=1)
        params = random_params(c, cfg, rng)
        a_s, x_s = spatial_attention_forward(x, params, cfg)
        p = as_numpy(params)
        expected = spatial_oracle(x.numpy(), g, cfg.eps_spatial, p["spatial_scale"], p["spatial_shift"])
        np.testing.assert_allclose(a_s.numpy(), expected, atol=1e-6)
        broadcast = np.repeat(expected, c // g, axis=1)
        np.testing.assert_allclose(x_s.numpy(), x.numpy() * broadcast, atol=1e-6)

    def test_non_finite_input_rejected(self):
        x = torch.ones(1, 4, 2, 2)
        x[0, 0, 0, 0] = float("nan")
        cfg = SCAConfig(g=2, G=2)
        with pytest.raises(NonFiniteInputException):
            spatial_attention_forward(x, init_params(4, cfg), cfg)

    def test_group_mismatch_rejected(self):
        cfg = SCAConfig(g=2, G=2)
        params = init_params(4, cfg)
        with pytest.raises(GroupDivisibilityException):
            spatial_attention_forward(torch.ones(1, 3, 2, 2), params, SCAConfig(g=2, G=1))

    def test_normalized_similarities_are_standardized(self):
        torch.manual_seed(0)
        x = torch.randn(1, 8, 6, 6, dtype=torch.float64)
        cfg = SCAConfig(g=2, G=2)
        a_s, _ = spatial_attention_forward(x, init_params(8, cfg).double(), cfg)
        normalized = torch.logit(a_s).flatten(2)
        assert normalized.mean(dim=-1).abs().max() < 1e-5
        assert (normalized.std(dim=-1, correction=0) - 1).abs().max() < 1e-3

    @pytest.mark.parametrize("dtype", [torch.float32, torch.float64])
    def test_single_spike_stays_inside_open_interval(self, dtype):
        x = torch.zeros(1, 4, 32, 32, dtype=dtype)
        x[0, :, 5, 7] = 1.0
        cfg = SCAConfig(g=2, G=2)
        params = init_params(4, cfg).to(dtype)
        with torch.no_grad():
            a_s, _ = spatial_attention_forward(x, params, cfg)
        assert a_s.max() < 1
        assert a_s.min() > 0
        assert a_s[0, :, 5, 7].min() > 0.99


class TestChannelAttention:
    def test_identical_channels_within_groups_give_half(self):
        x = torch.tensor([1.0, 1.0, 3.0, 3.0]).view(1, 4, 1, 1).expand(1, 4, 2, 2).contiguous()
        cfg = SCAConfig(g=1, G=2)
        a_c, x_out = channel_attention_forward(x, init_params(4, cfg), cfg)
        torch.testing.assert_close(a_c, torch.full((1, 4, 1, 1), 0.5))
        torch.testing.assert_close(x_out, 0.5 * x)

    def test_enumerated_matches_oracle(self):
        x = torch.arange(1.0, 17.0, dtype=torch.float64).view(1, 4, 2, 2)
        cfg = SCAConfig(g=1, G=2)
        a_c, _ = channel_attention_forward(x, init_params(4, cfg).double(), cfg)
        ones, zeros = np.ones(4), np.zeros(4)
        expected = channel_oracle(x.numpy(), 2, cfg.eps_gn, (ones, zeros), (ones, zeros))
        np.testing.assert_allclose(a_c.detach().view(1, 4).numpy(), expected, atol=1e-6)

    def test_zero_variance_group_yields_its_shift(self):
        x = torch.tensor([2.0, 2.0, 5.0, 5.0]).view(1, 4, 1, 1).expand(3, 4, 3, 3).contiguous()
        cfg = SCAConfig(g=1, G=2, channel_pooling=Pooling.AVG)
        params = init_params(4, cfg)
        with torch.no_grad():
            params.gn_avg_weight.copy_(torch.tensor([1.5, -0.5, 2.0, 0.7]))
            params.gn_avg_bias.copy_(torch.tensor([0.3, -1.0, 0.0, 2.0]))
        a_c, _ = channel_attention_forward(x, params, cfg)
        expected = torch.sigmoid(torch.tensor([0.3, -1.0, 0.0, 2.0])).view(1, 4, 1, 1).expand(3, 4, 1, 1)
        torch.testing.assert_close(a_c, expected)

    def test_group_norm_standardizes_each_group(self):
        torch.manual_seed(0)
        x = torch.randn(5, 16, 4, 4, dtype=torch.float64) * 10
        cfg = SCAConfig(g=1, G=4, channel_pooling=Pooling.AVG)
        with torch.no_grad():
            a_c, _ = channel_attention_forward(x, init_params(16, cfg).double(), cfg)
        per_group = torch.logit(a_c).view(5, 4, 4)
        assert per_group.mean(dim=-1).abs().max() < 1e-9
        assert (per_group.var(dim=-1, correction=0) - 1).abs().max() < 1e-3

    def test_stays_below_one_for_wide_groups(self):
        x = torch.zeros(1, 256, 2, 2)
        x[0, 0] = 1e4
        cfg = SCAConfig(g=1, G=1)
        params = init_params(256, cfg)
        with torch.no_grad():
            params.gn_avg_weight.fill_(4.0)
            params.gn_max_weight.fill_(4.0)
        a_c, _ = channel_attention_forward(x, params, cfg)
        assert torch.all((a_c > 0) & (a_c < 1))

    @pytest.mark.parametrize("seed", range(100))
    def test_random_tensors_match_oracle(self, seed):
        rng = np.random.default_rng(1000 + seed)
        groups = int(rng.choice([1, 2, 4]))
        c = groups * int(rng.integers(1, 3))
        h, w = (int(v) for v in rng.integers(1, 5, size=2))
        x = torch.tensor(rng.standard_normal((3, c, h, w)))
        cfg = SCAConfig(g=1, G=groups)
        params = random_params(c, cfg, rng)
        a_c, x_out = channel_attention_forward(x, params, cfg)
        p = as_numpy(params)
        expected = channel_oracle(
            x.numpy(),
            groups,
            cfg.eps_gn,
            (p["gn_avg_weight"], p["gn_avg_bias"]),
            (p["gn_max_weight"], p["gn_max_bias"]),
        )
        np.testing.assert_allclose(a_c.view(3, c).numpy(), expected, atol=1e-6)
        np.testing.assert_allclose(x_out.numpy(), x.numpy() * expected[:, :, None, None], atol=1e-6)


class TestComposition:
    def test_spatial_only_has_unit_channel_map(self):
        torch.manual_seed(0)
        x = torch.randn(2, 4, 3, 3)
        cfg = SCAConfig(g=2, G=2, arrangement=Arrangement.SPATIAL_ONLY)
        params = init_params(4, cfg)
        x_out, a_c = sca_forward(x, params, cfg)
        _, x_s = spatial_attention_forward(x, params, cfg)
        torch.testing.assert_close(a_c, torch.ones(2, 4, 1, 1))
        torch.testing.assert_close(x_out, x_s)

    def test_constant_input_is_scaled_by_a_quarter(self):
        x = torch.full((2, 8, 4, 4), 3.0)
        cfg = SCAConfig(g=2, G=2)
        x_out, a_c = sca_forward(x, init_params(8, cfg), cfg)
        torch.testing.assert_close(x_out, 0.25 * x)
        torch.testing.assert_close(a_c, torch.full((2, 8, 1, 1), 0.5))

    def test_enumerated_composition_matches_oracles(self):
        x = torch.arange(1.0, 17.0, dtype=torch.float64).view(1, 4, 2, 2)
        cfg = SCAConfig(g=2, G=2)
        x_out, _ = sca_forward(x, init_params(4, cfg).double(), cfg)

        a_s = spatial_oracle(x.numpy(), 2, cfg.eps_spatial, np.ones(2), np.zeros(2))
        x_s = x.numpy() * np.repeat(a_s, 2, axis=1)
        ones, zeros = np.ones(4), np.zeros(4)
        a_c = channel_oracle(x_s, 2, cfg.eps_gn, (ones, zeros), (ones, zeros))
        np.testing.assert_allclose(x_out.detach().numpy(), x_s * a_c[:, :, None, None], atol=1e-6)

    def test_parallel_applies_both_maps_computed_from_input(self):
        torch.manual_seed(0)
        x = torch.randn(1, 4, 3, 3)
        cfg = SCAConfig(g=2, G=2, arrangement=Arrangement.PARALLEL)
        params = init_params(4, cfg)
        x_out, a_c = sca_forward(x, params, cfg)
        _, x_s = spatial_attention_forward(x, params, cfg)
        expected_a_c, _ = channel_attention_forward(x, params, cfg)
        torch.testing.assert_close(a_c, expected_a_c)
        torch.testing.assert_close(x_out, x_s * expected_a_c)

    @settings(max_examples=50, deadline=None)
    @given(
        arrangement=st.sampled_from(list(Arrangement)),
        pooling=st.sampled_from(list(Pooling)),
        batch=st.integers(1, 3),
        groups=st.sampled_from([1, 2, 4]),
        height=st.sampled_from([1, 3, 5, 32, 40]),
        width=st.sampled_from([1, 4, 32, 33]),
        spike=st.booleans(),
        seed=st.integers(0, 2**16),
    )
    def test_range_and_shape(self, arrangement, pooling, batch, groups, height, width, spike, seed):
        generator = torch.Generator().manual_seed(seed)
        x = torch.randn(batch, 8, height, width, generator=generator)
        if spike:
            x = x * 1e-3
            x[:, :, height // 2, width // 2] = 1e3
        cfg = SCAConfig(
            g=groups, G=groups, arrangement=arrangement, spatial_pooling=pooling, channel_pooling=pooling
        )
        params = init_params(8, cfg)
        x_out, a_c = sca_forward(x, params, cfg)
        assert x_out.shape == x.shape
        assert a_c.shape == (batch, 8, 1, 1)
        assert torch.all((a_c > 0) & (a_c <= 1))
        if cfg.has_channel:
            assert torch.all(a_c < 1)
        if cfg.has_spatial:
            a_s, _ = spatial_attention_forward(x, params, cfg)
            assert a_s.shape == (batch, groups, height, width)
            assert torch.all((a_s > 0) & (a_s < 1))

    @pytest.mark.parametrize("trial", range(20))
    def test_gradients_match_finite_differences(self, trial):
        rng = np.random.default_rng(trial)
        cfg = SCAConfig(g=2, G=2)
        x = torch.tensor(rng.standard_normal((1, 4, 3, 3)), requires_grad=True)
        params = random_params(4, cfg, rng)
        names = list(vars(params))
        tensors = [getattr(params, name).requires_grad_() for name in names]

        def forward(x, *values):
            return sca_forward(x, SimpleNamespace(**dict(zip(names, values, strict=True))), cfg)[0]

        assert torch.autograd.gradcheck(forward, (x, *tensors), eps=1e-4, atol=1e-6, rtol=1e-3)


class TestModules:
    def test_sca_module_clamps_narrow_layers(self):
        module = SpatialChannelAttention(16, SCAConfig(g=64, G=4))
        assert module.cfg.g == 16
        assert module(torch.randn(2, 16, 4, 4)).shape == (2, 16, 4, 4)

    def test_gate_probe_sees_channel_map(self):
        module = SpatialChannelAttention(8, SCAConfig(g=2, G=2))
        seen = []
        module.gate_probe.register_forward_hook(lambda _m, _i, out: seen.append(out))
        module(torch.randn(3, 8, 4, 4))
        assert seen[0].shape == (3, 8, 1, 1)

    def test_squeeze_excite_gate_shape(self):
        module = SqueezeExcite(32, reduction=16)
        seen = []
        module.gate_probe.register_forward_hook(lambda _m, _i, out: seen.append(out))
        out = module(torch.randn(2, 32, 4, 4))
        assert out.shape == (2, 32, 4, 4)
        assert seen[0].shape == (2, 32, 1, 1)
        assert module.reduce[0].out_channels == 2

    def test_build_attention_none_is_identity(self):
        module = build_attention(8, AttentionConfig(kind=AttentionKind.NONE))
        x = torch.randn(1, 8, 2, 2)
        assert torch.equal(module(x), x)
