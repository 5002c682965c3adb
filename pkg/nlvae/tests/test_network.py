"""
Tests for the non-local block, encoder, decoder, and latent sampling.
"""

import numpy as np
import pytest

from nlvae.core.exceptions import CheckpointError, ContractError, ShapeError
from nlvae.engine.tensor import Tensor, precision
from nlvae.models.config import ModelConfig
from nlvae.services.network import (
    LatentDistribution,
    NlvaeModel,
    NonLocalBlockParams,
    decode,
    encode,
    init_params,
    non_local_block,
    reparameterize,
    sample_prior,
)
from nlvae.services.objective import kl_loss, reconstruction_loss
from nlvae.tests.conftest import tiny_model_config


class TestNonLocalBlock:
    """Test cases for non_local_block."""

    def setup_method(self):
        self.rng = np.random.default_rng(0)
        self.config = tiny_model_config()

    @pytest.mark.parametrize("side,c_in,c_out", [(4, 3, 4), (8, 2, 6), (5, 4, 4)])
    def test_preserves_spatial_size(self, side, c_in, c_out):
        block = NonLocalBlockParams.create(self.rng, c_in, c_out, self.config)
        out = non_local_block(Tensor(self.rng.normal(size=(1, side, side, c_in))), block, "train")
        assert out.shape == (1, side, side, c_out)

    def test_concat_contract(self):
        block = NonLocalBlockParams.create(self.rng, 3, 8, self.config)
        assert block.fuse_kernel.shape[2] == block.first.kernel.shape[3] + block.mid_conv.kernel.shape[3]

    def test_zero_kernels_give_zero_output(self):
        block = NonLocalBlockParams.create(self.rng, 3, 4, self.config)
        for _, tensor in block.named_parameters("block"):
            if not tensor.name == "gamma":
                tensor.data[...] = 0.0
        out = non_local_block(Tensor(self.rng.normal(size=(2, 4, 4, 3))), block, "train")
        np.testing.assert_array_equal(out.data, 0.0)

    def test_channel_mismatch(self):
        block = NonLocalBlockParams.create(self.rng, 3, 4, self.config)
        with pytest.raises(ShapeError):
            non_local_block(Tensor(np.ones((1, 4, 4, 2))), block, "train")

    def test_conv_first_mid_order(self):
        config = tiny_model_config(mid_order="conv_first")
        block = NonLocalBlockParams.create(self.rng, 3, 4, config)
        assert block.mid_conv.kernel.shape == (3, 3, 4, 2)
        assert block.mid_pointwise.kernel.shape == (1, 1, 2, 4)
        assert non_local_block(Tensor(np.ones((1, 4, 4, 3))), block, "train").shape == (1, 4, 4, 4)


class TestEncoderDecoder:
    """Test cases for encode, decode, and the model facade."""

    def setup_method(self):
        self.config = tiny_model_config()
        self.model = NlvaeModel.create(self.config, seed=3)
        self.rng = np.random.default_rng(1)

    def test_encode_head_shapes(self):
        dist = self.model.encode(Tensor(self.rng.uniform(size=(2, 16, 16, 3))))
        assert dist.mu.shape == (2, 8)
        assert dist.log_var.shape == (2, 8)
        assert dist.J == 8

    def test_different_inputs_give_different_mu(self):
        a = self.model.encode(Tensor(self.rng.uniform(size=(1, 16, 16, 3))), "infer").mu.data
        b = self.model.encode(Tensor(self.rng.uniform(size=(1, 16, 16, 3))), "infer").mu.data
        assert not np.array_equal(a, b)

    def test_zero_heads_give_prior(self):
        model = NlvaeModel.create(self.config, seed=3, zero_heads=True)
        dist = model.encode(Tensor(np.zeros((1, 16, 16, 3))))
        np.testing.assert_array_equal(dist.mu.data, 0.0)
        np.testing.assert_array_equal(dist.log_var.data, 0.0)
        assert kl_loss(dist).item() == 0.0

    def test_encode_indivisible_input(self):
        with pytest.raises(ContractError):
            self.model.encode(Tensor(np.zeros((1, 18, 16, 3))))

    def test_encode_rejects_wrong_channels(self):
        with pytest.raises(ShapeError):
            self.model.encode(Tensor(np.zeros((1, 16, 16, 1))))

    def test_log_var_clamped(self):
        params = self.model.params
        params.logvar_head.bias.data[...] = 50.0
        dist = encode(Tensor(self.rng.uniform(size=(1, 16, 16, 3))), params)
        assert dist.log_var.data.max() <= 10.0
        assert np.all(dist.sigma() > 0)

    def test_decode_shape_and_range(self):
        out = self.model.decode(Tensor(self.rng.normal(scale=3.0, size=(2, 8))))
        assert out.shape == (2, 16, 16, 3)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_decode_accepts_vector(self):
        assert self.model.decode(sample_prior(8, self.rng)).shape == (1, 16, 16, 3)

    def test_decode_unreachable_target(self):
        with pytest.raises(ContractError):
            decode(Tensor(np.zeros((1, 8))), self.model.params, target_hw=(24, 24))

    def test_decode_latent_width_mismatch(self):
        with pytest.raises(ShapeError):
            decode(Tensor(np.zeros((1, 5))), self.model.params)

    def test_extra_upsample_stages_after_blocks(self):
        config = tiny_model_config(decoder_blocks=1, upsample_stages=3, canvas=16)
        model = NlvaeModel.create(config)
        assert model.decode(Tensor(np.zeros((1, 8)))).shape == (1, 16, 16, 3)

    def test_standard_blocks(self):
        model = NlvaeModel.create(tiny_model_config(block_type="standard"))
        recon, _ = model.forward(Tensor(self.rng.uniform(size=(1, 16, 16, 3))), self.rng)
        assert recon.shape == (1, 16, 16, 3)

    @pytest.mark.parametrize("block_type", ["depthwise_separable", "transposed"])
    def test_block_variants_train_end_to_end(self, block_type):
        model = NlvaeModel.create(tiny_model_config(block_type=block_type))
        x = Tensor(self.rng.uniform(size=(2, 16, 16, 3)))
        recon, dist = model.forward(x, self.rng)
        assert recon.shape == (2, 16, 16, 3)
        (reconstruction_loss(recon, x) + kl_loss(dist)).backward()
        for name, tensor in model.named_parameters():
            if name.endswith("kernel") or name.endswith("weight"):
                assert np.any(tensor.grad != 0), name

    def test_transposed_decoder_upsamples_inside_blocks(self):
        config = tiny_model_config(block_type="transposed", decoder_blocks=3, upsample_stages=2)
        model = NlvaeModel.create(config)
        assert model.decode(Tensor(np.zeros((1, 8)))).shape == (1, 16, 16, 3)
        sides = [layer.M_spatial for layer in model.layer_plan() if layer.name.startswith("decoder.")]
        strides = [layer.stride for layer in model.layer_plan() if layer.name.startswith("decoder.")]
        assert sides == [8, 16, 16]
        assert strides == [2, 2, 1]

    def test_reconstruct_is_deterministic(self):
        x = Tensor(self.rng.uniform(size=(1, 16, 16, 3)))
        self.model.forward(x, self.rng, "train")
        first = self.model.reconstruct(x).data
        second = self.model.reconstruct(x).data
        assert np.array_equal(first, second)

    def test_full_forward_backward_reaches_every_parameter(self):
        x = Tensor(self.rng.uniform(size=(2, 16, 16, 3)))
        recon, dist = self.model.forward(x, self.rng)
        (reconstruction_loss(recon, x) + kl_loss(dist)).backward()
        grads = [tensor.grad for tensor in self.model.parameters()]
        assert all(g is not None and np.all(np.isfinite(g)) for g in grads)
        assert any(np.any(g != 0) for g in grads)
        for name, tensor in self.model.named_parameters():
            if name.endswith("kernel") or name.endswith("weight"):
                assert np.any(tensor.grad != 0), name

    @pytest.mark.slow
    def test_default_configuration_forward_backward(self):
        model = NlvaeModel.create(ModelConfig(), seed=0)
        x = Tensor(self.rng.uniform(size=(1, 256, 256, 3)))
        recon, dist = model.forward(x, self.rng)
        assert recon.shape == (1, 256, 256, 3)
        (reconstruction_loss(recon, x) + kl_loss(dist)).backward()
        grads = [tensor.grad for tensor in model.parameters()]
        assert all(g is not None and np.all(np.isfinite(g)) for g in grads)
        assert any(np.any(g != 0) for g in grads)


class TestParameters:
    """Test cases for parameter enumeration and state loading."""

    def setup_method(self):
        self.config = tiny_model_config()

    def test_enumeration_is_stable(self):
        first = [name for name, _ in init_params(self.config, seed=0).named_parameters()]
        second = [name for name, _ in init_params(self.config, seed=9).named_parameters()]
        assert first == second
        assert len(set(first)) == len(first)
        assert first[0] == "encoder.0.first.kernel"
        assert first[-1] == "output_conv.bias"

    def test_same_seed_same_values(self):
        a = init_params(self.config, seed=4).state_arrays()
        b = init_params(self.config, seed=4).state_arrays()
        assert all(np.array_equal(a[name], b[name]) for name in a)

    def test_parameter_count_matches_enumeration(self):
        params = init_params(self.config)
        assert params.parameter_count() == sum(t.size for _, t in params.named_parameters())

    def test_initialization_scheme(self):
        params = init_params(tiny_model_config(base_width=16), seed=0)
        unit = params.encoder[1].first
        k, _, c_in, _ = unit.kernel.shape
        expected = np.sqrt(2.0 / (k * k * c_in * (1.0 + 0.2 ** 2)))
        assert unit.kernel.data.std() == pytest.approx(expected, rel=0.1)
        np.testing.assert_array_equal(unit.bias.data, 0.0)
        np.testing.assert_array_equal(unit.gamma.data, 1.0)

    def test_decoder_seed_is_glorot_scaled(self):
        weight = init_params(self.config, seed=0).decoder_seed.weight.data
        d_in, d_out = weight.shape
        assert weight.std() == pytest.approx(np.sqrt(2.0 / (d_in + d_out)), rel=0.1)

    def test_output_conv_is_three_by_three(self):
        kernel = init_params(self.config).output_conv.kernel
        assert kernel.shape[:2] == (3, 3)
        assert kernel.shape[3] == 3

    @pytest.mark.parametrize("block_type", ["depthwise_separable", "transposed"])
    def test_variant_names_are_unique(self, block_type):
        names = [name for name, _ in init_params(tiny_model_config(block_type=block_type)).named_parameters()]
        assert len(set(names)) == len(names)

    def test_precision_follows_context(self):
        with precision("f64"):
            params = init_params(self.config)
        assert all(t.dtype == np.float64 for t in params.parameters())

    def test_load_state_arrays_round_trip(self):
        source = init_params(self.config, seed=1)
        target = init_params(self.config, seed=2)
        target.load_state_arrays(source.state_arrays())
        loaded = target.state_arrays()
        assert all(np.array_equal(loaded[k], v) for k, v in source.state_arrays().items())

    def test_load_state_arrays_rejects_mismatch(self):
        params = init_params(self.config)
        state = params.state_arrays()
        state.pop("mu_head.bias")
        with pytest.raises(CheckpointError):
            params.load_state_arrays(state)
        other = init_params(tiny_model_config(latent_dim=4)).state_arrays()
        with pytest.raises(CheckpointError):
            params.load_state_arrays(other)

    def test_layer_plan_geometry(self):
        plan = NlvaeModel.create(self.config).layer_plan()
        sides = {layer.name: layer.M_spatial for layer in plan}
        assert sides["encoder.0.first"] == 16
        assert sides["encoder.1.first"] == 8
        assert sides["decoder.0.first"] == 8
        assert sides["decoder.1.first"] == 16
        assert sides["output_conv"] == 16
        assert [layer.kind for layer in plan if layer.name.endswith("head")] == ["dense", "dense"]


class TestLatentSampling:
    """Test cases for reparameterize and sample_prior."""

    def setup_method(self):
        self.rng = np.random.default_rng(5)

    def _dist(self, mu, log_var) -> LatentDistribution:
        return LatentDistribution(
            mu=Tensor(mu, requires_grad=True, dtype=np.float64),
            log_var=Tensor(log_var, requires_grad=True, dtype=np.float64),
        )

    def test_zero_noise_returns_mu(self):
        dist = self._dist([0.3, -1.2], [0.5, -0.5])
        z = reparameterize(dist, eps=np.zeros(2))
        np.testing.assert_array_equal(z.data, [0.3, -1.2])

    def test_unit_sigma(self):
        dist = self._dist([0.3, -1.2], [0.0, 0.0])
        z = reparameterize(dist, eps=np.ones(2))
        np.testing.assert_allclose(z.data, [1.3, -0.2])

    def test_needs_noise_source(self):
        with pytest.raises(ContractError):
            reparameterize(self._dist([0.0], [0.0]))

    def test_gradient_identity(self):
        dist = self._dist(self.rng.normal(size=4), self.rng.normal(size=4))
        z = reparameterize(dist, self.rng)
        z.sum().backward()
        np.testing.assert_allclose(dist.mu.grad, np.ones(4))
        np.testing.assert_allclose(dist.log_var.grad, (z.data - dist.mu.data) / 2.0, rtol=1e-12)

    def test_monte_carlo_mean(self):
        n = 100_000
        mu = np.array([0.5, -1.0, 2.0, 0.0])
        log_var = np.array([0.0, -1.0, 1.0, 0.5])
        dist = LatentDistribution(
            mu=Tensor(np.broadcast_to(mu, (n, 4)), dtype=np.float64),
            log_var=Tensor(np.broadcast_to(log_var, (n, 4)), dtype=np.float64),
        )
        z = reparameterize(dist, self.rng).data
        sigma = np.exp(0.5 * log_var)
        assert np.all(np.abs(z.mean(axis=0) - mu) < 4 * sigma / np.sqrt(n))

    def test_sample_prior_reproducible(self):
        a = sample_prior(16, np.random.default_rng(3)).data
        b = sample_prior(16, np.random.default_rng(3)).data
        assert np.array_equal(a, b)

    def test_sample_prior_moments(self):
        with precision("f64"):
            draws = sample_prior(100_000, self.rng).data
        assert 0.98 <= draws.var() <= 1.02
        assert abs(draws.mean()) <= 0.02

    def test_sample_prior_rejects_empty(self):
        with pytest.raises(ContractError):
            sample_prior(0, self.rng)
