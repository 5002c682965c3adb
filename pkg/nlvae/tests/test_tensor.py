"""
Tests for the tensor core: construction, backward bookkeeping, and op contracts.
"""

import numpy as np
import pytest

from nlvae.core.exceptions import ConfigurationError, ContractError, NumericError, ShapeError
from nlvae.engine.ops import (
    RunningStats,
    avg_pool2x,
    batch_norm,
    concat_channels,
    conv2d,
    conv2d_transpose,
    conv_output_size,
    dense,
    depthwise_conv2d,
    global_avg_pool,
    leaky_relu,
    pointwise_conv,
    upsample2x,
)
from nlvae.engine.tensor import ComputationGraph, Tensor, get_default_dtype, precision


class TestTensor:
    """Test cases for Tensor and ComputationGraph."""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def test_default_precision_is_f32(self):
        assert Tensor([1.0, 2.0]).dtype == np.float32

    def test_precision_context(self):
        with precision("f64"):
            assert get_default_dtype() == np.float64
            assert Tensor([1.0]).dtype == np.float64
        assert get_default_dtype() == np.float32

    def test_unknown_precision(self):
        with pytest.raises(ConfigurationError):
            with precision("f16"):
                pass

    def test_non_finite_values_rejected(self):
        with pytest.raises(NumericError):
            Tensor([1.0, np.nan])
        with pytest.raises(NumericError):
            Tensor([np.inf])

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ContractError):
            (x * 2.0).backward()

    def test_sum_gradient_is_ones(self):
        x = Tensor(self.rng.normal(size=(3, 4)), requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_mean_squared_error_gradient(self):
        with precision("f64"):
            xv, yv = self.rng.normal(size=(2, 5)), self.rng.normal(size=(2, 5))
            x = Tensor(xv, requires_grad=True)
            y = Tensor(yv)
            diff = x - y
            (diff * diff).mean().backward()
        np.testing.assert_allclose(x.grad, 2.0 * (xv - yv) / xv.size, rtol=1e-12)

    def test_repeated_backward_accumulates(self):
        x = Tensor(np.ones(3), requires_grad=True)
        x.sum().backward()
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.full(3, 2.0))
        x.zero_grad()
        assert x.grad is None

    def test_shared_operand_visited_once(self):
        with precision("f64"):
            x = Tensor([1.5, -2.0], requires_grad=True)
            loss = (x * x + x).sum()
            graph = loss.backward()
        np.testing.assert_allclose(x.grad, 2.0 * np.array([1.5, -2.0]) + 1.0)
        assert graph.nodes
        assert all(node.backward_calls == 1 for node in graph.nodes)

    def test_graph_is_topologically_ordered(self):
        x = Tensor(np.ones(2), requires_grad=True)
        y = (x * 3.0).exp()
        graph = ComputationGraph(y.sum())
        position = {id(t): i for i, t in enumerate(graph.order)}
        for operand, result in graph.edges:
            if operand.requires_grad:
                assert position[id(operand)] < position[id(result)]
        assert graph.leaves() == [x]

    def test_constants_receive_no_gradient(self):
        x = Tensor(np.ones(2), requires_grad=True)
        c = Tensor(np.ones(2))
        (x * c).sum().backward()
        assert c.grad is None

    def test_determinism(self):
        data = np.random.default_rng(3).normal(size=(1, 6, 6, 2))
        kernel = np.random.default_rng(4).normal(size=(3, 3, 2, 3))
        first = conv2d(Tensor(data), Tensor(kernel)).data
        second = conv2d(Tensor(data), Tensor(kernel)).data
        assert np.array_equal(first, second)


class TestConvolution:
    """Test cases for conv2d and pointwise_conv."""

    def setup_method(self):
        self.rng = np.random.default_rng(1)

    def test_pointwise_scaling(self):
        out = conv2d(Tensor(np.ones((1, 4, 4, 1))), Tensor(np.full((1, 1, 1, 1), 2.0)))
        np.testing.assert_array_equal(out.data, np.full((1, 4, 4, 1), 2.0))

    @pytest.mark.parametrize("size,channels_out", [(5, 3), (8, 1), (7, 4)])
    def test_same_padding_shape(self, size, channels_out):
        x = Tensor(self.rng.normal(size=(1, size, size, 2)))
        kernel = Tensor(self.rng.normal(size=(3, 3, 2, channels_out)))
        assert conv2d(x, kernel, padding="same").shape == (1, size, size, channels_out)

    @pytest.mark.parametrize("size,k,stride,padding,expected", [
        (8, 3, 1, "same", 8),
        (8, 3, 2, "same", 4),
        (7, 3, 2, "same", 4),
        (8, 3, 1, "valid", 6),
        (9, 3, 2, "valid", 4),
        (5, 5, 1, "valid", 1),
    ])
    def test_output_size_arithmetic(self, size, k, stride, padding, expected):
        x = Tensor(self.rng.normal(size=(2, size, size, 1)))
        kernel = Tensor(self.rng.normal(size=(k, k, 1, 2)))
        out = conv2d(x, kernel, stride=stride, padding=padding)
        assert out.shape == (2, expected, expected, 2)
        assert conv_output_size(size, k, stride, padding)[0] == expected

    def test_matches_direct_loop(self):
        with precision("f64"):
            xv = self.rng.normal(size=(1, 4, 4, 2))
            wv = self.rng.normal(size=(3, 3, 2, 2))
            out = conv2d(Tensor(xv), Tensor(wv)).data
        padded = np.pad(xv, ((0, 0), (1, 1), (1, 1), (0, 0)))
        expected = np.zeros((1, 4, 4, 2))
        for i in range(4):
            for j in range(4):
                for co in range(2):
                    expected[0, i, j, co] = np.sum(padded[0, i:i + 3, j:j + 3, :] * wv[:, :, :, co])
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(Tensor(np.ones((1, 4, 4, 2))), Tensor(np.ones((3, 3, 3, 1))))

    def test_bad_stride(self):
        with pytest.raises(ContractError):
            conv2d(Tensor(np.ones((1, 4, 4, 1))), Tensor(np.ones((3, 3, 1, 1))), stride=0)

    def test_pointwise_projection_shape(self):
        out = pointwise_conv(Tensor(self.rng.normal(size=(1, 8, 8, 4))), Tensor(self.rng.normal(size=(1, 1, 4, 2))))
        assert out.shape == (1, 8, 8, 2)

    def test_pointwise_identity(self):
        x = self.rng.normal(size=(1, 5, 5, 3)).astype(np.float32)
        kernel = np.eye(3, dtype=np.float32).reshape(1, 1, 3, 3)
        np.testing.assert_array_equal(pointwise_conv(Tensor(x), Tensor(kernel)).data, x)

    def test_pointwise_weight_count(self):
        kernel = Tensor(np.zeros((1, 1, 64, 32)))
        assert kernel.size == 2048

    def test_pointwise_rejects_wide_kernel(self):
        with pytest.raises(ContractError):
            pointwise_conv(Tensor(np.ones((1, 4, 4, 1))), Tensor(np.ones((3, 3, 1, 1))))

    def test_depthwise_keeps_channels_apart(self):
        x = np.zeros((1, 5, 5, 2))
        x[0, :, :, 0] = self.rng.normal(size=(5, 5))
        out = depthwise_conv2d(Tensor(x), Tensor(self.rng.normal(size=(3, 3, 2))))
        assert out.shape == (1, 5, 5, 2)
        assert np.all(out.data[..., 1] == 0.0)

    def test_depthwise_matches_single_channel_conv(self):
        x = self.rng.normal(size=(2, 6, 6, 3))
        kernel = self.rng.normal(size=(3, 3, 3))
        out = depthwise_conv2d(Tensor(x), Tensor(kernel)).data
        for c in range(3):
            single = conv2d(Tensor(x[..., c:c + 1]), Tensor(kernel[:, :, c].reshape(3, 3, 1, 1))).data
            np.testing.assert_allclose(out[..., c:c + 1], single, rtol=1e-5, atol=1e-5)

    def test_depthwise_rejects_channel_mismatch(self):
        with pytest.raises(ShapeError):
            depthwise_conv2d(Tensor(np.ones((1, 4, 4, 2))), Tensor(np.ones((3, 3, 3))))

    def test_transpose_stride_one_is_flipped_conv(self):
        x = self.rng.normal(size=(1, 5, 5, 2))
        kernel = self.rng.normal(size=(3, 3, 2, 4))
        out = conv2d_transpose(Tensor(x), Tensor(kernel)).data
        expected = conv2d(Tensor(x), Tensor(kernel[::-1, ::-1].copy())).data
        np.testing.assert_allclose(out, expected, rtol=1e-5, atol=1e-5)

    def test_transpose_stride_two_doubles_extent(self):
        x, kernel = Tensor(self.rng.normal(size=(2, 4, 3, 2))), Tensor(self.rng.normal(size=(3, 3, 2, 5)))
        out = conv2d_transpose(x, kernel, stride=2)
        assert out.shape == (2, 8, 6, 5)

    def test_transpose_single_pixel_scatters_kernel(self):
        kernel = self.rng.normal(size=(3, 3, 1, 1))
        out = conv2d_transpose(Tensor(np.ones((1, 1, 1, 1))), Tensor(kernel), stride=2)
        np.testing.assert_allclose(out.data[0, :, :, 0], kernel[:2, :2, 0, 0], rtol=1e-6)

    def test_transpose_rejects_stride_above_kernel(self):
        with pytest.raises(ContractError):
            conv2d_transpose(Tensor(np.ones((1, 2, 2, 1))), Tensor(np.ones((1, 1, 1, 1))), stride=2)


class TestBatchNorm:
    """Test cases for batch_norm."""

    def setup_method(self):
        self.rng = np.random.default_rng(2)

    def test_constant_channel_outputs_shift(self):
        with precision("f64"):
            x = np.zeros((2, 3, 3, 2))
            x[..., 0] = 4.0
            x[..., 1] = self.rng.normal(size=(2, 3, 3))
            stats = RunningStats.fresh(2, np.float64)
            out = batch_norm(Tensor(x), Tensor([1.7, 1.0]), Tensor([0.25, 0.0]), "train", stats)
        np.testing.assert_allclose(out.data[..., 0], 0.25, atol=1e-12)

    def test_train_moments(self):
        with precision("f64"):
            x = 3.0 * self.rng.normal(size=(4, 6, 6, 3)) + 1.0
            gamma = np.array([0.5, 1.0, 1.5])
            shift = np.array([-0.3, 0.0, 0.7])
            stats = RunningStats.fresh(3, np.float64)
            out = batch_norm(Tensor(x), Tensor(gamma), Tensor(shift), "train", stats).data
        np.testing.assert_allclose(out.mean(axis=(0, 1, 2)), shift, atol=1e-10)
        np.testing.assert_allclose(out.var(axis=(0, 1, 2)), gamma ** 2, atol=1e-5)

    def test_train_updates_running_stats(self):
        x = self.rng.normal(loc=2.0, size=(2, 4, 4, 1))
        stats = RunningStats.fresh(1, np.float32)
        batch_norm(Tensor(x), Tensor([1.0]), Tensor([0.0]), "train", stats)
        assert stats.mean[0] == pytest.approx(0.1 * x.mean(), rel=1e-4)
        assert stats.var[0] != 1.0

    def test_infer_uses_running_stats(self):
        with precision("f64"):
            stats = RunningStats(np.array([1.0]), np.array([4.0]))
            x = np.full((1, 2, 2, 1), 3.0)
            out = batch_norm(Tensor(x), Tensor([1.0]), Tensor([0.0]), "infer", stats, eps=1e-12)
        np.testing.assert_allclose(out.data, 1.0, rtol=1e-9)
        np.testing.assert_array_equal(stats.mean, [1.0])

    def test_parameter_shape_mismatch(self):
        with pytest.raises(ShapeError):
            batch_norm(Tensor(np.ones((1, 2, 2, 2))), Tensor([1.0]), Tensor([0.0]), "train", RunningStats.fresh(1, np.float32))

    def test_unknown_mode(self):
        with pytest.raises(ContractError):
            batch_norm(Tensor(np.ones((1, 2, 2, 1))), Tensor([1.0]), Tensor([0.0]), "eval", RunningStats.fresh(1, np.float32))


class TestElementwiseAndPooling:
    """Test cases for leaky_relu, pooling, upsampling, concat, and dense."""

    def setup_method(self):
        self.rng = np.random.default_rng(3)

    def test_leaky_relu_definition(self):
        out = leaky_relu(Tensor([-1.0, 0.0, 2.0]), 0.2)
        np.testing.assert_allclose(out.data, [-0.2, 0.0, 2.0], rtol=1e-6)

    def test_leaky_relu_positive_unchanged(self):
        x = np.abs(self.rng.normal(size=10)).astype(np.float32) + 0.1
        np.testing.assert_array_equal(leaky_relu(Tensor(x)).data, x)

    def test_leaky_relu_subgradient_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        leaky_relu(x, 0.2).sum().backward()
        assert x.grad[0] == pytest.approx(0.2)

    def test_leaky_relu_slope_range(self):
        with pytest.raises(ContractError):
            leaky_relu(Tensor([1.0]), 1.5)

    def test_global_avg_pool_constant(self):
        out = global_avg_pool(Tensor(np.full((2, 3, 3, 4), 0.7)))
        np.testing.assert_allclose(out.data, np.full((2, 4), 0.7), rtol=1e-6)

    def test_global_avg_pool_mean(self):
        out = global_avg_pool(Tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 2, 2, 1)))
        np.testing.assert_allclose(out.data, [[2.5]])

    def test_global_avg_pool_gradient_uniform(self):
        x = Tensor(self.rng.normal(size=(1, 3, 5, 2)), requires_grad=True)
        global_avg_pool(x).sum().backward()
        np.testing.assert_allclose(x.grad, np.full((1, 3, 5, 2), 1.0 / 15.0), rtol=1e-6)

    def test_avg_pool2x(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 4, 4, 1)
        out = avg_pool2x(Tensor(x)).data
        np.testing.assert_allclose(out[0, :, :, 0], [[2.5, 4.5], [10.5, 12.5]])
        with pytest.raises(ContractError):
            avg_pool2x(Tensor(np.ones((1, 3, 4, 1))))

    def test_upsample_nearest(self):
        out = upsample2x(Tensor(np.full((1, 1, 1, 1), 5.0)), "nearest")
        np.testing.assert_array_equal(out.data, np.full((1, 2, 2, 1), 5.0))

    def test_upsample_bilinear_preserves_constant(self):
        with precision("f64"):
            out = upsample2x(Tensor(np.full((1, 3, 5, 2), 0.4)), "bilinear")
        assert out.shape == (1, 6, 10, 2)
        np.testing.assert_allclose(out.data, 0.4, rtol=1e-12)

    def test_upsample_nearest_sum(self):
        with precision("f64"):
            x = self.rng.normal(size=(2, 3, 4, 2))
            out = upsample2x(Tensor(x), "nearest")
        assert out.data.sum() == pytest.approx(4.0 * x.sum(), rel=1e-12)

    def test_concat_shape(self):
        out = concat_channels(Tensor(np.ones((1, 4, 4, 3))), Tensor(np.zeros((1, 4, 4, 5))))
        assert out.shape == (1, 4, 4, 8)

    def test_concat_empty_is_identity(self):
        x = self.rng.normal(size=(1, 4, 4, 3)).astype(np.float32)
        out = concat_channels(Tensor(x), Tensor(np.zeros((1, 4, 4, 0))))
        np.testing.assert_array_equal(out.data, x)

    def test_concat_backward_splits(self):
        a = Tensor(np.ones((1, 2, 2, 3)), requires_grad=True)
        b = Tensor(np.ones((1, 2, 2, 2)), requires_grad=True)
        concat_channels(a, b).sum().backward()
        np.testing.assert_array_equal(a.grad, np.ones((1, 2, 2, 3)))
        np.testing.assert_array_equal(b.grad, np.ones((1, 2, 2, 2)))

    def test_concat_spatial_mismatch(self):
        with pytest.raises(ShapeError):
            concat_channels(Tensor(np.ones((1, 4, 4, 1))), Tensor(np.ones((1, 3, 4, 1))))

    def test_dense_identity(self):
        x = self.rng.normal(size=(3, 4)).astype(np.float32)
        out = dense(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(out.data, x)

    def test_dense_arithmetic(self):
        out = dense(Tensor([[1.0, 2.0]]), Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([1.0, 1.0]))
        np.testing.assert_allclose(out.data, [[2.0, 3.0]])

    def test_dense_mismatch(self):
        with pytest.raises(ShapeError):
            dense(Tensor(np.ones((1, 3))), Tensor(np.ones((2, 2))), Tensor(np.zeros(2)))
