"""Forward/backward correctness for the feedforward classifier."""

import numpy as np
import pytest

from kdfm.errors import ConfigError, ShapeError
from kdfm.losses import LossSpec
from kdfm.network import (
    backward,
    flatten_params,
    forward,
    init_network,
    softmax,
    unflatten_params,
)

from oracles import central_differences, loss_and_grad_through_net, max_rel_error


class TestInit:
    def test_param_count(self):
        net = init_network([2, 4, 3], seed=0)
        assert net.num_params == (2 * 4 + 4) + (4 * 3 + 3) == 27

    def test_deterministic(self):
        a = init_network([3, 8, 2], seed=123)
        b = init_network([3, 8, 2], seed=123)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_he_uniform_std(self):
        # uniform(-sqrt(6/f), sqrt(6/f)) has std sqrt(2/f)
        net = init_network([10, 128, 64, 5], seed=0)
        std = net.weights[0].std()
        expected = np.sqrt(2.0 / 10.0)
        assert abs(std - expected) / expected < 0.2

    def test_biases_zero(self):
        net = init_network([4, 6, 3], seed=7)
        for b in net.biases:
            assert np.all(b == 0.0)

    def test_bad_arch(self):
        with pytest.raises(ConfigError):
            init_network([5], seed=0)
        with pytest.raises(ConfigError):
            init_network([5, 0, 2], seed=0)


class TestForward:
    def test_zero_weights_uniform(self):
        net = init_network([2, 4, 3], seed=0)
        for w in net.weights:
            w[:] = 0.0
        _, probs, _ = forward(net, np.array([[5.0, -2.0], [0.1, 0.3]]))
        np.testing.assert_allclose(probs, 1.0 / 3.0, atol=1e-15)

    def test_rows_sum_to_one(self):
        net = init_network([6, 16, 4], seed=3)
        rng = np.random.default_rng(0)
        _, probs, _ = forward(net, rng.normal(size=(32, 6)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(probs > 0.0) and np.all(probs < 1.0)

    def test_hand_computed_logits(self):
        net = init_network([2, 2, 2], seed=0)
        net.weights[0][:] = np.array([[1.0, -1.0], [0.5, 2.0]])
        net.biases[0][:] = np.array([0.1, -0.2])
        net.weights[1][:] = np.array([[1.0, 0.0], [-1.0, 1.0]])
        net.biases[1][:] = np.array([0.0, 0.5])
        x = np.array([[1.0, 2.0]])
        logits, _, trace = forward(net, x)
        h0 = max(1.0 * 1.0 + 2.0 * 0.5 + 0.1, 0.0)
        h1 = max(1.0 * -1.0 + 2.0 * 2.0 - 0.2, 0.0)
        expected = [h0 * 1.0 + h1 * -1.0 + 0.0, h0 * 0.0 + h1 * 1.0 + 0.5]
        np.testing.assert_allclose(logits[0], expected, atol=1e-12)
        np.testing.assert_allclose(trace.embedding[0], [h0, h1], atol=1e-12)

    def test_embedding_dim_matches_last_layer(self):
        net = init_network([5, 12, 7, 3], seed=1)
        _, _, trace = forward(net, np.zeros((4, 5)))
        assert trace.embedding.shape == (4, 7)

    def test_softmax_stable_at_huge_logits(self):
        z = np.array([[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4]])
        p = softmax(z)
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_dimension_mismatch(self):
        net = init_network([3, 4, 2], seed=0)
        with pytest.raises(ShapeError):
            forward(net, np.zeros((2, 5)))


class TestBackward:
    def test_zero_grad_logits(self):
        net = init_network([4, 8, 3], seed=2)
        _, _, trace = forward(net, np.random.default_rng(0).normal(size=(6, 4)))
        grad = backward(net, trace, np.zeros((6, 3)))
        assert np.all(grad == 0.0)

    def test_linear_in_grad_logits(self):
        net = init_network([4, 8, 3], seed=2)
        rng = np.random.default_rng(1)
        _, _, trace = forward(net, rng.normal(size=(6, 4)))
        g = rng.normal(size=(6, 3))
        np.testing.assert_array_equal(backward(net, trace, 2.0 * g),
                                      2.0 * backward(net, trace, g))

    def test_stale_trace_rejected(self):
        net = init_network([4, 8, 3], seed=2)
        other = init_network([4, 6, 3], seed=2)
        _, _, trace = forward(other, np.zeros((2, 4)))
        with pytest.raises(ShapeError):
            backward(net, trace, np.zeros((2, 3)))

    def test_finite_difference_ce(self):
        net = init_network([10, 16, 3], seed=0)
        params = flatten_params(net)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, 10))
        targets = np.eye(3)[rng.integers(0, 3, size=4)]
        spec = LossSpec("ce")

        def f(p):
            return loss_and_grad_through_net(spec, net, p, x, targets)[0]

        _, analytic = loss_and_grad_through_net(spec, net, params, x, targets)
        numeric = central_differences(f, params)
        assert max_rel_error(analytic, numeric) < 1e-4


class TestParamVector:
    def test_roundtrip_identity(self):
        net = init_network([5, 9, 4], seed=11)
        rebuilt = unflatten_params(net, flatten_params(net))
        for a, b in zip(net.weights, rebuilt.weights):
            assert np.array_equal(a, b)
        for a, b in zip(net.biases, rebuilt.biases):
            assert np.array_equal(a, b)

    def test_length_checked(self):
        net = init_network([5, 9, 4], seed=11)
        with pytest.raises(ShapeError):
            unflatten_params(net, np.zeros(net.num_params - 1))

    def test_layer_major_row_major_order(self):
        net = init_network([2, 2, 2], seed=0)
        flat = flatten_params(net)
        np.testing.assert_array_equal(flat[:4], net.weights[0].ravel())
        np.testing.assert_array_equal(flat[4:6], net.biases[0])
        np.testing.assert_array_equal(flat[6:10], net.weights[1].ravel())
