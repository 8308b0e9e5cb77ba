import numpy as np
import pytest

from cigen.numerics import (AdamState, GradCheckReport, Mlp, ShapeError,
                            adam_step, as_matrix, gradient_check, sigmoid)


def mean_loss(out):
    return float(out.mean()), np.full_like(out, 1.0 / out.size)


class TestForward:
    def test_zero_net_maps_to_zero(self):
        net = Mlp([3, 4, 2], seed=0)
        for w in net.weights:
            w[:] = 0.0
        out = net.forward(np.random.default_rng(0).normal(size=(5, 3)))
        assert np.all(out == 0.0)

    def test_identity_single_layer(self):
        net = Mlp([2, 2], seed=0)
        net.weights[0][:] = np.eye(2)
        net.biases[0][:] = 0.0
        out = net.forward([[1.0, 2.0]])
        assert np.allclose(out, [[1.0, 2.0]])

    def test_hand_evaluated_composition(self):
        # 2-2-1, tanh hidden, sigmoid output, hand-fixed weights
        net = Mlp([2, 2, 1], hidden_activation="tanh",
                  output_activation="sigmoid", seed=0)
        net.weights[0][:] = [[0.5, -1.0], [0.25, 0.75]]
        net.biases[0][:] = [0.1, -0.2]
        net.weights[1][:] = [[2.0], [-0.5]]
        net.biases[1][:] = [0.3]
        x = np.array([[1.0, -2.0]])
        h = np.tanh(x @ net.weights[0] + net.biases[0])
        expected = 1.0 / (1.0 + np.exp(-(h @ net.weights[1] + net.biases[1])))
        assert abs(net.forward(x)[0, 0] - expected[0, 0]) < 1e-12

    def test_dimension_mismatch_raises(self):
        net = Mlp([3, 4, 1], seed=0)
        with pytest.raises(ShapeError):
            net.forward(np.zeros((2, 5)))

    def test_rejects_nonfinite_input(self):
        net = Mlp([2, 2], seed=0)
        with pytest.raises(ValueError):
            net.forward(np.array([[1.0, np.nan]]))

    def test_forward_is_pure(self):
        net = Mlp([4, 8, 3], seed=1)
        x = np.random.default_rng(2).normal(size=(6, 4))
        a = net.forward(x)
        b = net.forward(x)
        assert np.array_equal(a, b)

    def test_sigmoid_open_interval_for_huge_inputs(self):
        net = Mlp([1, 1], output_activation="sigmoid", seed=0)
        net.weights[0][:] = [[1e6]]
        out = net.forward([[1.0], [-1.0]])
        assert np.all(out > 0.0) and np.all(out < 1.0)
        assert np.all(np.isfinite(out))


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        net = Mlp([3, 5, 2], seed=0)
        x = np.random.default_rng(0).normal(size=(4, 3))
        out, cache = net.forward_cached(x)
        grads, din = net.backward(cache, np.zeros_like(out))
        assert all(np.all(g == 0.0) for g in grads)
        assert np.all(din == 0.0)

    def test_linear_chain_rule_base_case(self):
        net = Mlp([1, 1], seed=0)
        net.weights[0][:] = [[2.0]]
        x = np.array([[3.0]])
        out, cache = net.forward_cached(x)
        grads, _ = net.backward(cache, np.ones((1, 1)))
        assert grads[0][0, 0] == 3.0  # d(out)/d(weight) = input
        assert grads[1][0] == 1.0

    def test_upstream_shape_mismatch(self):
        net = Mlp([2, 2], seed=0)
        _, cache = net.forward_cached(np.zeros((3, 2)))
        with pytest.raises(ShapeError):
            net.backward(cache, np.zeros((2, 2)))

    @pytest.mark.parametrize("hidden,output", [
        ("tanh", "identity"), ("tanh", "sigmoid"), ("relu", "identity")])
    def test_finite_difference_agreement(self, hidden, output):
        rng = np.random.default_rng(7)
        net = Mlp([3, 6, 4, 2], hidden_activation=hidden,
                  output_activation=output, seed=3)
        x = rng.normal(size=(5, 3))
        report = gradient_check(net, mean_loss, x, h=1e-5)
        assert report.max_relative_error < 1e-5


class TestAdam:
    def test_zero_gradients_leave_params_unchanged(self):
        state = AdamState()
        params = [np.ones((2, 2)), np.ones(3)]
        before = [p.copy() for p in params]
        for _ in range(10):
            adam_step(state, params, [np.zeros_like(p) for p in params])
        assert all(np.array_equal(a, b) for a, b in zip(params, before))
        assert state.step == 10

    def test_single_step_closed_form(self):
        state = AdamState(learning_rate=0.1)
        params = [np.array([1.0])]
        g = np.array([0.3])
        adam_step(state, params, [g.copy()])
        # after bias correction one step moves by ~ -lr * g / (|g| + eps)
        expected = 1.0 - 0.1 * 0.3 / (0.3 + state.epsilon)
        assert abs(params[0][0] - expected) < 1e-12

    def test_quadratic_bowl_convergence(self):
        state = AdamState(learning_rate=0.01)
        w = np.array([1.0])
        for _ in range(500):
            adam_step(state, [w], [2.0 * w])
        assert abs(w[0]) < 1e-2

    def test_shape_mismatch(self):
        state = AdamState()
        with pytest.raises(ShapeError):
            adam_step(state, [np.zeros(2)], [np.zeros(3)])


class TestGradientCheck:
    def test_linear_net_quadratic_loss(self):
        net = Mlp([2, 1], seed=0)
        x = np.array([[1.0, -0.5], [0.3, 2.0]])

        def quad(out):
            return float((out ** 2).sum()), 2.0 * out

        report = gradient_check(net, quad, x)
        assert report.max_relative_error < 1e-7

    def test_tanh_net(self):
        net = Mlp([2, 8, 1], hidden_activation="tanh", seed=1)
        x = np.random.default_rng(1).normal(size=(4, 2))
        report = gradient_check(net, mean_loss, x, h=1e-5)
        assert report.max_relative_error < 1e-5

    def test_relu_kink_coordinates_are_reported(self):
        net = Mlp([1, 2, 1], hidden_activation="relu", seed=0)
        # put a hidden pre-activation exactly on the kink
        net.weights[0][:] = [[1.0, 1.0]]
        net.biases[0][:] = [0.0, 0.5]
        x = np.array([[0.0]])
        report = gradient_check(net, mean_loss, x, h=1e-5)
        assert isinstance(report, GradCheckReport)
        assert len(report.excluded) > 0


class TestHelpers:
    def test_as_matrix_promotes_vectors(self):
        assert as_matrix([1.0, 2.0]).shape == (2, 1)

    def test_sigmoid_bounds(self):
        t = np.array([-1e9, -31.0, 0.0, 31.0, 1e9])
        s = sigmoid(t)
        assert np.all((s > 0) & (s < 1))

    def test_xavier_init_is_seeded(self):
        a = Mlp([3, 4, 1], seed=42)
        b = Mlp([3, 4, 1], seed=42)
        assert all(np.array_equal(x, y)
                   for x, y in zip(a.parameters(), b.parameters()))


def test_parameter_count_matches_dims():
    net = Mlp([3, 5, 2], seed=0)
    total = sum(p.size for p in net.parameters())
    assert total == (3 + 1) * 5 + (5 + 1) * 2
