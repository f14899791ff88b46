import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relkit.errors import DivergenceError, EmptyInputError, InputShapeError, ParameterError
from relkit.nnkit import (
    NetworkModel,
    TrainConfig,
    backward,
    forward,
    init_network,
    loss_value,
    mse_loss,
    row_mse,
    train,
)

from oracles import finite_difference_grads, naive_mse

ACTS = ("relu", "sigmoid", "tanh", "linear")


def _identity_net(d):
    return NetworkModel([d, d], [np.eye(d)], [np.zeros(d)], ["linear"])


def random_network(rng, loss):
    n_layers = int(rng.integers(1, 4))
    dims = [int(v) for v in rng.integers(1, 9, size=n_layers + 1)]
    acts = [ACTS[int(i)] for i in rng.integers(0, 4, size=n_layers)]
    if loss == "bce":
        dims[-1] = 1
        acts[-1] = "sigmoid"
    net = init_network(dims, acts, seed=int(rng.integers(1 << 31)))
    for b in net.biases:
        b[:] = rng.normal(0.0, 0.3, size=b.shape)
    X = rng.normal(size=(int(rng.integers(1, 6)), dims[0]))
    if loss == "bce":
        T = rng.integers(0, 2, size=(len(X), 1)).astype(float)
    else:
        T = rng.normal(size=(len(X), dims[-1]))
    return net, X, T


def gradient_check(net, X, T, loss):
    """Max relative error between analytic and central-difference gradients."""
    grads = backward(net, X, T, loss=loss)
    params = [p for pair in zip(net.weights, net.biases) for p in pair]
    numeric = finite_difference_grads(lambda: loss_value(net, X, T, loss), params)
    analytic = [g for pair in zip(grads.weights, grads.biases) for g in pair]
    worst = 0.0
    for a, n in zip(analytic, numeric):
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(err.max()))
    return worst


class TestForward:
    def test_identity_network_returns_input(self):
        x = np.array([0.25, -1.5, 3.0])
        np.testing.assert_array_equal(forward(_identity_net(3), x), x)

    def test_sigmoid_of_zero_is_half(self):
        net = NetworkModel([2, 1], [np.zeros((1, 2))], [np.zeros(1)], ["sigmoid"])
        assert forward(net, np.array([3.0, -7.0]))[0] == 0.5

    def test_relu_clips_negative_preactivation(self):
        net = NetworkModel([1, 1], [np.array([[1.0]])], [np.array([-2.0])], ["relu"])
        assert forward(net, np.array([1.0]))[0] == 0.0
        assert forward(net, np.array([5.0]))[0] == 3.0

    def test_batch_matches_rows(self):
        net = init_network([3, 5, 2], ["tanh", "linear"], seed=4)
        X = np.random.default_rng(0).normal(size=(7, 3))
        batch = forward(net, X)
        for i in range(7):
            np.testing.assert_array_equal(forward(net, X[i]), batch[i])

    def test_wrong_width_raises(self):
        with pytest.raises(InputShapeError):
            forward(_identity_net(3), np.zeros(4))

    def test_bad_activation_raises(self):
        with pytest.raises(ParameterError):
            NetworkModel([1, 1], [np.ones((1, 1))], [np.zeros(1)], ["softmax"])

    def test_init_is_seeded(self):
        a = init_network([4, 3, 2], ["relu", "linear"], seed=9)
        b = init_network([4, 3, 2], ["relu", "linear"], seed=9)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)
        for bias in a.biases:
            assert not bias.any()


class TestMSE:
    @pytest.mark.parametrize(
        "y, y_hat, expected",
        [
            ([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 0.0),
            ([0.0, 0.0], [1.0, 2.0], 2.5),
            ([2.0], [0.0], 4.0),
        ],
    )
    def test_examples(self, y, y_hat, expected):
        assert mse_loss(np.array(y), np.array(y_hat)) == expected

    def test_shape_mismatch(self):
        with pytest.raises(InputShapeError):
            mse_loss(np.zeros(3), np.zeros(2))

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            mse_loss(np.zeros(0), np.zeros(0))

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.integers(0, 2**31))
    def test_symmetric_nonnegative_and_matches_loop(self, values, seed):
        y = np.array(values)
        y_hat = y + np.random.default_rng(seed).normal(size=len(y))
        a = mse_loss(y, y_hat)
        assert a >= 0.0
        assert a == mse_loss(y_hat, y)
        assert a == naive_mse(y.tolist(), y_hat.tolist())

    def test_row_mse_matches_per_row_loss(self):
        rng = np.random.default_rng(1)
        Y, Z = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
        np.testing.assert_array_equal(row_mse(Y, Z), [mse_loss(Y[i], Z[i]) for i in range(6)])


class TestBackward:
    def test_single_weight_closed_form(self):
        # loss = (w*x + b - t)^2 with w=1, b=0, x=2, t=0: d/dw = 2*(w*x + b - t)*x = 8
        net = NetworkModel([1, 1], [np.array([[1.0]])], [np.array([0.0])], ["linear"])
        g = backward(net, np.array([2.0]), np.array([0.0]))
        assert g.weights[0][0, 0] == 8.0
        assert g.biases[0][0] == 4.0

    def test_zero_gradient_at_minimum(self):
        net = init_network([3, 4, 2], ["tanh", "linear"], seed=2)
        X = np.random.default_rng(3).normal(size=(5, 3))
        g = backward(net, X, forward(net, X))
        np.testing.assert_array_equal(g.flat(), np.zeros_like(g.flat()))

    @pytest.mark.parametrize("loss", ["mse", "bce"])
    def test_matches_finite_differences(self, loss):
        rng = np.random.default_rng(11 if loss == "mse" else 12)
        for _ in range(15):
            net, X, T = random_network(rng, loss)
            assert gradient_check(net, X, T, loss) < 1e-4

    def test_bce_requires_sigmoid_output(self):
        net = init_network([2, 1], ["linear"])
        with pytest.raises(ParameterError):
            backward(net, np.zeros(2), np.zeros(1), loss="bce")

    def test_unknown_loss(self):
        with pytest.raises(ParameterError):
            backward(_identity_net(2), np.zeros(2), np.zeros(2), loss="hinge")


class TestTrain:
    def test_constant_dataset_is_fitted(self):
        X = np.tile([0.3, 0.7], (20, 1))
        net = init_network([2, 4, 2], ["sigmoid", "linear"], seed=0)
        cfg = TrainConfig(epochs=400, batch_size=20, learning_rate=1e-2)
        _, history = train(net, X, X, cfg)
        assert history[-1] < 1e-6

    def test_separable_data_reaches_full_accuracy(self):
        rng = np.random.default_rng(5)
        X = np.r_[rng.normal(-2, 0.5, size=(40, 2)), rng.normal(2, 0.5, size=(40, 2))]
        y = np.r_[np.zeros(40), np.ones(40)]
        net = init_network([2, 8, 1], ["relu", "sigmoid"], seed=1)
        trained, _ = train(net, X, y, TrainConfig(epochs=200, batch_size=16, learning_rate=1e-2), loss="bce")
        pred = (forward(trained, X)[:, 0] > 0.5).astype(float)
        np.testing.assert_array_equal(pred, y)

    def test_input_model_untouched_and_history_shape(self):
        net = init_network([2, 2], ["linear"], seed=0)
        before = net.weights[0].copy()
        _, history = train(net, np.ones((4, 2)), np.zeros((4, 2)), TrainConfig(epochs=7))
        np.testing.assert_array_equal(net.weights[0], before)
        assert history.shape == (8,)

    def test_same_seed_same_weights(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 3))
        net = init_network([3, 5, 3], ["sigmoid", "linear"], seed=7)
        cfg = TrainConfig(epochs=20, batch_size=8, learning_rate=1e-2, seed=3)
        a, ha = train(net, X, X, cfg)
        b, hb = train(net, X, X, cfg)
        np.testing.assert_array_equal(ha, hb)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_full_batch_sgd_small_step_is_monotone(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 4))
        T = X @ rng.normal(size=(4, 2)) + 0.1 * rng.normal(size=(50, 2))
        net = init_network([4, 2], ["linear"], seed=0)
        cfg = TrainConfig(epochs=200, batch_size=50, learning_rate=1e-4, optimizer="sgd", shuffle=False)
        _, history = train(net, X, T, cfg)
        assert np.all(np.diff(history) <= 0.0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_reported(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 3)) * 100
        net = init_network([3, 3], ["linear"], seed=0)
        cfg = TrainConfig(epochs=500, batch_size=20, learning_rate=10.0, optimizer="sgd")
        with pytest.raises(DivergenceError) as info:
            train(net, X, X, cfg)
        assert info.value.epoch >= 1

    @pytest.mark.parametrize("bad", [dict(epochs=0), dict(batch_size=0), dict(learning_rate=-1.0), dict(optimizer="rmsprop")])
    def test_config_validation(self, bad):
        with pytest.raises(ParameterError):
            TrainConfig(**bad)

    def test_row_count_mismatch(self):
        with pytest.raises(InputShapeError):
            train(_identity_net(2), np.zeros((3, 2)), np.zeros((2, 2)), TrainConfig(epochs=1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["mse", "bce"]))
def test_gradient_property(seed, loss):
    net, X, T = random_network(np.random.default_rng(seed), loss)
    assert gradient_check(net, X, T, loss) < 1e-4
