import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relkit.errors import EmptyInputError, InputShapeError, ParameterError, ReliabilityWarning
from relkit.localfit import (
    ConstantProxy,
    LocalFitModel,
    NoiseConfig,
    assess_localfit,
    assess_localfit_batch,
    default_proxy_architecture,
    fit_localfit,
    generate_synthetic,
    label_synthetic,
    local_accuracy,
    noise_scales,
    train_proxy,
)
from relkit.neighbors import NeighborIndex
from relkit.nnkit import TrainConfig

from oracles import brute_labels

SMALL_PROXY = TrainConfig(epochs=30, batch_size=64, learning_rate=1e-2)


def _train(n=800, seed=0):
    return np.random.default_rng(seed).normal(size=(n, 2))


def random_labeling_case(rng):
    n = int(rng.integers(5, 60))
    d = int(rng.integers(1, 4))
    grid = rng.random() < 0.5
    train = rng.integers(0, 4, size=(n, d)).astype(float) if grid else rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    p = np.where(rng.random(n) < 0.7, y, 1 - y)
    m = int(rng.integers(1, 15))
    pts = train[rng.integers(0, n, size=m)] + (0 if grid else rng.normal(0, 0.3, size=(m, d)))
    k = int(rng.integers(1, n + 1))
    threshold = float(rng.choice([0.0, 0.5, 0.85, 1.0, rng.random()]))
    if rng.random() < 0.3:
        # thresholds on the 1/k lattice exercise the equality case
        threshold = int(rng.integers(0, k + 1)) / k
    return train, y, p, pts, k, threshold


class TestGenerate:
    def test_single_sigma_count(self):
        pts, rows, sig = generate_synthetic(_train(), NoiseConfig(sigmas=(0.1,), copies_per_sigma=1))
        assert pts.shape == (800, 2)
        np.testing.assert_array_equal(rows, np.arange(800))

    def test_default_count_and_order(self):
        pts, rows, sig = generate_synthetic(_train(), NoiseConfig())
        assert pts.shape == (9600, 2)
        np.testing.assert_array_equal(np.unique(sig), [0.05, 0.1, 0.2])
        assert sig[0] == 0.05 and sig[-1] == 0.2
        assert np.bincount(rows).tolist() == [12] * 800

    def test_seed_repeat_is_bit_identical(self):
        a = generate_synthetic(_train(), NoiseConfig(seed=3))
        b = generate_synthetic(_train(), NoiseConfig(seed=3))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_different_seed_differs(self):
        a, _, _ = generate_synthetic(_train(), NoiseConfig(seed=3))
        b, _, _ = generate_synthetic(_train(), NoiseConfig(seed=4))
        assert not np.array_equal(a, b)

    def test_noise_scale_follows_sigma(self):
        X = _train(2000, 1) * np.array([1.0, 10.0])
        pts, rows, sig = generate_synthetic(X, NoiseConfig(sigmas=(0.2,), copies_per_sigma=1))
        spread = (pts - X[rows]).std(axis=0)
        np.testing.assert_allclose(spread, 0.2 * X.std(axis=0), rtol=0.1)

    def test_zero_variance_fallback(self):
        X = np.c_[np.full(10, 2.0), np.arange(10.0)]
        with pytest.warns(ReliabilityWarning):
            pts, _, _ = generate_synthetic(X, NoiseConfig(sigmas=(0.1,), copies_per_sigma=1))
        assert pts[:, 0].std() > 0
        np.testing.assert_array_equal(noise_scales(np.full((4, 1), 3.0), 0.1), [0.1])
        np.testing.assert_array_equal(noise_scales(np.array([[0.0], [0.0], [4.0]]), 0.5)[0] > 0, True)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            generate_synthetic(np.zeros((0, 2)), NoiseConfig())

    @pytest.mark.parametrize("bad", [dict(sigmas=()), dict(sigmas=(0.1, -1.0)), dict(copies_per_sigma=0)])
    def test_bad_noise_config(self, bad):
        with pytest.raises(ParameterError):
            NoiseConfig(**bad)


class TestLabel:
    def test_perfect_classifier_all_reliable(self):
        X = _train(100)
        y = (X[:, 0] > 0).astype(int)
        s = label_synthetic(X + 0.01, NeighborIndex(X), y, y, 5, 1.0)
        assert s.labels.all()

    def test_k5_threshold(self):
        # five training rows at the origin; one is misclassified
        X = np.zeros((5, 1))
        y = np.array([1, 1, 1, 1, 1])
        p = np.array([1, 1, 1, 1, 0])
        idx = NeighborIndex(X)
        assert label_synthetic(np.zeros((1, 1)), idx, y, p, 5, 0.85).labels.tolist() == [0]
        assert label_synthetic(np.zeros((1, 1)), idx, y, y, 5, 0.85).labels.tolist() == [1]
        assert label_synthetic(np.zeros((1, 1)), idx, y, p, 5, 0.8).labels.tolist() == [1]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        X = _train(200)
        y = (X[:, 0] > 0).astype(int)
        p = np.where(rng.random(200) < 0.8, y, 1 - y)
        pts = rng.normal(size=(30, 2))
        s = label_synthetic(pts, NeighborIndex(X), y, p, 5, 0.85)
        assert s.labels.tolist() == brute_labels(pts.tolist(), X.tolist(), y.tolist(), p.tolist(), 5, 0.85)

    def test_local_accuracy_lattice(self):
        rng = np.random.default_rng(1)
        X = _train(100)
        y = rng.integers(0, 2, 100)
        p = rng.integers(0, 2, 100)
        acc = local_accuracy(rng.normal(size=(300, 2)), NeighborIndex(X), y, p, 5)
        assert set(acc.tolist()) <= {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}

    def test_length_mismatch(self):
        with pytest.raises(InputShapeError):
            local_accuracy(np.zeros((1, 2)), NeighborIndex(_train(10)), np.zeros(9), np.zeros(10), 3)

    def test_bad_threshold(self):
        with pytest.raises(ParameterError):
            label_synthetic(np.zeros((1, 2)), NeighborIndex(_train(10)), np.zeros(10), np.zeros(10), 3, 1.5)


class TestFit:
    def test_perfect_classifier_gives_constant_proxy(self):
        X = _train(200)
        y = (X[:, 0] > 0).astype(int)
        with pytest.warns(ReliabilityWarning):
            m = fit_localfit(X, y, y, NoiseConfig(copies_per_sigma=1), proxy_cfg=SMALL_PROXY)
        assert m.is_degenerate
        assert m.n_synthetic == 600
        v = assess_localfit(m, np.array([100.0, -50.0]))
        assert (v.score, v.reliable) == (1.0, True)
        _, ok = assess_localfit_batch(m, _train(40, 9))
        assert ok.all()

    def test_all_wrong_gives_constant_unreliable(self):
        X = _train(50)
        y = np.zeros(50, int)
        with pytest.warns(ReliabilityWarning):
            m = fit_localfit(X, y, 1 - y, NoiseConfig(copies_per_sigma=1), proxy_cfg=SMALL_PROXY)
        assert isinstance(m.proxy, ConstantProxy)
        assert not assess_localfit(m, X[0]).reliable

    def test_errors_are_located(self):
        # classifier is wrong on every row with x1 > 1: those regions score low
        X = _train(400, 2)
        y = (X[:, 1] > 0).astype(int)
        p = np.where(X[:, 0] > 1.0, 1 - y, y)
        cfg = TrainConfig(epochs=150, batch_size=128, learning_rate=1e-2)
        m = fit_localfit(X, y, p, NoiseConfig(copies_per_sigma=2), proxy_cfg=cfg)
        assert m.proxy_train_accuracy >= 0.9
        good = assess_localfit(m, np.array([-1.5, 0.0]))
        bad = assess_localfit(m, np.array([2.0, 0.0]))
        assert good.reliable and not bad.reliable

    def test_deterministic(self):
        X = _train(150, 3)
        y = (X[:, 0] > 0).astype(int)
        p = (X[:, 0] > 0.3).astype(int)
        a = fit_localfit(X, y, p, NoiseConfig(copies_per_sigma=1), proxy_cfg=SMALL_PROXY)
        b = fit_localfit(X, y, p, NoiseConfig(copies_per_sigma=1), proxy_cfg=SMALL_PROXY)
        for wa, wb in zip(a.proxy.weights, b.proxy.weights):
            np.testing.assert_array_equal(wa, wb)
        assert a.proxy_train_accuracy == b.proxy_train_accuracy

    def test_tree_proxy(self):
        X = _train(150, 3)
        y = (X[:, 0] > 0).astype(int)
        p = (X[:, 0] > 0.3).astype(int)
        m = fit_localfit(X, y, p, NoiseConfig(copies_per_sigma=1), proxy="tree")
        score, ok = assess_localfit_batch(m, X)
        assert ((score >= 0) & (score <= 1)).all()
        np.testing.assert_array_equal(ok, score >= 0.5)

    def test_unknown_proxy(self):
        with pytest.raises(ParameterError):
            train_proxy(np.zeros((4, 2)), np.array([0, 1, 0, 1]), proxy="svm")

    def test_model_holds_no_rows(self):
        X = _train(120, 4)
        y = (X[:, 0] > 0).astype(int)
        p = (X[:, 0] > 0.2).astype(int)
        m = fit_localfit(X, y, p, NoiseConfig(copies_per_sigma=1), proxy_cfg=SMALL_PROXY)
        arrays = list(m.proxy.weights) + list(m.proxy.biases) + [m.scaler.mins, m.scaler.maxs]
        assert all(120 not in a.shape for a in arrays)
        assert default_proxy_architecture(2)[0] == [2, 48, 48, 1]

    @pytest.mark.parametrize("bad", [dict(accuracy_threshold=1.2), dict(decision_cutoff=0.0), dict(k=0)])
    def test_model_validation(self, bad):
        args = dict(proxy=ConstantProxy(1.0, 2), scaler=None, k=5, accuracy_threshold=0.85)
        args.update(bad)
        with pytest.raises(ParameterError):
            LocalFitModel(**args)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_labels_match_oracle(seed):
    train, y, p, pts, k, threshold = random_labeling_case(np.random.default_rng(seed))
    s = label_synthetic(pts, NeighborIndex(train), y, p, k, threshold)
    assert s.labels.tolist() == brute_labels(pts.tolist(), train.tolist(), y.tolist(), p.tolist(), k, threshold)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_labels_monotone_in_threshold(seed, t1, t2):
    train, y, p, pts, k, _ = random_labeling_case(np.random.default_rng(seed))
    lo, hi = sorted((t1, t2))
    idx = NeighborIndex(train)
    a = label_synthetic(pts, idx, y, p, k, lo).labels
    b = label_synthetic(pts, idx, y, p, k, hi).labels
    assert np.all(b <= a)
