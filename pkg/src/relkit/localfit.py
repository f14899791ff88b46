"""Local-fit check: a proxy model that predicts where the classifier is locally accurate.

Fit time: jitter the (scaled) training rows with Gaussian noise, label each
synthetic point 1 when the classifier's accuracy over its k nearest training
rows is at least ``accuracy_threshold``, and train a proxy on those labels.
Score time only the proxy is evaluated; no training or synthetic rows are
kept in the fitted model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import nnkit
from .data import FeatureMatrix, MinMaxScaler
from .errors import EmptyInputError, InputShapeError, ParameterError, ReliabilityWarning
from .neighbors import NeighborIndex
from .nnkit import NetworkModel, TrainConfig


@dataclass(frozen=True)
class NoiseConfig:
    """Noise scales are multiples of each feature's training standard deviation."""

    sigmas: tuple = (0.05, 0.1, 0.2)
    copies_per_sigma: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if not self.sigmas or any(not s > 0 for s in self.sigmas):
            raise ParameterError(f"sigmas must be a non-empty list of positive values, got {self.sigmas}")
        if int(self.copies_per_sigma) < 1:
            raise ParameterError(f"copies_per_sigma must be >= 1, got {self.copies_per_sigma}")


@dataclass(frozen=True)
class SyntheticDataset:
    points: np.ndarray
    labels: np.ndarray
    source_row: np.ndarray
    sigma: np.ndarray
    local_accuracy: np.ndarray | None = None


@dataclass(frozen=True)
class LocalFitVerdict:
    score: float
    reliable: bool


@dataclass(frozen=True)
class ConstantProxy:
    """Stand-in proxy when every synthetic label was the same."""

    value: float
    n_features: int

    def predict_proba(self, Z):
        return np.full(Z.shape[0], float(self.value))


@dataclass
class LocalFitModel:
    proxy: object
    scaler: MinMaxScaler
    k: int
    accuracy_threshold: float
    decision_cutoff: float = 0.5
    proxy_train_accuracy: float | None = None
    n_synthetic: int = 0

    def __post_init__(self):
        if not 0.0 <= self.accuracy_threshold <= 1.0:
            raise ParameterError(f"accuracy_threshold must be in [0, 1], got {self.accuracy_threshold}")
        if not 0.0 < self.decision_cutoff < 1.0:
            raise ParameterError(f"decision_cutoff must be in (0, 1), got {self.decision_cutoff}")
        if int(self.k) < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")

    @property
    def n_features(self):
        return self.scaler.n_features

    @property
    def is_degenerate(self):
        return isinstance(self.proxy, ConstantProxy)


def proxy_proba(proxy, Z):
    """Probability of 'reliable' for scaled rows ``Z``."""
    if isinstance(proxy, NetworkModel):
        return nnkit.forward(proxy, Z)[:, 0]
    return np.asarray(proxy.predict_proba(Z), dtype=np.float64)


PROXY_MIN_WIDTH = 48


def default_proxy_architecture(d):
    """``[d, h, h, 1]`` with ``h = max(48, 2d)``, ReLU hidden, sigmoid output."""
    h = max(PROXY_MIN_WIDTH, 2 * int(d))
    return [int(d), h, h, 1], ["relu", "relu", "sigmoid"]


def default_proxy_config(seed=0):
    return TrainConfig(epochs=400, batch_size=128, learning_rate=1e-2, seed=seed)


def noise_scales(train, sigma):
    """Per-feature noise standard deviation for one sigma multiple."""
    X = np.asarray(train, dtype=np.float64)
    std = X.std(axis=0)
    rng_ = X.max(axis=0) - X.min(axis=0)
    scale = np.where(std > 0, std, np.where(rng_ > 0, rng_ / 4.0, 1.0))
    return sigma * scale


def generate_synthetic(train, noise):
    """Gaussian jitter of every training row for every sigma and copy.

    Rows are ordered by (sigma, copy, training row). The noise block for
    each (sigma index, copy) is drawn from a generator seeded with
    ``(noise.seed, sigma index, copy)``, so every point depends only on the
    seed, its source row, sigma and copy.

    Returns
    -------
    (points, source_row, sigma)
    """
    X = np.asarray(train.X if isinstance(train, FeatureMatrix) else train, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("cannot generate synthetic points from an empty training set")
    n, d = X.shape
    if (X.std(axis=0) == 0).any():
        warnings.warn("zero-variance feature(s): noise scale falls back to range/4 (or 1.0)",
                      ReliabilityWarning, stacklevel=2)
    blocks, rows, sig = [], [], []
    for si, s in enumerate(noise.sigmas):
        scale = noise_scales(X, s)
        for j in range(int(noise.copies_per_sigma)):
            rng = np.random.default_rng([int(noise.seed), si, j])
            blocks.append(X + rng.standard_normal((n, d)) * scale)
            rows.append(np.arange(n))
            sig.append(np.full(n, s))
    return np.vstack(blocks), np.concatenate(rows), np.concatenate(sig)


def local_accuracy(points, index, train_true, train_pred, k):
    """Fraction of each point's k nearest training rows the classifier got right."""
    train_true = np.asarray(train_true).reshape(-1)
    train_pred = np.asarray(train_pred).reshape(-1)
    if len(train_true) != index.n or len(train_pred) != index.n:
        raise InputShapeError(
            f"index has {index.n} rows but got {len(train_true)} labels and {len(train_pred)} predictions"
        )
    ids, _ = index.query(points, k)
    correct = (train_true == train_pred)
    # integer count / k keeps values exact multiples of 1/k
    return correct[ids].sum(axis=1) / k


def label_synthetic(points, index, train_true, train_pred, k, accuracy_threshold, source_row=None, sigma=None):
    """Label synthetic points 1 where local accuracy >= ``accuracy_threshold``."""
    if not 0.0 <= accuracy_threshold <= 1.0:
        raise ParameterError(f"accuracy_threshold must be in [0, 1], got {accuracy_threshold}")
    points = np.asarray(points, dtype=np.float64)
    acc = local_accuracy(points, index, train_true, train_pred, int(k))
    labels = (acc >= accuracy_threshold).astype(np.int64)
    m = points.shape[0]
    return SyntheticDataset(
        points,
        labels,
        np.full(m, -1) if source_row is None else np.asarray(source_row),
        np.full(m, np.nan) if sigma is None else np.asarray(sigma),
        acc,
    )


def train_proxy(points, labels, proxy_cfg=None, proxy="mlp", tree_params=None):
    """Train the proxy classifier on labelled synthetic points.

    Returns ``(proxy, training_accuracy)``. A single-valued label vector gives
    a :class:`ConstantProxy` and a warning.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    d = points.shape[1]
    if labels.min() == labels.max():
        value = float(labels[0])
        warnings.warn(f"all synthetic labels are {int(value)}; proxy is constant",
                      ReliabilityWarning, stacklevel=2)
        return ConstantProxy(value, d), 1.0
    if proxy == "mlp":
        cfg = proxy_cfg if proxy_cfg is not None else default_proxy_config()
        dims, acts = default_proxy_architecture(d)
        init = nnkit.init_network(dims, acts, seed=cfg.seed)
        model, _ = nnkit.train(init, points, labels.astype(np.float64), cfg, loss="bce")
    elif proxy == "tree":
        from .forest import DecisionTree

        params = {"max_depth": 8, "min_samples_leaf": 5, **(tree_params or {})}
        model = DecisionTree.fit(points, labels, **params)
    else:
        raise ParameterError(f"unknown proxy kind {proxy!r}")
    acc = float(np.mean((proxy_proba(model, points) >= 0.5) == labels))
    return model, acc


def fit_localfit(train, train_true, train_pred, noise=None, k=5, accuracy_threshold=0.85,
                 proxy_cfg=None, scaler=None, decision_cutoff=0.5, proxy="mlp"):
    """Generate, label, and train: the whole fit-time local-fit pipeline.

    ``train`` holds raw features; work happens in min-max scaled space
    (``scaler`` is fitted on ``train`` when not given). ``train_pred`` are the
    black-box classifier's recorded predictions on the training rows.
    """
    noise = noise if noise is not None else NoiseConfig()
    X = np.asarray(train.X if isinstance(train, FeatureMatrix) else train, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("training set is empty")
    scaler = scaler if scaler is not None else MinMaxScaler.fit(X)
    Z = scaler.transform(X)
    index = NeighborIndex(Z)
    points, rows, sig = generate_synthetic(Z, noise)
    synth = label_synthetic(points, index, train_true, train_pred, k, accuracy_threshold, rows, sig)
    model, acc = train_proxy(synth.points, synth.labels, proxy_cfg, proxy)
    return LocalFitModel(model, scaler, int(k), float(accuracy_threshold), float(decision_cutoff),
                         acc, int(points.shape[0]))


def _scaled(model, X):
    X = np.asarray(X.X if isinstance(X, FeatureMatrix) else X, dtype=np.float64)
    single = X.ndim == 1
    X = X.reshape(1, -1) if single else X
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InputShapeError(f"expected {model.n_features} features, got shape {X.shape}")
    return model.scaler.transform(X), single


def assess_localfit_batch(model, X):
    """``(score, reliable)`` arrays for a batch of raw rows."""
    Z, _ = _scaled(model, X)
    score = proxy_proba(model.proxy, Z)
    return score, score >= model.decision_cutoff


def assess_localfit(model, x):
    Z, single = _scaled(model, x)
    if not single and Z.shape[0] != 1:
        raise InputShapeError("assess_localfit takes one row; use assess_localfit_batch for batches")
    score = float(proxy_proba(model.proxy, Z)[0])
    return LocalFitVerdict(score, bool(score >= model.decision_cutoff))
