"""Density check: autoencoder reconstruction error against a threshold.

Inputs are min-max scaled with the training-set scaler, reconstructed by the
autoencoder, and the per-row MSE in scaled space is compared with a stored
threshold. ``mse <= threshold`` means in-distribution (reliable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nnkit
from .data import FeatureMatrix, MinMaxScaler
from .errors import ConfigError, EmptyInputError, InputShapeError, ParameterError
from .nnkit import NetworkModel, TrainConfig

EPOCHS_MAX_OF_TRAINING = 10000
EPOCHS_DEFAULT = 2000


@dataclass(frozen=True)
class PercentileOfValidation:
    p: float = 98.0

    def __post_init__(self):
        if not 0.0 < self.p <= 100.0:
            raise ParameterError(f"percentile must be in (0, 100], got {self.p}")

    def to_dict(self):
        return {"kind": "percentile", "p": self.p}


@dataclass(frozen=True)
class MaxOfTraining:
    def to_dict(self):
        return {"kind": "max_of_training"}


@dataclass(frozen=True)
class Manual:
    value: float

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise ParameterError(f"manual threshold must be >= 0, got {self.value}")

    def to_dict(self):
        return {"kind": "manual", "value": self.value}


def policy_from_dict(d):
    kind = d.get("kind")
    if kind == "percentile":
        return PercentileOfValidation(float(d.get("p", 98.0)))
    if kind == "max_of_training":
        return MaxOfTraining()
    if kind == "manual":
        return Manual(float(d["value"]))
    raise ConfigError(f"unknown threshold policy kind {kind!r}")


def default_train_config(policy, seed=0):
    epochs = EPOCHS_MAX_OF_TRAINING if isinstance(policy, MaxOfTraining) else EPOCHS_DEFAULT
    return TrainConfig(epochs=epochs, batch_size=32, learning_rate=5e-3, seed=seed)


def default_ae_architecture(d):
    """Layer sizes and activations of the default autoencoder for ``d`` inputs.

    ``d <= 2`` gets a single overcomplete hidden layer of ``d + 2`` units;
    otherwise ``[d, h, b, h, d]`` with ``h = max(2, ceil(3d/4))`` and
    bottleneck ``b = max(1, ceil(d/2))``. Hidden layers are sigmoid, the
    output layer linear.
    """
    d = int(d)
    if d < 1:
        raise ParameterError(f"input dimension must be >= 1, got {d}")
    if d <= 2:
        return [d, d + 2, d], ["sigmoid", "linear"]
    h = max(2, math.ceil(3 * d / 4))
    b = max(1, math.ceil(d / 2))
    return [d, h, b, h, d], ["sigmoid", "sigmoid", "sigmoid", "linear"]


def percentile(values, p):
    """``p``-th percentile, linear interpolation between closest ranks."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("percentile of an empty set")
    return float(np.percentile(values, p, method="linear"))


@dataclass(frozen=True)
class DensityVerdict:
    mse: float
    reliable: bool


@dataclass
class DensityModel:
    autoencoder: NetworkModel
    scaler: MinMaxScaler
    mse_threshold: float
    threshold_policy: object

    def __post_init__(self):
        dims = self.autoencoder.layer_dims
        if dims[0] != dims[-1]:
            raise InputShapeError(f"autoencoder input/output dims differ: {dims}")
        if dims[0] != self.scaler.n_features:
            raise InputShapeError(f"scaler has {self.scaler.n_features} features, autoencoder {dims[0]}")
        if not (math.isfinite(self.mse_threshold) or self.mse_threshold == math.inf) or self.mse_threshold < 0:
            raise ParameterError(f"invalid MSE threshold {self.mse_threshold}")

    @property
    def n_features(self):
        return self.autoencoder.input_dim

    def with_threshold(self, threshold, policy=None):
        return DensityModel(self.autoencoder, self.scaler, float(threshold), policy or Manual(float(threshold)))


def _rows(model, X):
    X = np.asarray(X.X if isinstance(X, FeatureMatrix) else X, dtype=np.float64)
    single = X.ndim == 1
    X = X.reshape(1, -1) if single else X
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InputShapeError(f"expected {model.n_features} features, got shape {X.shape}")
    return X, single


def reconstruction_errors(model, X):
    """Per-row reconstruction MSE (scaled space) for a batch."""
    X, _ = _rows(model, X)
    Z = model.scaler.transform(X)
    return nnkit.row_mse(Z, nnkit.forward(model.autoencoder, Z))


def reconstruction_mse(model, x):
    """Scaled-space reconstruction MSE of one raw feature vector."""
    x, single = _rows(model, x)
    if not single and x.shape[0] != 1:
        raise InputShapeError("reconstruction_mse takes one row; use reconstruction_errors for batches")
    z = model.scaler.transform(x[0])
    return nnkit.mse_loss(z, nnkit.forward(model.autoencoder, z))


def assess_density(model, x):
    mse = reconstruction_mse(model, x)
    return DensityVerdict(mse, bool(mse <= model.mse_threshold))


def assess_density_batch(model, X):
    """``(mse, reliable)`` arrays for a batch of raw rows."""
    mse = reconstruction_errors(model, X)
    return mse, mse <= model.mse_threshold


def fit_density(train, cfg=None, policy=None, validation=None, architecture=None):
    """Fit scaler + autoencoder on ``train`` and set the threshold per ``policy``.

    ``cfg`` defaults to :func:`default_train_config` (10000 epochs under
    ``MaxOfTraining``, 2000 otherwise). ``architecture`` overrides
    :func:`default_ae_architecture` as ``(dims, activations)``.
    """
    policy = policy if policy is not None else PercentileOfValidation(98.0)
    X = np.asarray(train.X if isinstance(train, FeatureMatrix) else train, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("training set is empty")
    V = None
    if isinstance(policy, PercentileOfValidation):
        if validation is None:
            raise ConfigError("percentile threshold policy needs a validation set")
        V = np.asarray(validation.X if isinstance(validation, FeatureMatrix) else validation, dtype=np.float64)
        if V.ndim != 2 or V.shape[0] == 0:
            raise ConfigError("percentile threshold policy needs a non-empty validation set")
        if V.shape[1] != X.shape[1]:
            raise InputShapeError(f"validation has {V.shape[1]} features, train {X.shape[1]}")
    cfg = cfg if cfg is not None else default_train_config(policy)

    scaler = MinMaxScaler.fit(X)
    Z = scaler.transform(X)
    dims, acts = architecture if architecture is not None else default_ae_architecture(X.shape[1])
    if dims[0] != X.shape[1] or dims[-1] != X.shape[1]:
        raise InputShapeError(f"architecture {dims} does not match {X.shape[1]} features")
    init = nnkit.init_network(dims, acts, seed=cfg.seed)
    ae, _ = nnkit.train(init, Z, Z, cfg, loss="mse")

    model = DensityModel(ae, scaler, 0.0, policy)
    if isinstance(policy, PercentileOfValidation):
        threshold = percentile(reconstruction_errors(model, V), policy.p)
    elif isinstance(policy, MaxOfTraining):
        threshold = float(np.max(reconstruction_errors(model, X)))
    elif isinstance(policy, Manual):
        threshold = policy.value
    else:
        raise ConfigError(f"unknown threshold policy {policy!r}")
    model.mse_threshold = float(threshold)
    return model
