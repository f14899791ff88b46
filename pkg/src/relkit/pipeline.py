"""Fit / assess / evaluate across both checks.

A :class:`ReliabilityBundle` pairs a density model and a local-fit model that
share one training-set scaler. The combined verdict for a row is reliable
only when both checks say reliable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .data import FeatureMatrix, Schema
from .density import (
    DensityModel,
    PercentileOfValidation,
    assess_density_batch,
    default_train_config,
    fit_density,
)
from .errors import ConfigError, InputShapeError, ParameterError
from .localfit import LocalFitModel, NoiseConfig, assess_localfit_batch, default_proxy_config, fit_localfit
from .metrics import EvalInput, compute_all, delta_report
from .nnkit import TrainConfig

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ReliabilityConfig:
    policy: object = field(default_factory=lambda: PercentileOfValidation(98.0))
    density_train: TrainConfig | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    k: int = 5
    accuracy_threshold: float = 0.85
    decision_cutoff: float = 0.5
    proxy: str = "mlp"
    proxy_train: TrainConfig | None = None

    def __post_init__(self):
        if int(self.k) < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.accuracy_threshold <= 1.0:
            raise ParameterError(f"accuracy_threshold must be in [0, 1], got {self.accuracy_threshold}")
        if not 0.0 < self.decision_cutoff < 1.0:
            raise ParameterError(f"decision_cutoff must be in (0, 1), got {self.decision_cutoff}")
        if self.proxy not in ("mlp", "tree"):
            raise ParameterError(f"proxy must be 'mlp' or 'tree', got {self.proxy!r}")

    def resolved_density_train(self):
        return self.density_train if self.density_train is not None else default_train_config(self.policy)

    def resolved_proxy_train(self):
        return self.proxy_train if self.proxy_train is not None else default_proxy_config()

    def provenance(self):
        return {
            "threshold_policy": self.policy.to_dict(),
            "density_train": self.resolved_density_train().__dict__,
            "noise": {
                "sigmas": list(self.noise.sigmas),
                "copies_per_sigma": int(self.noise.copies_per_sigma),
                "seed": int(self.noise.seed),
            },
            "k": int(self.k),
            "accuracy_threshold": float(self.accuracy_threshold),
            "decision_cutoff": float(self.decision_cutoff),
            "proxy": self.proxy,
            "proxy_train": self.resolved_proxy_train().__dict__,
        }


@dataclass
class ReliabilityBundle:
    density: DensityModel
    localfit: LocalFitModel
    schema: Schema
    provenance: dict
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        d = len(self.schema.encoded_names())
        if self.density.n_features != d or self.localfit.n_features != d:
            raise InputShapeError(
                f"schema has {d} encoded features; density {self.density.n_features}, "
                f"local fit {self.localfit.n_features}"
            )

    @property
    def feature_names(self):
        return self.schema.encoded_names()


def fit_reliability(train, config=None, validation=None, schema=None):
    """Fit both checks on a training matrix with labels and classifier predictions."""
    config = config if config is not None else ReliabilityConfig()
    if train.labels is None:
        raise ConfigError("training data has no label column")
    if train.predictions is None:
        raise ConfigError("training data has no prediction column")
    if schema is None:
        schema = Schema(features=train.names)
    density = fit_density(train, config.resolved_density_train(), config.policy, validation)
    localfit = fit_localfit(
        train,
        train.labels,
        train.predictions,
        noise=config.noise,
        k=config.k,
        accuracy_threshold=config.accuracy_threshold,
        proxy_cfg=config.resolved_proxy_train(),
        scaler=density.scaler,
        decision_cutoff=config.decision_cutoff,
        proxy=config.proxy,
    )
    provenance = {"toolkit_version": __version__, **config.provenance()}
    return ReliabilityBundle(density, localfit, schema, provenance)


@dataclass
class ReliabilityReport:
    mse: np.ndarray
    density_reliable: np.ndarray
    localfit_score: np.ndarray
    localfit_reliable: np.ndarray
    reliable: np.ndarray

    def __len__(self):
        return len(self.reliable)

    def counts(self):
        n = len(self)
        r = int(self.reliable.sum())
        return {
            "n": n,
            "reliable": r,
            "unreliable": n - r,
            "density_unreliable": int(n - self.density_reliable.sum()),
            "localfit_unreliable": int(n - self.localfit_reliable.sum()),
        }


def assess(bundle, X):
    """Score raw rows with both checks. Touches only the bundle."""
    X = np.asarray(X.X if isinstance(X, FeatureMatrix) else X, dtype=np.float64)
    d = bundle.density.n_features
    if X.size == 0:
        X = X.reshape(0, d)
    if X.ndim != 2 or X.shape[1] != d:
        raise InputShapeError(f"expected (n, {d}) rows, got {X.shape}")
    mse, dflag = assess_density_batch(bundle.density, X)
    score, lflag = assess_localfit_batch(bundle.localfit, X)
    return ReliabilityReport(mse, dflag, score, lflag, dflag & lflag)


@dataclass
class EvaluationReport:
    whole: object
    reliable: object
    unreliable: object
    deltas: object


def evaluate(y_true, y_pred, y_score, reliable):
    """Classifier metrics on the whole set and on the reliable / unreliable split."""
    data = EvalInput(y_true, y_pred, y_score)
    mask = np.asarray(reliable, dtype=bool).reshape(-1)
    if len(mask) != len(data):
        raise InputShapeError(f"{len(mask)} reliability flags for {len(data)} rows")
    rel = compute_all(data.subset(mask))
    unrel = compute_all(data.subset(~mask))
    return EvaluationReport(compute_all(data), rel, unrel, delta_report(rel, unrel))
