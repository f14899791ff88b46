"""Simulated 2-D experiment under dataset shift.

Two overlapping Gaussian classes form the in-distribution data; the test set
adds a shifted Gaussian cluster far from the training data. A random forest
plays the black-box classifier, both reliability checks are fitted on the
training split, and classifier metrics are compared on the reliable and
unreliable parts of the test set.

Default parameters are chosen so the forest's validation accuracy is close
to 0.85 and the shifted cluster sits well outside the training data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FeatureMatrix
from .density import PercentileOfValidation
from .errors import ParameterError
from .forest import rf_fit
from .metrics import accuracy_score
from .pipeline import ReliabilityConfig, assess, evaluate, fit_reliability

FEATURE_NAMES = ("x1", "x2")


def _spd(cov, name):
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
        raise ParameterError(f"{name} must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise ParameterError(f"{name} is not positive definite")
    return cov


@dataclass(frozen=True)
class SimSpec:
    """Generator settings. Class means sit at ``class_midpoint -/+ (overlap_offset / 2, 0)``."""

    n_train: int = 800
    n_val: int = 300
    n_test_in: int = 3700
    n_test_ood: int = 1200
    class_midpoint: tuple = (0.0, 0.0)
    overlap_offset: float = 2.2
    class0_cov: tuple = ((1.0, 0.3), (0.3, 1.0))
    class1_cov: tuple = ((1.0, -0.3), (-0.3, 1.0))
    ood_mean: tuple = (-4.0, -6.0)
    ood_cov: tuple = ((0.8, 0.0), (0.0, 0.8))
    seed: int = 0

    def __post_init__(self):
        for name in ("n_train", "n_val", "n_test_in", "n_test_ood"):
            if int(getattr(self, name)) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.n_train < 4:
            raise ParameterError("n_train must be >= 4")
        if not self.overlap_offset >= 0:
            raise ParameterError("overlap_offset must be >= 0")
        for name in ("class0_cov", "class1_cov", "ood_cov"):
            _spd(getattr(self, name), name)

    @property
    def class0_mean(self):
        return np.asarray(self.class_midpoint, dtype=np.float64) - np.array([self.overlap_offset / 2.0, 0.0])

    @property
    def class1_mean(self):
        return np.asarray(self.class_midpoint, dtype=np.float64) + np.array([self.overlap_offset / 2.0, 0.0])

    @property
    def total(self):
        return self.n_train + self.n_val + self.n_test_in + self.n_test_ood


@dataclass(frozen=True)
class SimData:
    train: FeatureMatrix
    validation: FeatureMatrix
    test: FeatureMatrix
    test_ood: np.ndarray


def _two_class(rng, n, spec):
    n1 = n // 2
    n0 = n - n1
    X0 = rng.multivariate_normal(spec.class0_mean, _spd(spec.class0_cov, "class0_cov"), size=n0)
    X1 = rng.multivariate_normal(spec.class1_mean, _spd(spec.class1_cov, "class1_cov"), size=n1)
    X = np.vstack([X0, X1]).reshape(n, 2)
    y = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)]
    order = rng.permutation(n)
    return X[order], y[order]


def generate_sim(spec=None):
    """Draw ``(train, validation, test)`` plus the test-set OOD marker.

    Each part has its own child generator, so changing the OOD parameters
    leaves train, validation and the in-distribution test rows unchanged.
    OOD labels follow the sign of ``x2`` relative to the cluster mean, a
    rule the in-distribution classifier never saw.
    """
    spec = spec if spec is not None else SimSpec()
    r_train, r_val, r_test, r_ood = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(4))
    Xtr, ytr = _two_class(r_train, spec.n_train, spec)
    Xva, yva = _two_class(r_val, spec.n_val, spec)
    Xin, yin = _two_class(r_test, spec.n_test_in, spec)
    ood_mean = np.asarray(spec.ood_mean, dtype=np.float64)
    Xood = r_ood.multivariate_normal(ood_mean, _spd(spec.ood_cov, "ood_cov"), size=spec.n_test_ood).reshape(-1, 2)
    yood = (Xood[:, 1] > ood_mean[1]).astype(np.int64)
    Xte = np.vstack([Xin, Xood])
    yte = np.r_[yin, yood]
    ood = np.r_[np.zeros(len(yin), dtype=bool), np.ones(len(yood), dtype=bool)]
    return SimData(
        FeatureMatrix(FEATURE_NAMES, Xtr, labels=ytr),
        FeatureMatrix(FEATURE_NAMES, Xva, labels=yva),
        FeatureMatrix(FEATURE_NAMES, Xte, labels=yte),
        ood,
    )


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 10
    seed: int = 0


def default_experiment_config():
    """Reliability settings of the simulated experiment: 98th percentile, k=5, threshold 0.85."""
    return ReliabilityConfig(policy=PercentileOfValidation(98.0), k=5, accuracy_threshold=0.85)


@dataclass
class ExperimentReport:
    spec: SimSpec
    data: SimData
    bundle: object
    test_pred: np.ndarray
    test_score: np.ndarray
    verdicts: object
    evaluation: object
    validation_accuracy: float
    train_accuracy: float
    train_pred: np.ndarray
    validation_pred: np.ndarray
    summary: dict = field(default_factory=dict)

    def point_table(self):
        """Per-test-row columns (scatter-plot ready)."""
        v = self.verdicts
        t = self.data.test
        return {
            "x1": t.X[:, 0],
            "x2": t.X[:, 1],
            "label": t.labels,
            "prediction": self.test_pred,
            "score": self.test_score,
            "ood": self.data.test_ood.astype(np.int64),
            "mse": v.mse,
            "density_reliable": v.density_reliable.astype(np.int64),
            "localfit_score": v.localfit_score,
            "localfit_reliable": v.localfit_reliable.astype(np.int64),
            "reliable": v.reliable.astype(np.int64),
        }


def run_experiment(spec=None, config=None, forest=None):
    """Train the forest, fit both checks, assess the test set, compare subsets."""
    spec = spec if spec is not None else SimSpec()
    config = config if config is not None else default_experiment_config()
    forest = forest if forest is not None else ForestConfig()
    data = generate_sim(spec)
    tr = data.train

    rf = rf_fit(tr.X, tr.labels, n_trees=forest.n_trees, seed=forest.seed,
                max_depth=forest.max_depth, min_samples_leaf=forest.min_samples_leaf)
    train_pred = rf.predict(tr.X)
    val_pred = rf.predict(data.validation.X)
    bundle = fit_reliability(tr.with_columns(predictions=train_pred), config, validation=data.validation)

    test_score = rf.predict_proba(data.test.X)
    test_pred = (test_score > 0.5).astype(np.int64)
    verdicts = assess(bundle, data.test)
    evaluation = evaluate(data.test.labels, test_pred, test_score, verdicts.reliable)

    ood = data.test_ood
    n_ood = int(ood.sum())
    summary = {
        "n_train": tr.n_rows,
        "n_val": data.validation.n_rows,
        "n_test": data.test.n_rows,
        "n_test_ood": n_ood,
        "mse_threshold": bundle.density.mse_threshold,
        "n_synthetic": bundle.localfit.n_synthetic,
        "proxy_train_accuracy": bundle.localfit.proxy_train_accuracy,
        "ood_density_unreliable": int((~verdicts.density_reliable[ood]).sum()),
        "ood_density_detection_rate": float(np.mean(~verdicts.density_reliable[ood])) if n_ood else None,
        "ood_combined_detection_rate": float(np.mean(~verdicts.reliable[ood])) if n_ood else None,
        **verdicts.counts(),
    }
    if not n_ood:
        summary["note"] = "no OOD rows: OOD detection rate undefined"
    return ExperimentReport(
        spec,
        data,
        bundle,
        test_pred,
        test_score,
        verdicts,
        evaluation,
        accuracy_score(data.validation.labels, val_pred) if data.validation.n_rows else float("nan"),
        accuracy_score(tr.labels, train_pred),
        train_pred,
        val_pred,
        summary,
    )
