"""Run-configuration file (JSON) parsing.

Layout::

    {
      "data": {"train": "train.csv", "validation": "val.csv",
               "features": ["x1", "x2"], "categorical": [],
               "label": "label", "prediction": "prediction", "score": null},
      "density": {"policy": {"kind": "percentile", "p": 98},
                  "train": {"epochs": 2000, "batch_size": 32, "learning_rate": 0.005}},
      "localfit": {"sigmas": [0.05, 0.1, 0.2], "copies_per_sigma": 4, "k": 5,
                   "accuracy_threshold": 0.85, "decision_cutoff": 0.5,
                   "proxy": "mlp", "train": {"epochs": 400}},
      "seeds": {"density": 0, "noise": 0, "proxy": 0},
      "output": "bundle.json"
    }

Every key is optional except ``data.train``. Relative paths resolve against
the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .density import PercentileOfValidation, default_train_config, policy_from_dict
from .errors import ConfigError, ReliabilityError
from .localfit import NoiseConfig, default_proxy_config
from .pipeline import ReliabilityConfig

_SECTIONS = {"data", "density", "localfit", "seeds", "output"}
_TRAIN_KEYS = {"epochs", "batch_size", "learning_rate", "optimizer", "shuffle"}


@dataclass(frozen=True)
class DataConfig:
    train: Path | None
    validation: Path | None
    features: tuple | None
    categorical: tuple
    label: str
    prediction: str
    score: str | None


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig
    reliability: ReliabilityConfig
    output: Path | None


def _train_cfg(base, overrides, where, seed):
    overrides = dict(overrides or {})
    unknown = set(overrides) - _TRAIN_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    try:
        return base.replace(seed=seed, **overrides)
    except (ReliabilityError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _path(base_dir, value):
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() or base_dir is None else base_dir / p


def reliability_from_dict(raw, seed_override=None):
    """Build a :class:`ReliabilityConfig` from the density/localfit/seeds sections."""
    seeds = dict(raw.get("seeds") or {})
    if seed_override is not None:
        seeds = {"density": seed_override, "noise": seed_override, "proxy": seed_override}
    dens = raw.get("density") or {}
    lf = raw.get("localfit") or {}
    try:
        policy = policy_from_dict(dens["policy"]) if "policy" in dens else PercentileOfValidation(98.0)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"density.policy: {exc}") from None
    density_train = _train_cfg(default_train_config(policy), dens.get("train"), "density.train",
                               int(seeds.get("density", 0)))
    proxy_train = _train_cfg(default_proxy_config(), lf.get("train"), "localfit.train", int(seeds.get("proxy", 0)))
    try:
        noise = NoiseConfig(
            sigmas=tuple(lf.get("sigmas", NoiseConfig.sigmas)),
            copies_per_sigma=int(lf.get("copies_per_sigma", NoiseConfig.copies_per_sigma)),
            seed=int(seeds.get("noise", 0)),
        )
        return ReliabilityConfig(
            policy=policy,
            density_train=density_train,
            noise=noise,
            k=int(lf.get("k", 5)),
            accuracy_threshold=float(lf.get("accuracy_threshold", 0.85)),
            decision_cutoff=float(lf.get("decision_cutoff", 0.5)),
            proxy=str(lf.get("proxy", "mlp")),
            proxy_train=proxy_train,
        )
    except ReliabilityError as exc:
        raise ConfigError(f"localfit: {exc}") from None


def run_config_from_dict(raw, base_dir=None, seed_override=None):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config section(s) {sorted(unknown)}")
    d = raw.get("data") or {}
    if "train" not in d:
        raise ConfigError("data.train is required")
    data = DataConfig(
        train=_path(base_dir, d["train"]),
        validation=_path(base_dir, d.get("validation")),
        features=tuple(d["features"]) if d.get("features") is not None else None,
        categorical=tuple(d.get("categorical", ())),
        label=d.get("label", "label"),
        prediction=d.get("prediction", "prediction"),
        score=d.get("score"),
    )
    rel = reliability_from_dict(raw, seed_override)
    if isinstance(rel.policy, PercentileOfValidation) and data.validation is None:
        raise ConfigError("data.validation is required when density.policy.kind is 'percentile'")
    return RunConfig(data, rel, _path(base_dir, raw.get("output")))


def load_run_config(path, seed_override=None):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return run_config_from_dict(raw, path.parent, seed_override)
