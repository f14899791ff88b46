"""Versioned JSON persistence for :class:`~relkit.pipeline.ReliabilityBundle`.

The file holds network parameters as nested lists with explicit shapes,
the scaler's per-feature (min, max), thresholds, the feature schema and
fit provenance. It never holds training or synthetic rows. Keys are
sorted and floats written with ``repr``, so an identical fit gives an
identical file and a reload is bit-exact.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .data import MinMaxScaler, Schema
from .density import DensityModel, policy_from_dict
from .errors import ConfigError, FormatVersionError
from .forest import DecisionTree
from .localfit import ConstantProxy, LocalFitModel
from .nnkit import NetworkModel
from .pipeline import FORMAT_VERSION, ReliabilityBundle

SUPPORTED_VERSIONS = (FORMAT_VERSION,)


def _array(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "values": a.tolist()}


def _unarray(d):
    a = np.array(d["values"], dtype=np.float64).reshape(d["shape"])
    return a


def network_to_dict(net):
    return {
        "layer_dims": list(net.layer_dims),
        "activations": list(net.activations),
        "weights": [_array(w) for w in net.weights],
        "biases": [_array(b) for b in net.biases],
    }


def network_from_dict(d):
    return NetworkModel(
        d["layer_dims"],
        [_unarray(w) for w in d["weights"]],
        [_unarray(b) for b in d["biases"]],
        d["activations"],
    )


def _float(x):
    # JSON has no infinity literal; keep the file strict
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unfloat(x):
    if x is None:
        return None
    return float(x)


def _finite_json(obj):
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    return obj


def _policy_to_dict(policy):
    return {k: _float(v) if isinstance(v, float) else v for k, v in policy.to_dict().items()}


def _policy_from_dict(d):
    return policy_from_dict({k: _unfloat(v) if k in ("p", "value") else v for k, v in d.items()})


def _proxy_to_dict(proxy):
    if isinstance(proxy, NetworkModel):
        return {"kind": "mlp", "network": network_to_dict(proxy)}
    if isinstance(proxy, ConstantProxy):
        return {"kind": "constant", "value": proxy.value, "n_features": proxy.n_features}
    if isinstance(proxy, DecisionTree):
        return {"kind": "tree", "tree": proxy.to_dict()}
    raise ConfigError(f"cannot serialize proxy of type {type(proxy).__name__}")


def _proxy_from_dict(d):
    kind = d.get("kind")
    if kind == "mlp":
        return network_from_dict(d["network"])
    if kind == "constant":
        return ConstantProxy(float(d["value"]), int(d["n_features"]))
    if kind == "tree":
        return DecisionTree.from_dict(d["tree"])
    raise ConfigError(f"unknown proxy kind {kind!r}")


def _scaler_to_dict(s):
    return {"min": s.mins.tolist(), "max": s.maxs.tolist()}


def bundle_to_dict(bundle):
    dens = bundle.density
    lf = bundle.localfit
    return {
        "format_version": bundle.format_version,
        "schema": bundle.schema.to_dict(),
        "density": {
            "autoencoder": network_to_dict(dens.autoencoder),
            "scaler": _scaler_to_dict(dens.scaler),
            "mse_threshold": _float(dens.mse_threshold),
            "threshold_policy": _policy_to_dict(dens.threshold_policy),
        },
        "localfit": {
            "proxy": _proxy_to_dict(lf.proxy),
            "scaler": _scaler_to_dict(lf.scaler),
            "k": int(lf.k),
            "accuracy_threshold": float(lf.accuracy_threshold),
            "decision_cutoff": float(lf.decision_cutoff),
            "proxy_train_accuracy": _float(lf.proxy_train_accuracy),
            "n_synthetic": int(lf.n_synthetic),
        },
        "provenance": _finite_json(bundle.provenance),
    }


def bundle_from_dict(d):
    version = d.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise FormatVersionError(
            f"unsupported bundle format_version {version!r}; this toolkit reads {list(SUPPORTED_VERSIONS)}"
        )
    dd = d["density"]
    density = DensityModel(
        network_from_dict(dd["autoencoder"]),
        MinMaxScaler(dd["scaler"]["min"], dd["scaler"]["max"]),
        _unfloat(dd["mse_threshold"]),
        _policy_from_dict(dd["threshold_policy"]),
    )
    ld = d["localfit"]
    localfit = LocalFitModel(
        _proxy_from_dict(ld["proxy"]),
        MinMaxScaler(ld["scaler"]["min"], ld["scaler"]["max"]),
        int(ld["k"]),
        float(ld["accuracy_threshold"]),
        float(ld["decision_cutoff"]),
        _unfloat(ld.get("proxy_train_accuracy")),
        int(ld.get("n_synthetic", 0)),
    )
    return ReliabilityBundle(density, localfit, Schema.from_dict(d["schema"]), d.get("provenance", {}), version)


def dumps(bundle):
    return json.dumps(bundle_to_dict(bundle), sort_keys=True, indent=1, allow_nan=False) + "\n"


def loads(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bundle is not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError("bundle must be a JSON object")
    return bundle_from_dict(raw)


def save_bundle(bundle, path):
    Path(path).write_text(dumps(bundle), encoding="utf-8")


def load_bundle(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"bundle file not found: {path}") from None
    return loads(text)
