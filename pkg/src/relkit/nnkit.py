"""Small dense feed-forward network engine.

Used for the density autoencoder (trained with MSE) and for the local-fit
proxy MLP (sigmoid output trained with binary cross-entropy). Everything is
float64 numpy; there is no autograd, backpropagation is written out by hand.

Layer ``l`` computes ``a[l+1] = act_l(W[l] @ a[l] + b[l])`` with ``W[l]`` of
shape ``(fan_out, fan_in)``. Batches are row-major: ``X`` is ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, EmptyInputError, InputShapeError, ParameterError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")
LOSSES = ("mse", "bce")
OPTIMIZERS = ("sgd", "adam")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def sigmoid(z):
    # tanh form is overflow-free and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name, z, a):
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class NetworkModel:
    """Weights, biases and activation tags of a dense network."""

    layer_dims: list
    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        self.layer_dims = [int(v) for v in self.layer_dims]
        self.activations = [str(a).lower() for a in self.activations]
        self.weights = [np.array(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in self.biases]
        if len(self.layer_dims) < 2 or any(v < 1 for v in self.layer_dims):
            raise ParameterError(f"layer_dims must hold >= 2 positive ints, got {self.layer_dims}")
        n = len(self.layer_dims) - 1
        if len(self.activations) != n or len(self.weights) != n or len(self.biases) != n:
            raise ParameterError(
                f"expected {n} activations/weights/biases, got "
                f"{len(self.activations)}/{len(self.weights)}/{len(self.biases)}"
            )
        for name in self.activations:
            if name not in ACTIVATIONS:
                raise ParameterError(f"unknown activation {name!r}")
        for l in range(n):
            want = (self.layer_dims[l + 1], self.layer_dims[l])
            if self.weights[l].shape != want:
                raise InputShapeError(f"weights[{l}] has shape {self.weights[l].shape}, expected {want}")
            if self.biases[l].shape != (want[0],):
                raise InputShapeError(f"biases[{l}] has shape {self.biases[l].shape}, expected {(want[0],)}")

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    def copy(self):
        return NetworkModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def is_finite(self):
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer.lower() not in OPTIMIZERS:
            raise ParameterError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")

    def replace(self, **changes):
        values = {**self.__dict__, **changes}
        return TrainConfig(**values)


@dataclass
class Gradients:
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def flat(self):
        return np.concatenate([g.ravel() for pair in zip(self.weights, self.biases) for g in pair])


def init_network(layer_dims, activations, seed=0):
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    layer_dims = [int(v) for v in layer_dims]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkModel(layer_dims, weights, biases, list(activations))


def _as_batch(model, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise InputShapeError(f"input has shape {x.shape}, model expects {model.input_dim} features")
    return X, single


def _dense(a, W, fast):
    if fast:
        return a @ W.T
    # einsum's plain loops keep row results independent of batch shape (BLAS does not)
    return np.einsum("ni,oi->no", a, W)


def _forward_cache(model, X, fast=False):
    zs, acts = [], [X]
    a = X
    for W, b, name in zip(model.weights, model.biases, model.activations):
        z = _dense(a, W, fast) + b
        a = _activate(name, z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def forward(model, x):
    """Evaluate the network on one vector ``(d,)`` or a batch ``(n, d)``.

    Each output row is bit-identical whatever batch it is evaluated in, so
    thresholds computed on a batch hold exactly for single-row scoring.
    """
    X, single = _as_batch(model, x)
    _, acts = _forward_cache(model, X)
    out = acts[-1]
    return out[0] if single else out


def mse_loss(y, y_hat):
    """Mean of squared element differences, summed in index order."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise InputShapeError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise EmptyInputError("mse_loss of empty vectors")
    diff = (y - y_hat).ravel()
    # cumsum accumulates strictly in index order, so the sum is reproducible
    # and identical to a plain running total
    return float(np.cumsum(diff * diff)[-1] / diff.size)


def row_mse(Y, Y_hat):
    """Per-row reconstruction MSE for ``(n, d)`` arrays; row ``i`` equals ``mse_loss(Y[i], Y_hat[i])``."""
    diff = np.asarray(Y, dtype=np.float64) - np.asarray(Y_hat, dtype=np.float64)
    if diff.shape[0] == 0:
        return np.zeros(0)
    return np.cumsum(diff * diff, axis=1)[:, -1] / diff.shape[1]


def _bce_from_logits(z, t):
    # softplus(z) - t*z == -(t log s(z) + (1-t) log(1-s(z)))
    return float(np.mean(np.logaddexp(0.0, z) - t * z))


def _check_loss(model, loss):
    if loss not in LOSSES:
        raise ParameterError(f"loss must be one of {LOSSES}, got {loss!r}")
    if loss == "bce" and model.activations[-1] != "sigmoid":
        raise ParameterError("bce loss requires a sigmoid output layer")


def _targets(model, target, n_rows):
    T = np.asarray(target, dtype=np.float64)
    if T.ndim < 2 and T.size == n_rows * model.output_dim:
        T = T.reshape(n_rows, model.output_dim)
    if T.shape != (n_rows, model.output_dim):
        raise InputShapeError(f"target has shape {np.shape(target)}, expected {(n_rows, model.output_dim)}")
    return T


def loss_value(model, x, target, loss="mse"):
    """Mean loss of the model over a batch (or a single row)."""
    _check_loss(model, loss)
    X, _ = _as_batch(model, x)
    T = _targets(model, target, X.shape[0])
    return _loss(model, X, T, loss)


def _loss(model, X, T, loss, fast=False):
    zs, acts = _forward_cache(model, X, fast)
    if loss == "mse":
        return mse_loss(T, acts[-1])
    return _bce_from_logits(zs[-1], T)


def _backprop(model, X, T, loss, fast=False):
    zs, acts = _forward_cache(model, X, fast)
    n_elem = T.size
    if loss == "mse":
        delta = (2.0 / n_elem) * (acts[-1] - T) * _activation_grad(model.activations[-1], zs[-1], acts[-1])
    else:
        delta = (acts[-1] - T) / n_elem
    gw = [None] * model.n_layers
    gb = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * _activation_grad(model.activations[l - 1], zs[l - 1], acts[l])
    return gw, gb


def backward(model, x, target, loss="mse"):
    """Gradients of the mean loss w.r.t. every weight and bias.

    ``loss="mse"`` differentiates :func:`mse_loss` of the output; ``"bce"``
    differentiates binary cross-entropy through the sigmoid output unit.
    """
    _check_loss(model, loss)
    X, _ = _as_batch(model, x)
    T = _targets(model, target, X.shape[0])
    gw, gb = _backprop(model, X, T, loss)
    return Gradients(gw, gb)


def train(model, inputs, targets, cfg, loss="mse"):
    """Mini-batch training.

    Returns ``(trained, history)`` where ``history[0]`` is the mean loss
    over the full training set before any update and ``history[e]`` the
    mean loss after epoch ``e``. The input model is left untouched.
    """
    _check_loss(model, loss)
    X, _ = _as_batch(model, inputs)
    T = np.asarray(targets, dtype=np.float64)
    if len(T) != X.shape[0]:
        raise InputShapeError(f"inputs have {X.shape[0]} rows, targets {len(T)}")
    T = _targets(model, T, X.shape[0])
    n = X.shape[0]
    if n == 0:
        raise EmptyInputError("cannot train on zero rows")

    net = model.copy()
    params = [p for pair in zip(net.weights, net.biases) for p in pair]
    rng = np.random.default_rng(cfg.seed)
    adam = cfg.optimizer.lower() == "adam"
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    lr = cfg.learning_rate
    step = 0
    bs = int(cfg.batch_size)

    history = np.empty(int(cfg.epochs) + 1)
    history[0] = _loss(net, X, T, loss, fast=True)
    if not np.isfinite(history[0]):
        raise DivergenceError(0, history[0])

    for epoch in range(1, int(cfg.epochs) + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            gw, gb = _backprop(net, X[idx], T[idx], loss, fast=True)
            grads = [g for pair in zip(gw, gb) for g in pair]
            if adam:
                step += 1
                c1 = 1.0 - ADAM_BETA1 ** step
                c2 = 1.0 - ADAM_BETA2 ** step
                for p, g, mi, vi in zip(params, grads, m, v):
                    mi *= ADAM_BETA1
                    mi += (1.0 - ADAM_BETA1) * g
                    vi *= ADAM_BETA2
                    vi += (1.0 - ADAM_BETA2) * (g * g)
                    p -= lr * (mi / c1) / (np.sqrt(vi / c2) + ADAM_EPS)
            else:
                for p, g in zip(params, grads):
                    p -= lr * g
        history[epoch] = _loss(net, X, T, loss, fast=True)
        if not np.isfinite(history[epoch]) or not net.is_finite():
            raise DivergenceError(epoch, history[epoch])
    return net, history
