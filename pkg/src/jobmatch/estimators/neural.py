"""Sequence classifiers over the phrase-embedding grid, trained by hand.

Both nets consume the semantic block reshaped to (batch, steps, dim) plus an
optional "side" vector of the remaining dense features (standardised before
it enters the net). All math is float64 numpy with explicit backprop so the
gradients can be checked against finite differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, ShapeError, TrainingError
from .numerics import log_loss, one_hot, sigmoid, softmax


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class CnnClassifier:
    """width-3 convolution over the step axis, ReLU, global max pool,
    optional side branch, one ReLU hidden layer, softmax output."""

    def __init__(self, steps, dim, n_classes, side_dim=0, *, filters=32,
                 kernel=3, hidden=64, side_units=32):
        if kernel > steps:
            raise ConfigurationError(f"kernel {kernel} exceeds {steps} steps")
        self.steps = steps
        self.dim = dim
        self.n_classes = n_classes
        self.side_dim = side_dim
        self.filters = filters
        self.kernel = kernel
        self.hidden = hidden
        self.side_units = side_units if side_dim else 0

    def init_params(self, seed=0) -> dict:
        rng = np.random.RandomState(seed)
        concat = self.filters + self.side_units
        params = {
            "Wc": _glorot(rng, self.kernel * self.dim, self.filters),
            "bc": np.zeros(self.filters),
            "W1": _glorot(rng, concat, self.hidden),
            "b1": np.zeros(self.hidden),
            "W2": _glorot(rng, self.hidden, self.n_classes),
            "b2": np.zeros(self.n_classes),
        }
        if self.side_dim:
            params["Ws"] = _glorot(rng, self.side_dim, self.side_units)
            params["bs"] = np.zeros(self.side_units)
        return params

    def _columns(self, grid):
        batch, steps, dim = grid.shape
        length = steps - self.kernel + 1
        cols = np.empty((batch, length, self.kernel * dim))
        for t in range(length):
            cols[:, t] = grid[:, t : t + self.kernel].reshape(batch, -1)
        return cols

    def _forward(self, params, grid, side):
        batch = len(grid)
        cols = self._columns(grid)
        conv = cols @ params["Wc"] + params["bc"]
        act = np.maximum(conv, 0.0)
        pool_idx = act.argmax(axis=1)
        pooled = np.take_along_axis(act, pool_idx[:, None, :], axis=1)[:, 0, :]
        if self.side_dim:
            zs = side @ params["Ws"] + params["bs"]
            hs = np.maximum(zs, 0.0)
            concat = np.concatenate([pooled, hs], axis=1)
        else:
            zs = hs = None
            concat = pooled
        z1 = concat @ params["W1"] + params["b1"]
        h1 = np.maximum(z1, 0.0)
        logits = h1 @ params["W2"] + params["b2"]
        proba = softmax(logits)
        cache = (cols, conv, pool_idx, zs, concat, z1, h1, proba, batch)
        return proba, cache

    def predict_proba(self, params, grid, side=None):
        proba, _ = self._forward(params, grid, side)
        return proba

    def loss_and_grads(self, params, grid, side, y):
        proba, cache = self._forward(params, grid, side)
        cols, conv, pool_idx, zs, concat, z1, h1, _, batch = cache
        loss = log_loss(proba, y)

        dlogits = (proba - one_hot(y, self.n_classes)) / batch
        grads = {
            "W2": h1.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        dh1 = dlogits @ params["W2"].T
        dz1 = dh1 * (z1 > 0)
        grads["W1"] = concat.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        dconcat = dz1 @ params["W1"].T
        dpooled = dconcat[:, : self.filters]
        if self.side_dim:
            dhs = dconcat[:, self.filters :]
            dzs = dhs * (zs > 0)
            grads["Ws"] = side.T @ dzs
            grads["bs"] = dzs.sum(axis=0)
        dact = np.zeros_like(conv)
        np.put_along_axis(dact, pool_idx[:, None, :], dpooled[:, None, :], axis=1)
        dconv = dact * (conv > 0)
        flat_cols = cols.reshape(-1, cols.shape[2])
        flat_dconv = dconv.reshape(-1, self.filters)
        grads["Wc"] = flat_cols.T @ flat_dconv
        grads["bc"] = flat_dconv.sum(axis=0)
        return loss, grads


class LstmClassifier:
    """Single-layer LSTM over the steps; the final hidden state joins the
    side branch and feeds the softmax directly."""

    def __init__(self, steps, dim, n_classes, side_dim=0, *, hidden=64,
                 side_units=32):
        self.steps = steps
        self.dim = dim
        self.n_classes = n_classes
        self.side_dim = side_dim
        self.hidden = hidden
        self.side_units = side_units if side_dim else 0

    def init_params(self, seed=0) -> dict:
        rng = np.random.RandomState(seed)
        h = self.hidden
        params = {
            "Wx": _glorot(rng, self.dim, 4 * h),
            "Wh": _glorot(rng, h, 4 * h),
            "b": np.zeros(4 * h),
            "W2": _glorot(rng, h + self.side_units, self.n_classes),
            "b2": np.zeros(self.n_classes),
        }
        params["b"][h : 2 * h] = 1.0  # forget gate opens first
        if self.side_dim:
            params["Ws"] = _glorot(rng, self.side_dim, self.side_units)
            params["bs"] = np.zeros(self.side_units)
        return params

    def _forward(self, params, grid, side):
        batch, steps, _ = grid.shape
        h = self.hidden
        h_t = np.zeros((batch, h))
        c_t = np.zeros((batch, h))
        caches = []
        for t in range(steps):
            x_t = grid[:, t]
            z = x_t @ params["Wx"] + h_t @ params["Wh"] + params["b"]
            gi = sigmoid(z[:, :h])
            gf = sigmoid(z[:, h : 2 * h])
            gg = np.tanh(z[:, 2 * h : 3 * h])
            go = sigmoid(z[:, 3 * h :])
            c_new = gf * c_t + gi * gg
            tanh_c = np.tanh(c_new)
            h_new = go * tanh_c
            caches.append((x_t, h_t, c_t, gi, gf, gg, go, tanh_c))
            h_t, c_t = h_new, c_new
        if self.side_dim:
            zs = side @ params["Ws"] + params["bs"]
            hs = np.maximum(zs, 0.0)
            concat = np.concatenate([h_t, hs], axis=1)
        else:
            zs = hs = None
            concat = h_t
        logits = concat @ params["W2"] + params["b2"]
        proba = softmax(logits)
        return proba, (caches, zs, concat, batch)

    def predict_proba(self, params, grid, side=None):
        proba, _ = self._forward(params, grid, side)
        return proba

    def loss_and_grads(self, params, grid, side, y):
        proba, (caches, zs, concat, batch) = self._forward(params, grid, side)
        h = self.hidden
        loss = log_loss(proba, y)

        dlogits = (proba - one_hot(y, self.n_classes)) / batch
        grads = {
            "W2": concat.T @ dlogits,
            "b2": dlogits.sum(axis=0),
            "Wx": np.zeros_like(params["Wx"]),
            "Wh": np.zeros_like(params["Wh"]),
            "b": np.zeros_like(params["b"]),
        }
        dconcat = dlogits @ params["W2"].T
        dh = dconcat[:, :h]
        if self.side_dim:
            dhs = dconcat[:, h:]
            dzs = dhs * (zs > 0)
            grads["Ws"] = side.T @ dzs
            grads["bs"] = dzs.sum(axis=0)
        dc = np.zeros((batch, h))
        for t in range(len(caches) - 1, -1, -1):
            x_t, h_prev, c_prev, gi, gf, gg, go, tanh_c = caches[t]
            dgo = dh * tanh_c
            dc = dc + dh * go * (1.0 - tanh_c**2)
            dgi = dc * gg
            dgf = dc * c_prev
            dgg = dc * gi
            dz = np.concatenate(
                [
                    dgi * gi * (1.0 - gi),
                    dgf * gf * (1.0 - gf),
                    dgg * (1.0 - gg**2),
                    dgo * go * (1.0 - go),
                ],
                axis=1,
            )
            grads["Wx"] += x_t.T @ dz
            grads["Wh"] += h_prev.T @ dz
            grads["b"] += dz.sum(axis=0)
            dh = dz @ params["Wh"].T
            dc = dc * gf
        return loss, grads


def train_network(net, params, grid, side, y, *, epochs=30, batch_size=64,
                  learning_rate=0.05, momentum=0.9, seed=0):
    """Minibatch SGD with momentum and a seeded shuffle.

    Snapshots the parameters after every finite epoch; a non-finite loss
    rolls back to the last good snapshot and stops with a warning instead
    of shipping NaN weights.
    """
    if epochs < 0 or batch_size < 1:
        raise ConfigurationError("epochs must be >= 0 and batch_size >= 1")
    n = len(grid)
    if n == 0:
        raise TrainingError("no training rows")
    rng = np.random.RandomState(seed)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    snapshot = {k: v.copy() for k, v in params.items()}
    loss_curve = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        total, seen = 0.0, 0
        bad = False
        for start in range(0, n, batch_size):
            rows = perm[start : start + batch_size]
            side_rows = side[rows] if side is not None else None
            loss, grads = net.loss_and_grads(params, grid[rows], side_rows, y[rows])
            if not np.isfinite(loss):
                bad = True
                break
            for key, grad in grads.items():
                velocity[key] = momentum * velocity[key] - learning_rate * grad
                params[key] += velocity[key]
            total += loss * len(rows)
            seen += len(rows)
        if bad or not seen:
            warnings.warn("non-finite loss; restoring last stable weights")
            for key in params:
                params[key][...] = snapshot[key]
            break
        loss_curve.append(total / seen)
        snapshot = {k: v.copy() for k, v in params.items()}
    return params, loss_curve


@dataclass
class NeuralModel:
    """A trained net plus the feature plumbing to apply it to full rows.

    Rows are the fixed-layout vectors: the leading side_width columns are
    the dense block (standardised with the stored train statistics) and the
    rest is the embedding grid.
    """

    kind: str
    net: object
    params: dict
    n_classes: int
    side_width: int
    grid_dim: int
    side_mean: np.ndarray
    side_scale: np.ndarray
    loss_curve: list = field(default_factory=list)

    def _split_rows(self, X):
        X = np.asarray(X, dtype=float)
        grid_flat = X[:, self.side_width :]
        if grid_flat.shape[1] != self.net.steps * self.grid_dim:
            raise ShapeError(
                f"expected {self.net.steps * self.grid_dim} grid columns, "
                f"got {grid_flat.shape[1]}"
            )
        grid = grid_flat.reshape(len(X), self.net.steps, self.grid_dim)
        side = None
        if self.side_width:
            side = (X[:, : self.side_width] - self.side_mean) / self.side_scale
        return grid, side

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        grid, side = self._split_rows(X)
        return self.net.predict_proba(self.params, grid, side)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_classes": self.n_classes,
            "side_width": self.side_width,
            "grid_dim": self.grid_dim,
            "grid_steps": self.net.steps,
            "hidden": getattr(self.net, "hidden", None),
            "filters": getattr(self.net, "filters", None),
            "kernel": getattr(self.net, "kernel", None),
            "side_units": self.net.side_units,
            "side_mean": self.side_mean.tolist(),
            "side_scale": self.side_scale.tolist(),
            "loss_curve": list(self.loss_curve),
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NeuralModel":
        side_width = int(data["side_width"])
        grid_dim = int(data["grid_dim"])
        steps = int(data["grid_steps"])
        n_classes = int(data["n_classes"])
        kind = data["kind"]
        if kind == "cnn":
            net = CnnClassifier(
                steps, grid_dim, n_classes, side_width,
                filters=int(data["filters"]), kernel=int(data["kernel"]),
                hidden=int(data["hidden"]),
                side_units=int(data["side_units"]) or 32,
            )
        elif kind == "lstm":
            net = LstmClassifier(
                steps, grid_dim, n_classes, side_width,
                hidden=int(data["hidden"]),
                side_units=int(data["side_units"]) or 32,
            )
        else:
            raise ConfigurationError(f"unknown network kind {kind!r}")
        return cls(
            kind=kind, net=net,
            params={k: np.asarray(v, dtype=float) for k, v in data["params"].items()},
            n_classes=n_classes, side_width=side_width, grid_dim=grid_dim,
            side_mean=np.asarray(data["side_mean"], dtype=float),
            side_scale=np.asarray(data["side_scale"], dtype=float),
            loss_curve=[float(v) for v in data.get("loss_curve", [])],
        )


def fit_neural_classifier(kind, X, y, n_classes, *, side_width, grid_dim,
                          hidden=64, filters=32, kernel=3, side_units=32,
                          epochs=30, batch_size=64, learning_rate=0.05,
                          momentum=0.9, seed=0):
    """Standardise the side block, build the requested net, train it, and
    wrap everything into a NeuralModel that accepts full feature rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    grid_cols = X.shape[1] - side_width
    if grid_cols <= 0 or grid_cols % grid_dim:
        raise ShapeError(
            f"{X.shape[1]} columns with side_width {side_width} do not leave "
            f"a whole number of {grid_dim}-wide grid steps"
        )
    steps = grid_cols // grid_dim
    if side_width:
        side_mean = X[:, :side_width].mean(axis=0)
        side_scale = X[:, :side_width].std(axis=0)
        side_scale[side_scale < 1e-8] = 1.0
    else:
        side_mean = np.zeros(0)
        side_scale = np.ones(0)

    if kind == "cnn":
        net = CnnClassifier(steps, grid_dim, n_classes, side_width,
                            filters=filters, kernel=kernel, hidden=hidden,
                            side_units=side_units)
    elif kind == "lstm":
        net = LstmClassifier(steps, grid_dim, n_classes, side_width,
                             hidden=hidden, side_units=side_units)
    else:
        raise ConfigurationError(f"unknown network kind {kind!r}")

    model = NeuralModel(
        kind=kind, net=net, params=net.init_params(seed),
        n_classes=n_classes, side_width=side_width, grid_dim=grid_dim,
        side_mean=side_mean, side_scale=side_scale,
    )
    grid, side = model._split_rows(X)
    model.params, model.loss_curve = train_network(
        net, model.params, grid, side, y,
        epochs=epochs, batch_size=batch_size,
        learning_rate=learning_rate, momentum=momentum, seed=seed,
    )
    return model
