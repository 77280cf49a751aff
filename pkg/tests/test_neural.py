"""Backprop networks: gradient checks, training loop, and serialization."""

import json

import numpy as np
import pytest

from jobmatch.errors import ConfigurationError, ShapeError
from jobmatch.estimators.neural import (CnnClassifier, LstmClassifier,
                                        NeuralModel, fit_neural_classifier,
                                        train_network)

STEPS, DIM, K, SIDE = 6, 3, 3, 4


def _toy_rows(rng, n, side_width=SIDE, steps=STEPS, dim=DIM, k=K):
    """Rows whose label is encoded in one grid channel and in side column 0."""
    grid = rng.randn(n, steps, dim) * 0.3
    y = rng.randint(0, k, n)
    y[:k] = np.arange(k)
    for i in range(n):
        grid[i, :, y[i] % dim] += 1.2
    side = rng.randn(n, max(side_width, 1))[:, :side_width]
    if side_width:
        side[:, 0] = y
    X = np.concatenate([side, grid.reshape(n, -1)], axis=1)
    return X, y


def _tiny_net(kind, side_dim):
    if kind == "cnn":
        return CnnClassifier(STEPS, DIM, K, side_dim, filters=4, kernel=3,
                             hidden=5, side_units=3)
    return LstmClassifier(STEPS, DIM, K, side_dim, hidden=4, side_units=3)


def _max_rel_grad_error(net, params, grid, side, y, eps=1e-6):
    """Worst relative disagreement between backprop and central differences.

    Coordinates where two step sizes disagree straddle a ReLU or max-pool
    kink, where the loss has no derivative; those few are skipped rather
    than compared against a one-sided slope.
    """
    _, grads = net.loss_and_grads(params, grid, side, y)
    worst, checked, skipped = 0.0, 0, 0
    for key, grad in grads.items():
        flat = params[key].reshape(-1)
        analytic = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            diffs = []
            for h in (eps, eps / 2):
                flat[i] = orig + h
                up = net.loss_and_grads(params, grid, side, y)[0]
                flat[i] = orig - h
                down = net.loss_and_grads(params, grid, side, y)[0]
                diffs.append((up - down) / (2 * h))
            flat[i] = orig
            d1, d2 = diffs
            if abs(d1 - d2) > 1e-3 * max(abs(d1), abs(d2), 1e-8):
                skipped += 1
                continue
            checked += 1
            scale = max(abs(d2), abs(analytic[i]), 1e-5)
            worst = max(worst, abs(d2 - analytic[i]) / scale)
    assert checked and skipped <= 0.02 * (checked + skipped)
    return worst


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_gradients_match_central_differences(kind):
    for seed in range(3):
        rng = np.random.RandomState(40 + seed)
        X, y = _toy_rows(rng, n=6)
        grid = X[:, SIDE:].reshape(-1, STEPS, DIM)
        side = X[:, :SIDE]
        net = _tiny_net(kind, SIDE)
        params = net.init_params(seed)
        assert _max_rel_grad_error(net, params, grid, side, y) < 1e-4, seed


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_gradients_hold_without_a_side_branch(kind):
    rng = np.random.RandomState(50)
    X, y = _toy_rows(rng, n=5, side_width=0)
    grid = X.reshape(-1, STEPS, DIM)
    net = _tiny_net(kind, 0)
    params = net.init_params(1)
    assert _max_rel_grad_error(net, params, grid, None, y) < 1e-4


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_full_batch_training_reduces_the_loss(kind):
    rng = np.random.RandomState(21)
    X, y = _toy_rows(rng, n=32)
    grid = X[:, SIDE:].reshape(-1, STEPS, DIM)
    side = X[:, :SIDE]
    net = _tiny_net(kind, SIDE)
    params = net.init_params(3)
    _, curve = train_network(net, params, grid, side, y, epochs=20,
                             batch_size=32, learning_rate=0.1, seed=3)
    assert len(curve) == 20
    assert curve[-1] < 0.8 * curve[0]


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_fitting_is_seeded(kind):
    rng = np.random.RandomState(22)
    X, y = _toy_rows(rng, n=40)
    fit = lambda seed: fit_neural_classifier(
        kind, X, y, K, side_width=SIDE, grid_dim=DIM, hidden=6, filters=4,
        kernel=3, side_units=3, epochs=3, batch_size=16, seed=seed)
    a, b, c = fit(7), fit(7), fit(8)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != c.to_dict()
    np.testing.assert_allclose(a.predict_proba(X).sum(axis=1), 1.0, atol=1e-12)
    assert a.predict(X).shape == (40,)


def test_non_finite_loss_rolls_back_to_the_last_stable_epoch():
    rng = np.random.RandomState(23)
    X, y = _toy_rows(rng, n=24)
    grid = X[:, SIDE:].reshape(-1, STEPS, DIM)
    side = X[:, :SIDE]
    net = _tiny_net("cnn", SIDE)
    batches_per_epoch = 3  # 24 rows / batch_size 8

    expected = net.init_params(5)
    expected, _ = train_network(net, expected, grid, side, y, epochs=1,
                                batch_size=8, seed=5)

    class Exploding:
        steps = net.steps

        def __init__(self):
            self.calls = 0

        def loss_and_grads(self, params, grid, side, y):
            self.calls += 1
            if self.calls > batches_per_epoch:
                return float("nan"), {}
            return net.loss_and_grads(params, grid, side, y)

    params = net.init_params(5)
    with pytest.warns(UserWarning, match="restoring last stable weights"):
        params, curve = train_network(Exploding(), params, grid, side, y,
                                      epochs=3, batch_size=8, seed=5)
    assert len(curve) == 1  # only the finite epoch is kept
    for key in expected:
        np.testing.assert_array_equal(params[key], expected[key])


def test_zero_epochs_returns_the_initialization():
    rng = np.random.RandomState(24)
    X, y = _toy_rows(rng, n=10)
    model = fit_neural_classifier("lstm", X, y, K, side_width=SIDE,
                                  grid_dim=DIM, hidden=4, side_units=3,
                                  epochs=0, seed=2)
    want = _tiny_net("lstm", SIDE).init_params(2)
    for key, val in want.items():
        np.testing.assert_array_equal(model.params[key], val)
    assert model.loss_curve == []


def test_side_block_is_standardised_with_train_statistics():
    rng = np.random.RandomState(25)
    X, y = _toy_rows(rng, n=30)
    X[:, 2] = 7.0  # constant column must not divide by zero
    model = fit_neural_classifier("cnn", X, y, K, side_width=SIDE,
                                  grid_dim=DIM, filters=4, hidden=5,
                                  side_units=3, epochs=1, seed=4)
    np.testing.assert_allclose(model.side_mean, X[:, :SIDE].mean(axis=0))
    assert model.side_scale[2] == 1.0
    assert np.all(np.isfinite(model.predict_proba(X)))


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_round_trip_through_json(kind):
    rng = np.random.RandomState(26)
    X, y = _toy_rows(rng, n=20)
    model = fit_neural_classifier(kind, X, y, K, side_width=SIDE,
                                  grid_dim=DIM, hidden=5, filters=4,
                                  side_units=3, epochs=2, batch_size=8, seed=6)
    clone = NeuralModel.from_dict(json.loads(json.dumps(model.to_dict())))
    np.testing.assert_array_equal(clone.predict_proba(X), model.predict_proba(X))
    assert clone.loss_curve == model.loss_curve
    assert clone.kind == kind


def test_shape_and_kind_guards():
    rng = np.random.RandomState(27)
    X, y = _toy_rows(rng, n=10)
    with pytest.raises(ShapeError):
        fit_neural_classifier("cnn", X[:, :-1], y, K, side_width=SIDE,
                              grid_dim=DIM)
    with pytest.raises(ConfigurationError):
        fit_neural_classifier("gru", X, y, K, side_width=SIDE, grid_dim=DIM)
    with pytest.raises(ConfigurationError):
        CnnClassifier(2, DIM, K, 0, kernel=3)
    model = fit_neural_classifier("cnn", X, y, K, side_width=SIDE,
                                  grid_dim=DIM, filters=4, hidden=5,
                                  side_units=3, epochs=1, seed=1)
    with pytest.raises(ShapeError):
        model.predict_proba(X[:, :-2])
    bad = model.to_dict()
    bad["kind"] = "mlp"
    with pytest.raises(ConfigurationError):
        NeuralModel.from_dict(bad)
