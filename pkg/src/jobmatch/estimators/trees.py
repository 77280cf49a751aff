"""Decision-tree learners: random forests and gradient boosted trees.

Both learners run the same exact-greedy split search over a single global
presort of the feature matrix. Node membership is carried as one sorted
index row per feature; children reuse the parent's rows through boolean
compaction, so nothing is re-sorted after the initial argsort.

Tie policy everywhere: when two candidate splits score identically the
lower feature id wins, and within a feature the lower threshold wins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, TrainingError
from .numerics import check_labels, log_loss, one_hot, softmax

_GAIN_TOL = 1e-12
_CHUNK_CELLS = 2_000_000  # feature-chunk budget for the class-count cumsums


@dataclass
class Tree:
    """Flat array form: feature[i] < 0 marks node i as a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Route every row to its leaf; returns (n, value_width)."""
        idx = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            safe = np.where(internal, feat, 0)
            go_left = X[rows, safe] <= self.threshold[idx]
            step = np.where(go_left, self.left[idx], self.right[idx])
            idx = np.where(internal, step, idx)
        return self.value[idx]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float),
        )


class _NodeStore:
    """Append-only node arrays while a tree is grown."""

    def __init__(self, value_width: int):
        self.feature: list = []
        self.threshold: list = []
        self.left: list = []
        self.right: list = []
        self.value: list = []
        self.value_width = value_width

    def add_leaf(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.asarray(value, dtype=float).reshape(self.value_width))
        return len(self.feature) - 1

    def set_split(self, node: int, feat: int, thr: float, left: int, right: int):
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = left
        self.right[node] = right

    def freeze(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.stack(self.value),
        )


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature ascending sample order, shape (features, samples)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def order_subset(order: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Restrict a presort to member rows, preserving per-feature order.

    member is a boolean mask over samples. Boolean fancy indexing walks the
    (features, samples) array in row-major order, so the kept entries come
    out feature by feature, already sorted.
    """
    keep = member[order]
    count = int(member.sum())
    return order[keep].reshape(order.shape[0], count)


def _child_orders(node_order: np.ndarray, left_member: np.ndarray):
    keep = left_member[node_order]
    n_left = int(keep[0].sum())
    n_feat, n_node = node_order.shape
    left = node_order[keep].reshape(n_feat, n_left)
    right = node_order[~keep].reshape(n_feat, n_node - n_left)
    return left, right


def _best_split_gini(X, class_weights, node_order, feat_ids, min_leaf_weight):
    """Best weighted-Gini split over feat_ids (ascending feature ids).

    Returns (decrease, feature, threshold, n_left) or None. The score being
    maximised is sum_child(sum_k counts_k^2 / W_child), which orders splits
    identically to the Gini decrease for a fixed parent.
    """
    n_node = node_order.shape[1]
    n_classes = class_weights.shape[1]
    parent = class_weights[node_order[0]].sum(axis=0)
    weight = parent.sum()
    parent_sq = float(parent @ parent)

    best_score = -np.inf
    best = None
    chunk = max(1, _CHUNK_CELLS // max(1, n_node * n_classes))
    for start in range(0, len(feat_ids), chunk):
        feats = feat_ids[start : start + chunk]
        orders = node_order[feats]
        values = X[orders, feats[:, None]]
        cums = np.cumsum(class_weights[orders], axis=1)[:, :-1, :]
        w_left = cums.sum(axis=2)
        w_right = weight - w_left
        sq_left = np.einsum("cik,cik->ci", cums, cums)
        right = parent - cums
        sq_right = np.einsum("cik,cik->ci", right, right)
        valid = (
            (values[:, 1:] > values[:, :-1])
            & (w_left >= min_leaf_weight)
            & (w_right >= min_leaf_weight)
        )
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(valid, sq_left / w_left + sq_right / w_right, -np.inf)
        flat = int(np.argmax(score))
        row, pos = divmod(flat, score.shape[1])
        # strict > keeps the earliest (lowest feature id, lowest threshold)
        if score[row, pos] > best_score:
            best_score = score[row, pos]
            thr = 0.5 * (values[row, pos] + values[row, pos + 1])
            best = (int(feats[row]), float(thr), pos + 1)

    if best is None:
        return None
    decrease = best_score - parent_sq / weight
    if decrease <= _GAIN_TOL:
        return None
    feat, thr, n_left = best
    return decrease, feat, thr, n_left


def _best_split_gain(X, grad, hess, node_order, reg_lambda, min_child_weight):
    """Best second-order gain split over all features.

    gain = 0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)), children must both
    carry at least min_child_weight hessian mass.
    """
    n_feat = node_order.shape[0]
    rows0 = node_order[0]
    g_total = float(grad[rows0].sum())
    h_total = float(hess[rows0].sum())
    parent_term = g_total * g_total / (h_total + reg_lambda)

    values = X[node_order, np.arange(n_feat)[:, None]]
    g_left = np.cumsum(grad[node_order], axis=1)[:, :-1]
    h_left = np.cumsum(hess[node_order], axis=1)[:, :-1]
    g_right = g_total - g_left
    h_right = h_total - h_left
    valid = (
        (values[:, 1:] > values[:, :-1])
        & (h_left >= min_child_weight)
        & (h_right >= min_child_weight)
    )
    if not valid.any():
        return None
    gain = 0.5 * (
        g_left**2 / (h_left + reg_lambda)
        + g_right**2 / (h_right + reg_lambda)
        - parent_term
    )
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    row, pos = divmod(flat, gain.shape[1])
    if gain[row, pos] <= _GAIN_TOL:
        return None
    thr = 0.5 * (values[row, pos] + values[row, pos + 1])
    return float(gain[row, pos]), int(row), float(thr), pos + 1


def leaf_weight(grad_sum: float, hess_sum: float, reg_lambda: float) -> float:
    """Regularised Newton step used as the regression-leaf output."""
    return -grad_sum / (hess_sum + reg_lambda)


def _grow_classification(X, class_weights, root_order, *, max_depth,
                         min_leaf_weight, n_sub, rng):
    n_samples, n_feat = X.shape
    store = _NodeStore(class_weights.shape[1])
    limit = max_depth if max_depth is not None else 1 << 30

    def grow(node_order, depth):
        counts = class_weights[node_order[0]].sum(axis=0)
        weight = counts.sum()
        node = store.add_leaf(counts / weight)
        pure = int((counts > 0).sum()) <= 1
        if depth >= limit or pure or weight < 2 * min_leaf_weight:
            return node
        if n_sub < n_feat:
            feats = np.sort(rng.permutation(n_feat)[:n_sub])
        else:
            feats = np.arange(n_feat)
        found = _best_split_gini(X, class_weights, node_order, feats,
                                 min_leaf_weight)
        if found is None:
            return node
        _, feat, thr, n_left = found
        member = np.zeros(n_samples, dtype=bool)
        member[node_order[feat][:n_left]] = True
        left_order, right_order = _child_orders(node_order, member)
        left = grow(left_order, depth + 1)
        right = grow(right_order, depth + 1)
        store.set_split(node, feat, thr, left, right)
        return node

    grow(root_order, 0)
    return store.freeze()


def _grow_regression(X, grad, hess, root_order, *, max_depth, reg_lambda,
                     min_child_weight):
    n_samples = X.shape[0]
    store = _NodeStore(1)

    def grow(node_order, depth):
        rows = node_order[0]
        value = leaf_weight(grad[rows].sum(), hess[rows].sum(), reg_lambda)
        node = store.add_leaf([value])
        if depth >= max_depth:
            return node
        found = _best_split_gain(X, grad, hess, node_order, reg_lambda,
                                 min_child_weight)
        if found is None:
            return node
        _, feat, thr, n_left = found
        member = np.zeros(n_samples, dtype=bool)
        member[node_order[feat][:n_left]] = True
        left_order, right_order = _child_orders(node_order, member)
        left = grow(left_order, depth + 1)
        right = grow(right_order, depth + 1)
        store.set_split(node, feat, thr, left, right)
        return node

    grow(root_order, 0)
    return store.freeze()


def _resolve_feature_count(n_feat: int, feature_fraction) -> int:
    if feature_fraction == "sqrt":
        return max(1, int(np.sqrt(n_feat)))
    frac = float(feature_fraction)
    if not 0.0 < frac <= 1.0:
        raise ConfigurationError(
            f"feature_fraction must be 'sqrt' or in (0, 1], got {feature_fraction}"
        )
    return max(1, int(round(frac * n_feat)))


@dataclass
class RandomForestModel:
    trees: list
    n_classes: int
    n_features: int
    params: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features:
            raise ConfigurationError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        acc = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            acc += tree.predict_value(X)
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "random_forest",
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "params": self.params,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RandomForestModel":
        return cls(
            trees=[Tree.from_dict(t) for t in data["trees"]],
            n_classes=int(data["n_classes"]),
            n_features=int(data["n_features"]),
            params=dict(data.get("params", {})),
        )


def train_random_forest(X, y, n_classes=None, *, trees=50, max_depth=16,
                        feature_fraction="sqrt", min_samples_leaf=1,
                        bootstrap=True, seed=0):
    """Bagged Gini trees with per-node feature subsampling.

    The bootstrap is carried as integer per-sample weights, so the global
    presort is shared by every tree; rows drawn zero times are simply
    excluded from the root membership.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ConfigurationError(f"training matrix must be 2-d and non-empty")
    if n_classes is None:
        n_classes = int(np.max(y)) + 1
    y = check_labels(y, n_classes)
    if len(y) != len(X):
        raise ConfigurationError("feature matrix and labels disagree on length")
    if trees < 1:
        raise ConfigurationError(f"need at least one tree, got {trees}")
    if len(np.unique(y)) < 2:
        warnings.warn("training labels collapse to a single class")

    n_samples, n_feat = X.shape
    n_sub = _resolve_feature_count(n_feat, feature_fraction)
    order = presort(X)
    onehot = one_hot(y, n_classes)
    master = np.random.RandomState(seed)
    tree_seeds = master.randint(0, 2**31 - 1, size=trees)

    grown = []
    for tree_seed in tree_seeds:
        rng = np.random.RandomState(tree_seed)
        if bootstrap:
            draw = rng.randint(0, n_samples, n_samples)
            weights = np.bincount(draw, minlength=n_samples).astype(float)
        else:
            weights = np.ones(n_samples)
        member = weights > 0
        root_order = order_subset(order, member)
        grown.append(
            _grow_classification(
                X, onehot * weights[:, None], root_order,
                max_depth=max_depth, min_leaf_weight=float(min_samples_leaf),
                n_sub=n_sub, rng=rng,
            )
        )
    return RandomForestModel(
        trees=grown, n_classes=n_classes, n_features=n_feat,
        params={
            "trees": trees, "max_depth": max_depth,
            "feature_fraction": feature_fraction,
            "min_samples_leaf": min_samples_leaf,
            "bootstrap": bool(bootstrap), "seed": int(seed),
        },
    )


@dataclass
class GbtModel:
    """Round-major list of per-class regression trees on softmax gradients."""

    trees: list
    n_classes: int
    n_features: int
    learning_rate: float
    params: dict = field(default_factory=dict)
    loss_curve: list = field(default_factory=list)

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features:
            raise ConfigurationError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        raw = np.zeros((len(X), self.n_classes))
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                raw[:, k] += self.learning_rate * tree.predict_value(X)[:, 0]
        return raw

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.raw_scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "gbt",
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "params": self.params,
            "loss_curve": list(self.loss_curve),
            "trees": [[t.to_dict() for t in rnd] for rnd in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GbtModel":
        return cls(
            trees=[[Tree.from_dict(t) for t in rnd] for rnd in data["trees"]],
            n_classes=int(data["n_classes"]),
            n_features=int(data["n_features"]),
            learning_rate=float(data["learning_rate"]),
            params=dict(data.get("params", {})),
            loss_curve=[float(v) for v in data.get("loss_curve", [])],
        )


def train_gbt(X, y, n_classes=None, *, rounds=20, learning_rate=0.3,
              max_depth=3, reg_lambda=1.0, min_child_weight=1.0):
    """Gradient boosted trees on the softmax cross entropy.

    Each round fits one regression tree per class to the loss gradients
    G = P - Y with diagonal hessians H = P(1 - P); leaves output the
    regularised Newton step -G/(H + reg_lambda). Training is deterministic:
    exact greedy splits need no randomness.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ConfigurationError("training matrix must be 2-d and non-empty")
    if n_classes is None:
        n_classes = int(np.max(y)) + 1
    y = check_labels(y, n_classes)
    if len(y) != len(X):
        raise ConfigurationError("feature matrix and labels disagree on length")
    if rounds < 1:
        raise ConfigurationError(f"need at least one boosting round, got {rounds}")
    if learning_rate < 0:
        raise ConfigurationError(f"learning_rate must be >= 0, got {learning_rate}")

    order = presort(X)
    onehot = one_hot(y, n_classes)
    raw = np.zeros((len(X), n_classes))
    loss_curve = [log_loss(softmax(raw), y)]

    all_trees = []
    for _ in range(rounds):
        proba = softmax(raw)
        grad = proba - onehot
        hess = proba * (1.0 - proba)
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            raise TrainingError("non-finite boosting gradients")
        round_trees = []
        for k in range(n_classes):
            tree = _grow_regression(
                X, grad[:, k], hess[:, k], order,
                max_depth=max_depth, reg_lambda=reg_lambda,
                min_child_weight=min_child_weight,
            )
            raw[:, k] += learning_rate * tree.predict_value(X)[:, 0]
            round_trees.append(tree)
        all_trees.append(round_trees)
        loss_curve.append(log_loss(softmax(raw), y))

    return GbtModel(
        trees=all_trees, n_classes=n_classes, n_features=X.shape[1],
        learning_rate=float(learning_rate),
        params={
            "rounds": rounds, "max_depth": max_depth,
            "reg_lambda": reg_lambda, "min_child_weight": min_child_weight,
        },
        loss_curve=loss_curve,
    )


def feature_usage(model):
    """(used-feature count, per-feature split tallies) across all trees."""
    if isinstance(model, RandomForestModel):
        trees = model.trees
    elif isinstance(model, GbtModel):
        trees = [t for rnd in model.trees for t in rnd]
    else:
        raise ConfigurationError(f"unsupported model type {type(model).__name__}")
    tallies = np.zeros(model.n_features, dtype=np.int64)
    for tree in trees:
        splits = tree.feature[tree.feature >= 0]
        tallies += np.bincount(splits, minlength=model.n_features)
    return int((tallies > 0).sum()), tallies
