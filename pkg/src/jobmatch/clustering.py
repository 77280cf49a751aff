"""K-means over phrase embeddings and LDA topic models over resumes."""

from __future__ import annotations

from collections import Counter

import numpy as np
from numba import njit, uint64

from .embeddings import _splitmix64, _xorshift64
from .errors import ConfigurationError, ShapeError, TrainingError

UNKNOWN_TOPIC = -1
DEFAULT_INFER_SWEEPS = 50


class KMeansModel:
    def __init__(self, centroids, seed, iterations, inertia, inertia_history=None):
        self.centroids = np.asarray(centroids, dtype=np.float64)
        self.k = self.centroids.shape[0]
        self.seed = seed
        self.iterations = iterations
        self.inertia = inertia
        self.inertia_history = list(inertia_history or [])

    @property
    def dimension(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "iterations": self.iterations,
            "inertia": self.inertia,
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "KMeansModel":
        return cls(np.asarray(data["centroids"]), data["seed"],
                   data["iterations"], data["inertia"])


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # |x-c|^2 expanded; clip guards tiny negatives from cancellation
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * X @ centroids.T
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.RandomState) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.randint(n)]
    d2 = _squared_distances(X, centroids[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            pick = rng.randint(n)
        else:
            pick = rng.choice(n, p=d2 / total)
        centroids[j] = X[pick]
        d2 = np.minimum(d2, _squared_distances(X, centroids[j : j + 1]).ravel())
    return centroids


def kmeans_fit(vectors, k: int, seed: int = 1, max_iter: int = 100,
               tol: float = 1e-7, n_init: int = 10) -> KMeansModel:
    """Lloyd's algorithm with k-means++ seeding, best of n_init restarts.

    Empty clusters are re-seeded to the point farthest from its assigned
    centroid, keeping k fixed.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigurationError("vectors must be a non-empty 2-d array")
    n_distinct = np.unique(X, axis=0).shape[0]
    if k > n_distinct:
        raise ConfigurationError(f"k={k} exceeds {n_distinct} distinct vectors")

    rng = np.random.RandomState(seed)
    best = None
    for _ in range(max(1, n_init)):
        centroids = _kmeanspp_init(X, k, rng)
        history = []
        iterations = 0
        for _ in range(max_iter):
            iterations += 1
            d2 = _squared_distances(X, centroids)
            assign = np.argmin(d2, axis=1)
            history.append(float(d2[np.arange(len(X)), assign].sum()))

            new_centroids = centroids.copy()
            for j in range(k):
                members = assign == j
                if members.any():
                    new_centroids[j] = X[members].mean(axis=0)
            empty = [j for j in range(k) if not (assign == j).any()]
            if empty:
                nearest = d2[np.arange(len(X)), assign].copy()
                for j in empty:
                    far = int(np.argmax(nearest))
                    new_centroids[j] = X[far]
                    nearest[far] = -1.0
            shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
            centroids = new_centroids
            if shift < tol:
                break
        d2 = _squared_distances(X, centroids)
        inertia = float(d2[np.arange(len(X)), np.argmin(d2, axis=1)].sum())
        if best is None or inertia < best.inertia:
            best = KMeansModel(centroids, seed, iterations, inertia, history)
    return best


def kmeans_assign(model: KMeansModel, v) -> int:
    """Nearest-centroid id under squared Euclidean distance, ties to lowest."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.dimension,):
        raise ShapeError(f"expected vector of dim {model.dimension}, got shape {v.shape}")
    return int(np.argmin(_squared_distances(v[None, :], model.centroids)[0]))


def kmeans_assign_batch(model: KMeansModel, V) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != model.dimension:
        raise ShapeError(f"expected (n, {model.dimension}) array, got shape {V.shape}")
    return np.argmin(_squared_distances(V, model.centroids), axis=1)


# ---------------------------------------------------------------------------
# LDA by collapsed Gibbs sampling
# ---------------------------------------------------------------------------


@njit(cache=True)
def _gibbs_sweeps(tokens, doc_of, z, nkw, nk, ndk, alpha, beta, sweeps, seed):
    T, V = nkw.shape
    probs = np.empty(T)
    state = _splitmix64(uint64(seed) * uint64(0x9E3779B97F4A7C15) + uint64(1))
    for _ in range(sweeps):
        for i in range(tokens.shape[0]):
            w = tokens[i]
            d = doc_of[i]
            t = z[i]
            nkw[t, w] -= 1
            nk[t] -= 1
            ndk[d, t] -= 1
            total = 0.0
            for k in range(T):
                total += (ndk[d, k] + alpha) * (nkw[k, w] + beta) / (nk[k] + beta * V)
                probs[k] = total
            state = _xorshift64(state)
            u = (state >> uint64(11)) * (1.0 / 9007199254740992.0) * total
            new_t = T - 1
            for k in range(T):
                if u < probs[k]:
                    new_t = k
                    break
            z[i] = new_t
            nkw[new_t, w] += 1
            nk[new_t] += 1
            ndk[d, new_t] += 1


@njit(cache=True)
def _gibbs_fold_in(tokens, nkw, nk, alpha, beta, sweeps, seed):
    T, V = nkw.shape
    n = tokens.shape[0]
    z = np.empty(n, dtype=np.int64)
    ndk = np.zeros(T, dtype=np.int64)
    probs = np.empty(T)
    state = _splitmix64(uint64(seed) * uint64(0x9E3779B97F4A7C15) + uint64(2))
    for i in range(n):
        state = _xorshift64(state)
        t = int(state % uint64(T))
        z[i] = t
        ndk[t] += 1
    for _ in range(sweeps):
        for i in range(n):
            w = tokens[i]
            t = z[i]
            ndk[t] -= 1
            total = 0.0
            for k in range(T):
                total += (ndk[k] + alpha) * (nkw[k, w] + beta) / (nk[k] + beta * V)
                probs[k] = total
            state = _xorshift64(state)
            u = (state >> uint64(11)) * (1.0 / 9007199254740992.0) * total
            new_t = T - 1
            for k in range(T):
                if u < probs[k]:
                    new_t = k
                    break
            z[i] = new_t
            ndk[new_t] += 1
    return ndk


class LdaModel:
    def __init__(self, topic_count, alpha, beta, vocab, topic_word, seed,
                 iterations, infer_sweeps=DEFAULT_INFER_SWEEPS):
        self.topic_count = topic_count
        self.alpha = alpha
        self.beta = beta
        self.vocab = list(vocab)
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self.topic_word = np.asarray(topic_word, dtype=np.int64)
        self.topic_totals = self.topic_word.sum(axis=1)
        self.seed = seed
        self.iterations = iterations
        self.infer_sweeps = infer_sweeps

    def topic_word_dist(self) -> np.ndarray:
        V = len(self.vocab)
        return (self.topic_word + self.beta) / (
            self.topic_totals[:, None] + self.beta * V
        )

    def to_dict(self) -> dict:
        return {
            "topic_count": self.topic_count,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "infer_sweeps": self.infer_sweeps,
            "vocab": self.vocab,
            "topic_word": self.topic_word.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "LdaModel":
        return cls(
            data["topic_count"], data["alpha"], data["beta"], data["vocab"],
            np.asarray(data["topic_word"]), data["seed"], data["iterations"],
            data.get("infer_sweeps", DEFAULT_INFER_SWEEPS),
        )


def lda_fit(docs, topics: int, alpha: float | None = None, beta: float = 0.01,
            iterations: int = 500, seed: int = 1,
            infer_sweeps: int = DEFAULT_INFER_SWEEPS) -> LdaModel:
    """Collapsed Gibbs sampling; deterministic under seed.

    alpha defaults to 50/topics.
    """
    if topics < 2:
        raise ConfigurationError(f"topics must be >= 2, got {topics}")
    if alpha is None:
        alpha = 50.0 / topics

    counts = Counter(tok for doc in docs for tok in doc)
    vocab = sorted(counts, key=lambda t: (-counts[t], t))
    if not vocab:
        raise TrainingError("all documents are empty")
    index = {t: i for i, t in enumerate(vocab)}

    token_list, doc_list = [], []
    for d, doc in enumerate(docs):
        for tok in doc:
            token_list.append(index[tok])
            doc_list.append(d)
    tokens = np.asarray(token_list, dtype=np.int64)
    doc_of = np.asarray(doc_list, dtype=np.int64)

    rng = np.random.RandomState(seed)
    z = rng.randint(topics, size=tokens.shape[0])
    nkw = np.zeros((topics, len(vocab)), dtype=np.int64)
    nk = np.zeros(topics, dtype=np.int64)
    ndk = np.zeros((len(docs), topics), dtype=np.int64)
    np.add.at(nkw, (z, tokens), 1)
    np.add.at(nk, z, 1)
    np.add.at(ndk, (doc_of, z), 1)

    if iterations > 0:
        _gibbs_sweeps(tokens, doc_of, z, nkw, nk, ndk, float(alpha), float(beta),
                      iterations, seed)
    return LdaModel(topics, float(alpha), float(beta), vocab, nkw, seed,
                    iterations, infer_sweeps)


def lda_infer(model: LdaModel, doc) -> np.ndarray:
    """Doc-topic distribution for an unseen document (fold-in Gibbs).

    Topic-word counts stay frozen; only the local doc-topic counts move.
    """
    ids = np.asarray([model.index[t] for t in doc if t in model.index], dtype=np.int64)
    if ids.size == 0:
        raise ValueError("document has no in-vocabulary tokens")
    ndk = _gibbs_fold_in(ids, model.topic_word, model.topic_totals,
                         model.alpha, model.beta, model.infer_sweeps, model.seed)
    theta = (ndk + model.alpha) / (ids.size + model.topic_count * model.alpha)
    return theta


def lda_dominant_topic(model: LdaModel, doc) -> int:
    """Argmax topic of the inferred distribution; UNKNOWN_TOPIC when the
    document has no in-vocabulary tokens."""
    if not any(t in model.index for t in doc):
        return UNKNOWN_TOPIC
    return int(np.argmax(lda_infer(model, doc)))
