"""Phrase sequences and 10-dim skip-gram embeddings over resume tokens.

Every structured field value is one atomic token; numeric bands are rendered
as categorical tokens ("salary_4", "quarter_4") so they share the embedding
space with the text phrases.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter

import numpy as np
from numba import config, njit, prange, set_num_threads, uint64

from .corpus import Resume
from .errors import ArtifactError, TokenLookupError, TrainingError

PHRASES_PER_EXPERIENCE = 7
PERSONAL_PHRASES = 3


def salary_token(band: int) -> str:
    return f"salary_{band}"


def size_token(band: int) -> str:
    return f"size_{band}"


def quarter_token(quarters: int) -> str:
    return f"quarter_{quarters}"


def age_token(age: int) -> str:
    return f"age_{age}"


def experience_phrases(exp) -> list:
    """The 7-token rendering of one work experience, in fixed order."""
    return [
        exp.department,
        exp.industry,
        exp.position_name,
        salary_token(exp.salary),
        size_token(exp.size),
        exp.experience_type,
        quarter_token(exp.quarter_count),
    ]


def build_phrase_sequence(resume: Resume, mask_last: bool = False) -> list:
    """Ordered token list of length n*7+3 (or (n-1)*7+3 when masked).

    Unsupervised training uses the full sequence; supervised featurization
    masks the last experience because it is the prediction target.
    """
    experiences = resume.history if mask_last else resume.experiences
    tokens = []
    for exp in experiences:
        tokens.extend(experience_phrases(exp))
    tokens.append(age_token(resume.age))
    tokens.append(resume.major)
    tokens.append(resume.gender)
    return tokens


# ---------------------------------------------------------------------------
# skip-gram with negative sampling
# ---------------------------------------------------------------------------

_NEG_TABLE_SIZE = 1 << 17
_LR_FLOOR_FACTOR = 1e-4


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def pair_loss(w: np.ndarray, c: np.ndarray, label: int) -> float:
    """Negative-sampling loss for a single (input, output) vector pair."""
    x = float(np.dot(w, c))
    return -np.log(sigmoid(x)) if label else -np.log(sigmoid(-x))


def pair_grad(w: np.ndarray, c: np.ndarray, label: int):
    """Analytic gradients of pair_loss with respect to both vectors."""
    g = sigmoid(float(np.dot(w, c))) - float(label)
    return g * c, g * w


@njit(uint64(uint64), cache=True, inline="always")
def _splitmix64(x):
    x = x + uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> uint64(27))) * uint64(0x94D049BB133111EB)
    return x ^ (x >> uint64(31))


@njit(uint64(uint64), cache=True, inline="always")
def _xorshift64(x):
    x ^= x << uint64(13)
    x ^= x >> uint64(7)
    x ^= x << uint64(17)
    return x


@njit(cache=True, inline="always")
def _train_sentence(tokens, start, end, W, C, table, window, negatives,
                    lr0, lr_floor, epoch, n_tokens, total, state, neu1e):
    dim = W.shape[1]
    table_size = table.shape[0]
    for t in range(start, end):
        lr = lr0 * (1.0 - (epoch * n_tokens + t) / total)
        if lr < lr_floor:
            lr = lr_floor
        center = tokens[t]
        state = _xorshift64(state)
        shrink = state % uint64(window)
        span = window - int(shrink)
        lo = t - span
        if lo < start:
            lo = start
        hi = t + span + 1
        if hi > end:
            hi = end
        for c_pos in range(lo, hi):
            if c_pos == t:
                continue
            ctx = tokens[c_pos]
            for k in range(dim):
                neu1e[k] = 0.0
            for d in range(negatives + 1):
                if d == 0:
                    target = center
                    label = 1.0
                else:
                    state = _xorshift64(state)
                    target = table[state % uint64(table_size)]
                    if target == center:
                        continue
                    label = 0.0
                f = 0.0
                for k in range(dim):
                    f += W[ctx, k] * C[target, k]
                g = (label - 1.0 / (1.0 + np.exp(-f))) * lr
                for k in range(dim):
                    neu1e[k] += g * C[target, k]
                    C[target, k] += g * W[ctx, k]
            for k in range(dim):
                W[ctx, k] += neu1e[k]
    return state


@njit(cache=True)
def _sg_epochs(tokens, offsets, W, C, table, window, negatives, epochs,
               lr0, lr_floor, seed):
    n_sent = offsets.shape[0] - 1
    n_tokens = tokens.shape[0]
    total = float(max(1, epochs * n_tokens))
    neu1e = np.zeros(W.shape[1])
    for epoch in range(epochs):
        for s in range(n_sent):
            state = _splitmix64(uint64(seed) ^ (uint64(epoch * n_sent + s + 1) * uint64(0x9E3779B97F4A7C15)))
            _train_sentence(tokens, offsets[s], offsets[s + 1], W, C, table,
                            window, negatives, lr0, lr_floor, epoch, n_tokens,
                            total, state, neu1e)


@njit(cache=True, parallel=True)
def _sg_epochs_parallel(tokens, offsets, W, C, table, window, negatives,
                        epochs, lr0, lr_floor, seed):
    # Lock-free hogwild over sentences: weight updates race, so results are
    # not reproducible. Per-sentence RNG streams keep sampling well spread.
    n_sent = offsets.shape[0] - 1
    n_tokens = tokens.shape[0]
    total = float(max(1, epochs * n_tokens))
    for epoch in range(epochs):
        for s in prange(n_sent):
            neu1e = np.zeros(W.shape[1])
            state = _splitmix64(uint64(seed) ^ (uint64(epoch * n_sent + s + 1) * uint64(0x9E3779B97F4A7C15)))
            _train_sentence(tokens, offsets[s], offsets[s + 1], W, C, table,
                            window, negatives, lr0, lr_floor, epoch, n_tokens,
                            total, state, neu1e)


def _negative_table(counts: np.ndarray, size: int = _NEG_TABLE_SIZE) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    cum = np.cumsum(weights / weights.sum())
    grid = (np.arange(size) + 0.5) / size
    return np.minimum(np.searchsorted(cum, grid), len(counts) - 1).astype(np.int64)


class EmbeddingTable:
    """Immutable token -> vector map with training metadata."""

    def __init__(self, tokens, vectors, meta):
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.meta = dict(meta)
        self.oov_lookups = 0  # fallback statistics, informational only

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self.index

    def embed(self, token: str) -> np.ndarray:
        row = self.index.get(token)
        if row is None:
            self.oov_lookups += 1
            return np.zeros(self.dimension)
        return self.vectors[row]

    def embed_mean(self, tokens) -> np.ndarray:
        """Average embedding of a multi-word phrase."""
        if not tokens:
            return np.zeros(self.dimension)
        return np.mean([self.embed(t) for t in tokens], axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def most_similar(table: EmbeddingTable, token: str, k: int):
    """Top-k vocabulary tokens by cosine similarity, query excluded."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    row = table.index.get(token)
    if row is None:
        raise TokenLookupError(token)
    q = table.vectors[row]
    qn = np.linalg.norm(q)
    norms = np.linalg.norm(table.vectors, axis=1)
    denom = norms * qn
    sims = np.where(denom > 0.0, table.vectors @ q / np.where(denom == 0.0, 1.0, denom), 0.0)
    order = np.lexsort((np.arange(len(sims)), -sims))
    out = []
    for i in order:
        if i == row:
            continue
        out.append((table.tokens[i], float(sims[i])))
        if len(out) == k:
            break
    return out


def train_skipgram(sequences, dim: int = 10, window: int = 5, negatives: int = 5,
                   epochs: int = 15, seed: int = 1, min_count: int = 2,
                   learning_rate: float = 0.025, threads: int = 1) -> EmbeddingTable:
    """Train skip-gram embeddings with negative sampling.

    Deterministic for threads=1; threads>1 switches to a lock-free parallel
    mode whose weight races make results run-dependent.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    counts = Counter(tok for seq in sequences for tok in seq)
    vocab = sorted((t for t, c in counts.items() if c >= min_count),
                   key=lambda t: (-counts[t], t))
    if not vocab:
        raise TrainingError(f"vocabulary empty after min_count={min_count} pruning")
    index = {t: i for i, t in enumerate(vocab)}

    encoded, offsets = [], [0]
    for seq in sequences:
        ids = [index[t] for t in seq if t in index]
        if ids:
            encoded.extend(ids)
            offsets.append(len(encoded))
    tokens = np.asarray(encoded, dtype=np.int64)
    offset_arr = np.asarray(offsets, dtype=np.int64)

    rng = np.random.RandomState(seed)
    W = (rng.random_sample((len(vocab), dim)) - 0.5) / dim
    C = np.zeros((len(vocab), dim))

    if epochs > 0 and tokens.size > 0:
        table = _negative_table(np.asarray([counts[t] for t in vocab]))
        lr_floor = learning_rate * _LR_FLOOR_FACTOR
        usable = min(int(threads), config.NUMBA_NUM_THREADS)
        if threads > 1 and usable < threads:
            warnings.warn(
                f"only {usable} worker thread(s) available; requested {threads}",
                stacklevel=2,
            )
        if usable > 1:
            set_num_threads(usable)
            _sg_epochs_parallel(tokens, offset_arr, W, C, table, window,
                                negatives, epochs, learning_rate, lr_floor, seed)
        else:
            _sg_epochs(tokens, offset_arr, W, C, table, window, negatives,
                       epochs, learning_rate, lr_floor, seed)

    meta = {
        "dim": dim, "window": window, "negatives": negatives, "epochs": epochs,
        "min_count": min_count, "learning_rate": learning_rate, "seed": seed,
        "threads": threads, "corpus_tokens": int(tokens.size),
    }
    return EmbeddingTable(vocab, W, meta)


# ---------------------------------------------------------------------------
# artifact format: one JSON header line, then token<TAB>value... records
# ---------------------------------------------------------------------------

EMBEDDING_MAGIC = "jobmatch/embeddings"
EMBEDDING_FORMAT_VERSION = 1


def save_table(path, table: EmbeddingTable, inputs=None) -> str:
    from .artifacts import sha256_text

    lines = []
    for i, token in enumerate(table.tokens):
        values = " ".join(repr(float(v)) for v in table.vectors[i])
        lines.append(f"{token}\t{values}")
    body = "\n".join(lines)
    header = {
        "magic": EMBEDDING_MAGIC,
        "format_version": EMBEDDING_FORMAT_VERSION,
        "vocab_size": len(table),
        **table.meta,
        "inputs": inputs or {},
        "content_hash": sha256_text(body),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True))
        fh.write("\n")
        fh.write(body)
        fh.write("\n")
    return header["content_hash"]


def load_table(path) -> EmbeddingTable:
    from .artifacts import sha256_text

    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        body = fh.read().rstrip("\n")
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: bad embedding header: {exc}") from exc
    if header.get("magic") != EMBEDDING_MAGIC:
        raise ArtifactError(f"{path}: not an embedding artifact")
    if header.get("format_version") != EMBEDDING_FORMAT_VERSION:
        raise ArtifactError(f"{path}: unsupported embedding format version")
    if header.get("content_hash") != sha256_text(body):
        raise ArtifactError(f"{path}: embedding payload hash mismatch")
    tokens, rows = [], []
    if body:
        for line in body.split("\n"):
            token, values = line.split("\t")
            tokens.append(token)
            rows.append([float(v) for v in values.split(" ")])
    meta = {k: v for k, v in header.items()
            if k not in ("magic", "format_version", "vocab_size", "inputs", "content_hash")}
    table = EmbeddingTable(tokens, np.asarray(rows), meta)
    table.header = header
    return table
