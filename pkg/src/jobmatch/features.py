"""Fixed-layout 547-dim feature vectors: 95 manual + 72 cluster + 380 semantic.

All supervised features are computed from the resume history with the last
(current) experience masked out, because that experience is the prediction
target. Layout:

    [0, 95)    manual features (slot catalog in MANUAL_SLOTS)
    [95, 167)  cluster ids: 5 recent experiences x 7 phrase slots under each
               k-means model, then one dominant-topic id per LDA model
    [167, 547) semantic: 10-dim embeddings of the 38 phrase slots
               (5 experiences x 7 + age/major/gender)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import KMeansModel, LdaModel, kmeans_assign_batch, lda_dominant_topic
from .corpus import Corpus, EMPTY_PHRASE, Resume, months_between
from .embeddings import (
    EmbeddingTable,
    age_token,
    build_phrase_sequence,
    experience_phrases,
)
from .errors import ConfigurationError

LAYOUT_VERSION = 1

RECENT_WINDOW = 5
PHRASE_SLOTS_PER_EXPERIENCE = 7
GRID_STEPS = RECENT_WINDOW * PHRASE_SLOTS_PER_EXPERIENCE + 3  # 38

MANUAL_WIDTH = 95
PAD_ID = -1.0  # sentinel for phrase slots of experiences that do not exist

# Phrase-valued fields that map through insertion-order dictionaries.
DICT_FIELDS = ("gender", "major", "department", "industry", "position", "type")

_PERSONAL_SLOTS = ["gender_key", "age", "major_key", "degree"]
_AGGREGATE_SLOTS = [
    "experience_count",
    "salary_max", "salary_min", "salary_mean", "salary_first", "salary_last",
    "salary_span", "salary_up_steps", "salary_down_steps",
    "size_max", "size_min", "size_mean", "size_last",
    "quarters_total", "quarters_mean", "quarters_max", "quarters_min",
    "age_first_employed",
    "industry_changes", "position_changes", "department_changes",
    "distinct_industries", "distinct_positions", "distinct_departments",
    "type_present_count",
]
_RECENT_FIELDS = [
    "department_key", "industry_key", "position_key",
    "salary", "size", "type_key", "quarters",
]

MANUAL_SLOTS = list(_PERSONAL_SLOTS) + list(_AGGREGATE_SLOTS)
MANUAL_SLOTS += [
    f"recent{j}_{name}" for j in range(RECENT_WINDOW) for name in _RECENT_FIELDS
]
_RECENT_BASE = len(_PERSONAL_SLOTS) + len(_AGGREGATE_SLOTS)
MANUAL_SLOTS += [f"reserved_{i}" for i in range(len(MANUAL_SLOTS), MANUAL_WIDTH)]
assert len(MANUAL_SLOTS) == MANUAL_WIDTH

MANUAL_SLICE = slice(0, MANUAL_WIDTH)


def cluster_width(n_kmeans: int, n_lda: int) -> int:
    return RECENT_WINDOW * PHRASE_SLOTS_PER_EXPERIENCE * n_kmeans + n_lda


def semantic_width(dim: int) -> int:
    return GRID_STEPS * dim


@dataclass
class FeatureVector:
    values: np.ndarray
    layout_version: int = LAYOUT_VERSION


@dataclass
class FeatureArtifacts:
    """Everything featurization needs, all fitted on the training split."""

    embedding: EmbeddingTable
    kmeans_models: list
    lda_models: list
    dicts: dict
    fitted_ids: list
    layout_version: int = LAYOUT_VERSION
    _phrase_cluster_cache: dict = field(default_factory=dict, repr=False)

    @property
    def cluster_width(self) -> int:
        return cluster_width(len(self.kmeans_models), len(self.lda_models))

    @property
    def semantic_width(self) -> int:
        return semantic_width(self.embedding.dimension)

    @property
    def total_width(self) -> int:
        return MANUAL_WIDTH + self.cluster_width + self.semantic_width

    @property
    def cluster_slice(self) -> slice:
        return slice(MANUAL_WIDTH, MANUAL_WIDTH + self.cluster_width)

    @property
    def semantic_slice(self) -> slice:
        return slice(MANUAL_WIDTH + self.cluster_width, self.total_width)

    def dict_key(self, field_name: str, token: str) -> int:
        """Stable insertion-order key; 0 is reserved for empty/unseen."""
        return self.dicts[field_name].get(token, 0)

    def phrase_cluster_ids(self, token: str) -> np.ndarray:
        """Cluster id of a phrase under every k-means model, cached."""
        hit = self._phrase_cluster_cache.get(token)
        if hit is None:
            vec = self.embedding.embed(token)[None, :]
            hit = np.asarray(
                [int(kmeans_assign_batch(m, vec)[0]) for m in self.kmeans_models]
            )
            self._phrase_cluster_cache[token] = hit
        return hit


def fit_feature_artifacts(train_corpus: Corpus, embedding: EmbeddingTable,
                          kmeans_models, lda_models) -> FeatureArtifacts:
    """Freeze the categorical dictionaries over the training split.

    Key 0 is the empty/unseen sentinel; real tokens number from 1 in first
    seen order.
    """
    dicts = {name: {EMPTY_PHRASE: 0} for name in DICT_FIELDS}

    def _note(name, token):
        d = dicts[name]
        if token not in d:
            d[token] = len(d)

    for resume in train_corpus.resumes:
        _note("gender", resume.gender)
        _note("major", resume.major)
        for exp in resume.experiences:
            _note("department", exp.department)
            _note("industry", exp.industry)
            _note("position", exp.position_name)
            _note("type", exp.experience_type)

    return FeatureArtifacts(
        embedding=embedding,
        kmeans_models=list(kmeans_models),
        lda_models=list(lda_models),
        dicts=dicts,
        fitted_ids=sorted(train_corpus.ids()),
    )


def _recent_history(resume: Resume, mask_last: bool):
    """Masked experiences, most recent first, capped at RECENT_WINDOW."""
    history = resume.history if mask_last else resume.experiences
    return list(reversed(history))[:RECENT_WINDOW], history


def manual_features(resume: Resume, artifacts: FeatureArtifacts,
                    mask_last: bool = True) -> np.ndarray:
    recent, history = _recent_history(resume, mask_last)
    vec = np.zeros(MANUAL_WIDTH)
    vec[0] = artifacts.dict_key("gender", resume.gender)
    vec[1] = resume.age
    vec[2] = artifacts.dict_key("major", resume.major)
    vec[3] = resume.degree

    if history:
        salaries = [e.salary for e in history]
        sizes = [e.size for e in history]
        quarters = [e.quarter_count for e in history]
        base = len(_PERSONAL_SLOTS)
        agg = {
            "experience_count": len(history),
            "salary_max": max(salaries),
            "salary_min": min(salaries),
            "salary_mean": float(np.mean(salaries)),
            "salary_first": salaries[0],
            "salary_last": salaries[-1],
            "salary_span": max(salaries) - min(salaries),
            "salary_up_steps": sum(b > a for a, b in zip(salaries, salaries[1:])),
            "salary_down_steps": sum(b < a for a, b in zip(salaries, salaries[1:])),
            "size_max": max(sizes),
            "size_min": min(sizes),
            "size_mean": float(np.mean(sizes)),
            "size_last": sizes[-1],
            "quarters_total": sum(quarters),
            "quarters_mean": float(np.mean(quarters)),
            "quarters_max": max(quarters),
            "quarters_min": min(quarters),
            "age_first_employed": resume.age - months_between(
                history[0].start_date, max(e.end_date for e in history)
            ) // 12,
            "industry_changes": sum(
                a.industry != b.industry for a, b in zip(history, history[1:])
            ),
            "position_changes": sum(
                a.position_name != b.position_name for a, b in zip(history, history[1:])
            ),
            "department_changes": sum(
                a.department != b.department for a, b in zip(history, history[1:])
            ),
            "distinct_industries": len({e.industry for e in history}),
            "distinct_positions": len({e.position_name for e in history}),
            "distinct_departments": len({e.department for e in history}),
            "type_present_count": sum(e.experience_type != EMPTY_PHRASE for e in history),
        }
        for offset, name in enumerate(_AGGREGATE_SLOTS):
            vec[base + offset] = agg[name]

    for j in range(RECENT_WINDOW):
        base = _RECENT_BASE + j * len(_RECENT_FIELDS)
        if j < len(recent):
            exp = recent[j]
            vec[base + 0] = artifacts.dict_key("department", exp.department)
            vec[base + 1] = artifacts.dict_key("industry", exp.industry)
            vec[base + 2] = artifacts.dict_key("position", exp.position_name)
            vec[base + 3] = exp.salary
            vec[base + 4] = exp.size
            vec[base + 5] = artifacts.dict_key("type", exp.experience_type)
            vec[base + 6] = exp.quarter_count
        else:
            vec[base : base + len(_RECENT_FIELDS)] = PAD_ID
    return vec


def _grid_tokens(resume: Resume, mask_last: bool):
    """The 38 phrase-slot tokens, most recent experience first; None where
    the history is shorter than the window."""
    recent, _ = _recent_history(resume, mask_last)
    slots = []
    for j in range(RECENT_WINDOW):
        if j < len(recent):
            slots.extend(experience_phrases(recent[j]))
        else:
            slots.extend([None] * PHRASE_SLOTS_PER_EXPERIENCE)
    slots.append(age_token(resume.age))
    slots.append(resume.major)
    slots.append(resume.gender)
    return slots


def cluster_features(resume: Resume, artifacts: FeatureArtifacts,
                     mask_last: bool = True) -> np.ndarray:
    n_phrase = RECENT_WINDOW * PHRASE_SLOTS_PER_EXPERIENCE
    vec = np.empty(artifacts.cluster_width)
    phrase_slots = _grid_tokens(resume, mask_last)[:n_phrase]
    for m, model in enumerate(artifacts.kmeans_models):
        base = m * n_phrase
        for s, token in enumerate(phrase_slots):
            if token is None:
                vec[base + s] = PAD_ID
            else:
                vec[base + s] = artifacts.phrase_cluster_ids(token)[m]
    doc = build_phrase_sequence(resume, mask_last=mask_last)
    base = len(artifacts.kmeans_models) * n_phrase
    for i, model in enumerate(artifacts.lda_models):
        vec[base + i] = lda_dominant_topic(model, doc)
    return vec


def semantic_features(resume: Resume, artifacts: FeatureArtifacts,
                      mask_last: bool = True) -> np.ndarray:
    dim = artifacts.embedding.dimension
    vec = np.zeros(artifacts.semantic_width)
    for s, token in enumerate(_grid_tokens(resume, mask_last)):
        if token is not None:
            vec[s * dim : (s + 1) * dim] = artifacts.embedding.embed(token)
    return vec


def featurize(resume: Resume, artifacts: FeatureArtifacts,
              mask_last: bool = True) -> FeatureVector:
    if artifacts.layout_version != LAYOUT_VERSION:
        raise ConfigurationError(
            f"feature artifacts use layout_version {artifacts.layout_version}, "
            f"this build writes {LAYOUT_VERSION}"
        )
    values = np.concatenate([
        manual_features(resume, artifacts, mask_last),
        cluster_features(resume, artifacts, mask_last),
        semantic_features(resume, artifacts, mask_last),
    ])
    if not np.all(np.isfinite(values)):
        raise ConfigurationError(f"non-finite feature values for resume {resume.id}")
    return FeatureVector(values, artifacts.layout_version)


def featurize_corpus(corpus: Corpus, artifacts: FeatureArtifacts) -> np.ndarray:
    return np.stack([featurize(r, artifacts).values for r in corpus.resumes])


def semantic_grid(X: np.ndarray, artifacts_or_dim) -> np.ndarray:
    """Reshape the semantic block of a feature matrix to (n, 38, dim)."""
    if isinstance(artifacts_or_dim, FeatureArtifacts):
        dim = artifacts_or_dim.embedding.dimension
        sem = X[:, artifacts_or_dim.semantic_slice]
    else:
        dim = int(artifacts_or_dim)
        sem = X[:, X.shape[1] - GRID_STEPS * dim :]
    return sem.reshape(X.shape[0], GRID_STEPS, dim)
