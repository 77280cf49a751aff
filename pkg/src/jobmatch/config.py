"""Run configuration: one serializable object drives every stage.

A run is reproducible from the config plus the input corpus file alone.
Each stage hashes only the fields that can change its output, so editing
an unrelated knob never invalidates existing artifacts. `threads` is
excluded from every stage hash: it may change wall time and, for the
opt-in racy trainers, exact bits, but it is an execution setting, not an
experiment parameter.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .artifacts import canonical_json, sha256_text
from .errors import ConfigurationError


@dataclass(frozen=True)
class RunConfig:
    # paths
    corpus_path: str = "corpus.jsonl"
    artifact_dir: str = "artifacts"
    # global determinism and cohort shaping
    seed: int = 1
    threads: int = 1
    top_k_positions: int = 32
    test_fraction: float = 0.2
    # embedding stage
    embed_dim: int = 10
    embed_window: int = 5
    embed_negatives: int = 5
    embed_epochs: int = 15
    embed_min_count: int = 2
    embed_learning_rate: float = 0.025
    # clustering stage
    kmeans_ks: tuple = (64, 128)
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    lda_topic_counts: tuple = (32, 64)
    lda_iterations: int = 500
    lda_beta: float = 0.01
    lda_infer_sweeps: int = 50
    # tree estimators
    rf_trees: int = 50
    rf_max_depth: int = 16
    rf_feature_fraction: object = "sqrt"
    rf_min_samples_leaf: int = 1
    gbt_rounds: int = 20
    gbt_learning_rate: float = 0.3
    gbt_max_depth: int = 3
    gbt_reg_lambda: float = 1.0
    gbt_min_child_weight: float = 1.0
    # neural estimators; epochs kept low because both networks start
    # overfitting small corpora within ~15 epochs
    neural_epochs: int = 10
    neural_batch_size: int = 64
    neural_learning_rate: float = 0.05
    neural_momentum: float = 0.9
    neural_hidden: int = 64
    cnn_filters: int = 32
    cnn_kernel: int = 3
    side_units: int = 32
    # ensemble + evaluation
    ensemble_members: tuple = ("gbt_all", "rf_all", "cnn_all", "lstm_all")
    recall_ns: tuple = (2, 3, 4)
    # synthetic-corpus generator
    synth_n: int = 2000
    synth_signal: float = 0.85
    synth_corrupt_rate: float = 0.015


_TUPLE_FIELDS = {
    "kmeans_ks", "lda_topic_counts", "ensemble_members", "recall_ns",
}

# Fields whose values feed each stage's config hash. Upstream content is
# covered separately by artifact input hashes, so a stage lists only its
# own knobs.
STAGE_FIELDS = {
    "synth": ("seed", "synth_n", "synth_signal", "synth_corrupt_rate"),
    "ingest": ("seed", "top_k_positions", "test_fraction"),
    "embed": ("seed", "embed_dim", "embed_window", "embed_negatives",
              "embed_epochs", "embed_min_count", "embed_learning_rate"),
    "cluster": ("seed", "kmeans_ks", "kmeans_restarts", "kmeans_max_iter",
                "lda_topic_counts", "lda_iterations", "lda_beta",
                "lda_infer_sweeps"),
    "featurize": (),
    "train": ("seed", "rf_trees", "rf_max_depth", "rf_feature_fraction",
              "rf_min_samples_leaf", "gbt_rounds", "gbt_learning_rate",
              "gbt_max_depth", "gbt_reg_lambda", "gbt_min_child_weight",
              "neural_epochs", "neural_batch_size", "neural_learning_rate",
              "neural_momentum", "neural_hidden", "cnn_filters",
              "cnn_kernel", "side_units"),
    "evaluate": ("ensemble_members", "recall_ns"),
}

# Independent seed streams per randomized stage; task-indexed trainers add
# their task offset on top. Offsets are spaced so streams never collide
# for any task count below 100.
_SEED_OFFSETS = {
    "split": 0,
    "synth": 0,
    "embed": 101,
    "kmeans": 202,
    "lda": 303,
    "rf": 404,
    "cnn": 606,
    "lstm": 707,
}


def derive_seed(config: RunConfig, stream: str, index: int = 0) -> int:
    """Seed for one randomized stage (plus a per-model index)."""
    if stream not in _SEED_OFFSETS:
        raise ConfigurationError(f"unknown seed stream {stream!r}")
    return int(config.seed) + _SEED_OFFSETS[stream] + int(index)


def config_to_dict(config: RunConfig) -> dict:
    out = dataclasses.asdict(config)
    for name in _TUPLE_FIELDS:
        out[name] = list(out[name])
    return out


def stage_config(config: RunConfig, stage: str) -> dict:
    """The JSON-safe subset of fields that defines one stage's output."""
    if stage not in STAGE_FIELDS:
        raise ConfigurationError(f"unknown stage {stage!r}")
    full = config_to_dict(config)
    return {name: full[name] for name in STAGE_FIELDS[stage]}


def stage_config_hash(config: RunConfig, stage: str) -> str:
    return sha256_text(canonical_json(stage_config(config, stage)))


def _coerce(name: str, value):
    if name in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"config field {name!r} must be a list")
        return tuple(value)
    return value


def validate_config(config: RunConfig) -> RunConfig:
    if not 0.0 < config.test_fraction < 1.0:
        raise ConfigurationError("test_fraction must lie strictly in (0, 1)")
    if config.threads < 1:
        raise ConfigurationError("threads must be at least 1")
    if config.top_k_positions < 2:
        raise ConfigurationError("top_k_positions must be at least 2")
    if config.embed_dim < 1:
        raise ConfigurationError("embed_dim must be at least 1")
    for name in ("kmeans_ks", "lda_topic_counts", "recall_ns"):
        values = getattr(config, name)
        if not values or any(int(v) < 1 for v in values):
            raise ConfigurationError(f"{name} must list positive integers")
    if not config.ensemble_members:
        raise ConfigurationError("ensemble_members must not be empty")
    if config.synth_n < 1:
        raise ConfigurationError("synth_n must be at least 1")
    return config


def load_config(path: str | None = None, overrides: dict | None = None
                ) -> RunConfig:
    """Defaults, then an optional JSON config file, then flag overrides."""
    values: dict = {}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"config {path} must hold a JSON object")
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise ConfigurationError(
                f"config {path} has unknown fields: {', '.join(unknown)}")
        values.update(loaded)
    for name, value in (overrides or {}).items():
        if name not in known:
            raise ConfigurationError(f"unknown config override {name!r}")
        if value is not None:
            values[name] = value
    values = {name: _coerce(name, value) for name, value in values.items()}
    return validate_config(RunConfig(**values))
