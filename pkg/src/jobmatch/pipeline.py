"""Staged pipeline over on-disk artifacts.

Each stage loads its predecessors' artifacts, verifies that their recorded
input hashes still match the current inputs, and writes one artifact whose
envelope records the upstream content hashes plus this stage's own config
hash. Rerunning a stage with identical inputs and config produces byte-
identical files; running a stage on top of a stale artifact fails with an
error naming the stage to re-run.

Wall times are appended to a timings.log sidecar next to the artifacts.
They are informational only and deliberately excluded from every artifact
and report so determinism checks can compare bytes.
"""

from __future__ import annotations

import json
import logging
import os
import time

import numpy as np

from . import synth as synthmod
from .artifacts import (canonical_json, check_inputs, load_json_artifact,
                        load_matrix_artifact, save_matrix_artifact,
                        sha256_bytes, write_json_artifact, write_text)
from .clustering import KMeansModel, LdaModel, kmeans_fit, lda_fit
from .config import RunConfig, derive_seed, stage_config_hash
from .corpus import (OPEN_END_MARKERS, TASKS, YearMonth, build_corpus,
                     clean_resume, corpus_from_dict, corpus_to_dict,
                     parse_resume, split, target_matrix)
from .embeddings import build_phrase_sequence, load_table, save_table, train_skipgram
from .errors import (ArtifactError, ConfigurationError, ResumeParseError,
                     ResumeSchemaError)
from .estimators import (GbtModel, NeuralModel, RandomForestModel, train_gbt,
                         train_random_forest, fit_neural_classifier)
from .evaluation import (BASE_ROWS, EvaluationReport, FrequencyBaseline,
                         check_leakage, evaluate_task, fit_baseline,
                         render_report_text, render_report_tsv)
from .features import (MANUAL_WIDTH, FeatureArtifacts, featurize,
                       featurize_corpus, fit_feature_artifacts)

log = logging.getLogger("jobmatch")

ARTIFACT_NAMES = {
    "corpus": "corpus.json",
    "embeddings": "embeddings.txt",
    "clusters": "clusters.json",
    "features": "features.npz",
    "models": "models.json",
    "report": "report.json",
    "report_text": "report.txt",
    "report_tsv": "report.tsv",
    "timings": "timings.log",
}

TIMINGS_NOTE = ("training wall-times are appended to timings.log beside the "
                "artifacts; informational only, excluded from artifact hashes")


def artifact_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.artifact_dir, ARTIFACT_NAMES[name])


def _ensure_dir(config: RunConfig):
    os.makedirs(config.artifact_dir, exist_ok=True)


def _log_timing(config: RunConfig, label: str, seconds: float):
    _ensure_dir(config)
    with open(artifact_path(config, "timings"), "a", encoding="utf-8") as fh:
        fh.write(f"{label}\t{seconds:.3f}s\n")


def file_sha256(path: str) -> str:
    try:
        with open(path, "rb") as fh:
            return sha256_bytes(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read corpus file {path}: {exc}")


# ---------------------------------------------------------------- synth

def stage_synth(config: RunConfig) -> dict:
    """Generate the planted-signal synthetic corpus at corpus_path."""
    t0 = time.perf_counter()
    out_dir = os.path.dirname(os.path.abspath(config.corpus_path))
    os.makedirs(out_dir, exist_ok=True)
    stats = synthmod.write_corpus_file(
        config.corpus_path, config.synth_n, seed=config.seed,
        signal=config.synth_signal, corrupt_rate=config.synth_corrupt_rate,
    )
    _log_timing(config, "synth", time.perf_counter() - t0)
    log.info("synth: wrote %d records to %s (%d corrupted on purpose)",
             stats["records"], config.corpus_path, stats.get("corrupted", 0))
    return stats


# ---------------------------------------------------------------- ingest

def _scan_reference_date(lines) -> YearMonth | None:
    """Max closed end date across all parseable records.

    Open-ended jobs are resolved against this single corpus-wide date so
    results never depend on the wall clock.
    """
    best = None
    for line in lines:
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            continue
        if not isinstance(record, dict):
            continue
        for exp in record.get("workExperienceList") or []:
            if not isinstance(exp, dict):
                continue
            raw = exp.get("end_date")
            if not isinstance(raw, str) or raw.strip() in OPEN_END_MARKERS:
                continue
            try:
                ym = YearMonth.parse(raw)
            except ValueError:
                continue
            if best is None or ym > best:
                best = ym
    return best


def stage_ingest(config: RunConfig) -> dict:
    """Parse, clean, label, and split the input corpus into corpus.json."""
    t0 = time.perf_counter()
    try:
        with open(config.corpus_path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh if line.strip()]
    except OSError as exc:
        raise ConfigurationError(f"cannot read corpus file {config.corpus_path}: {exc}")
    source_hash = sha256_bytes("".join(lines).encode("utf-8"))

    reference = _scan_reference_date(lines)
    parsed = []
    parse_failures = 0
    for line in lines:
        try:
            parsed.append(parse_resume(line, reference_date=reference))
        except (ResumeParseError, ResumeSchemaError):
            parse_failures += 1
    if not parsed:
        raise ConfigurationError(
            f"no parseable records in {config.corpus_path}")

    corpus = build_corpus(parsed, top_k=config.top_k_positions,
                          reference_date=reference)
    if parse_failures:
        corpus.drop_stats["parse"] = parse_failures
    train, test = split(corpus, config.test_fraction,
                        seed=derive_seed(config, "split"))

    _ensure_dir(config)
    meta = {
        "n_lines": len(lines),
        "n_parsed": len(parsed),
        "n_retained": len(corpus),
        "n_train": len(train),
        "n_test": len(test),
        "reference_date": str(corpus.reference_date) if corpus.reference_date else None,
    }
    content = write_json_artifact(
        artifact_path(config, "corpus"), "corpus", corpus_to_dict(corpus),
        inputs={"corpus_file": source_hash,
                "config": stage_config_hash(config, "ingest")},
        meta=meta,
    )
    _log_timing(config, "ingest", time.perf_counter() - t0)
    log.info("ingest: %d lines -> %d retained (%d train / %d test), drops %s",
             len(lines), len(corpus), len(train), len(test),
             dict(sorted(corpus.drop_stats.items())))
    return {**meta, "content_hash": content}


def _load_corpus(config: RunConfig):
    """corpus.json, verified against the current corpus file and config."""
    path = artifact_path(config, "corpus")
    env = load_json_artifact(path, "corpus")
    check_inputs(env,
                 {"corpus_file": file_sha256(config.corpus_path),
                  "config": stage_config_hash(config, "ingest")},
                 f"{path} (ingest output)")
    return corpus_from_dict(env["payload"]), env


# ---------------------------------------------------------------- embed

def stage_embed(config: RunConfig):
    """Train phrase embeddings on the training split's full histories."""
    corpus, corpus_env = _load_corpus(config)
    t0 = time.perf_counter()
    train = corpus.subset("train")
    sequences = [build_phrase_sequence(r) for r in train.resumes]
    table = train_skipgram(
        sequences, dim=config.embed_dim, window=config.embed_window,
        negatives=config.embed_negatives, epochs=config.embed_epochs,
        seed=derive_seed(config, "embed"), min_count=config.embed_min_count,
        learning_rate=config.embed_learning_rate, threads=config.threads,
    )
    save_table(artifact_path(config, "embeddings"), table,
               inputs={"corpus": corpus_env["content_hash"],
                       "config": stage_config_hash(config, "embed")})
    _log_timing(config, "embed", time.perf_counter() - t0)
    log.info("embed: %d tokens x %d dims from %d sequences",
             len(table), table.dimension, len(sequences))
    return table


def _load_embeddings(config: RunConfig, corpus_env: dict):
    path = artifact_path(config, "embeddings")
    if not os.path.exists(path):
        raise ArtifactError(f"{path}: artifact not found; run its stage first")
    table = load_table(path)
    check_inputs({"inputs": table.header.get("inputs", {})},
                 {"corpus": corpus_env["content_hash"],
                  "config": stage_config_hash(config, "embed")},
                 f"{path} (embed output)")
    return table, table.header["content_hash"]


# ---------------------------------------------------------------- cluster

def stage_cluster(config: RunConfig):
    """Fit k-means models over phrase vectors and LDA topics over resumes."""
    corpus, corpus_env = _load_corpus(config)
    table, emb_hash = _load_embeddings(config, corpus_env)
    t0 = time.perf_counter()

    kms = []
    for i, k in enumerate(config.kmeans_ks):
        kms.append(kmeans_fit(table.vectors, int(k),
                              seed=derive_seed(config, "kmeans", i),
                              max_iter=config.kmeans_max_iter,
                              n_init=config.kmeans_restarts))
    train = corpus.subset("train")
    docs = [build_phrase_sequence(r) for r in train.resumes]
    ldas = []
    for i, topics in enumerate(config.lda_topic_counts):
        ldas.append(lda_fit(docs, int(topics), alpha=None,
                            beta=config.lda_beta,
                            iterations=config.lda_iterations,
                            seed=derive_seed(config, "lda", i),
                            infer_sweeps=config.lda_infer_sweeps))

    payload = {
        "kmeans": [m.to_dict() for m in kms],
        "lda": [m.to_dict() for m in ldas],
    }
    write_json_artifact(
        artifact_path(config, "clusters"), "clusters", payload,
        inputs={"corpus": corpus_env["content_hash"],
                "embeddings": emb_hash,
                "config": stage_config_hash(config, "cluster")},
        meta={"kmeans_ks": [m.centroids.shape[0] for m in kms],
              "lda_topic_counts": [m.topic_count for m in ldas]},
    )
    _log_timing(config, "cluster", time.perf_counter() - t0)
    log.info("cluster: k-means %s, topics %s over %d docs",
             list(config.kmeans_ks), list(config.lda_topic_counts), len(docs))
    return kms, ldas


def _load_clusters(config: RunConfig, corpus_env: dict, emb_hash: str):
    path = artifact_path(config, "clusters")
    env = load_json_artifact(path, "clusters")
    check_inputs(env,
                 {"corpus": corpus_env["content_hash"],
                  "embeddings": emb_hash,
                  "config": stage_config_hash(config, "cluster")},
                 f"{path} (cluster output)")
    kms = [KMeansModel.from_dict(d) for d in env["payload"]["kmeans"]]
    ldas = [LdaModel.from_dict(d) for d in env["payload"]["lda"]]
    return kms, ldas, env


# ---------------------------------------------------------------- featurize

def stage_featurize(config: RunConfig) -> dict:
    """Freeze dictionaries on the train split and emit feature matrices."""
    corpus, corpus_env = _load_corpus(config)
    table, emb_hash = _load_embeddings(config, corpus_env)
    kms, ldas, cluster_env = _load_clusters(config, corpus_env, emb_hash)
    t0 = time.perf_counter()

    train = corpus.subset("train")
    test = corpus.subset("test")
    artifacts = fit_feature_artifacts(train, table, kms, ldas)
    arrays = {
        "X_train": featurize_corpus(train, artifacts),
        "X_test": featurize_corpus(test, artifacts),
        "y_train": target_matrix(train),
        "y_test": target_matrix(test),
        "ids_train": np.asarray(train.ids(), dtype=str),
        "ids_test": np.asarray(test.ids(), dtype=str),
    }
    meta = {
        "layout_version": artifacts.layout_version,
        "manual_width": MANUAL_WIDTH,
        "cluster_width": artifacts.cluster_width,
        "semantic_width": artifacts.semantic_width,
        "total_width": artifacts.total_width,
        "embed_dim": table.dimension,
        "tasks": list(TASKS),
        "n_classes": {t: corpus.n_classes(t) for t in TASKS},
        "class_display": {t: list(corpus.class_maps[t].labels) for t in TASKS},
        "dicts": artifacts.dicts,
        "fitted_ids": list(artifacts.fitted_ids),
        "drop_stats": dict(sorted(corpus.drop_stats.items())),
    }
    content = save_matrix_artifact(
        artifact_path(config, "features"), "features", arrays,
        inputs={"corpus": corpus_env["content_hash"],
                "embeddings": emb_hash,
                "clusters": cluster_env["content_hash"],
                "config": stage_config_hash(config, "featurize")},
        meta=meta,
    )
    _log_timing(config, "featurize", time.perf_counter() - t0)
    log.info("featurize: train %s, test %s, width %d",
             arrays["X_train"].shape, arrays["X_test"].shape,
             artifacts.total_width)
    return {"arrays": arrays, "meta": meta, "content_hash": content}


def _load_features(config: RunConfig):
    corpus, corpus_env = _load_corpus(config)
    table, emb_hash = _load_embeddings(config, corpus_env)
    kms, ldas, cluster_env = _load_clusters(config, corpus_env, emb_hash)
    path = artifact_path(config, "features")
    arrays, env = load_matrix_artifact(path, "features")
    check_inputs(env,
                 {"corpus": corpus_env["content_hash"],
                  "embeddings": emb_hash,
                  "clusters": cluster_env["content_hash"],
                  "config": stage_config_hash(config, "featurize")},
                 f"{path} (featurize output)")
    artifacts = FeatureArtifacts(
        embedding=table, kmeans_models=kms, lda_models=ldas,
        dicts=env["meta"]["dicts"], fitted_ids=list(env["meta"]["fitted_ids"]),
        layout_version=int(env["meta"]["layout_version"]),
    )
    return arrays, env, artifacts, corpus


# ---------------------------------------------------------------- train

def _column_slices(meta: dict) -> dict:
    """Feature-column window per report row name."""
    manual = MANUAL_WIDTH
    total = int(meta["total_width"])
    semantic_start = total - int(meta["semantic_width"])
    return {
        "gbt_manual": (0, manual),
        "gbt_semantic": (semantic_start, total),
        "gbt_all": (0, total),
        "rf_all": (0, total),
        "cnn_all": (0, total),
        "lstm_all": (0, total),
    }


def stage_train(config: RunConfig) -> dict:
    """Fit every base classifier and the frequency baseline per task."""
    arrays, feat_env, _artifacts, _corpus = _load_features(config)
    meta = feat_env["meta"]
    X = arrays["X_train"].astype(np.float64)
    Y = arrays["y_train"]
    slices = _column_slices(meta)
    side_width = int(meta["manual_width"]) + int(meta["cluster_width"])
    grid_dim = int(meta["embed_dim"])

    def _fit(row, task_index, y, n_classes):
        lo, hi = slices[row]
        Xv = X[:, lo:hi]
        if row.startswith("gbt"):
            return train_gbt(
                Xv, y, n_classes, rounds=config.gbt_rounds,
                learning_rate=config.gbt_learning_rate,
                max_depth=config.gbt_max_depth,
                reg_lambda=config.gbt_reg_lambda,
                min_child_weight=config.gbt_min_child_weight)
        if row == "rf_all":
            return train_random_forest(
                Xv, y, n_classes, trees=config.rf_trees,
                max_depth=config.rf_max_depth,
                feature_fraction=config.rf_feature_fraction,
                min_samples_leaf=config.rf_min_samples_leaf,
                seed=derive_seed(config, "rf", task_index))
        kind = "cnn" if row == "cnn_all" else "lstm"
        return fit_neural_classifier(
            kind, Xv, y, n_classes, side_width=side_width, grid_dim=grid_dim,
            hidden=config.neural_hidden, filters=config.cnn_filters,
            kernel=config.cnn_kernel, side_units=config.side_units,
            epochs=config.neural_epochs, batch_size=config.neural_batch_size,
            learning_rate=config.neural_learning_rate,
            momentum=config.neural_momentum,
            seed=derive_seed(config, kind, task_index))

    tasks_payload = {}
    for ti, task in enumerate(TASKS):
        y = Y[:, ti]
        n_classes = int(meta["n_classes"][task])
        display = meta["class_display"][task]
        rows = {}
        for row in BASE_ROWS:
            t0 = time.perf_counter()
            model = _fit(row, ti, y, n_classes)
            dt = time.perf_counter() - t0
            _log_timing(config, f"train {task} {row}", dt)
            log.info("train: %s %s done in %.1fs", task, row, dt)
            lo, hi = slices[row]
            rows[row] = {"columns": [lo, hi], "model": model.to_dict()}
        baseline = fit_baseline(y, n_classes, display)
        tasks_payload[task] = {
            "n_classes": n_classes,
            "baseline": baseline.to_dict(),
            "rows": rows,
        }

    payload = {"tasks": tasks_payload}
    content = write_json_artifact(
        artifact_path(config, "models"), "models", payload,
        inputs={"features": feat_env["content_hash"],
                "config": stage_config_hash(config, "train")},
        meta={"rows": list(BASE_ROWS), "tasks": list(TASKS)},
    )
    log.info("train: wrote %d tasks x %d rows", len(TASKS), len(BASE_ROWS))
    return {"payload": payload, "content_hash": content}


_MODEL_KINDS = {
    "gbt_manual": GbtModel, "gbt_semantic": GbtModel, "gbt_all": GbtModel,
    "rf_all": RandomForestModel,
    "cnn_all": NeuralModel, "lstm_all": NeuralModel,
}


def _load_models(config: RunConfig, feat_env: dict):
    path = artifact_path(config, "models")
    env = load_json_artifact(path, "models")
    check_inputs(env,
                 {"features": feat_env["content_hash"],
                  "config": stage_config_hash(config, "train")},
                 f"{path} (train output)")
    tasks = {}
    for task, entry in env["payload"]["tasks"].items():
        rows = {}
        for row, spec in entry["rows"].items():
            model = _MODEL_KINDS[row].from_dict(spec["model"])
            rows[row] = {"columns": tuple(spec["columns"]), "model": model}
        tasks[task] = {
            "n_classes": int(entry["n_classes"]),
            "baseline": FrequencyBaseline.from_dict(entry["baseline"]),
            "rows": rows,
        }
    return tasks, env


# ---------------------------------------------------------------- evaluate

def stage_evaluate(config: RunConfig) -> EvaluationReport:
    """Score everything on the held-out split and write the reports."""
    arrays, feat_env, _artifacts, _corpus = _load_features(config)
    models, models_env = _load_models(config, feat_env)
    t0 = time.perf_counter()

    check_leakage(feat_env["meta"]["fitted_ids"],
                  [str(i) for i in arrays["ids_test"]])

    X = arrays["X_test"].astype(np.float64)
    Y = arrays["y_test"]
    task_reports = {}
    for ti, task in enumerate(TASKS):
        entry = models[task]
        probas = {}
        for row, spec in entry["rows"].items():
            lo, hi = spec["columns"]
            probas[row] = spec["model"].predict_proba(X[:, lo:hi])
        task_reports[task] = evaluate_task(
            task, probas, Y[:, ti], entry["baseline"],
            feat_env["meta"]["class_display"][task],
            members=config.ensemble_members, ns=config.recall_ns)
        log.info("evaluate: %s ibagging precision %.4f (baseline %.4f)",
                 task, task_reports[task].precision["ibagging"],
                 task_reports[task].precision["manual_rule"])

    report = EvaluationReport(
        tasks=task_reports,
        n_train=int(arrays["X_train"].shape[0]),
        n_test=int(X.shape[0]),
        meta={
            "members": list(config.ensemble_members),
            "recall_ns": [int(n) for n in config.recall_ns],
            "drop_stats": feat_env["meta"]["drop_stats"],
            "timings_note": TIMINGS_NOTE,
        },
    )
    write_json_artifact(
        artifact_path(config, "report"), "report", report.to_dict(),
        inputs={"features": feat_env["content_hash"],
                "models": models_env["content_hash"],
                "config": stage_config_hash(config, "evaluate")},
        meta={},
    )
    write_text(artifact_path(config, "report_text"), render_report_text(report))
    write_text(artifact_path(config, "report_tsv"), render_report_tsv(report))
    _log_timing(config, "evaluate", time.perf_counter() - t0)
    return report


# ---------------------------------------------------------------- recommend

def run_recommend(config: RunConfig, record_text: str, n: int):
    """Top-n next positions for one raw resume record.

    The record's full history counts as history here (nothing is held out;
    the model predicts the job that would come next), so features are built
    without masking the last experience.
    """
    arrays, feat_env, artifacts, corpus = _load_features(config)
    models, _models_env = _load_models(config, feat_env)

    resume = parse_resume(record_text, reference_date=corpus.reference_date)
    reason = clean_resume(resume)
    if reason is not None:
        raise ResumeSchemaError(reason, f"record rejected by the {reason} cleaning rule")

    x = featurize(resume, artifacts, mask_last=False).values[None, :]
    entry = models["position"]
    member_probas = []
    for row in config.ensemble_members:
        spec = entry["rows"][row]
        lo, hi = spec["columns"]
        member_probas.append(spec["model"].predict_proba(x[:, lo:hi])[0])
    combined = np.mean(np.stack(member_probas), axis=0)

    display = feat_env["meta"]["class_display"]["position"]
    eff = min(int(n), len(display))
    if eff < 1:
        raise ConfigurationError("n must be at least 1")
    order = np.lexsort((np.arange(len(combined)), -combined))[:eff]
    return [(display[int(i)], float(combined[int(i)])) for i in order]


# ---------------------------------------------------------------- driver

STAGES = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "embed": stage_embed,
    "cluster": stage_cluster,
    "featurize": stage_featurize,
    "train": stage_train,
    "evaluate": stage_evaluate,
}

PIPELINE_ORDER = ("ingest", "embed", "cluster", "featurize", "train", "evaluate")


def run_stage(config: RunConfig, stage: str):
    if stage not in STAGES:
        raise ConfigurationError(f"unknown stage {stage!r}")
    t0 = time.perf_counter()
    result = STAGES[stage](config)
    log.info("%s: finished in %.1fs", stage, time.perf_counter() - t0)
    return result


def run_pipeline(config: RunConfig) -> EvaluationReport:
    """ingest through evaluate, in order."""
    result = None
    for stage in PIPELINE_ORDER:
        result = run_stage(config, stage)
    return result
