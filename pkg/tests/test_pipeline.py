"""Staged artifact plumbing: staleness, reruns, recommend, and the CLI."""

import dataclasses
import io
import json
import os
import shutil

import pytest

from jobmatch.artifacts import (load_json_artifact, load_matrix_artifact,
                                save_matrix_artifact, write_json_artifact)
from jobmatch.cli import main
from jobmatch.config import config_to_dict, stage_config_hash
from jobmatch.corpus import TASKS, clean_resume, parse_resume
from jobmatch.errors import (ArtifactError, ConfigurationError,
                             JobmatchError, LeakageError, ResumeSchemaError)
from jobmatch.evaluation import REPORT_ROWS
from jobmatch.pipeline import (ARTIFACT_NAMES, PIPELINE_ORDER, TIMINGS_NOTE,
                               artifact_path, run_recommend, run_stage)


def _clone(run, tmp_path):
    """Copy a finished run so tests can mutate artifacts safely."""
    dest = tmp_path / "clone"
    shutil.copytree(run.dir, dest)
    cfg = dataclasses.replace(
        run.config,
        corpus_path=str(dest / "corpus.jsonl"),
        artifact_dir=str(dest / "artifacts"),
    )
    return cfg, dest


def _clean_record_line(run):
    for line in open(run.config.corpus_path, encoding="utf-8"):
        try:
            resume = parse_resume(line)
        except JobmatchError:
            continue
        if clean_resume(resume) is None:
            return line
    raise AssertionError("no usable record in the corpus")


def test_full_run_writes_every_artifact(small_run):
    for name in ARTIFACT_NAMES:
        assert os.path.exists(artifact_path(small_run.config, name)), name
    report = small_run.report
    assert set(report.tasks) == set(TASKS)
    for task in TASKS:
        tr = report.tasks[task]
        for row in REPORT_ROWS:
            assert 0.0 <= tr.precision[row] <= 1.0
    env = load_json_artifact(artifact_path(small_run.config, "corpus"), "corpus")
    assert report.n_train + report.n_test == env["meta"]["n_retained"]
    assert report.meta["drop_stats"]  # the generator plants dirty records


def test_reports_and_timings_are_consistent(small_run):
    cfg = small_run.config
    env = load_json_artifact(artifact_path(cfg, "report"), "report")
    task = env["payload"]["tasks"]["position"]
    want = small_run.report.tasks["position"].precision["ibagging"]
    assert task["precision"]["ibagging"] == want
    assert env["payload"]["meta"]["timings_note"] == TIMINGS_NOTE

    text = open(artifact_path(cfg, "report_text"), encoding="utf-8").read()
    assert "classifier evaluation report" in text
    assert "records dropped by cleaning:" in text
    tsv = open(artifact_path(cfg, "report_tsv"), encoding="utf-8").read()
    assert tsv.startswith("task\trow\tmetric\tvalue")

    timings = open(artifact_path(cfg, "timings"), encoding="utf-8").read()
    labels = {line.split("\t")[0] for line in timings.splitlines() if line}
    for stage in ("synth",) + PIPELINE_ORDER:
        if stage == "train":
            assert "train position gbt_all" in labels
        else:
            assert stage in labels
    for line in timings.splitlines():
        label, seconds = line.split("\t")
        assert seconds.endswith("s") and float(seconds[:-1]) >= 0.0


def test_missing_artifacts_point_at_their_stage(small_run, tmp_path):
    cfg = dataclasses.replace(small_run.config,
                              artifact_dir=str(tmp_path / "nothing"))
    with pytest.raises(ArtifactError, match="run its stage first"):
        run_stage(cfg, "embed")


def test_config_change_makes_artifacts_stale(small_run, tmp_path):
    cfg, _ = _clone(small_run, tmp_path)
    reseeded = dataclasses.replace(cfg, seed=cfg.seed + 1)
    with pytest.raises(ArtifactError, match="is stale.*re-run the stage"):
        run_stage(reseeded, "embed")


def test_corpus_edit_makes_artifacts_stale(small_run, tmp_path):
    cfg, dest = _clone(small_run, tmp_path)
    with open(cfg.corpus_path, "a", encoding="utf-8") as fh:
        fh.write(_clean_record_line(small_run))
    with pytest.raises(ArtifactError, match="corpus_file"):
        run_stage(cfg, "embed")


def test_stage_reruns_rewrite_identical_bytes(small_run, tmp_path):
    cfg, _ = _clone(small_run, tmp_path)
    for stage, names in (("embed", ["embeddings"]),
                         ("featurize", ["features"]),
                         ("evaluate", ["report", "report_text", "report_tsv"])):
        before = {n: open(artifact_path(cfg, n), "rb").read() for n in names}
        run_stage(cfg, stage)
        for n in names:
            assert open(artifact_path(cfg, n), "rb").read() == before[n], (stage, n)


def test_unknown_stage_is_rejected(small_run):
    with pytest.raises(ConfigurationError, match="unknown stage"):
        run_stage(small_run.config, "deploy")


def test_recommend_ranks_known_positions(small_run):
    line = _clean_record_line(small_run)
    out = run_recommend(small_run.config, line, 3)
    assert len(out) == 3
    tokens = [t for t, _ in out]
    scores = [s for _, s in out]
    assert len(set(tokens)) == 3
    assert scores == sorted(scores, reverse=True)
    display = small_run.report.tasks["position"].class_display
    assert set(tokens) <= set(display)
    assert all(0.0 <= s <= 1.0 for s in scores)
    # n is clamped to the position class count, never padded or duplicated
    full = run_recommend(small_run.config, line, 10_000)
    assert len(full) == len(display)
    assert len({t for t, _ in full}) == len(display)


def test_recommend_rejects_records_the_cleaner_drops(small_run):
    record = json.loads(_clean_record_line(small_run))
    record["age"] = -4
    with pytest.raises(ResumeSchemaError, match="age cleaning rule"):
        run_recommend(small_run.config, json.dumps(record), 3)


def test_tampered_fitted_ids_trip_the_leakage_gate(small_run, tmp_path):
    cfg, _ = _clone(small_run, tmp_path)
    feat_path = artifact_path(cfg, "features")
    arrays, env = load_matrix_artifact(feat_path, "features")
    meta = dict(env["meta"])
    leaked = str(arrays["ids_test"][0])
    meta["fitted_ids"] = sorted(set(meta["fitted_ids"]) | {leaked})
    new_hash = save_matrix_artifact(feat_path, "features", arrays,
                                    inputs=env["inputs"], meta=meta)
    models_path = artifact_path(cfg, "models")
    models_env = load_json_artifact(models_path, "models")
    write_json_artifact(models_path, "models", models_env["payload"],
                        inputs={"features": new_hash,
                                "config": stage_config_hash(cfg, "train")},
                        meta=models_env.get("meta", {}))
    with pytest.raises(LeakageError, match="seen while fitting"):
        run_stage(cfg, "evaluate")


def test_cli_synth_writes_a_deterministic_corpus(tmp_path):
    target = tmp_path / "cli.jsonl"
    assert main(["synth", "--corpus", str(target), "--n", "40"]) == 0
    lines = target.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 40
    again = tmp_path / "cli2.jsonl"
    assert main(["synth", "--corpus", str(again), "--n", "40"]) == 0
    assert target.read_bytes() == again.read_bytes()


def _write_config_file(cfg, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config_to_dict(cfg)), encoding="utf-8")
    return str(path)


def test_cli_evaluate_prints_the_text_report(small_run, tmp_path, capsys):
    cfg, _ = _clone(small_run, tmp_path)
    assert main(["evaluate", "--config", _write_config_file(cfg, tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "classifier evaluation report" in out
    assert "task: position" in out


def test_cli_recommend_reads_stdin(small_run, tmp_path, capsys, monkeypatch):
    cfg, _ = _clone(small_run, tmp_path)
    monkeypatch.setattr("sys.stdin", io.StringIO(_clean_record_line(small_run)))
    code = main(["recommend", "--config", _write_config_file(cfg, tmp_path),
                 "--n", "2"])
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l]
    assert len(lines) == 2
    for line in lines:
        token, score = line.split("\t")
        assert 0.0 <= float(score) <= 1.0


def test_cli_reports_failures_on_stderr_with_exit_2(tmp_path, capsys):
    code = main(["evaluate", "--artifacts", str(tmp_path / "void"),
                 "--corpus", str(tmp_path / "none.jsonl")])
    assert code == 2
    err = capsys.readouterr().err
    assert "error:" in err and "run its stage first" in err
