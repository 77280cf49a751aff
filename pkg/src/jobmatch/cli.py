"""Command-line pipeline driver.

One subcommand per stage, each resumable from its on-disk artifacts.
Settings come from built-in defaults, then an optional JSON config file,
then explicit flags. Logs go to standard error; data goes to files under
the artifact directory or to standard output.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import JobmatchError
from .evaluation import render_report_text
from .pipeline import run_recommend, run_stage

_THREADS_HELP = ("worker threads for training stages; determinism is "
                 "guaranteed only at --threads 1 for embedding and neural "
                 "training")


def _int_tuple(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_tuple(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _fraction_or_name(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="FILE",
                        help="JSON config file; explicit flags override it")
    parser.add_argument("--corpus", dest="corpus_path", metavar="FILE",
                        help="newline-delimited resume records (default: corpus.jsonl)")
    parser.add_argument("--artifacts", dest="artifact_dir", metavar="DIR",
                        help="artifact directory (default: artifacts)")
    parser.add_argument("--seed", type=int, help="master seed (default: 1)")
    parser.add_argument("--threads", type=int, help=_THREADS_HELP)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jobmatch",
        description="Staged resume-to-position pipeline over deterministic "
                    "on-disk artifacts. Run stages in order: synth (optional) "
                    "-> ingest -> embed -> cluster -> featurize -> train -> "
                    "evaluate; recommend serves one record from stdin.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-signal synthetic corpus")
    _add_common(p)
    p.add_argument("--n", dest="synth_n", type=int,
                   help="records to generate (default: 2000)")
    p.add_argument("--signal", dest="synth_signal", type=float,
                   help="probability the last position follows the career track (default: 0.85)")
    p.add_argument("--corrupt-rate", dest="synth_corrupt_rate", type=float,
                   help="fraction of deliberately malformed records (default: 0.015)")

    p = sub.add_parser("ingest", help="parse, clean, label, and split the corpus")
    _add_common(p)
    p.add_argument("--top-k", dest="top_k_positions", type=int,
                   help="position vocabulary size (default: 32)")
    p.add_argument("--test-fraction", dest="test_fraction", type=float,
                   help="held-out fraction per position class (default: 0.2)")

    p = sub.add_parser("embed", help="train phrase embeddings on the train split")
    _add_common(p)
    p.add_argument("--dim", dest="embed_dim", type=int,
                   help="embedding dimensions (default: 10)")
    p.add_argument("--window", dest="embed_window", type=int,
                   help="context window (default: 5)")
    p.add_argument("--negatives", dest="embed_negatives", type=int,
                   help="negative samples per pair (default: 5)")
    p.add_argument("--epochs", dest="embed_epochs", type=int,
                   help="training epochs (default: 15)")
    p.add_argument("--min-count", dest="embed_min_count", type=int,
                   help="minimum token frequency (default: 2)")
    p.add_argument("--learning-rate", dest="embed_learning_rate", type=float,
                   help="initial learning rate, linearly decayed (default: 0.025)")

    p = sub.add_parser("cluster", help="fit k-means and topic models")
    _add_common(p)
    p.add_argument("--kmeans-ks", dest="kmeans_ks", type=_int_tuple,
                   help="comma-separated cluster counts (default: 64,128)")
    p.add_argument("--lda-topics", dest="lda_topic_counts", type=_int_tuple,
                   help="comma-separated topic counts (default: 32,64)")
    p.add_argument("--restarts", dest="kmeans_restarts", type=int,
                   help="k-means restarts (default: 10)")
    p.add_argument("--iterations", dest="lda_iterations", type=int,
                   help="Gibbs sweeps (default: 500)")

    p = sub.add_parser("featurize", help="build train/test feature matrices")
    _add_common(p)

    p = sub.add_parser("train", help="fit all base classifiers per task")
    _add_common(p)
    p.add_argument("--rf-trees", dest="rf_trees", type=int,
                   help="forest size (default: 50)")
    p.add_argument("--rf-depth", dest="rf_max_depth", type=int,
                   help="forest tree depth cap (default: 16)")
    p.add_argument("--rf-feature-fraction", dest="rf_feature_fraction",
                   type=_fraction_or_name,
                   help="features per split: fraction or 'sqrt' (default: sqrt)")
    p.add_argument("--gbt-rounds", dest="gbt_rounds", type=int,
                   help="boosting rounds (default: 20)")
    p.add_argument("--gbt-learning-rate", dest="gbt_learning_rate", type=float,
                   help="shrinkage (default: 0.3)")
    p.add_argument("--gbt-depth", dest="gbt_max_depth", type=int,
                   help="boosted tree depth (default: 3)")
    p.add_argument("--neural-epochs", dest="neural_epochs", type=int,
                   help="epochs for the two networks (default: 30)")
    p.add_argument("--batch-size", dest="neural_batch_size", type=int,
                   help="minibatch size (default: 64)")
    p.add_argument("--neural-learning-rate", dest="neural_learning_rate",
                   type=float, help="SGD learning rate (default: 0.05)")
    p.add_argument("--hidden", dest="neural_hidden", type=int,
                   help="hidden units (default: 64)")

    p = sub.add_parser("evaluate", help="score the held-out split and write reports")
    _add_common(p)
    p.add_argument("--members", dest="ensemble_members", type=_str_tuple,
                   help="comma-separated ensemble member rows "
                        "(default: gbt_all,rf_all,cnn_all,lstm_all)")
    p.add_argument("--recall-ns", dest="recall_ns", type=_int_tuple,
                   help="comma-separated recall cutoffs (default: 2,3,4)")

    p = sub.add_parser("recommend",
                       help="read one resume record from stdin, print top-n positions")
    _add_common(p)
    p.add_argument("--n", type=int, default=3,
                   help="positions to suggest (default: 3)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "n") and v is not None}
    try:
        config = load_config(args.config, overrides)
        if args.command == "recommend":
            record = sys.stdin.read()
            for token, score in run_recommend(config, record, args.n):
                sys.stdout.write(f"{token}\t{score:.6f}\n")
        elif args.command == "evaluate":
            report = run_stage(config, "evaluate")
            sys.stdout.write(render_report_text(report))
        else:
            run_stage(config, args.command)
    except JobmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
