"""Resume-to-position matching.

Structured resume records are parsed into a cleaned corpus, embedded as
phrase sequences, summarized into manual, cluster, and semantic features,
and classified by gradient-boosted trees, a random forest, and two small
neural networks whose probabilities are combined by voting or summing.
"""

from .config import RunConfig, load_config
from .corpus import (Resume, TASKS, WorkExperience, YearMonth, build_corpus,
                     clean_resume, parse_resume, split)
from .embeddings import (EmbeddingTable, build_phrase_sequence, most_similar,
                         train_skipgram)
from .clustering import (KMeansModel, LdaModel, kmeans_assign,
                         kmeans_fit, lda_dominant_topic, lda_fit)
from .features import (FeatureArtifacts, featurize, featurize_corpus,
                       fit_feature_artifacts)
from .ensemble import bagging_vote, ibagging, top_n
from .estimators import (fit_neural_classifier, grid_search, train_gbt,
                         train_random_forest)
from .evaluation import (EvaluationReport, evaluate_task, fit_baseline,
                         precision, recall_at_n)
from .pipeline import run_pipeline, run_recommend, run_stage
from .errors import JobmatchError

__version__ = "0.1.0"

__all__ = [
    "EmbeddingTable", "EvaluationReport", "FeatureArtifacts", "JobmatchError",
    "KMeansModel", "LdaModel", "Resume", "RunConfig", "TASKS",
    "WorkExperience", "YearMonth", "bagging_vote", "build_corpus",
    "build_phrase_sequence", "clean_resume", "evaluate_task", "featurize",
    "featurize_corpus", "fit_baseline", "fit_feature_artifacts",
    "fit_neural_classifier", "grid_search", "ibagging", "kmeans_assign",
    "kmeans_fit", "lda_dominant_topic", "lda_fit", "load_config",
    "most_similar", "parse_resume", "precision", "recall_at_n",
    "run_pipeline", "run_recommend", "run_stage", "split", "top_n",
    "train_gbt", "train_random_forest", "train_skipgram", "__version__",
]
