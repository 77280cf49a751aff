"""Base classifiers trained on the fixed-layout feature rows."""

from .neural import (
    CnnClassifier,
    LstmClassifier,
    NeuralModel,
    fit_neural_classifier,
    train_network,
)
from .numerics import log_loss, one_hot, sigmoid, softmax
from .search import GridResult, grid_search, render_surface
from .trees import (
    GbtModel,
    RandomForestModel,
    Tree,
    feature_usage,
    leaf_weight,
    train_gbt,
    train_random_forest,
)

__all__ = [
    "CnnClassifier",
    "GbtModel",
    "GridResult",
    "LstmClassifier",
    "NeuralModel",
    "RandomForestModel",
    "Tree",
    "feature_usage",
    "fit_neural_classifier",
    "grid_search",
    "leaf_weight",
    "log_loss",
    "one_hot",
    "render_surface",
    "sigmoid",
    "softmax",
    "train_gbt",
    "train_network",
    "train_random_forest",
]
