"""Exhaustive grid search over estimator hyper-parameters."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


def _accuracy(model, X, y) -> float:
    return float(np.mean(model.predict(X) == np.asarray(y)))


@dataclass
class GridResult:
    best_params: dict
    best_score: float
    best_model: object
    cells: list = field(default_factory=list)  # {params, score, error} dicts
    param_names: list = field(default_factory=list)


def grid_search(trainer, param_grid: dict, train, validation,
                metric=None) -> GridResult:
    """Train one model per grid cell and keep the best validation score.

    trainer(X, y, **cell) builds a model; metric(model, X, y) scores it
    (exact-match accuracy by default). Cells are visited in the cartesian
    product order of the grid as given; on score ties the earlier cell
    wins. A cell whose training raises is recorded with its error message
    and skipped rather than aborting the search.
    """
    if not param_grid:
        raise ConfigurationError("param_grid must name at least one parameter")
    names = list(param_grid)
    for name in names:
        if not param_grid[name]:
            raise ConfigurationError(f"empty value list for parameter {name!r}")
    metric = metric or _accuracy
    X, y = train
    X_val, y_val = validation

    result = GridResult(best_params={}, best_score=float("-inf"),
                        best_model=None, param_names=names)
    for combo in itertools.product(*(param_grid[n] for n in names)):
        params = dict(zip(names, combo))
        try:
            model = trainer(X, y, **params)
            score = float(metric(model, X_val, y_val))
        except Exception as exc:  # noqa: BLE001 - cell failure is data here
            warnings.warn(f"grid cell {params} failed: {exc}")
            result.cells.append({"params": params, "score": None,
                                 "error": str(exc)})
            continue
        result.cells.append({"params": params, "score": score, "error": None})
        if score > result.best_score:
            result.best_score = score
            result.best_params = params
            result.best_model = model
    if result.best_model is None:
        raise ConfigurationError("every grid cell failed")
    return result


def render_surface(result: GridResult) -> str:
    """Delimited metric surface, one row per grid cell (failures included)."""
    header = list(result.param_names) + ["score", "error"]
    lines = ["\t".join(header)]
    for cell in result.cells:
        row = [str(cell["params"][n]) for n in result.param_names]
        row.append("" if cell["score"] is None else f"{cell['score']:.6f}")
        row.append(cell["error"] or "")
        lines.append("\t".join(row))
    lines.append("")
    return "\n".join(lines)
