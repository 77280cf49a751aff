"""Combining base classifiers: majority-vote bagging and probability-sum
ibagging, plus top-n ranking.

The single-item operations take one (members, classes) block of probability
rows; the *_batch forms take (members, items, classes) stacks and vectorize
over items. Tie policy is explicit everywhere so reruns are byte-stable:

* vote ties fall back to the highest summed probability among the tied
  classes, then the lowest class id;
* probability ties take the lowest class id;
* top-n ranks by score descending, class id ascending.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def _check_stack(probas, ndim: int) -> np.ndarray:
    stack = np.asarray(probas, dtype=float)
    if stack.ndim != ndim:
        raise ShapeError(
            f"expected a {ndim}-d probability stack, got shape {stack.shape}"
        )
    if stack.shape[0] == 0:
        raise ShapeError("need at least one ensemble member")
    if not np.all(np.isfinite(stack)):
        raise ShapeError("non-finite member probabilities")
    return stack


def vote_scores_batch(probas) -> np.ndarray:
    """Vote-first ranking scores over a (members, items, classes) stack.

    Scores are integer vote counts plus a strictly sub-unit probability
    fraction, so ordering is votes, then summed probability, then (via
    argmax/lexsort) the lowest class id.
    """
    stack = _check_stack(probas, 3)
    members, items, _ = stack.shape
    votes = np.zeros(stack.shape[1:])
    picks = stack.argmax(axis=2)
    for m in range(members):
        votes[np.arange(items), picks[m]] += 1.0
    summed = stack.sum(axis=0)
    return votes + summed / (members + 1e-9)


def bagging_vote_batch(probas) -> np.ndarray:
    return vote_scores_batch(probas).argmax(axis=1)


def bagging_vote(probas) -> int:
    """Plurality vote of the members' argmax picks for one item.

    Vote ties are broken by the summed probability of the tied classes,
    then by the lowest class id.
    """
    stack = _check_stack(probas, 2)
    return int(bagging_vote_batch(stack[:, None, :])[0])


def ibagging_batch(probas) -> np.ndarray:
    """Combined (items, classes) distributions: member mean."""
    stack = _check_stack(probas, 3)
    return stack.sum(axis=0) / stack.shape[0]


def ibagging(probas):
    """(predicted class id, combined distribution) for one item.

    The combined vector is the elementwise sum renormalised by the member
    count; prediction ties take the lowest class id.
    """
    stack = _check_stack(probas, 2)
    combined = ibagging_batch(stack[:, None, :])[0]
    return int(np.argmax(combined)), combined


def top_n_batch(scores, n: int) -> np.ndarray:
    """Class ids of the n best scores per row, score desc then id asc."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2:
        raise ShapeError(f"expected (items, classes) scores, got {scores.shape}")
    if not 1 <= n <= scores.shape[1]:
        raise ShapeError(f"top-{n} undefined for {scores.shape[1]} classes")
    ids = np.broadcast_to(np.arange(scores.shape[1]), scores.shape)
    order = np.lexsort((ids, -scores), axis=1)
    return order[:, :n]


def top_n(scores, n: int) -> np.ndarray:
    """Top-n class ids of one score vector."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1:
        raise ShapeError(f"expected a score vector, got shape {scores.shape}")
    return top_n_batch(scores[None, :], n)[0]
