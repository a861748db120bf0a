"""Instance-oriented ranking metrics for multiclass classification.

Each instance has exactly one correct class out of ``n``. A model scores all
classes; sorting the scores yields a ranking, and every metric here is a
function of where the correct class lands in that ranking. Dataset-level
numbers are plain means over instances (see :func:`evaluate_scores`).

``metric_entropy`` measures how much a metric can distinguish ranking
outcomes: the entropy (bits) of the metric's value distribution induced by a
distribution over the correct class's position. The gap between the
position-discounted metric and the hard top-K cut is never negative, which is
what makes the discounted metric the more informative report column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PositionDistribution",
    "rank_classes",
    "rank_of_correct",
    "top_k_accuracy",
    "ndcg_at_k",
    "mrr",
    "precision_at_k",
    "metric_entropy",
    "entropy_profile",
    "evaluate_scores",
]


def _check_labels(labels: np.ndarray) -> int:
    """Validate a one-hot label vector and return the correct class index."""
    labels = np.asarray(labels)
    hot = np.flatnonzero(labels == 1)
    if hot.size != 1 or labels.sum() != 1:
        raise ValueError("labels must contain exactly one entry equal to 1")
    return int(hot[0])


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"K={k} out of range [1, {n}]")


def rank_classes(scores) -> np.ndarray:
    """Class indices sorted by descending score; ties go to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return np.argsort(-scores, kind="stable")


def rank_of_correct(scores, labels) -> int:
    """1-based position of the correct class in the score ranking."""
    correct = _check_labels(labels)
    ranking = rank_classes(scores)
    return int(np.flatnonzero(ranking == correct)[0]) + 1


def top_k_accuracy(ranking, labels, k: int) -> float:
    """1 if the correct class is among the top K positions, else 0."""
    ranking = np.asarray(ranking)
    labels = np.asarray(labels)
    _check_labels(labels)
    _check_k(k, ranking.size)
    return float(labels[ranking[:k]].sum())


def ndcg_at_k(ranking, labels, k: int) -> float:
    """Discounted gain of the observed ranking over the ideal one, cut at K.

    Gain is 2^y − 1 and the position discount is 1/log2(1 + position). With a
    single correct class at position p this reduces to 1/log2(1+p) for p <= K
    and 0 otherwise.
    """
    ranking = np.asarray(ranking)
    labels = np.asarray(labels, dtype=np.float64)
    _check_labels(labels)
    _check_k(k, ranking.size)
    discounts = 1.0 / np.log2(1.0 + np.arange(1, k + 1))
    dcg = float(((2.0 ** labels[ranking[:k]] - 1.0) * discounts).sum())
    ideal = np.sort(labels)[::-1]
    ideal_dcg = float(((2.0**ideal[:k] - 1.0) * discounts).sum())
    return dcg / ideal_dcg


def mrr(ranking, labels) -> float:
    """Reciprocal of the correct class's 1-based rank."""
    ranking = np.asarray(ranking)
    correct = _check_labels(labels)
    position = int(np.flatnonzero(ranking == correct)[0]) + 1
    return 1.0 / position


def precision_at_k(ranking, labels, k: int) -> float:
    """Fraction of the top K positions occupied by the correct class."""
    return top_k_accuracy(ranking, labels, k) / k


@dataclass(frozen=True)
class PositionDistribution:
    """Probabilities of the correct class landing at each rank 1..n."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("position distribution must be a nonempty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("position probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.size


def _plogp(p: np.ndarray) -> np.ndarray:
    """p * log2(p) with the 0 log 0 := 0 convention."""
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def metric_entropy(dist: PositionDistribution, k: int) -> tuple[float, float]:
    """Entropy in bits of the discounted metric's values vs the top-K cut's.

    The discounted metric takes K distinct values inside the cutoff plus one
    outside, so its entropy sees every position p1..pK separately; the hard
    cut only distinguishes in from out.
    """
    _check_k(k, dist.n)
    p = dist.p
    p_out = p[k:].sum()
    h_ndcg = float(-_plogp(p[:k]).sum() - _plogp(np.array([p_out]))[0])
    p_in = p[:k].sum()
    h_acc = float(-_plogp(np.array([p_in, p_out])).sum())
    return h_ndcg, h_acc


def entropy_profile(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``metric_entropy`` for every cutoff K=1..n at once."""
    p = np.asarray(p, dtype=np.float64)
    plogp_prefix = np.cumsum(_plogp(p))
    p_in = np.cumsum(p)
    p_out = np.clip(1.0 - p_in, 0.0, None)
    tail = _plogp(p_out)
    h_ndcg = -plogp_prefix - tail
    h_acc = -_plogp(p_in) - tail
    return h_ndcg, h_acc


def evaluate_scores(scores: np.ndarray, labels: np.ndarray, ks=(1, 5)) -> dict:
    """Mean metrics over a batch of instances.

    ``scores`` is [N, n]; ``labels`` holds correct class indices. Returns a
    dict with ``acc@K``/``err@K``/``ndcg@K`` per requested K, plus ``mrr``,
    all as plain fractions in [0, 1].
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or labels.shape != (scores.shape[0],):
        raise ValueError("scores must be [N, n] with one label index per row")
    n = scores.shape[1]
    for k in ks:
        _check_k(k, n)
    order = np.argsort(-scores, axis=1, kind="stable")
    positions = np.argmax(order == labels[:, None], axis=1) + 1

    out: dict[str, float] = {}
    for k in ks:
        inside = positions <= k
        out[f"acc@{k}"] = float(inside.mean())
        out[f"err@{k}"] = float(1.0 - inside.mean())
        out[f"ndcg@{k}"] = float(np.where(inside, 1.0 / np.log2(1.0 + positions), 0.0).mean())
    out["mrr"] = float((1.0 / positions).mean())
    return out
