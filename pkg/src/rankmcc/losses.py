"""Training losses for class ranking, differentiable end to end.

Five families share one calling convention: scores are a vector over classes
(or an [N, n] batch) and labels mark the single correct class. Every loss
builds an :mod:`rankmcc.autodiff` graph, so gradients flow back into whatever
produced the scores.

``softmax_ce`` promotes the correct class against the full list via the
log-sum-exp trick. ``pair_logistic`` penalizes each (correct, incorrect) pair
on the logistic scale. ``approx_ndcg`` smooths the correct class's rank with
sigmoids of score differences and pushes its position discount toward 1;
``gumbel_approx_ndcg`` averages that objective over perturbed copies of the
scores. ``mse`` regresses scores onto a scaled one-hot target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, log, sigmoid, softplus, logsumexp, _sigmoid

__all__ = [
    "LossParams",
    "LOSS_KINDS",
    "softmax_ce",
    "pair_logistic",
    "approx_rank",
    "approx_ndcg_loss",
    "gumbel_approx_ndcg",
    "mse_loss",
    "loss_rows",
    "batch_loss",
    "loss_value",
    "one_hot",
]

LOSS_KINDS = ("softmax_ce", "pair_logistic", "approx_ndcg", "gumbel_approx_ndcg", "mse")

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class LossParams:
    """Loss family selector plus the knobs each family reads."""

    kind: str = "softmax_ce"
    sigma: float = 1.0
    alpha: float = 10.0
    gumbel_samples: int = 8
    gumbel_scale: float = 1.0
    mse_target: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(
                f"unknown loss kind {self.kind!r}; valid kinds: {', '.join(LOSS_KINDS)}"
            )
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gumbel_samples < 1:
            raise ValueError("gumbel_samples must be at least 1")
        if self.gumbel_scale < 0:
            raise ValueError("gumbel_scale must be nonnegative")
        if self.mse_target < 1:
            raise ValueError("mse_target must be at least 1")


def one_hot(labels: np.ndarray, n: int) -> np.ndarray:
    """Class indices -> one-hot rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= n):
        raise ValueError(f"label index out of range [0, {n})")
    out = np.zeros((labels.size, n), dtype=np.float64)
    out[np.arange(labels.size), labels] = 1.0
    return out


def _lift_rows(scores, labels) -> tuple[Tensor, np.ndarray]:
    """Promote (vector scores, one-hot labels) to a 1-row batch."""
    s = scores if isinstance(scores, Tensor) else Tensor(scores)
    y = np.asarray(labels, dtype=np.float64)
    if s.ndim == 1:
        s = s.reshape(1, -1)
    if y.ndim == 1:
        y = y.reshape(1, -1)
    if y.shape != s.shape:
        raise ValueError(f"labels shape {y.shape} does not match scores {s.shape}")
    if not np.all(y.sum(axis=1) == 1) or not np.all((y == 0) | (y == 1)):
        raise ValueError("each label row must be one-hot")
    return s, y


# -- row-level cores (scores [N, n], one-hot y [N, n] -> per-instance loss [N]) --


def _ce_rows(s: Tensor, y: np.ndarray) -> Tensor:
    return logsumexp(s, axis=-1) - (s * y).sum(axis=1)


def _pair_rows(s: Tensor, y: np.ndarray, sigma: float) -> Tensor:
    s_correct = (s * y).sum(axis=1).reshape(-1, 1)
    pair_terms = softplus((s - s_correct) * sigma)
    return (pair_terms * (1.0 - y)).sum(axis=1)


def _smoothed_rank_of_correct(s: Tensor, y: np.ndarray, alpha: float) -> Tensor:
    s_correct = (s * y).sum(axis=1).reshape(-1, 1)
    crossings = sigmoid((s - s_correct) * alpha)
    return (crossings * (1.0 - y)).sum(axis=1) + 1.0


def _approx_ndcg_rows(s: Tensor, y: np.ndarray, alpha: float) -> Tensor:
    rank = _smoothed_rank_of_correct(s, y, alpha)
    return 1.0 - _LN2 / log(rank + 1.0)


def _gumbel_noise(shape: tuple[int, ...], samples: int, seed) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return rng.gumbel(size=(samples,) + shape)


def _gumbel_rows(
    s: Tensor, y: np.ndarray, alpha: float, samples: int, scale: float, seed
) -> Tensor:
    noise = _gumbel_noise(s.shape, samples, seed)
    total = _approx_ndcg_rows(s + scale * noise[0], y, alpha)
    for k in range(1, samples):
        total = total + _approx_ndcg_rows(s + scale * noise[k], y, alpha)
    return total * (1.0 / samples)


def _mse_rows(s: Tensor, y: np.ndarray, target: float) -> Tensor:
    diff = s - target * y
    return (diff * diff).sum(axis=1)


# -- per-instance operations -----------------------------------------------


def softmax_ce(scores, labels) -> Tensor:
    """Cross entropy between softmax(scores) and the one-hot labels."""
    s, y = _lift_rows(scores, labels)
    return _ce_rows(s, y).sum()


def pair_logistic(scores, labels, sigma: float = 1.0) -> Tensor:
    """Sum of log(1 + exp(-sigma * margin)) over (correct, incorrect) pairs."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s, y = _lift_rows(scores, labels)
    return _pair_rows(s, y, sigma).sum()


def approx_rank(scores, alpha: float = 10.0) -> np.ndarray:
    """Sigmoid-smoothed 1-based rank of every class.

    rank(i) = 1 + sum over j != i of sigmoid(alpha * (s_j - s_i)); each value
    lies in [1, n] and converges to the exact rank as alpha grows.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    s = np.asarray(scores.data if isinstance(scores, Tensor) else scores, dtype=np.float64)
    diffs = s[None, :] - s[:, None]
    crossings = _sigmoid(alpha * diffs)
    np.fill_diagonal(crossings, 0.0)
    return 1.0 + crossings.sum(axis=1)


def approx_ndcg_loss(scores, labels, alpha: float = 10.0) -> Tensor:
    """One minus the smoothed full-list position discount of the correct class."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    s, y = _lift_rows(scores, labels)
    return _approx_ndcg_rows(s, y, alpha).sum()


def gumbel_approx_ndcg(
    scores,
    labels,
    alpha: float = 10.0,
    samples: int = 8,
    scale: float = 1.0,
    seed: int = 0,
) -> Tensor:
    """Smoothed-rank loss averaged over Gumbel-perturbed score copies.

    Perturbations are scale * g with g drawn i.i.d. from the standard Gumbel
    distribution of a PCG64 generator seeded by ``seed``; the value is fully
    determined by its arguments.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    s, y = _lift_rows(scores, labels)
    return _gumbel_rows(s, y, alpha, samples, scale, seed).sum()


def mse_loss(scores, labels, target: float = 1.0) -> Tensor:
    """Squared distance between scores and target * one-hot labels.

    ``target`` > 1 rescales the regression target so the single correct class
    is not drowned out when there are many classes.
    """
    if target < 1:
        raise ValueError("target must be at least 1")
    s, y = _lift_rows(scores, labels)
    return _mse_rows(s, y, target).sum()


# -- dispatch used by the training harness ----------------------------------


def loss_rows(params: LossParams, scores: Tensor, y: np.ndarray, seed=None) -> Tensor:
    """Per-instance loss vector for a batch under ``params``.

    ``seed`` overrides the params seed for the stochastic family, letting the
    training loop vary noise per step while staying reproducible.
    """
    if params.kind == "softmax_ce":
        return _ce_rows(scores, y)
    if params.kind == "pair_logistic":
        return _pair_rows(scores, y, params.sigma)
    if params.kind == "approx_ndcg":
        return _approx_ndcg_rows(scores, y, params.alpha)
    if params.kind == "gumbel_approx_ndcg":
        use_seed = params.seed if seed is None else seed
        return _gumbel_rows(
            scores, y, params.alpha, params.gumbel_samples, params.gumbel_scale, use_seed
        )
    if params.kind == "mse":
        return _mse_rows(scores, y, params.mse_target)
    raise ValueError(f"unknown loss kind {params.kind!r}")


def batch_loss(params: LossParams, scores: Tensor, labels: np.ndarray, seed=None) -> Tensor:
    """Mean per-instance loss over a batch; ``labels`` are class indices."""
    y = one_hot(labels, scores.shape[-1])
    return loss_rows(params, scores, y, seed=seed).mean()


def loss_value(params: LossParams, scores: np.ndarray, labels: np.ndarray, seed=None) -> float:
    """Forward-only convenience: the batch loss as a plain float."""
    return batch_loss(params, Tensor(scores), labels, seed=seed).item()
