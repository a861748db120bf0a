"""Randomized verification of the package's core mathematical claims.

Four checks, each over seeded random inputs, reporting its minimum margin:

1. informativeness: over position distributions, the entropy of the
   discounted metric's values is never below the hard top-K cut's entropy,
   and is strictly above whenever at least two positions inside the cutoff
   carry mass.
2. cross-entropy bounds: reciprocal rank is at least exp(-loss) and the
   full-list discounted metric at least 1/log2(1 + exp(loss)).
3. cutoff-1 identity: the discounted metric at K=1 equals top-1 accuracy.
4. rank sharpness: with well-separated scores and a sharp sigmoid, smoothed
   ranks coincide with the exact ones.

Any violation carries a counterexample dump so it can be replayed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics as M
from .losses import approx_rank, softmax_ce
from .metrics import PositionDistribution

__all__ = ["CheckResult", "run_verification", "VERIFICATION_CHECKS"]

VERIFICATION_CHECKS = (
    "entropy-informativeness",
    "cross-entropy-bounds",
    "cutoff1-identity",
    "rank-sharpness",
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    min_margin: float
    counterexample: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status} {self.name}: trials={self.trials} min_margin={self.min_margin:.3e}"
        if self.counterexample:
            msg += f"\n  counterexample: {self.counterexample}"
        return msg


def _random_distribution(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    if rng.random() < 0.25:
        # zero out some positions to exercise the 0 log 0 branches
        mask = rng.random(n) < 0.5
        if mask.all():
            mask[rng.integers(n)] = False
        p = np.where(mask, 0.0, p)
        p = p / p.sum()
    return p


def check_entropy_informativeness(trials: int, seed: int,
                                  entropy_fn=None) -> CheckResult:
    """Gap check over random position distributions, all cutoffs each.

    The default path evaluates all cutoffs of a distribution at once with
    :func:`rankmcc.metrics.entropy_profile`; passing ``entropy_fn`` switches
    to per-cutoff evaluation of that function (used to prove the check can
    catch a faulty analyzer).
    """
    rng = np.random.default_rng(seed)
    min_margin = np.inf
    min_strict = np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 21))
        p = _random_distribution(rng, n)
        if entropy_fn is None:
            h_ndcg, h_acc = M.entropy_profile(p)
        else:
            dist = PositionDistribution(p)
            pairs = [entropy_fn(dist, k) for k in range(1, n + 1)]
            h_ndcg = np.array([a for a, _ in pairs])
            h_acc = np.array([b for _, b in pairs])
        margins = h_ndcg - h_acc
        live = np.cumsum(p > 1e-6)
        for k in range(1, n + 1):
            margin = float(margins[k - 1])
            min_margin = min(min_margin, margin)
            if margin < -1e-12 or (live[k - 1] >= 2 and margin <= 0.0):
                return CheckResult(
                    "entropy-informativeness", False, trials, margin,
                    f"n={n} K={k} p={p.tolist()} "
                    f"h_ndcg={h_ndcg[k - 1]} h_acc={h_acc[k - 1]}",
                )
            if live[k - 1] >= 2:
                min_strict = min(min_strict, margin)
    return CheckResult("entropy-informativeness", True, trials,
                       float(min(min_margin, min_strict)))


def check_cross_entropy_bounds(trials: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    min_margin = np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 51))
        s = rng.normal(size=n) * rng.uniform(0.1, 4.0)
        c = int(rng.integers(n))
        y = np.zeros(n)
        y[c] = 1.0
        ce = softmax_ce(s, y).item()
        ranking = M.rank_classes(s)
        rr_margin = M.mrr(ranking, y) - np.exp(-ce)
        ndcg_margin = M.ndcg_at_k(ranking, y, n) - 1.0 / np.log2(1.0 + np.exp(ce))
        margin = min(rr_margin, ndcg_margin)
        min_margin = min(min_margin, margin)
        if margin < -1e-12:
            return CheckResult(
                "cross-entropy-bounds", False, trials, margin,
                f"scores={s.tolist()} correct={c} ce={ce}",
            )
    return CheckResult("cross-entropy-bounds", True, trials, float(min_margin))


def check_cutoff1_identity(trials: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n = int(rng.integers(2, 21))
        ranking = rng.permutation(n)
        y = np.zeros(n)
        y[rng.integers(n)] = 1.0
        a = M.ndcg_at_k(ranking, y, 1)
        b = M.top_k_accuracy(ranking, y, 1)
        if a != b:
            return CheckResult(
                "cutoff1-identity", False, trials, a - b,
                f"ranking={ranking.tolist()} labels={y.tolist()}",
            )
    return CheckResult("cutoff1-identity", True, trials, 0.0)


def check_rank_sharpness(trials: int, seed: int, alpha: float = 1e4,
                         min_gap: float = 0.1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 31))
        spacings = min_gap + rng.exponential(0.3, size=n - 1)
        s = rng.permutation(np.concatenate([[0.0], np.cumsum(spacings)]) + rng.normal())
        true_ranks = np.empty(n)
        true_ranks[M.rank_classes(s)] = np.arange(1, n + 1)
        gap = float(np.abs(approx_rank(s, alpha=alpha) - true_ranks).max())
        worst = max(worst, gap)
        if gap >= 1e-6:
            return CheckResult(
                "rank-sharpness", False, trials, 1e-6 - gap,
                f"scores={s.tolist()} gap={gap}",
            )
    return CheckResult("rank-sharpness", True, trials, float(1e-6 - worst))


def run_verification(trials: int, seed: int, entropy_fn=None) -> list[CheckResult]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    return [
        check_entropy_informativeness(trials, seed, entropy_fn=entropy_fn),
        check_cross_entropy_bounds(trials, seed + 1),
        check_cutoff1_identity(trials, seed + 2),
        check_rank_sharpness(trials, seed + 3),
    ]
