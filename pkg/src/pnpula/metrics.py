"""Distances between functions and between empirical distributions.

Function distances are root-mean-square gaps weighted by a sample set
(the reference chain for the posterior variant, prior draws for the
prior variant). Distribution distances are Wasserstein-1 on empirical
clouds (exact optimal assignment, or a subsample-averaged estimate)
and a 2-D histogram total-variation diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import spearmanr

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InsufficientDataError,
    SampleBudgetError,
)
from .samples import SampleSet

EXACT_ASSIGNMENT_GUARD = 4096


@dataclass(frozen=True)
class PseudometricReport:
    """Value and provenance of a sample-weighted function distance."""

    value: float
    n_points: int
    integrating_distribution: str


@dataclass(frozen=True)
class TransportEstimate:
    """A Wasserstein-1 value with its estimation protocol."""

    value: float
    method: str
    n_used: int
    std_error: float = 0.0


def _as_points(s) -> np.ndarray:
    if isinstance(s, SampleSet):
        return s.samples
    arr = np.asarray(s, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError("expected a 2-D point cloud")
    return arr


def _evaluate(f: Callable, points: np.ndarray) -> np.ndarray:
    """Evaluate f on a batch, falling back to row-wise application."""
    try:
        out = np.asarray(f(points), dtype=float)
        if out.shape == points.shape:
            return out
    except Exception:
        pass
    return np.stack([np.asarray(f(row), dtype=float) for row in points])


def _function_l2(f1, f2, samples, label: str) -> PseudometricReport:
    points = _as_points(samples)
    if points.shape[0] == 0:
        raise InsufficientDataError("function distance needs a nonempty sample set")
    diff = _evaluate(f1, points) - _evaluate(f2, points)
    value = float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
    return PseudometricReport(value, points.shape[0], label)


def posterior_l2(f1, f2, reference_samples) -> PseudometricReport:
    """RMS of |f1 - f2| over samples of the reference chain."""
    return _function_l2(f1, f2, reference_samples, "posterior-ref")


def prior_l2(f1, f2, prior_samples) -> PseudometricReport:
    """RMS of |f1 - f2| over prior draws."""
    return _function_l2(f1, f2, prior_samples, "prior")


def wasserstein1_exact(a, b, max_points: int = EXACT_ASSIGNMENT_GUARD) -> TransportEstimate:
    """Exact W1 between equal-size clouds via optimal assignment.

    Cost is the Euclidean distance; the optimal matching is found with
    an exact min-cost bipartite assignment on the n x n cost matrix.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(
            f"exact W1 needs equal-size clouds, got {pa.shape} and {pb.shape}"
        )
    n = pa.shape[0]
    if n == 0:
        raise InsufficientDataError("empty point clouds")
    if n > max_points:
        raise SampleBudgetError(
            f"n={n} exceeds the exact-assignment guard {max_points}; "
            "use wasserstein1_estimate instead"
        )
    cost = cdist(pa, pb)
    rows, cols = linear_sum_assignment(cost)
    return TransportEstimate(float(cost[rows, cols].sum() / n), "exact-assignment", n)


def wasserstein1_estimate(
    a, b, n_sub: int, n_repeats: int, seed: int
) -> TransportEstimate:
    """Subsample-averaged W1 between large clouds.

    Averages ``n_repeats`` exact assignments on independent uniform
    subsamples of size ``n_sub`` (without replacement) and reports the
    standard error across repeats. Carries the strictly positive
    same-distribution bias of finite-sample W1.
    """
    pa, pb = _as_points(a), _as_points(b)
    if n_sub < 1 or n_repeats < 1:
        raise ValueError("n_sub and n_repeats must be >= 1")
    if n_sub > min(pa.shape[0], pb.shape[0]):
        raise SampleBudgetError(
            f"n_sub={n_sub} exceeds cloud sizes {pa.shape[0]}, {pb.shape[0]}"
        )
    rng = np.random.default_rng(seed)
    values = np.empty(n_repeats)
    for r in range(n_repeats):
        ia = rng.choice(pa.shape[0], size=n_sub, replace=False)
        ib = rng.choice(pb.shape[0], size=n_sub, replace=False)
        values[r] = wasserstein1_exact(pa[ia], pb[ib], max_points=n_sub).value
    std_error = float(np.std(values, ddof=1) / np.sqrt(n_repeats)) if n_repeats > 1 else 0.0
    return TransportEstimate(float(values.mean()), "subsample-average", n_sub, std_error)


def same_distribution_floor(a, n_sub: int, n_repeats: int, seed: int) -> TransportEstimate:
    """Empirical W1 bias floor: disjoint subsample pairs from one cloud."""
    pa = _as_points(a)
    if 2 * n_sub > pa.shape[0]:
        raise SampleBudgetError(f"need at least 2*n_sub={2 * n_sub} points, got {pa.shape[0]}")
    rng = np.random.default_rng(seed)
    values = np.empty(n_repeats)
    for r in range(n_repeats):
        idx = rng.choice(pa.shape[0], size=2 * n_sub, replace=False)
        values[r] = wasserstein1_exact(pa[idx[:n_sub]], pa[idx[n_sub:]], max_points=n_sub).value
    std_error = float(np.std(values, ddof=1) / np.sqrt(n_repeats)) if n_repeats > 1 else 0.0
    return TransportEstimate(float(values.mean()), "subsample-average", n_sub, std_error)


def tv_histogram(a, b, bounds: Sequence[Sequence[float]], bins: int | Sequence[int]) -> float:
    """Total-variation diagnostic between 2-D clouds on a fixed grid.

    Half the L1 distance between normalized histograms, with mass
    falling outside the grid pooled into one extra cell so the result
    stays in [0, 1]. Limited to d = 2.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[1] != 2 or pb.shape[1] != 2:
        raise DimensionMismatchError("tv_histogram supports d = 2 only")
    if isinstance(bins, int):
        bins = (bins, bins)
    ha, _, _ = np.histogram2d(pa[:, 0], pa[:, 1], bins=bins, range=bounds)
    hb, _, _ = np.histogram2d(pb[:, 0], pb[:, 1], bins=bins, range=bounds)
    pa_hist = ha / pa.shape[0]
    pb_hist = hb / pb.shape[0]
    out_a = 1.0 - pa_hist.sum()
    out_b = 1.0 - pb_hist.sum()
    return float(0.5 * (np.abs(pa_hist - pb_hist).sum() + abs(out_a - out_b)))


def mmse_estimate(s) -> np.ndarray:
    """Sample mean: the Monte-Carlo MMSE estimator."""
    points = _as_points(s)
    if points.shape[0] == 0:
        raise InsufficientDataError("empty sample set")
    return points.mean(axis=0)


def variance_estimate(s) -> float:
    """Total variance E|x|^2 - |E x|^2 of a sample set."""
    points = _as_points(s)
    if points.shape[0] == 0:
        raise InsufficientDataError("empty sample set")
    mean = points.mean(axis=0)
    return float(np.mean(np.sum(points * points, axis=1)) - mean @ mean)


def lipschitz_estimate(f: Callable, domain_samples, n_pairs: int, seed: int) -> float:
    """Sampling lower bound on the Lipschitz constant of f.

    Takes ``n_pairs`` random sample pairs plus ``n_pairs`` near-coincident
    pairs perturbed at scale 1e-4 and returns the largest difference
    quotient observed.
    """
    points = _as_points(domain_samples)
    n = points.shape[0]
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if n < 2:
        raise InsufficientDataError("need at least two domain samples")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n, size=n_pairs)
    far_x1, far_x2 = points[i], points[j]
    base = points[rng.integers(0, n, size=n_pairs)]
    direction = rng.standard_normal(base.shape)
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    near_x1, near_x2 = base, base + 1e-4 * direction
    x1 = np.vstack([far_x1, near_x1])
    x2 = np.vstack([far_x2, near_x2])
    gaps = np.linalg.norm(x1 - x2, axis=1)
    valid = gaps > 0.0
    f_gap = np.linalg.norm(_evaluate(f, x1) - _evaluate(f, x2), axis=1)
    return float(np.max(f_gap[valid] / gaps[valid]))


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DimensionMismatchError("pearson_r needs two equal-length 1-D sequences")
    if xs.size < 3:
        raise InsufficientDataError("pearson_r needs at least 3 points")
    if np.std(xs) == 0.0 or np.std(ys) == 0.0:
        raise DegenerateInputError("pearson_r needs nonzero variance in each input")
    return float(np.corrcoef(xs, ys)[0, 1])


def spearman_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation (thin wrapper, used in sweep summaries)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DimensionMismatchError("spearman_r needs two equal-length 1-D sequences")
    return float(spearmanr(xs, ys).statistic)
