"""Independent oracles and the end-to-end validation suite.

Each oracle recomputes a closed-form quantity by a route that shares no
code with the implementation it checks: dense quadrature for the MMSE
denoiser, self-normalized importance sampling for the posterior mean,
central finite differences for the smoothed score, and assignment
enumeration for small exact-W1 instances. ``run_validation_suite``
wires all of them, plus a conjugate-chain check of the sampler, into
one pass/fail report.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import SampleBudgetError
from .forward import LinearForwardModel
from .gmm import (
    ExactMmseDenoiser,
    GaussianComponent,
    GaussianMixture,
    crossed_gmm_2d,
    gmm_log_density,
    gmm_posterior,
    gmm_sample,
    gmm_score,
    smoothed_mixture,
    smoothed_prior_score,
)
from .metrics import mmse_estimate, variance_estimate, wasserstein1_exact
from .sampler import BallProjection, ChainParams, DriftConfig, run_chain


def quadrature_mmse(
    mixture: GaussianMixture,
    eps: float,
    z: np.ndarray,
    bounds: tuple[float, float] = (-8.0, 8.0),
    grid_n: int = 400,
) -> np.ndarray:
    """E[x | z] by dense 2-D quadrature: weights prop. to p(x) N(z; x, eps I)."""
    if mixture.dimension != 2:
        raise ValueError("quadrature oracle is 2-D only")
    z = np.asarray(z, dtype=float)
    axis = np.linspace(bounds[0], bounds[1], grid_n)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    log_prior = gmm_log_density(mixture, grid)
    sq = np.sum((grid - z) ** 2, axis=1)
    log_w = log_prior - sq / (2.0 * eps)
    log_w -= log_w.max()
    w = np.exp(log_w)
    w /= w.sum()
    return w @ grid


def importance_posterior_mean(
    mixture: GaussianMixture,
    fwd: LinearForwardModel,
    y: np.ndarray,
    n_draws: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Self-normalized importance sampling of E[x | y], prior as proposal.

    Returns (mean, per-coordinate standard error).
    """
    y = np.asarray(y, dtype=float)
    draws = gmm_sample(mixture, n_draws, seed).samples
    residual = y - draws @ fwd.matrix.T
    log_w = -np.sum(residual * residual, axis=1) / (2.0 * fwd.sigma**2)
    log_w -= log_w.max()
    w = np.exp(log_w)
    w /= w.sum()
    mean = w @ draws
    centered = draws - mean
    std_err = np.sqrt(np.sum((w[:, None] * centered) ** 2, axis=0))
    return mean, std_err


def finite_difference_smoothed_score(
    mixture: GaussianMixture, eps: float, x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central differences of the eps-smoothed mixture log-density."""
    x = np.asarray(x, dtype=float)
    smoothed = smoothed_mixture(mixture, eps)
    out = np.empty_like(x)
    for j in range(x.shape[0]):
        hi = x.copy()
        lo = x.copy()
        hi[j] += step
        lo[j] -= step
        out[j] = (gmm_log_density(smoothed, hi) - gmm_log_density(smoothed, lo)) / (2.0 * step)
    return out


def brute_force_w1(a: np.ndarray, b: np.ndarray) -> float:
    """Minimal average assignment cost by full enumeration (n <= 7)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    if n > 7:
        raise SampleBudgetError(f"enumeration oracle limited to n <= 7, got {n}")
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.linalg.norm(a[i] - b[perm[i]]) for i in range(n))
        best = min(best, cost)
    return best / n


def tv_quadrature(
    log_density_a, log_density_b, bounds: tuple[float, float], grid_n: int
) -> float:
    """TV between two 2-D densities by Riemann quadrature of |p - q| / 2."""
    axis = np.linspace(bounds[0], bounds[1], grid_n)
    cell = (axis[1] - axis[0]) ** 2
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    pa = np.exp(np.asarray(log_density_a(grid)))
    pb = np.exp(np.asarray(log_density_b(grid)))
    return float(0.5 * np.sum(np.abs(pa - pb)) * cell)


@dataclass
class Check:
    """One oracle check: name, measured error, allowed threshold."""

    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": float(self.measured),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            out.append(
                f"[{status}] {c.name}: measured={c.measured:.3e} threshold={c.threshold:.3e}"
                + (f" ({c.detail})" if c.detail else "")
            )
        return out


def _check_mmse_quadrature(fault_offset: float) -> Check:
    mixture = crossed_gmm_2d()
    eps = 0.05
    denoiser = ExactMmseDenoiser(mixture, eps)
    points = [np.array([a, b]) for a in (-3.0, 0.0, 3.0) for b in (-3.0, 0.0, 3.0)]
    worst = 0.0
    for z in points:
        reference = quadrature_mmse(mixture, eps, z)
        value = denoiser(z) + fault_offset
        scale = max(1.0, float(np.linalg.norm(reference)))
        worst = max(worst, float(np.linalg.norm(value - reference)) / scale)
    return Check("mmse-closed-form-vs-quadrature", worst < 1e-4, worst, 1e-4, "9 grid points")


def _check_posterior_importance(seed: int) -> Check:
    mixture = crossed_gmm_2d()
    fwd = LinearForwardModel(np.eye(2), 1.0)
    y = np.array([0.0, 8.0])
    posterior = gmm_posterior(mixture, fwd, y)
    is_mean, is_se = importance_posterior_mean(mixture, fwd, y, n_draws=10**6, seed=seed)
    gaps = np.abs(posterior.mean() - is_mean) / np.maximum(is_se, 1e-300)
    worst = float(gaps.max())
    return Check(
        "posterior-mean-vs-importance-sampling",
        worst < 3.0,
        worst,
        3.0,
        "gap in standard errors, 1e6 draws",
    )


def _check_score_finite_difference(seed: int, fault_offset: float) -> Check:
    mixture = crossed_gmm_2d()
    eps = 0.05
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        x = rng.uniform(-2.0, 2.0, size=2)
        analytic = smoothed_prior_score(mixture, eps, x) + fault_offset / eps
        numeric = finite_difference_smoothed_score(mixture, eps, x)
        worst = max(worst, np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric))
    return Check("smoothed-score-vs-finite-difference", worst < 1e-5, worst, 1e-5, "5 points")


def _check_tweedie_identity(seed: int) -> Check:
    mixture = crossed_gmm_2d()
    eps = 0.05
    smoothed = smoothed_mixture(mixture, eps)
    rng = np.random.default_rng(seed)
    points = rng.uniform(-4.0, 4.0, size=(20, 2))
    via_denoiser = smoothed_prior_score(mixture, eps, points)
    direct = gmm_score(smoothed, points)
    worst = float(np.max(np.linalg.norm(via_denoiser - direct, axis=1)))
    return Check("tweedie-identity", worst <= 1e-8, worst, 1e-8, "20 points, two closed forms")


def _check_assignment_enumeration(seed: int) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(2, 8):
        a = rng.standard_normal((n, 2))
        b = rng.standard_normal((n, 2))
        exact = wasserstein1_exact(a, b).value
        worst = max(worst, abs(exact - brute_force_w1(a, b)))
    return Check("assignment-vs-enumeration", worst <= 1e-12, worst, 1e-12, "n = 2..7")


def conjugate_chain_check(seed: int) -> Check:
    """End-to-end sampler check against the exact Gaussian posterior.

    Single-Gaussian prior N(0, I), A = I, sigma = 1: the chain with the
    exact denoiser targets the posterior under the eps-smoothed prior
    N(0, (1 + eps) I), whose mean and covariance are in closed form.
    """
    prior = GaussianMixture([GaussianComponent(1.0, np.zeros(2), np.eye(2))])
    fwd = LinearForwardModel(np.eye(2), 1.0)
    y = np.array([2.0, 4.0])
    eps = 0.1
    config = DriftConfig(
        eps=eps,
        lam=0.5,
        projection=BallProjection(np.zeros(2), 10.0),
        denoiser=ExactMmseDenoiser(prior, eps),
        alpha=1.0,
    )
    params = ChainParams(delta=0.01, n_steps=300_000, seed=seed, x0=np.zeros(2), burn_in=30_000)
    chain = run_chain(config, fwd, y, params)
    posterior = gmm_posterior(smoothed_mixture(prior, eps), fwd, y)
    mean_err = float(np.max(np.abs(mmse_estimate(chain) - posterior.mean())))
    trace = float(np.trace(posterior.covariance()))
    var_err = abs(variance_estimate(chain) - trace) / trace
    measured = max(mean_err / 0.05, var_err / 0.05)
    return Check(
        "conjugate-chain",
        mean_err < 0.05 and var_err < 0.05,
        measured,
        1.0,
        f"mean_err={mean_err:.4f} (tol 0.05), var_rel_err={var_err:.4f} (tol 0.05)",
    )


def run_validation_suite(seed: int = 20240, fault_injection: bool = False) -> ValidationReport:
    """Run every oracle check; fault injection perturbs the closed-form
    denoiser output by 1e-3 to demonstrate oracle sensitivity."""
    fault = 1e-3 if fault_injection else 0.0
    report = ValidationReport()
    report.checks.append(_check_mmse_quadrature(fault))
    report.checks.append(_check_posterior_importance(seed))
    report.checks.append(_check_score_finite_difference(seed + 1, fault))
    report.checks.append(_check_tweedie_identity(seed + 2))
    report.checks.append(_check_assignment_enumeration(seed + 3))
    report.checks.append(conjugate_chain_check(seed + 4))
    return report
