"""The plug-and-play unadjusted Langevin chain.

The drift combines three residuals: the likelihood score, the denoiser
residual scaled by alpha/eps (the smoothed prior score, weighted), and
a projection pull-back (1/lambda)(proj(x) - x) that keeps the chain in
a neighborhood of a convex compact set. One step is

    x' = x + delta * drift(x) + sqrt(2 delta) * z,   z ~ N(0, I).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError, DivergenceError
from .forward import LinearForwardModel, likelihood_score, lipschitz_constant
from .samples import SampleSet

_DIVERGENCE_BOUND = 1e12


@dataclass
class BallProjection:
    """Euclidean projection onto a closed ball (radial clip)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radius = float(self.radius)
        if self.radius <= 0.0:
            raise ValueError(f"ball radius must be > 0, got {self.radius}")

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        offset = x - self.center
        if x.ndim == 1:
            norm = float(np.linalg.norm(offset))
            if norm <= self.radius:
                return x
            return self.center + offset * (self.radius / norm)
        norms = np.linalg.norm(offset, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(norms, 1e-300))
        return self.center + offset * scale

    def describe(self) -> dict:
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass
class BoxProjection:
    """Euclidean projection onto an axis-aligned box (coordinate clamp)."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        self.low = np.asarray(self.low, dtype=float)
        self.high = np.asarray(self.high, dtype=float)
        if not np.all(self.low < self.high):
            raise ValueError("box bounds require low < high per coordinate")

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.low, self.high)

    def describe(self) -> dict:
        return {"kind": "box", "low": self.low.tolist(), "high": self.high.tolist()}


def project(region, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of x onto the region (functional form)."""
    return region.project(x)


@dataclass
class DriftConfig:
    """Assembled drift parameters.

    ``denoiser`` is any callable mapping (d,) -> (d,) (and (n, d) ->
    (n, d) for batched use). ``denoiser_lipschitz``, when provided,
    enables the conservative step-size warning.
    """

    eps: float
    lam: float
    projection: BallProjection | BoxProjection
    denoiser: Callable[[np.ndarray], np.ndarray]
    alpha: float = 1.0
    denoiser_lipschitz: float | None = None

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


@dataclass
class ChainParams:
    """Step size, length, retention protocol, seed and initial state."""

    delta: float
    n_steps: int
    seed: int
    x0: np.ndarray
    burn_in: int = 0
    thinning: int = 1

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError(
                f"burn_in={self.burn_in} must satisfy 0 <= burn_in < n_steps={self.n_steps}"
            )

    @property
    def n_kept(self) -> int:
        return 1 + (self.n_steps - 1 - self.burn_in) // self.thinning


def drift(config: DriftConfig, fwd: LinearForwardModel, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """likelihood score + (alpha/eps)(D(x) - x) + (1/lam)(proj(x) - x)."""
    x = np.asarray(x, dtype=float)
    score = likelihood_score(fwd, y, x)
    den = config.denoiser(x)
    proj = config.projection.project(x)
    return score + (config.alpha / config.eps) * (den - x) + (proj - x) / config.lam


def ula_step(
    config: DriftConfig,
    fwd: LinearForwardModel,
    y: np.ndarray,
    x: np.ndarray,
    delta: float,
    noise: np.ndarray,
) -> np.ndarray:
    """One Euler-Maruyama step with caller-supplied standard-normal noise."""
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    out = x + delta * drift(config, fwd, y, x) + np.sqrt(2.0 * delta) * noise
    if not np.all(np.isfinite(out)):
        raise DivergenceError(
            f"non-finite state after one step (delta={delta}, eps={config.eps}, "
            f"alpha={config.alpha}, lambda={config.lam})"
        )
    return out


def max_step_size(
    lipschitz_l: float, denoiser_m: float, eps: float, lam: float
) -> float:
    """Conservative maximal step size (1/3) / (L + (M+1)/eps + 1/lam)."""
    return (1.0 / 3.0) / (lipschitz_l + (denoiser_m + 1.0) / eps + 1.0 / lam)


def recommended_params(sigma: float, alpha: float, eps: float) -> tuple[float, float]:
    """Default (lambda, delta) from the model constants.

    lambda = 1 / (2 (2/sigma^2 + alpha/eps^2)) and
    delta  = 1 / (3 (1/sigma^2 + 1/lambda + alpha/eps^2)).
    """
    if sigma <= 0 or alpha <= 0 or eps <= 0:
        raise ValueError("sigma, alpha and eps must all be positive")
    lam = 1.0 / (2.0 * (2.0 / sigma**2 + alpha / eps**2))
    delta = 1.0 / (3.0 * (1.0 / sigma**2 + 1.0 / lam + alpha / eps**2))
    return lam, delta


def run_chain(
    config: DriftConfig,
    fwd: LinearForwardModel,
    y: np.ndarray,
    params: ChainParams,
) -> SampleSet:
    """Iterate the chain and return the retained states with provenance.

    The RNG stream is fully determined by ``params.seed``. A state with
    a non-finite coordinate or one exceeding 1e12 in magnitude raises
    :class:`DivergenceError` carrying the step index.
    """
    y = np.asarray(y, dtype=float)
    d = fwd.dimension
    if params.x0.shape != (d,):
        raise DimensionMismatchError(f"x0 shape {params.x0.shape}, expected ({d},)")

    if config.denoiser_lipschitz is not None:
        bound = max_step_size(
            lipschitz_constant(fwd), config.denoiser_lipschitz, config.eps, config.lam
        )
        if params.delta > bound:
            warnings.warn(
                f"delta={params.delta} exceeds the conservative bound {bound:.3e}; "
                "proceeding anyway",
                RuntimeWarning,
                stacklevel=2,
            )

    rng = np.random.default_rng(params.seed)
    noise = rng.standard_normal((params.n_steps, d))
    sqrt_2delta = np.sqrt(2.0 * params.delta)
    sigma2 = fwd.sigma**2
    gram_scaled = fwd.gram / sigma2
    aty = fwd.matrix.T @ y / sigma2
    coef = config.alpha / config.eps
    lam_inv = 1.0 / config.lam
    denoiser = config.denoiser
    projection = config.projection

    kept = np.empty((params.n_kept, d))
    kept_idx = 0
    x = params.x0.copy()
    for k in range(params.n_steps):
        b = aty - gram_scaled @ x
        b += coef * (denoiser(x) - x)
        b += lam_inv * (projection.project(x) - x)
        x = x + params.delta * b + sqrt_2delta * noise[k]
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _DIVERGENCE_BOUND:
            raise DivergenceError(
                f"chain diverged at step {k} (delta={params.delta}, eps={config.eps}, "
                f"alpha={config.alpha}, lambda={config.lam}, seed={params.seed})",
                step=k,
            )
        if k >= params.burn_in and (k - params.burn_in) % params.thinning == 0:
            kept[kept_idx] = x
            kept_idx += 1

    meta = {
        "kind": "chain",
        "delta": params.delta,
        "n_steps": params.n_steps,
        "burn_in": params.burn_in,
        "thinning": params.thinning,
        "seed": int(params.seed),
        "x0": params.x0.tolist(),
        "eps": config.eps,
        "alpha": config.alpha,
        "lambda": config.lam,
        "projection": config.projection.describe(),
        "denoiser": repr(config.denoiser),
        "forward_hash": fwd.content_hash(),
        "y": y.tolist(),
    }
    return SampleSet(kept[:kept_idx], meta=meta)
