"""Exact Gaussian-mixture machinery.

Everything here is closed form: mixture log-density and score, i.i.d.
sampling, the conjugate posterior under a linear-Gaussian observation,
the exact MMSE denoiser under isotropic Gaussian noise of variance
``eps``, the smoothed prior score obtained from the denoiser residual,
and the thresholded (mismatched) denoiser family.

Conventions:
  * ``eps`` is a noise VARIANCE, never a standard deviation. All closed
    forms use ``cov + eps*I`` and ``inv(cov) + I/eps``.
  * mixture weights are handled in log-space with max-shift; explicit
    normalizers that would underflow are replaced by numerical
    normalization of the weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateModelError, DimensionMismatchError
from .samples import SampleSet

# SPD tolerance is scale-invariant: smallest eigenvalue must exceed
# 1e-12 times the largest.
_SPD_RTOL = 1e-12

_LOG_2PI = float(np.log(2.0 * np.pi))


def _require_spd(mat: np.ndarray, what: str) -> None:
    vals = np.linalg.eigvalsh(mat)
    if vals[-1] <= 0.0 or vals[0] <= _SPD_RTOL * vals[-1]:
        raise DegenerateModelError(
            f"{what} is not symmetric positive definite "
            f"(eigenvalue range [{vals[0]:.3e}, {vals[-1]:.3e}])"
        )


@dataclass
class GaussianComponent:
    """One mixture component: weight, mean and covariance."""

    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.weight = float(self.weight)
        self.mean = np.asarray(self.mean, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.weight < 0.0:
            raise ValueError(f"component weight must be >= 0, got {self.weight}")
        if self.mean.ndim != 1:
            raise DimensionMismatchError("component mean must be a vector")
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise DimensionMismatchError(
                f"covariance shape {self.covariance.shape} does not match dimension {d}"
            )
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-10, rtol=0.0):
            raise DegenerateModelError("component covariance is not symmetric within 1e-10")
        self.covariance = 0.5 * (self.covariance + self.covariance.T)
        _require_spd(self.covariance, "component covariance")


@dataclass
class GaussianMixture:
    """A finite Gaussian mixture on R^d.

    Weights must sum to 1 within 1e-12 and all components must share
    the same dimension. Derived arrays (Cholesky factors, inverses,
    log-determinants) are cached on first use.
    """

    components: list[GaussianComponent]

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixture needs at least one component")
        d = self.components[0].mean.shape[0]
        for comp in self.components:
            if comp.mean.shape[0] != d:
                raise DimensionMismatchError("all components must share the same dimension")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"component weights sum to {total!r}, expected 1 within 1e-12")

    @property
    def dimension(self) -> int:
        return self.components[0].mean.shape[0]

    @property
    def n_components(self) -> int:
        return len(self.components)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @cached_property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @cached_property
    def covariances(self) -> np.ndarray:
        return np.stack([c.covariance for c in self.components])

    @cached_property
    def cholesky_factors(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariances)
        except np.linalg.LinAlgError as exc:
            raise DegenerateModelError(f"Cholesky factorization failed: {exc}") from exc

    @cached_property
    def precision_matrices(self) -> np.ndarray:
        return np.linalg.inv(self.covariances)

    @cached_property
    def log_dets(self) -> np.ndarray:
        # log det from the Cholesky diagonal; always finite for SPD input
        diags = np.diagonal(self.cholesky_factors, axis1=1, axis2=2)
        return 2.0 * np.sum(np.log(diags), axis=1)


def gmm_from_dict(spec: dict) -> GaussianMixture:
    """Build a mixture from the model-file schema.

    Expected keys: ``dimension`` and ``components``, each component a
    mapping with ``weight``, ``mean`` and a row-major ``covariance``
    (flat list of d*d entries, or nested rows).
    """
    try:
        d = int(spec["dimension"])
        raw_components = spec["components"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"GMM spec missing required key: {exc}") from exc
    components = []
    for idx, raw in enumerate(raw_components):
        try:
            weight = float(raw["weight"])
            mean = np.asarray(raw["mean"], dtype=float)
            cov = np.asarray(raw["covariance"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"component {idx}: {exc}") from exc
        if cov.ndim == 1:
            if cov.size != d * d:
                raise ConfigError(
                    f"component {idx}: covariance has {cov.size} entries, expected {d * d}"
                )
            cov = cov.reshape(d, d)
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ConfigError(f"component {idx}: shapes inconsistent with dimension {d}")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0.0):
            raise ConfigError(f"component {idx}: covariance not symmetric within 1e-10")
        try:
            components.append(GaussianComponent(weight, mean, cov))
        except (DegenerateModelError, ValueError) as exc:
            raise ConfigError(f"component {idx}: {exc}") from exc
    try:
        return GaussianMixture(components)
    except (ValueError, DimensionMismatchError) as exc:
        raise ConfigError(str(exc)) from exc


def load_gmm(path: str | Path) -> GaussianMixture:
    """Load a mixture from a JSON model file."""
    try:
        spec = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read GMM file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"GMM file {path} is not valid JSON: {exc}") from exc
    return gmm_from_dict(spec)


def crossed_gmm_2d() -> GaussianMixture:
    """Two zero-mean anisotropic components crossing at the origin.

    The standard 2-D test prior used throughout the experiments: equal
    weights, one component elongated along each axis with strong
    off-diagonal correlation.
    """
    cov1 = np.array([[2.0, 0.5], [0.5, 0.15]])
    cov2 = np.array([[0.15, 0.5], [0.5, 2.0]])
    zero = np.zeros(2)
    return GaussianMixture(
        [GaussianComponent(0.5, zero, cov1), GaussianComponent(0.5, zero, cov2)]
    )


def _component_log_densities(mixture: GaussianMixture, points: np.ndarray) -> np.ndarray:
    """Per-component Gaussian log-densities, shape (p, n)."""
    d = mixture.dimension
    out = np.empty((mixture.n_components, points.shape[0]))
    for i in range(mixture.n_components):
        diff = points - mixture.means[i]
        # solve L z = diff^T so that |z|^2 is the Mahalanobis norm
        z = np.linalg.solve(mixture.cholesky_factors[i], diff.T)
        quad = np.sum(z * z, axis=0)
        out[i] = -0.5 * (d * _LOG_2PI + mixture.log_dets[i] + quad)
    return out


def gmm_log_density(mixture: GaussianMixture, x: np.ndarray) -> float | np.ndarray:
    """log sum_i w_i N(x; mu_i, cov_i), computed with a max-shift.

    Accepts a single point of shape (d,) or a batch of shape (n, d).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = np.atleast_2d(x)
    if points.shape[1] != mixture.dimension:
        raise DimensionMismatchError(
            f"point dimension {points.shape[1]} != mixture dimension {mixture.dimension}"
        )
    logs = _component_log_densities(mixture, points)
    with np.errstate(divide="ignore"):
        logs = logs + np.log(mixture.weights)[:, None]
    out = logsumexp(logs, axis=0)
    return float(out[0]) if single else out


def gmm_score(mixture: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """Gradient of the mixture log-density.

    score(x) = sum_i r_i(x) * prec_i (mu_i - x) with r_i the posterior
    component responsibilities at x.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = np.atleast_2d(x)
    logs = _component_log_densities(mixture, points)
    with np.errstate(divide="ignore"):
        logs = logs + np.log(mixture.weights)[:, None]
    logs -= logsumexp(logs, axis=0, keepdims=True)
    resp = np.exp(logs)  # (p, n)
    diff = mixture.means[:, None, :] - points[None, :, :]  # (p, n, d)
    pulls = np.einsum("pde,pne->pnd", mixture.precision_matrices, diff)
    out = np.einsum("pn,pnd->nd", resp, pulls)
    return out[0] if single else out


def gmm_sample(mixture: GaussianMixture, n: int, seed: int) -> SampleSet:
    """n i.i.d. draws: categorical component choice, then a Cholesky draw.

    Deterministic given the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    picks = rng.choice(mixture.n_components, size=n, p=mixture.weights)
    z = rng.standard_normal((n, mixture.dimension))
    out = np.empty_like(z)
    for i in range(mixture.n_components):
        mask = picks == i
        out[mask] = mixture.means[i] + z[mask] @ mixture.cholesky_factors[i].T
    return SampleSet(out, meta={"kind": "prior", "seed": int(seed), "n": int(n)})


@dataclass
class PosteriorMixture:
    """Closed-form Gaussian-mixture posterior.

    Component i carries a normalized weight ``weights[i]``, a mean
    ``means[i]`` and a PRECISION matrix ``precisions[i]``.
    """

    weights: np.ndarray
    means: np.ndarray
    precisions: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.precisions = np.asarray(self.precisions, dtype=float)
        total = self.weights.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"posterior weights sum to {total!r}")
        for i, prec in enumerate(self.precisions):
            _require_spd(prec, f"posterior precision {i}")

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    @cached_property
    def component_covariances(self) -> np.ndarray:
        return np.linalg.inv(self.precisions)

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        mu = self.mean()
        second = np.einsum(
            "i,ide->de",
            self.weights,
            self.component_covariances + np.einsum("id,ie->ide", self.means, self.means),
        )
        return second - np.outer(mu, mu)

    def as_mixture(self) -> GaussianMixture:
        comps = [
            GaussianComponent(w, m, c)
            for w, m, c in zip(self.weights, self.means, self.component_covariances)
        ]
        return GaussianMixture(comps)


def gmm_posterior(mixture: GaussianMixture, fwd, y: np.ndarray) -> PosteriorMixture:
    """Exact posterior of a GMM prior under y = A x + noise.

    Per component: S_i = inv(cov_i) + A^T A / sigma^2 and
    m_i = inv(S_i) (inv(cov_i) mu_i + A^T y / sigma^2). The mixture
    weights are proportional to w_i N(y; A mu_i, sigma^2 I + A cov_i A^T)
    and are normalized numerically in log-space, which sidesteps the
    marginal p(y).
    """
    y = np.asarray(y, dtype=float)
    a = fwd.matrix
    m_obs, d = a.shape
    if d != mixture.dimension:
        raise DimensionMismatchError(
            f"forward model maps dimension {d}, mixture has {mixture.dimension}"
        )
    if y.shape != (m_obs,):
        raise DimensionMismatchError(f"observation shape {y.shape}, expected ({m_obs},)")
    sigma2 = fwd.sigma**2
    ata = a.T @ a / sigma2
    aty = a.T @ y / sigma2

    p = mixture.n_components
    precisions = np.empty((p, d, d))
    means = np.empty((p, d))
    log_w = np.empty(p)
    eye_obs = np.eye(m_obs)
    for i in range(p):
        s_i = mixture.precision_matrices[i] + ata
        s_i = 0.5 * (s_i + s_i.T)
        _require_spd(s_i, f"posterior precision {i}")
        precisions[i] = s_i
        means[i] = np.linalg.solve(s_i, mixture.precision_matrices[i] @ mixture.means[i] + aty)
        # marginal likelihood of y under component i
        cov_y = sigma2 * eye_obs + a @ mixture.covariances[i] @ a.T
        cov_y = 0.5 * (cov_y + cov_y.T)
        _require_spd(cov_y, f"marginal covariance {i}")
        chol = np.linalg.cholesky(cov_y)
        z = np.linalg.solve(chol, y - a @ mixture.means[i])
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        with np.errstate(divide="ignore"):
            log_w[i] = np.log(mixture.weights[i]) - 0.5 * (
                m_obs * _LOG_2PI + log_det + z @ z
            )
    log_w -= logsumexp(log_w)
    return PosteriorMixture(np.exp(log_w), means, precisions)


class ExactMmseDenoiser:
    """Closed-form MMSE denoiser for a GMM prior and noise variance ``eps``.

    D(x) = sum_i w_i c_i(x) n_i(x) / sum_i w_i c_i(x) with
    n_i(x) = inv(inv(cov_i) + I/eps) (inv(cov_i) mu_i + x/eps) and
    c_i(x) the Gaussian density N(x; mu_i, cov_i + eps I). The c_i are
    handled in log-space with max-shift. n_i is affine in x, so the
    linear maps are precomputed once.
    """

    def __init__(self, mixture: GaussianMixture, eps: float):
        if eps <= 0.0:
            raise ValueError(f"eps must be > 0, got {eps}")
        self.mixture = mixture
        self.eps = float(eps)
        d = mixture.dimension
        eye = np.eye(d)
        p = mixture.n_components
        self._lin = np.empty((p, d, d))  # n_i(x) = lin_i @ x + off_i
        self._off = np.empty((p, d))
        self._smoothed_inv = np.empty((p, d, d))  # inv(cov_i + eps I)
        self._log_norm = np.empty(p)  # log w_i + log normalizer of c_i
        for i in range(p):
            prec = mixture.precision_matrices[i]
            post_prec = prec + eye / eps
            _require_spd(post_prec, f"denoiser precision {i}")
            post_cov = np.linalg.inv(post_prec)
            self._lin[i] = post_cov / eps
            self._off[i] = post_cov @ prec @ mixture.means[i]
            smoothed = mixture.covariances[i] + eps * eye
            _require_spd(smoothed, f"smoothed covariance {i}")
            self._smoothed_inv[i] = np.linalg.inv(smoothed)
            sign, log_det = np.linalg.slogdet(smoothed)
            with np.errstate(divide="ignore"):
                self._log_norm[i] = np.log(mixture.weights[i]) - 0.5 * (
                    d * _LOG_2PI + log_det
                )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            diff = x - self.mixture.means  # (p, d)
            quad = np.einsum("pd,pde,pe->p", diff, self._smoothed_inv, diff)
            logits = self._log_norm - 0.5 * quad
            logits -= logits.max()
            resp = np.exp(logits)
            resp /= resp.sum()
            n_vals = self._lin @ x + self._off  # (p, d)
            return resp @ n_vals
        diff = x[None, :, :] - self.mixture.means[:, None, :]  # (p, n, d)
        quad = np.einsum("pnd,pde,pne->pn", diff, self._smoothed_inv, diff)
        logits = self._log_norm[:, None] - 0.5 * quad
        logits -= logits.max(axis=0, keepdims=True)
        resp = np.exp(logits)
        resp /= resp.sum(axis=0, keepdims=True)
        n_vals = np.einsum("pde,ne->pnd", self._lin, x) + self._off[:, None, :]
        return np.einsum("pn,pnd->nd", resp, n_vals)

    def component_posterior_means(self, x: np.ndarray) -> np.ndarray:
        """The per-component estimates n_i(x); D(x) is their convex mix."""
        x = np.asarray(x, dtype=float)
        return self._lin @ x + self._off

    def __repr__(self) -> str:
        return f"ExactMmseDenoiser(p={self.mixture.n_components}, eps={self.eps})"


def exact_mmse_denoise(mixture: GaussianMixture, eps: float, x: np.ndarray) -> np.ndarray:
    """Functional form of :class:`ExactMmseDenoiser`."""
    return ExactMmseDenoiser(mixture, eps)(x)


def smoothed_mixture(mixture: GaussianMixture, eps: float) -> GaussianMixture:
    """The mixture convolved with N(0, eps I): covariances gain eps*I."""
    if eps <= 0.0:
        raise ValueError(f"eps must be > 0, got {eps}")
    eye = np.eye(mixture.dimension)
    comps = [
        GaussianComponent(c.weight, c.mean, c.covariance + eps * eye)
        for c in mixture.components
    ]
    return GaussianMixture(comps)


def smoothed_prior_score(mixture: GaussianMixture, eps: float, x: np.ndarray) -> np.ndarray:
    """Score of the eps-smoothed prior via the denoiser residual.

    grad log p_eps(x) = (D_eps(x) - x) / eps.
    """
    x = np.asarray(x, dtype=float)
    return (exact_mmse_denoise(mixture, eps, x) - x) / eps


@dataclass
class MismatchedDenoiser:
    """An exact denoiser gated to zero below a first-coordinate threshold.

    Output equals the base denoiser where x[0] > threshold (strict) and
    the zero vector otherwise. Interpolates between the base denoiser
    (threshold -> -inf) and the zero map (threshold -> +inf).
    """

    base: ExactMmseDenoiser
    threshold: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            if x[0] > self.threshold:
                return self.base(x)
            return np.zeros_like(x)
        mask = x[:, 0] > self.threshold
        out = np.zeros_like(x)
        if mask.any():
            out[mask] = self.base(x[mask])
        return out

    def __repr__(self) -> str:
        return f"MismatchedDenoiser(threshold={self.threshold}, base={self.base!r})"


def mismatched_denoise(den: MismatchedDenoiser, x: np.ndarray) -> np.ndarray:
    """Apply a mismatched denoiser (functional form)."""
    return den(x)
