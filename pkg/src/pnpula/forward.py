"""Linear Gaussian forward models and their regularity constants."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatchError


@dataclass
class LinearForwardModel:
    """y = A x + noise with noise ~ N(0, sigma^2 I)."""

    matrix: np.ndarray
    sigma: float

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.sigma = float(self.sigma)
        if self.matrix.ndim != 2:
            raise DimensionMismatchError("forward matrix must be 2-D")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("forward matrix has non-finite entries")
        if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    @property
    def n_obs(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        """A^T A, symmetrized."""
        g = self.matrix.T @ self.matrix
        return 0.5 * (g + g.T)

    def content_hash(self) -> str:
        payload = np.ascontiguousarray(self.matrix).tobytes() + repr(self.sigma).encode()
        return hashlib.sha256(payload).hexdigest()


def likelihood_score(fwd: LinearForwardModel, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """grad_x log p(y|x) = A^T (y - A x) / sigma^2.

    Accepts x of shape (d,) or (n, d).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != (fwd.n_obs,):
        raise DimensionMismatchError(f"observation shape {y.shape}, expected ({fwd.n_obs},)")
    residual = y - x @ fwd.matrix.T
    return residual @ fwd.matrix / fwd.sigma**2


def lipschitz_constant(fwd: LinearForwardModel) -> float:
    """Lipschitz constant of the likelihood score: lambda_max(A^T A) / sigma^2."""
    return float(np.linalg.eigvalsh(fwd.gram)[-1]) / fwd.sigma**2


def concavity_constant(fwd: LinearForwardModel) -> float:
    """Concavity constant of the log-likelihood: lambda_min(A^T A) / sigma^2.

    For a linear-Gaussian model this is >= 0 by construction; tiny
    negative eigenvalues from round-off are clamped to 0 so that a
    rank-deficient A reports exactly 0.
    """
    vals = np.linalg.eigvalsh(fwd.gram)
    low = float(vals[0]) / fwd.sigma**2
    high = float(vals[-1]) / fwd.sigma**2
    if low < 0.0 and low > -1e-12 * max(high, 1.0):
        return 0.0
    return low


def operator_distance(a1: np.ndarray, a2: np.ndarray) -> float:
    """Spectral norm of A1 - A2 (operator norm for the Euclidean norm)."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape:
        raise DimensionMismatchError(f"operator shapes differ: {a1.shape} vs {a2.shape}")
    return float(np.linalg.norm(a1 - a2, ord=2))


def forward_from_dict(spec: dict) -> LinearForwardModel:
    """Build a forward model from the model-file schema.

    Keys: ``matrix`` (nested rows, or flat row-major with ``shape``)
    and ``sigma``.
    """
    try:
        raw = np.asarray(spec["matrix"], dtype=float)
        sigma = float(spec["sigma"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"forward-model spec invalid: {exc}") from exc
    if raw.ndim == 1:
        shape = spec.get("shape")
        if shape is None:
            raise ConfigError("flat row-major matrix requires an explicit 'shape'")
        raw = raw.reshape(int(shape[0]), int(shape[1]))
    try:
        return LinearForwardModel(raw, sigma)
    except (ValueError, DimensionMismatchError) as exc:
        raise ConfigError(str(exc)) from exc


def load_forward_model(path: str | Path) -> LinearForwardModel:
    """Load a forward model from a JSON model file."""
    try:
        spec = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read forward-model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"forward-model file {path} is not valid JSON: {exc}") from exc
    return forward_from_dict(spec)
