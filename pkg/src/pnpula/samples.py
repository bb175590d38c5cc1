"""Sample containers and deterministic seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SampleSet:
    """An ordered collection of d-dimensional samples with provenance.

    ``meta`` records everything needed to regenerate the samples
    bit-identically (seeds, parameters, model hashes).
    """

    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-D array of shape (n, d)")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    def content_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.samples).tobytes()).hexdigest()


def derive_seed(master_seed: int, index: int, tag: str) -> int:
    """Stable per-task seed from a master seed, a sweep index and a tag.

    Adding sweep points or tags never perturbs seeds already issued.
    """
    digest = hashlib.sha256(f"{master_seed}|{index}|{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
