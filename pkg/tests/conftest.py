import json
from pathlib import Path

import numpy as np
import pytest

from pnpula import GaussianComponent, GaussianMixture, LinearForwardModel
from pnpula.gmm import crossed_gmm_2d

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def cross_mixture() -> GaussianMixture:
    return crossed_gmm_2d()


@pytest.fixture
def standard_normal_2d() -> GaussianMixture:
    return GaussianMixture([GaussianComponent(1.0, np.zeros(2), np.eye(2))])


@pytest.fixture
def identity_forward() -> LinearForwardModel:
    return LinearForwardModel(np.eye(2), 1.0)


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture
def mini_sweep_config(tmp_path: Path) -> Path:
    """A small, fast denoiser-sweep config for harness tests."""
    gmm_path = tmp_path / "gmm.json"
    gmm_path.write_text((CONFIG_DIR / "gmm_cross2d.json").read_text())
    fwd_path = tmp_path / "forward.json"
    fwd_path.write_text((CONFIG_DIR / "forward_identity.json").read_text())
    cfg = {
        "kind": "denoiser-sweep",
        "gmm": "gmm.json",
        "forward": "forward.json",
        "y": [0.0, 8.0],
        "eps": 0.05,
        "alpha": 0.3,
        "lambda": 0.5,
        "delta": 0.05,
        "n_steps": 3000,
        "x0": [0.0, 0.0],
        "projection": {"kind": "ball", "center": [0.0, 0.0], "radius": 20.0},
        "sweep": {"lo": -4.0, "hi": 4.0, "n": 5},
        "metric": {"n_sub": 256, "n_repeats": 3, "tv_bins": 40},
        "seed": 31,
        "out": str(tmp_path / "out"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path
