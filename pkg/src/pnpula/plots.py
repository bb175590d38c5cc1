"""Figure rendering for sweep results and chain runs.

Figures are written next to the delimited output; they are a reporting
convenience, never an input to any computation.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import SweepResult
from .samples import SampleSet


def correlation_figure(result: SweepResult):
    """Scatter of W1 against the function pseudometrics, with r values."""
    ok = [r for r in result.rows if r.status == "ok"]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    w1 = [r.w1 for r in ok]
    r_post = result.summary.get("pearson_posterior_l2_w1")
    r_pri = result.summary.get("pearson_prior_l2_w1")
    label_post = "posterior-L2" + (f" (r={r_post:.3f})" if r_post is not None else "")
    label_pri = "prior-L2" + (f" (r={r_pri:.3f})" if r_pri is not None else "")
    ax.scatter([r.d1_posterior for r in ok], w1, s=18, label=label_post)
    ax.scatter([r.d1_prior for r in ok], w1, s=18, marker="^", label=label_pri)
    ax.set_xlabel("pseudometric between denoisers / drifts")
    ax.set_ylabel("W1 between sampling distributions")
    floor = result.summary.get("w1_floor")
    if floor is not None and not math.isnan(floor):
        ax.axhline(floor, color="gray", ls="--", lw=1, label="same-distribution floor")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def sweep_figure(result: SweepResult):
    """Per-point metrics against the sweep axis."""
    ok = [r for r in result.rows if r.status == "ok"]
    axis = [r.axis for r in ok]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    axes[0].plot(axis, [r.w1 for r in ok], "o-", ms=3)
    axes[0].set_ylabel("W1")
    axes[1].plot(axis, [r.d1_posterior for r in ok], "o-", ms=3, label="posterior-L2")
    axes[1].plot(axis, [r.d1_prior for r in ok], "^-", ms=3, label="prior-L2")
    axes[1].set_ylabel("pseudometric")
    axes[1].legend(frameon=False)
    axes[2].plot(axis, [r.tv for r in ok], "o-", ms=3)
    axes[2].set_ylabel("TV (histogram)")
    for ax in axes:
        ax.set_xlabel(result.axis_name)
    fig.tight_layout()
    return fig


def chain_figure(chain: SampleSet):
    """2-D scatter of retained samples (first two coordinates)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    pts = chain.samples
    ax.scatter(pts[:, 0], pts[:, 1], s=2, alpha=0.15, rasterized=True)
    ax.set_xlabel("x_0")
    ax.set_ylabel("x_1")
    ax.set_aspect("equal")
    fig.tight_layout()
    return fig


def render_sweep_figures(result: SweepResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fig in (
        ("fig_correlation.png", correlation_figure(result)),
        ("fig_sweep.png", sweep_figure(result)),
    ):
        path = out / name
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def render_chain_figure(chain: SampleSet, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "fig_samples.png"
    fig = chain_figure(chain)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
