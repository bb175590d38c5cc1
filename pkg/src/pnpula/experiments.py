"""Declarative sweep experiments: mismatched denoisers, shifted forward
models, single chain runs, and persistence with full provenance.

A sweep runs one reference chain (exact denoiser / reference forward
model), one independently seeded duplicate of it (the same-distribution
W1 bias floor), and one mismatched chain per sweep point. Every chain
and every metric draw derives its seed from the master seed, the sweep
index and a role tag, so adding sweep points never perturbs existing
results and one master seed determines every number in the output.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergenceError
from .forward import LinearForwardModel, operator_distance
from .gmm import ExactMmseDenoiser, GaussianMixture, MismatchedDenoiser, gmm_sample, load_gmm
from .metrics import (
    mmse_estimate,
    pearson_r,
    posterior_l2,
    prior_l2,
    spearman_r,
    tv_histogram,
    variance_estimate,
    wasserstein1_estimate,
)
from .sampler import (
    BallProjection,
    BoxProjection,
    ChainParams,
    DriftConfig,
    drift,
    recommended_params,
    run_chain,
)
from .samples import SampleSet, derive_seed

KINDS = ("denoiser-sweep", "forward-sweep", "chain-run", "validate")


@dataclass
class MetricProtocol:
    """Estimation protocol for the per-point distribution metrics."""

    n_sub: int = 2048
    n_repeats: int = 8
    tv_bins: int = 100
    tv_bounds: tuple | None = None


@dataclass
class ExperimentSpec:
    """Resolved experiment configuration (models loaded, grids built)."""

    kind: str
    mixture: GaussianMixture
    fwd: LinearForwardModel
    y: np.ndarray
    eps: float
    alpha: float
    lam: float
    projection: BallProjection | BoxProjection
    delta: float
    n_steps: int
    burn_in: int
    thinning: int
    x0: np.ndarray
    metric: MetricProtocol
    seed: int
    out_dir: str | None = None
    sweep_values: np.ndarray | None = None
    reference_scale: float | None = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "ExperimentSpec":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if overrides:
            raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ExperimentSpec":
        base_dir = base_dir or Path(".")

        def need(key):
            if key not in raw:
                raise ConfigError(f"config missing required key {key!r}")
            return raw[key]

        kind = need("kind")
        if kind not in KINDS:
            raise ConfigError(f"unknown kind {kind!r}, expected one of {KINDS}")

        def resolve(ref):
            p = Path(ref)
            return p if p.is_absolute() else base_dir / p

        mixture = load_gmm(resolve(need("gmm")))
        from .forward import load_forward_model

        fwd = load_forward_model(resolve(need("forward")))
        y = np.asarray(need("y"), dtype=float)
        eps = float(need("eps"))
        alpha = float(raw.get("alpha", 1.0))
        lam_raw = raw.get("lambda", "auto")
        delta_raw = raw.get("delta", "auto")
        if lam_raw == "auto":
            lam, auto_delta = recommended_params(fwd.sigma, alpha, eps)
        else:
            lam = float(lam_raw)
            _, auto_delta = recommended_params(fwd.sigma, alpha, eps)
        delta = auto_delta if delta_raw == "auto" else float(delta_raw)

        proj_raw = raw.get("projection", {"kind": "ball", "center": [0.0] * fwd.dimension, "radius": 20.0})
        try:
            if proj_raw["kind"] == "ball":
                projection = BallProjection(np.asarray(proj_raw["center"], float), proj_raw["radius"])
            elif proj_raw["kind"] == "box":
                projection = BoxProjection(np.asarray(proj_raw["low"], float), np.asarray(proj_raw["high"], float))
            else:
                raise ConfigError(f"unknown projection kind {proj_raw['kind']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"projection spec invalid: {exc}") from exc

        sweep_values = None
        reference_scale = None
        if kind in ("denoiser-sweep", "forward-sweep"):
            sweep = need("sweep")
            if "values" in sweep:
                sweep_values = np.asarray(sweep["values"], dtype=float)
            else:
                try:
                    sweep_values = np.linspace(float(sweep["lo"]), float(sweep["hi"]), int(sweep["n"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"sweep spec invalid: {exc}") from exc
            if sweep_values.size == 0:
                raise ConfigError("sweep axis is empty")
            if not np.all(np.diff(sweep_values) > 0):
                raise ConfigError("sweep axis must be strictly increasing")
            if kind == "forward-sweep":
                reference_scale = float(sweep.get("reference", 1.0))

        metric_raw = raw.get("metric", {})
        metric = MetricProtocol(
            n_sub=int(metric_raw.get("n_sub", 2048)),
            n_repeats=int(metric_raw.get("n_repeats", 8)),
            tv_bins=int(metric_raw.get("tv_bins", 100)),
            tv_bounds=tuple(map(tuple, metric_raw["tv_bounds"])) if "tv_bounds" in metric_raw else None,
        )

        try:
            return cls(
                kind=kind,
                mixture=mixture,
                fwd=fwd,
                y=y,
                eps=eps,
                alpha=alpha,
                lam=lam,
                projection=projection,
                delta=delta,
                n_steps=int(need("n_steps")),
                burn_in=int(raw.get("burn_in", 0)),
                thinning=int(raw.get("thinning", 1)),
                x0=np.asarray(raw.get("x0", [0.0] * fwd.dimension), dtype=float),
                metric=metric,
                seed=int(raw.get("seed", 0)),
                out_dir=raw.get("out"),
                sweep_values=sweep_values,
                reference_scale=reference_scale,
                raw=raw,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config invalid: {exc}") from exc

    def chain_params(self, seed: int) -> ChainParams:
        return ChainParams(
            delta=self.delta,
            n_steps=self.n_steps,
            seed=seed,
            x0=self.x0,
            burn_in=self.burn_in,
            thinning=self.thinning,
        )

    def tv_bounds(self) -> tuple:
        if self.metric.tv_bounds is not None:
            return self.metric.tv_bounds
        if isinstance(self.projection, BallProjection):
            c, r = self.projection.center, self.projection.radius
            return tuple((float(ci - r), float(ci + r)) for ci in c)
        return tuple(
            (float(lo), float(hi)) for lo, hi in zip(self.projection.low, self.projection.high)
        )


@dataclass
class SweepRow:
    """One record per sweep point; metrics are NaN on a failed point."""

    axis: float
    d1_posterior: float
    d1_prior: float
    w1: float
    w1_stderr: float
    tv: float
    mmse: list[float]
    variance: float
    status: str = "ok"
    op_distance: float | None = None


@dataclass
class SweepResult:
    kind: str
    axis_name: str
    rows: list[SweepRow]
    summary: dict
    params: dict
    chains: dict[str, SampleSet] = field(default_factory=dict)


def _failed_row(axis: float, d: int, status: str, op_distance: float | None = None) -> SweepRow:
    nan = float("nan")
    return SweepRow(axis, nan, nan, nan, nan, nan, [nan] * d, nan, status, op_distance)


def _denoiser_point(args) -> SweepRow:
    (spec, index, threshold, ref_samples, prior_samples) = args
    exact = ExactMmseDenoiser(spec.mixture, spec.eps)
    den = MismatchedDenoiser(exact, threshold)
    config = DriftConfig(
        eps=spec.eps, lam=spec.lam, projection=spec.projection, denoiser=den, alpha=spec.alpha
    )
    d = spec.fwd.dimension
    try:
        chain = run_chain(config, spec.fwd, spec.y, spec.chain_params(derive_seed(spec.seed, index, "chain")))
    except DivergenceError as exc:
        return _failed_row(threshold, d, f"diverged:step={exc.step}")
    d1_post = posterior_l2(exact, den, ref_samples).value
    d1_pri = prior_l2(exact, den, prior_samples).value
    w1 = wasserstein1_estimate(
        ref_samples, chain.samples, spec.metric.n_sub, spec.metric.n_repeats,
        seed=derive_seed(spec.seed, index, "metric"),
    )
    tv = tv_histogram(ref_samples, chain.samples, spec.tv_bounds(), spec.metric.tv_bins)
    return SweepRow(
        axis=threshold,
        d1_posterior=d1_post,
        d1_prior=d1_pri,
        w1=w1.value,
        w1_stderr=w1.std_error,
        tv=tv,
        mmse=mmse_estimate(chain).tolist(),
        variance=variance_estimate(chain),
        status="ok",
    )


def _forward_point(args) -> SweepRow:
    (spec, index, scale, ref_samples, prior_samples) = args
    exact = ExactMmseDenoiser(spec.mixture, spec.eps)
    fwd_ref = _scaled_forward(spec, spec.reference_scale)
    fwd_s = _scaled_forward(spec, scale)
    config = DriftConfig(
        eps=spec.eps, lam=spec.lam, projection=spec.projection, denoiser=exact, alpha=spec.alpha
    )
    d = spec.fwd.dimension
    op_dist = operator_distance(fwd_s.matrix, fwd_ref.matrix)
    try:
        chain = run_chain(config, fwd_s, spec.y, spec.chain_params(derive_seed(spec.seed, index, "chain")))
    except DivergenceError as exc:
        return _failed_row(scale, d, f"diverged:step={exc.step}", op_distance=op_dist)

    def drift_ref(x):
        return drift(config, fwd_ref, spec.y, x)

    def drift_s(x):
        return drift(config, fwd_s, spec.y, x)

    d1_post = posterior_l2(drift_ref, drift_s, ref_samples).value
    d1_pri = prior_l2(drift_ref, drift_s, prior_samples).value
    w1 = wasserstein1_estimate(
        ref_samples, chain.samples, spec.metric.n_sub, spec.metric.n_repeats,
        seed=derive_seed(spec.seed, index, "metric"),
    )
    tv = tv_histogram(ref_samples, chain.samples, spec.tv_bounds(), spec.metric.tv_bins)
    return SweepRow(
        axis=scale,
        d1_posterior=d1_post,
        d1_prior=d1_pri,
        w1=w1.value,
        w1_stderr=w1.std_error,
        tv=tv,
        mmse=mmse_estimate(chain).tolist(),
        variance=variance_estimate(chain),
        status="ok",
        op_distance=op_dist,
    )


def _scaled_forward(spec: ExperimentSpec, scale: float) -> LinearForwardModel:
    return LinearForwardModel(scale * spec.fwd.matrix, spec.fwd.sigma)


def _map_points(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def recompute_summary(result_kind: str, rows: list[SweepRow]) -> dict:
    """Correlations recomputed from rows; used at build time and on reload."""
    ok = [r for r in rows if r.status == "ok"]
    out: dict = {"n_ok": len(ok), "n_failed": len(rows) - len(ok)}
    if len(ok) >= 3:
        w1 = [r.w1 for r in ok]
        out["pearson_posterior_l2_w1"] = pearson_r([r.d1_posterior for r in ok], w1)
        out["pearson_prior_l2_w1"] = pearson_r([r.d1_prior for r in ok], w1)
        if result_kind == "forward-sweep":
            dists = [r.op_distance for r in ok]
            out["pearson_op_distance_w1"] = pearson_r(dists, w1)
            out["spearman_op_distance_w1"] = spearman_r(dists, w1)
    return out


def _reference_setup(spec: ExperimentSpec, fwd: LinearForwardModel, denoiser):
    """Reference chain, its independently seeded duplicate, prior draws."""
    config = DriftConfig(
        eps=spec.eps, lam=spec.lam, projection=spec.projection, denoiser=denoiser, alpha=spec.alpha
    )
    ref = run_chain(config, fwd, spec.y, spec.chain_params(derive_seed(spec.seed, 0, "reference-chain")))
    floor_chain = run_chain(config, fwd, spec.y, spec.chain_params(derive_seed(spec.seed, 0, "floor-chain")))
    prior = gmm_sample(spec.mixture, ref.n, seed=derive_seed(spec.seed, 0, "prior"))
    floor = wasserstein1_estimate(
        ref, floor_chain, spec.metric.n_sub, spec.metric.n_repeats,
        seed=derive_seed(spec.seed, 0, "floor-metric"),
    )
    return ref, floor_chain, prior, floor


def _provenance(spec: ExperimentSpec, ref: SampleSet, prior: SampleSet) -> dict:
    return {
        "config": {
            k: v for k, v in spec.raw.items() if k not in ("gmm", "forward")
        } | {
            "gmm": spec.raw.get("gmm"),
            "forward": spec.raw.get("forward"),
            "eps": spec.eps,
            "alpha": spec.alpha,
            "lambda": spec.lam,
            "delta": spec.delta,
            "n_steps": spec.n_steps,
            "burn_in": spec.burn_in,
            "thinning": spec.thinning,
            "x0": spec.x0.tolist(),
            "y": spec.y.tolist(),
            "projection": spec.projection.describe(),
            "metric": {
                "n_sub": spec.metric.n_sub,
                "n_repeats": spec.metric.n_repeats,
                "tv_bins": spec.metric.tv_bins,
                "tv_bounds": [list(b) for b in spec.tv_bounds()],
            },
        },
        "master_seed": spec.seed,
        "hashes": {
            "reference_chain": ref.content_hash(),
            "prior_samples": prior.content_hash(),
            "forward": spec.fwd.content_hash(),
        },
    }


def run_denoiser_sweep(spec: ExperimentSpec, workers: int = 1, keep_chains: bool = False) -> SweepResult:
    """Reference chain with the exact denoiser, one mismatched chain per
    threshold, and the full metric battery per point."""
    if spec.kind != "denoiser-sweep":
        raise ConfigError(f"expected kind 'denoiser-sweep', got {spec.kind!r}")
    exact = ExactMmseDenoiser(spec.mixture, spec.eps)
    ref, floor_chain, prior, floor = _reference_setup(spec, spec.fwd, exact)
    tasks = [
        (spec, i, float(c), ref.samples, prior.samples)
        for i, c in enumerate(spec.sweep_values)
    ]
    rows = _map_points(_denoiser_point, tasks, workers)
    summary = recompute_summary("denoiser-sweep", rows)
    summary["w1_floor"] = floor.value
    summary["w1_floor_stderr"] = floor.std_error
    chains = {"reference": ref, "floor": floor_chain} if keep_chains else {}
    return SweepResult(
        kind="denoiser-sweep",
        axis_name="threshold",
        rows=rows,
        summary=summary,
        params=_provenance(spec, ref, prior),
        chains=chains,
    )


def run_forward_sweep(spec: ExperimentSpec, workers: int = 1, keep_chains: bool = False) -> SweepResult:
    """Reference chain at the reference scale, mismatched chains at each
    scale of the family A(s) = s * A, with operator distances per row."""
    if spec.kind != "forward-sweep":
        raise ConfigError(f"expected kind 'forward-sweep', got {spec.kind!r}")
    exact = ExactMmseDenoiser(spec.mixture, spec.eps)
    fwd_ref = _scaled_forward(spec, spec.reference_scale)
    ref, floor_chain, prior, floor = _reference_setup(spec, fwd_ref, exact)
    tasks = [
        (spec, i, float(s), ref.samples, prior.samples)
        for i, s in enumerate(spec.sweep_values)
    ]
    rows = _map_points(_forward_point, tasks, workers)
    summary = recompute_summary("forward-sweep", rows)
    summary["w1_floor"] = floor.value
    summary["w1_floor_stderr"] = floor.std_error
    summary["reference_scale"] = spec.reference_scale
    chains = {"reference": ref, "floor": floor_chain} if keep_chains else {}
    return SweepResult(
        kind="forward-sweep",
        axis_name="scale",
        rows=rows,
        summary=summary,
        params=_provenance(spec, ref, prior),
        chains=chains,
    )


def run_chain_experiment(spec: ExperimentSpec) -> SampleSet:
    """A single chain with the exact denoiser (kind 'chain-run')."""
    if spec.kind != "chain-run":
        raise ConfigError(f"expected kind 'chain-run', got {spec.kind!r}")
    exact = ExactMmseDenoiser(spec.mixture, spec.eps)
    config = DriftConfig(
        eps=spec.eps, lam=spec.lam, projection=spec.projection, denoiser=exact, alpha=spec.alpha
    )
    return run_chain(config, spec.fwd, spec.y, spec.chain_params(derive_seed(spec.seed, 0, "chain")))


# ---------------------------------------------------------------------------
# persistence

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _csv_header(result: SweepResult, d: int) -> str:
    cols = ["axis"]
    if result.kind == "forward-sweep":
        cols.append("op_distance")
    cols += ["d1_posterior", "d1_prior", "w1", "w1_stderr", "tv"]
    cols += [f"mmse_{j}" for j in range(d)]
    cols += ["variance", "status"]
    return ",".join(cols)


def _row_dimension(result: SweepResult) -> int:
    return len(result.rows[0].mmse) if result.rows else 0


def write_results(result: SweepResult, out_dir: str | Path) -> dict:
    """Write sweep.csv, summary.json, any retained chain CSVs and a
    manifest listing every file with its content hash."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = _row_dimension(result)

    lines = [_csv_header(result, d)]
    for row in result.rows:
        cells = [_fmt(row.axis)]
        if result.kind == "forward-sweep":
            cells.append(_fmt(row.op_distance if row.op_distance is not None else float("nan")))
        cells += [_fmt(row.d1_posterior), _fmt(row.d1_prior), _fmt(row.w1), _fmt(row.w1_stderr), _fmt(row.tv)]
        cells += [_fmt(v) for v in row.mmse]
        cells += [_fmt(row.variance), row.status]
        lines.append(",".join(cells))
    sweep_path = out / "sweep.csv"
    sweep_path.write_text("\n".join(lines) + "\n")

    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "kind": result.kind,
                "axis": result.axis_name,
                "summary": result.summary,
                "params": result.params,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )

    files = [sweep_path, summary_path]
    for name, chain in result.chains.items():
        path = out / f"chain_{name}.csv"
        _write_chain_csv(chain, path)
        files.append(path)

    manifest = {"files": []}
    for path in files:
        data = path.read_bytes()
        manifest["files"].append(
            {"path": path.name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
        )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _write_chain_csv(chain: SampleSet, path: Path) -> None:
    d = chain.dimension
    header = "step," + ",".join(f"x_{j}" for j in range(d))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k, row in enumerate(chain.samples):
            fh.write(str(k) + "," + ",".join(_fmt(v) for v in row) + "\n")


def write_chain_run(chain: SampleSet, out_dir: str | Path) -> dict:
    """Persist a single chain: samples.csv plus a sidecar metadata record."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples_path = out / "samples.csv"
    _write_chain_csv(chain, samples_path)
    meta_path = out / "meta.json"
    meta_path.write_text(
        json.dumps({"meta": chain.meta, "content_hash": chain.content_hash()}, indent=2, sort_keys=True) + "\n"
    )
    manifest = {"files": []}
    for path in (samples_path, meta_path):
        data = path.read_bytes()
        manifest["files"].append(
            {"path": path.name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
        )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def read_results(out_dir: str | Path) -> SweepResult:
    """Reload a persisted sweep (rows and summary; chains are not reloaded)."""
    out = Path(out_dir)
    summary_doc = json.loads((out / "summary.json").read_text())
    kind = summary_doc["kind"]
    text = (out / "sweep.csv").read_text().strip().split("\n")
    header = text[0].split(",")
    has_op = "op_distance" in header
    mmse_cols = [c for c in header if c.startswith("mmse_")]
    rows = []
    for line in text[1:]:
        cells = line.split(",")
        pos = 0
        axis = float(cells[pos]); pos += 1
        op_dist = None
        if has_op:
            op_dist = float(cells[pos]); pos += 1
        d1_post = float(cells[pos]); pos += 1
        d1_pri = float(cells[pos]); pos += 1
        w1 = float(cells[pos]); pos += 1
        w1_se = float(cells[pos]); pos += 1
        tv = float(cells[pos]); pos += 1
        mmse = [float(cells[pos + j]) for j in range(len(mmse_cols))]
        pos += len(mmse_cols)
        variance = float(cells[pos]); pos += 1
        status = cells[pos]
        rows.append(SweepRow(axis, d1_post, d1_pri, w1, w1_se, tv, mmse, variance, status, op_dist))
    return SweepResult(
        kind=kind,
        axis_name=summary_doc["axis"],
        rows=rows,
        summary=summary_doc["summary"],
        params=summary_doc["params"],
    )
