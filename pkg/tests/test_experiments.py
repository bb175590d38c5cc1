import json
import math
from pathlib import Path

import numpy as np
import pytest

from pnpula import ConfigError
from pnpula.cli import main as cli_main
from pnpula.experiments import (
    ExperimentSpec,
    SweepRow,
    read_results,
    recompute_summary,
    run_chain_experiment,
    run_denoiser_sweep,
    run_forward_sweep,
    write_chain_run,
    write_results,
)
from pnpula.validation import run_validation_suite


@pytest.fixture(scope="module")
def mini_result(tmp_path_factory):
    """One shared mini denoiser sweep for all read/write assertions."""
    tmp = tmp_path_factory.mktemp("mini")
    config_dir = Path(__file__).resolve().parent.parent / "configs"
    gmm = tmp / "gmm.json"
    gmm.write_text((config_dir / "gmm_cross2d.json").read_text())
    fwd = tmp / "forward.json"
    fwd.write_text((config_dir / "forward_identity.json").read_text())
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
        "out": str(tmp / "out"),
    }
    path = tmp / "config.json"
    path.write_text(json.dumps(cfg))
    spec = ExperimentSpec.from_file(path)
    return spec, run_denoiser_sweep(spec, workers=1)


class TestSpecParsing:
    def test_mini_config(self, mini_sweep_config):
        spec = ExperimentSpec.from_file(mini_sweep_config)
        assert spec.kind == "denoiser-sweep"
        assert spec.sweep_values == pytest.approx(np.linspace(-4, 4, 5))
        assert spec.lam == 0.5 and spec.delta == 0.05
        assert spec.metric.n_sub == 256

    def test_repo_configs_parse(self, config_dir):
        for name, kind in (
            ("denoiser_sweep.json", "denoiser-sweep"),
            ("forward_sweep.json", "forward-sweep"),
            ("chain_run.json", "chain-run"),
        ):
            spec = ExperimentSpec.from_file(config_dir / name)
            assert spec.kind == kind

    def test_missing_key_rejected(self, mini_sweep_config, tmp_path):
        raw = json.loads(Path(mini_sweep_config).read_text())
        del raw["gmm"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        with pytest.raises(ConfigError):
            ExperimentSpec.from_file(bad)

    def test_invalid_json_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentSpec.from_file(bad)

    def test_unknown_kind_rejected(self, mini_sweep_config, tmp_path):
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["kind"] = "mystery"
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        with pytest.raises(ConfigError):
            ExperimentSpec.from_file(bad)

    def test_overrides_take_effect(self, mini_sweep_config):
        spec = ExperimentSpec.from_file(mini_sweep_config, overrides={"n_steps": 17, "seed": 99})
        assert spec.n_steps == 17
        assert spec.seed == 99

    def test_sweep_values_must_increase(self, mini_sweep_config, tmp_path):
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["sweep"] = {"values": [0.0, 1.0, 0.5]}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        with pytest.raises(ConfigError):
            ExperimentSpec.from_file(bad)


class TestDenoiserSweep:
    def test_row_schema(self, mini_result):
        spec, result = mini_result
        assert len(result.rows) == 5
        assert [r.axis for r in result.rows] == pytest.approx(np.linspace(-4, 4, 5))
        for row in result.rows:
            assert row.status == "ok"
            assert len(row.mmse) == 2
            assert row.w1 >= 0.0 and 0.0 <= row.tv <= 1.0
            assert row.d1_posterior >= 0.0 and row.d1_prior >= 0.0

    def test_summary_fields(self, mini_result):
        _, result = mini_result
        s = result.summary
        assert s["n_ok"] == 5 and s["n_failed"] == 0
        assert -1.0 <= s["pearson_posterior_l2_w1"] <= 1.0
        assert s["w1_floor"] > 0.0

    def test_mismatch_grows_with_threshold(self, mini_result):
        # larger thresholds gate more of the space, so both the functional
        # distance and the transport distance grow along the axis
        _, result = mini_result
        d1 = [r.d1_posterior for r in result.rows]
        assert d1 == sorted(d1)
        assert result.rows[-1].w1 > result.rows[0].w1

    def test_never_mismatched_point_sits_at_floor(self, mini_sweep_config):
        # threshold far below the support: D^c == D, so d1 = 0 and W1 is
        # within sampling noise of the same-distribution floor
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["sweep"] = {"values": [-1e9]}
        path = Path(mini_sweep_config).parent / "floor_config.json"
        path.write_text(json.dumps(raw))
        spec = ExperimentSpec.from_file(path)
        result = run_denoiser_sweep(spec)
        row = result.rows[0]
        assert row.d1_posterior == 0.0
        assert row.d1_prior == 0.0
        floor = result.summary["w1_floor"]
        spread = 5 * (row.w1_stderr + result.summary["w1_floor_stderr"])
        assert abs(row.w1 - floor) < max(spread, 0.05)

    def test_workers_match_serial(self, mini_sweep_config):
        spec = ExperimentSpec.from_file(mini_sweep_config, overrides={"n_steps": 1500})
        spec.metric.n_sub = 128
        spec.metric.n_repeats = 2
        serial = run_denoiser_sweep(spec, workers=1)
        parallel = run_denoiser_sweep(spec, workers=3)
        for a, b in zip(serial.rows, parallel.rows):
            assert a == b

    def test_recompute_matches_stored_summary(self, mini_result):
        _, result = mini_result
        redo = recompute_summary("denoiser-sweep", result.rows)
        for key, value in redo.items():
            assert result.summary[key] == pytest.approx(value, abs=1e-12)

    def test_failed_row_isolation(self):
        rows = [
            SweepRow(0.0, 0.1, 0.2, 0.3, 0.01, 0.1, [0.0, 0.0], 1.0),
            SweepRow(
                1.0, math.nan, math.nan, math.nan, math.nan, math.nan,
                [math.nan] * 2, math.nan, status="diverged:step=7",
            ),
            SweepRow(2.0, 0.2, 0.3, 0.5, 0.01, 0.2, [0.0, 0.0], 1.0),
            SweepRow(3.0, 0.4, 0.5, 0.9, 0.01, 0.3, [0.0, 0.0], 1.0),
        ]
        summary = recompute_summary("denoiser-sweep", rows)
        assert summary["n_ok"] == 3 and summary["n_failed"] == 1
        assert math.isfinite(summary["pearson_posterior_l2_w1"])


class TestForwardSweep:
    def test_small_forward_sweep(self, mini_sweep_config, tmp_path):
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["kind"] = "forward-sweep"
        raw["sweep"] = {"lo": 0.8, "hi": 1.2, "n": 3, "reference": 1.0}
        path = Path(mini_sweep_config).parent / "fwd_config.json"
        path.write_text(json.dumps(raw))
        spec = ExperimentSpec.from_file(path)
        result = run_forward_sweep(spec)
        assert result.axis_name == "scale"
        assert [r.axis for r in result.rows] == pytest.approx([0.8, 1.0, 1.2])
        # operator distance of s*I from I is |s - 1|
        assert [r.op_distance for r in result.rows] == pytest.approx([0.2, 0.0, 0.2])
        # the reference-scale point carries zero mismatch in operator norm
        ref_row = result.rows[1]
        assert ref_row.status == "ok"
        assert result.summary["reference_scale"] == 1.0
        # round trip retains the op_distance column
        out = tmp_path / "fwd_out"
        write_results(result, out)
        header = (out / "sweep.csv").read_text().splitlines()[0]
        assert header.split(",")[:2] == ["axis", "op_distance"]
        again = read_results(out)
        assert [r.op_distance for r in again.rows] == pytest.approx(
            [r.op_distance for r in result.rows]
        )


class TestPersistence:
    def test_round_trip_bit_identical(self, mini_result, tmp_path):
        _, result = mini_result
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        write_results(result, out1)
        reloaded = read_results(out1)
        write_results(reloaded, out2)
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()

    def test_reloaded_rows_equal(self, mini_result, tmp_path):
        _, result = mini_result
        out = tmp_path / "out"
        write_results(result, out)
        reloaded = read_results(out)
        assert reloaded.kind == result.kind
        for a, b in zip(result.rows, reloaded.rows):
            assert a == b
        redo = recompute_summary(result.kind, reloaded.rows)
        assert redo["pearson_posterior_l2_w1"] == pytest.approx(
            result.summary["pearson_posterior_l2_w1"], abs=1e-12
        )

    def test_manifest_hashes(self, mini_result, tmp_path):
        import hashlib

        _, result = mini_result
        out = tmp_path / "out"
        manifest = write_results(result, out)
        for entry in manifest["files"]:
            data = (out / entry["path"]).read_bytes()
            assert hashlib.sha256(data).hexdigest() == entry["sha256"]
            assert len(data) == entry["bytes"]

    def test_csv_header(self, mini_result, tmp_path):
        _, result = mini_result
        out = tmp_path / "out"
        write_results(result, out)
        header = (out / "sweep.csv").read_text().splitlines()[0]
        assert header == (
            "axis,d1_posterior,d1_prior,w1,w1_stderr,tv,mmse_0,mmse_1,variance,status"
        )

    def test_chain_run_outputs(self, mini_sweep_config, tmp_path):
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["kind"] = "chain-run"
        del raw["sweep"]
        raw["n_steps"] = 500
        path = Path(mini_sweep_config).parent / "chain_config.json"
        path.write_text(json.dumps(raw))
        spec = ExperimentSpec.from_file(path)
        chain = run_chain_experiment(spec)
        out = tmp_path / "chain_out"
        write_chain_run(chain, out)
        lines = (out / "samples.csv").read_text().splitlines()
        assert lines[0] == "step,x_0,x_1"
        assert len(lines) == 501
        meta = json.loads((out / "meta.json").read_text())
        assert meta["content_hash"] == chain.content_hash()


class TestChainRunTarget:
    def test_mode_masses_match_closed_form_weights(self, mini_sweep_config):
        # for y=(0,8) the closed-form posterior weights are extremely
        # lopsided (a ~ (1e-8, 1)); the chain should agree
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["kind"] = "chain-run"
        del raw["sweep"]
        raw["n_steps"] = 5000
        path = Path(mini_sweep_config).parent / "target_config.json"
        path.write_text(json.dumps(raw))
        spec = ExperimentSpec.from_file(path)
        chain = run_chain_experiment(spec)

        from pnpula import gmm_posterior

        post = gmm_posterior(spec.mixture, spec.fwd, spec.y)
        weights = np.asarray(post.weights)
        dominant = int(np.argmax(weights))
        assert weights[dominant] > 0.99
        # responsibility of the dominant component at each sample
        mix = post.as_mixture()
        comp = mix.components[dominant]
        from pnpula.gmm import GaussianMixture, gmm_log_density

        single = GaussianMixture(
            [type(comp)(1.0, comp.mean, comp.covariance)]
        )
        log_dom = gmm_log_density(single, chain.samples) + np.log(weights[dominant])
        log_all = gmm_log_density(mix, chain.samples)
        frac = float(np.mean(np.exp(log_dom - log_all) > 0.5))
        assert frac > 0.99


@pytest.fixture(scope="module")
def passing_report():
    return run_validation_suite(seed=20240)


class TestValidationSuite:
    def test_suite_passes(self, passing_report):
        assert passing_report.passed, "\n".join(passing_report.lines())
        names = {c.name for c in passing_report.checks}
        assert "mmse-closed-form-vs-quadrature" in names
        assert "conjugate-chain" in names

    def test_fault_injection_fails(self):
        report = run_validation_suite(seed=20240, fault_injection=True)
        assert not report.passed
        failing = {c.name for c in report.checks if not c.passed}
        assert "mmse-closed-form-vs-quadrature" in failing

    def test_report_serializes(self, passing_report):
        doc = passing_report.to_dict()
        text = json.dumps(doc)
        assert json.loads(text) == doc
        lines = passing_report.lines()
        assert all(line.startswith("[PASS]") or line.startswith("[FAIL]") for line in lines)


class TestCli:
    def test_validate_exit_zero(self, capsys):
        assert cli_main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_validate_fault_inject_exit_one(self, capsys, tmp_path):
        report_path = tmp_path / "report.json"
        assert cli_main(["validate", "--fault-inject", "--out", str(report_path)]) == 1
        assert "[FAIL]" in capsys.readouterr().out
        doc = json.loads(report_path.read_text())
        assert doc["passed"] is False

    def test_bad_config_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli_main(["denoiser-sweep", str(bad)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_out_exit_two(self, mini_sweep_config, tmp_path):
        raw = json.loads(Path(mini_sweep_config).read_text())
        del raw["out"]
        path = tmp_path / "no_out.json"
        # model paths in the mini config are relative to its directory
        raw["gmm"] = str(Path(mini_sweep_config).parent / "gmm.json")
        raw["forward"] = str(Path(mini_sweep_config).parent / "forward.json")
        path.write_text(json.dumps(raw))
        assert cli_main(["denoiser-sweep", str(path)]) == 2

    def test_denoiser_sweep_end_to_end(self, mini_sweep_config, tmp_path, capsys):
        out = tmp_path / "cli_out"
        code = cli_main(
            [
                "denoiser-sweep",
                str(mini_sweep_config),
                "--out",
                str(out),
                "--n-steps",
                "1500",
                "--n-sub",
                "128",
                "--n-repeats",
                "2",
                "--workers",
                "2",
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "pearson_posterior_l2_w1" in stdout
        assert (out / "sweep.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "manifest.json").exists()
        assert (out / "fig_correlation.png").stat().st_size > 0
        assert (out / "fig_sweep.png").stat().st_size > 0

    def test_chain_run_end_to_end(self, mini_sweep_config, tmp_path, capsys):
        raw = json.loads(Path(mini_sweep_config).read_text())
        raw["kind"] = "chain-run"
        del raw["sweep"]
        raw["n_steps"] = 500
        path = Path(mini_sweep_config).parent / "cli_chain.json"
        path.write_text(json.dumps(raw))
        out = tmp_path / "chain_out"
        assert cli_main(["chain-run", str(path), "--out", str(out)]) == 0
        assert (out / "samples.csv").exists()
        assert (out / "fig_samples.png").stat().st_size > 0

    def test_seed_override_changes_output(self, mini_sweep_config, tmp_path):
        outs = []
        for seed in ("31", "32"):
            out = tmp_path / f"seed_{seed}"
            code = cli_main(
                [
                    "denoiser-sweep",
                    str(mini_sweep_config),
                    "--out",
                    str(out),
                    "--seed",
                    seed,
                    "--n-steps",
                    "1000",
                    "--n-sub",
                    "128",
                    "--n-repeats",
                    "2",
                    "--no-figures",
                ]
            )
            assert code == 0
            outs.append((out / "sweep.csv").read_bytes())
        assert outs[0] != outs[1]
