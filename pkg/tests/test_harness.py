import json

import pytest
from click.testing import CliRunner

from survbench.cli import main as cli_main
from survbench.errors import ConfigError
from survbench.harness import (
    REPORT_FILES,
    BenchConfig,
    load_config,
    run_benchmark,
    run_window_grid,
)


def small_config(**overrides):
    base = dict(
        data={"kind": "synthetic", "spec": {
            "n": 500, "max_weeks": 18, "hazard_intercept": -3.4,
            "hazard_coefs": {"active_this_week": -0.9, "recency": 0.2,
                             "baseline_score": 0.3},
            "censor_hazard": 0.01}},
        models={"comparable": [{"name": "cox"}, {"name": "weibull_aft"},
                               {"name": "survival_forest",
                                "params": {"n_trees": 10, "min_leaf": 20}}],
                "dynamic": [{"name": "discrete_time_hazard"},
                            {"name": "poisson_pem"}]},
        tau_max=14, horizons=[4, 8, 12], window_grid=[2, 4],
        bootstrap_resamples=20, importance_repeats=2, seed=99)
    base.update(overrides)
    return BenchConfig.from_dict(base)


class TestConfig:
    def test_horizon_beyond_tau_max_rejected_before_compute(self):
        config = small_config(horizons=[40], tau_max=30)
        with pytest.raises(ConfigError, match="horizons"):
            config.validate()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            BenchConfig.from_dict({"data": {}, "mystery_field": 1})

    def test_roundtrip_from_file(self, tmp_path):
        config = small_config()
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        loaded = load_config(path)
        assert loaded.to_dict() == config.to_dict()


class TestRunBenchmark:
    def test_full_run_emits_manifest_files(self, tmp_path):
        config = small_config()
        report = run_benchmark(config, output_dir=tmp_path / "out")
        assert report.failures == []
        for name in REPORT_FILES:
            assert (tmp_path / "out" / name).exists(), name

    def test_config_echo_equals_input(self, tmp_path):
        config = small_config()
        report = run_benchmark(config, output_dir=tmp_path / "out", emit=False)
        assert report.config == config.to_dict()

    def test_no_table_mixes_arms_without_arm_column(self, tmp_path):
        config = small_config()
        run_benchmark(config, output_dir=tmp_path / "out")
        for name in ["main_benchmark.csv", "calibration.csv", "ablation.csv",
                     "importance.csv", "bootstrap.csv", "plotdata.csv"]:
            header = (tmp_path / "out" / name).read_text().splitlines()[0]
            assert header.split(",")[0] == "arm", name

    def test_bootstrap_never_ranks_across_arms(self, tmp_path):
        config = small_config()
        report = run_benchmark(config, output_dir=tmp_path / "out", emit=False)
        arms = dict(report.bootstrap)
        comparable_models = set(arms["comparable"].models)
        dynamic_models = set(arms["dynamic"].models)
        assert not comparable_models & dynamic_models
        assert comparable_models == {"cox", "weibull_aft", "survival_forest"}

    def test_determinism_byte_identical_reports(self, tmp_path):
        config = small_config()
        run_benchmark(config, output_dir=tmp_path / "a")
        run_benchmark(config, output_dir=tmp_path / "b")
        for name in REPORT_FILES:
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"

    def test_partial_failure_marked_incomplete(self, tmp_path, monkeypatch):
        from survbench.models import weibull

        def broken_fit(self, X, y, columns=None):
            raise weibull.ConvergenceError("injected failure")

        monkeypatch.setattr(weibull.WeibullAFT, "fit", broken_fit)
        config = small_config(analyses=["bootstrap"])
        report = run_benchmark(config, output_dir=tmp_path / "out")
        assert any(f["stage"] == "model:weibull_aft" for f in report.failures)
        assert not report.complete
        payload = json.loads((tmp_path / "out" / "report.json").read_text())
        assert payload["manifest"]["complete"] is False
        assert payload["manifest"]["failures"]
        models = {r["model"] for r in payload["main_benchmark"]}
        assert "weibull_aft" not in models

    def test_identity_leakage_aborts(self, monkeypatch):
        import survbench.harness as hz

        def leaky_split(enrollments, spec):
            ids = enrollments["enrollment_id"].to_numpy()
            return ids[:300], ids[250:]

        monkeypatch.setattr(hz, "stratified_split", leaky_split)
        config = small_config(analyses=[])
        from survbench.errors import DataError
        with pytest.raises(DataError, match="leakage"):
            run_benchmark(config, emit=False)


class TestTuning:
    def test_grid_search_selects_and_runs(self, tmp_path):
        config = small_config(
            models={"comparable": [
                {"name": "cox", "grid": {"l2": [1e-4, 10.0]}}],
                "dynamic": []},
            arms=["comparable"], analyses=[])
        report = run_benchmark(config, output_dir=tmp_path / "out", emit=False)
        assert report.failures == []
        assert len(report.metric_reports) == 1

    def test_tuning_is_deterministic(self, tmp_path):
        config = small_config(
            models={"comparable": [
                {"name": "survival_forest",
                 "params": {"n_trees": 8, "min_leaf": 20},
                 "grid": {"max_depth": [2, 4]}}],
                "dynamic": []},
            arms=["comparable"], analyses=["bootstrap"])
        a = run_benchmark(config, output_dir=tmp_path / "a")
        b = run_benchmark(config, output_dir=tmp_path / "b")
        assert (tmp_path / "a" / "main_benchmark.csv").read_bytes() == \
            (tmp_path / "b" / "main_benchmark.csv").read_bytes()


class TestWindowGrid:
    def test_single_window_matches_main_benchmark(self, tmp_path):
        config = small_config(window_grid=[4], analyses=[])
        report = run_benchmark(config, output_dir=tmp_path / "out", emit=False)
        rows = run_window_grid(config, emit=False)
        main = {r.model: r for r in report.metric_reports if r.arm == "comparable"}
        assert len(rows) == 3
        for row in rows:
            assert row["ibs"] == pytest.approx(main[row["model"]].ibs, abs=1e-12)
            assert row["td_concordance"] == pytest.approx(
                main[row["model"]].td_concordance, abs=1e-12)

    def test_grid_covers_requested_windows(self, tmp_path):
        config = small_config(window_grid=[2, 4],
                              models={"comparable": [{"name": "cox"}]},
                              analyses=[])
        rows = run_window_grid(config, output_dir=tmp_path / "wg")
        assert {r["window_weeks"] for r in rows} == {2, 4}
        assert (tmp_path / "wg" / "window_grid.csv").exists()


class TestCli:
    def _write_config(self, tmp_path, **overrides):
        config = small_config(**overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        return path

    def test_run_exit_zero_and_files(self, tmp_path):
        path = self._write_config(
            tmp_path, analyses=["ph_audit"],
            models={"comparable": [{"name": "cox"}],
                    "dynamic": [{"name": "poisson_pem"}]})
        runner = CliRunner()
        result = runner.invoke(cli_main, ["run", "--config", str(path),
                                          "--out", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "report.json").exists()

    def test_synth_writes_tables(self, tmp_path):
        path = self._write_config(tmp_path)
        runner = CliRunner()
        result = runner.invoke(cli_main, ["synth", "--config", str(path),
                                          "--out", str(tmp_path / "synth")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "synth" / "enrollments.csv").exists()
        assert (tmp_path / "synth" / "activity.csv").exists()

    def test_audit_split_prints_table(self, tmp_path):
        path = self._write_config(tmp_path)
        runner = CliRunner()
        result = runner.invoke(cli_main, ["audit-split", "--config", str(path),
                                          "--out", str(tmp_path / "audit")])
        assert result.exit_code == 0, result.output
        assert "identity leakage" in result.output
        assert (tmp_path / "audit" / "split_audit.json").exists()

    def test_env_var_overrides_output_dir(self, tmp_path, monkeypatch):
        path = self._write_config(
            tmp_path, analyses=[],
            models={"comparable": [{"name": "cox"}], "dynamic": []},
            arms=["comparable"])
        monkeypatch.setenv("SURVBENCH_OUTPUT_DIR", str(tmp_path / "envdir"))
        runner = CliRunner()
        result = runner.invoke(cli_main, ["run", "--config", str(path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "envdir" / "report.json").exists()

    def test_analysis_subcommands_emit_their_table(self, tmp_path):
        path = self._write_config(
            tmp_path,
            models={"comparable": [{"name": "cox"}],
                    "dynamic": [{"name": "poisson_pem"}]})
        runner = CliRunner()
        for command, artifact in [("bootstrap", "bootstrap.csv"),
                                  ("ph-audit", "ph_audit.csv")]:
            out = tmp_path / command
            result = runner.invoke(cli_main, [command, "--config", str(path),
                                              "--out", str(out)])
            assert result.exit_code == 0, result.output
            assert (out / artifact).exists()
            body = (out / artifact).read_text().strip().splitlines()
            assert len(body) > 1

    def test_window_grid_command(self, tmp_path):
        path = self._write_config(
            tmp_path, window_grid=[2, 4],
            models={"comparable": [{"name": "cox"}], "dynamic": []})
        runner = CliRunner()
        result = runner.invoke(cli_main, ["window-grid", "--config", str(path),
                                          "--out", str(tmp_path / "wg")])
        assert result.exit_code == 0, result.output
        assert "w= 2" in result.output and "w= 4" in result.output
        assert (tmp_path / "wg" / "window_grid.csv").exists()

    def test_validation_error_is_clean_failure(self, tmp_path):
        config = small_config(horizons=[40], tau_max=14)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(config.to_dict()))
        runner = CliRunner()
        result = runner.invoke(cli_main, ["run", "--config", str(path)])
        assert result.exit_code != 0
        assert "horizons" in result.output
