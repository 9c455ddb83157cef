"""Tests for pipeline orchestration: validation, runs, and run-dir products."""

import numpy as np
import pytest

from cueflow import storage
from cueflow.config import (
    AggregateConfig,
    DetectorSettings,
    EmbeddingConfig,
    IoConfig,
    ModelConfig,
    PipelineConfig,
)
from cueflow.errors import PipelineError
from cueflow.pipeline import (
    build_reports,
    fit_models,
    prepare_position_series,
    run,
    validate_config,
    write_run_dir,
)
from cueflow.synth import te_oracle_var1

from conftest import var1_trial, var1_trial_set


def make_config(*, directions="both", d=1, delta_s=0.01, resample_hz=100.0,
                model=None, detector=None, aggregate=None, seed=0):
    return PipelineConfig(
        io=IoConfig(target_channels=("x",), source_channels=("y",),
                    resample_hz=resample_hz, directions=directions, seed=seed),
        embedding=EmbeddingConfig(d=d, delta_s=delta_s),
        model=ModelConfig(**(model or {})),
        detector=DetectorSettings(**(detector or dict(alpha=0.01, beta=0.05))),
        aggregate=AggregateConfig(**(aggregate or {})),
    )


class TestValidateConfig:
    def test_clean_config_reports_only_time_constants(self):
        cfg = make_config(resample_hz=200.0, delta_s=0.1, d=4)
        diags = validate_config(cfg)
        assert [d.severity for d in diags] == ["info"]
        assert "threshold level time constant 0.4975 s" in diags[0].message
        assert "trend time constant 0.09748 s" in diags[0].message

    def test_cutoff_at_nyquist_is_an_error(self):
        cfg = make_config(resample_hz=2.0, delta_s=0.5,
                          detector=dict(alpha=0.01, beta=0.05, hp_cutoff_hz=1.0))
        severities = {d.severity for d in validate_config(cfg)}
        assert "error" in severities
        messages = " ".join(d.message for d in validate_config(cfg))
        assert "Nyquist" in messages

    def test_off_grid_embedding_step_is_an_error(self):
        # 0.1 s is not a whole number of 1/115 s samples.
        cfg = make_config(resample_hz=115.0, delta_s=0.1)
        errors = [d for d in validate_config(cfg) if d.severity == "error"]
        assert len(errors) == 1
        assert "not an integer multiple" in errors[0].message

    def test_sluggish_trend_smoother_warns(self):
        cfg = make_config(detector=dict(alpha=0.05, beta=0.005))
        warnings = [d for d in validate_config(cfg) if d.severity == "warning"]
        assert any("adapts more slowly" in d.message for d in warnings)

    def test_cell_size_without_positions_warns(self):
        cfg = make_config(aggregate=dict(cell_size_m=0.5))
        warnings = [d for d in validate_config(cfg) if d.severity == "warning"]
        assert any("no spatial grid" in d.message for d in warnings)

    def test_out_of_range_smoothing_becomes_a_diagnostic(self):
        """Bad smoothing constants surface as an error entry, not an exception."""
        cfg = make_config(detector=dict(alpha=1.5, beta=0.05))
        diags = validate_config(cfg)
        assert [d.severity for d in diags] == ["error"]


class TestRunOnCoupledVar:
    def test_mean_te_matches_closed_form(self):
        """A long coupled AR pair recovers the analytic TE in the driven
        direction and stays near zero in the reverse one."""
        trial, spec = var1_trial("t000", seed=0, n=100_000)
        result = run(var1_trial_set(trial), make_config())
        fwd = float(np.mean(result.trials[0].series["src2tgt"].te_raw))
        rev = float(np.mean(result.trials[0].series["tgt2src"].te_raw))
        oracle = te_oracle_var1(spec)
        assert abs(fwd - oracle) < 0.01
        assert abs(rev) < 0.005

    def test_swapping_roles_swaps_directions_exactly(self):
        """Exchanging target and source channels relabels the directions
        without changing a single TE value."""
        trial, _ = var1_trial("t000", seed=3, n=5000)
        trials = var1_trial_set(trial)
        model = dict(te_mode="loglik_ratio")
        forward = run(trials, make_config(d=2, model=model))
        swapped_cfg = PipelineConfig(
            io=IoConfig(target_channels=("y",), source_channels=("x",),
                        resample_hz=100.0),
            embedding=EmbeddingConfig(d=2, delta_s=0.01),
            model=ModelConfig(**model),
            detector=DetectorSettings(alpha=0.01, beta=0.05),
            aggregate=AggregateConfig(),
        )
        swapped = run(trials, swapped_cfg)
        a, b = forward.trials[0].series, swapped.trials[0].series
        np.testing.assert_array_equal(a["src2tgt"].te_raw, b["tgt2src"].te_raw)
        np.testing.assert_array_equal(a["tgt2src"].te_raw, b["src2tgt"].te_raw)

    def test_var_entropy_difference_is_time_constant(self):
        """Linear models have one shared residual covariance, so the
        entropy-difference series cannot vary over time."""
        trial, _ = var1_trial("t000", seed=4, n=2000)
        result = run(var1_trial_set(trial), make_config())
        te = result.trials[0].series["src2tgt"].te_raw
        assert float(np.ptp(te)) == 0.0

    def test_runs_are_deterministic_and_job_count_free(self):
        trials = var1_trial_set(var1_trial("t000", seed=5, n=600)[0],
                                var1_trial("t001", seed=6, n=600)[0])
        mlp = dict(kind="mlp_gaussian", hidden=(8,), epochs=30)
        first = run(trials, make_config(model=dict(mlp)))
        second = run(trials, make_config(model=dict(mlp)), jobs=3)
        for i in range(2):
            for direction in ("src2tgt", "tgt2src"):
                np.testing.assert_array_equal(
                    first.trials[i].series[direction].te_raw,
                    second.trials[i].series[direction].te_raw)
                assert (first.trials[i].traces[direction].events
                        == second.trials[i].traces[direction].events)

    def test_frozen_models_make_trials_independent(self):
        """With pre-fit models, a trial's outputs do not depend on which
        other trials are analyzed alongside it."""
        t0, _ = var1_trial("t000", seed=5, n=600)
        t1, _ = var1_trial("t001", seed=6, n=600)
        cfg = make_config(model=dict(kind="mlp_gaussian", hidden=(8,), epochs=30))
        frozen = fit_models(var1_trial_set(t0, t1), cfg)
        full = run(var1_trial_set(t0, t1), cfg, models=frozen)
        solo = run(var1_trial_set(t0), cfg, models=frozen)
        np.testing.assert_array_equal(full.trials[0].series["src2tgt"].te_raw,
                                      solo.trials[0].series["src2tgt"].te_raw)

    def test_trim_metadata_drops_the_lead_in(self):
        trial, _ = var1_trial("t000", seed=7, n=2000)
        trials = var1_trial_set(trial, metadata={"trim_start_s.t000": "5.0"})
        result = run(trials, make_config())
        out = result.trials[0]
        assert out.t0 == 0.0
        assert out.duration_s == pytest.approx(14.99)
        assert out.series["src2tgt"].te_raw.size == 1499


class TestRunErrors:
    def test_empty_trial_set_rejected(self):
        from cueflow.timeseries import TrialSet
        with pytest.raises(PipelineError, match="no trials"):
            run(TrialSet(trials=()), make_config())

    def test_invalid_config_rejected_up_front(self):
        trial, _ = var1_trial("t000", seed=0, n=500)
        cfg = make_config(resample_hz=115.0, delta_s=0.1)
        with pytest.raises(PipelineError, match="invalid configuration"):
            run(var1_trial_set(trial), cfg)

    def test_missing_channel_names_trial_and_stage(self):
        trial, _ = var1_trial("t000", seed=0, n=500)
        cfg = PipelineConfig(
            io=IoConfig(target_channels=("z",), source_channels=("y",),
                        resample_hz=100.0),
            embedding=EmbeddingConfig(d=1, delta_s=0.01),
            detector=DetectorSettings(alpha=0.01, beta=0.05),
        )
        with pytest.raises(PipelineError,
                           match=r"trial 't000', stage embed \(src2tgt\)"):
            run(var1_trial_set(trial), cfg)

    def test_frozen_models_must_cover_every_scenario(self):
        trial, _ = var1_trial("t000", seed=0, n=500)
        with pytest.raises(PipelineError, match="no frozen models for scenario"):
            run(var1_trial_set(trial), make_config(), models={})


@pytest.fixture(scope="module")
def study():
    trials = var1_trial_set(
        var1_trial("a0", seed=0, n=1200, scenario="coupled")[0],
        var1_trial("a1", seed=1, n=1200, scenario="coupled")[0],
        var1_trial("b0", seed=2, n=1200, scenario="baseline")[0],
        var1_trial("b1", seed=3, n=1200, scenario="baseline")[0],
    )
    cfg = make_config(
        directions="src2tgt",
        model=dict(te_mode="loglik_ratio"),
        detector=dict(alpha=0.01, beta=0.05, gamma=1.5),
        aggregate=dict(bin_dt=1.0, cell_size_m=1.0,
                       position_channels=("x", "y")),
    )
    return trials, cfg, run(trials, cfg)


class TestRunDirProducts:
    def test_two_scenarios_produce_a_report(self, study):
        _, _, result = study
        assert result.report is not None
        assert [d for d, _ in result.report.rows] == ["src2tgt"]

    def test_run_dir_layout(self, study, tmp_path):
        trials, cfg, result = study
        write_run_dir(result, cfg, tmp_path / "run")
        names = sorted(p.name for p in (tmp_path / "run").iterdir())
        assert names == ["events.csv", "manifest.csv", "te_a0_src2tgt.csv",
                         "te_a1_src2tgt.csv", "te_b0_src2tgt.csv",
                         "te_b1_src2tgt.csv"]
        manifest = (tmp_path / "run" / "manifest.csv").read_text().splitlines()
        assert manifest[0] == "trial,scenario,t0,duration_s"
        assert len(manifest) == 5

    def test_rebuilt_aggregates_are_byte_identical(self, study, tmp_path):
        """Aggregates regenerated from the saved run directory match the
        in-memory ones byte for byte."""
        trials, cfg, result = study
        write_run_dir(result, cfg, tmp_path / "run")
        written = build_reports(tmp_path / "run", tmp_path / "rep", cfg,
                                positions=prepare_position_series(trials, cfg))
        assert written == ["histogram_src2tgt.csv", "grid_src2tgt.csv",
                           "peak_te_report.csv"]
        storage.write_histogram_csv(result.histograms["src2tgt"],
                                    tmp_path / "hist.csv")
        storage.write_grid_csv(result.grids["src2tgt"], tmp_path / "grid.csv")
        storage.write_report_csv(result.report, tmp_path / "report.csv")
        for direct, rebuilt in [("hist.csv", "histogram_src2tgt.csv"),
                                ("grid.csv", "grid_src2tgt.csv"),
                                ("report.csv", "peak_te_report.csv")]:
            assert ((tmp_path / direct).read_bytes()
                    == (tmp_path / "rep" / rebuilt).read_bytes())

    def test_report_rebuild_needs_all_position_series(self, study, tmp_path):
        trials, cfg, result = study
        write_run_dir(result, cfg, tmp_path / "run")
        positions = prepare_position_series(trials, cfg)
        positions.pop("a1")
        with pytest.raises(PipelineError, match="no position series for trial 'a1'"):
            build_reports(tmp_path / "run", tmp_path / "rep", cfg,
                          positions=positions)

    def test_rebuild_requires_a_manifest(self, study, tmp_path):
        from cueflow.errors import DataFormatError
        _, cfg, _ = study
        (tmp_path / "empty").mkdir()
        with pytest.raises(DataFormatError, match="missing manifest"):
            build_reports(tmp_path / "empty", tmp_path / "rep", cfg)
