"""CSV persistence round-trips for traces, events, aggregates, and trial dirs."""
import numpy as np
import pytest

from cueflow.aggregate import CueGrid, CueHistogram, WelchResult, PeakTeReport
from cueflow.detector import CueEvent, DetectionTrace, DetectorConfig, detect_trace
from cueflow.errors import DataFormatError
from cueflow.storage import (load_trial_dir, read_events_csv, read_grid_csv,
                             read_histogram_csv, read_report_csv, read_te_csv,
                             write_events_csv, write_grid_csv,
                             write_histogram_csv, write_report_csv,
                             write_te_csv, write_trial_dir)
from cueflow.te import TeSeries
from cueflow.timeseries import TimeSeries, Trial, TrialSet


def sample_trace():
    """A real detector output, so the round-trip covers NaN thresholds and events."""
    rng = np.random.default_rng(5)
    n = 400
    te = rng.standard_normal(n) * 0.05
    te[200:215] += 2.0
    series = TeSeries(direction="src2tgt", times=0.01 * np.arange(n),
                      te_raw=te, mode="entropy_diff")
    cfg = DetectorConfig(alpha=0.05, beta=0.1, gamma=3.0, hp_cutoff_hz=1.0,
                         dt=0.01, skip_warmup=False)
    return detect_trace(series, cfg)


class TestTeCsv:
    def test_round_trip_is_exact(self, tmp_path):
        trace = sample_trace()
        path = tmp_path / "te_t0_src2tgt.csv"
        write_te_csv(trace, path)
        back = read_te_csv(path, direction=trace.direction)
        assert back.direction == trace.direction
        np.testing.assert_array_equal(back.times, trace.times)
        np.testing.assert_array_equal(back.te_raw, trace.te_raw)
        np.testing.assert_array_equal(back.te_filtered, trace.te_filtered)
        np.testing.assert_array_equal(back.threshold, trace.threshold)
        np.testing.assert_array_equal(back.cue, trace.cue)

    def test_nan_threshold_survives(self, tmp_path):
        trace = sample_trace()
        assert np.isnan(trace.threshold[0])  # no history at the first sample
        path = tmp_path / "te.csv"
        write_te_csv(trace, path)
        assert np.isnan(read_te_csv(path, direction="src2tgt").threshold[0])


class TestEventsCsv:
    def test_round_trip(self, tmp_path):
        events = [
            ("t000", CueEvent(start_t=1.25, end_t=1.5, peak_te=0.75,
                              direction="src2tgt")),
            ("t001", CueEvent(start_t=0.1, end_t=0.30000000000000004,
                              peak_te=1e-12, direction="tgt2src")),
        ]
        path = tmp_path / "events.csv"
        write_events_csv(events, path)
        back = read_events_csv(path)
        assert back == events

    def test_empty_file_keeps_header(self, tmp_path):
        path = tmp_path / "events.csv"
        write_events_csv([], path)
        assert path.read_text().startswith("trial,")
        assert read_events_csv(path) == []


class TestGridCsv:
    def test_round_trip_sparse(self, tmp_path):
        counts = np.zeros((4, 3), dtype=int)
        counts[2, 1] = 7
        counts[0, 0] = 1
        grid = CueGrid(origin=(-1.5, 2.0), cell_size_m=0.5, counts=counts,
                       direction="src2tgt")
        path = tmp_path / "grid.csv"
        write_grid_csv(grid, path)
        back = read_grid_csv(path)
        assert back.origin == grid.origin
        assert back.cell_size_m == grid.cell_size_m
        assert back.direction == grid.direction
        np.testing.assert_array_equal(back.counts, grid.counts)

    def test_only_nonzero_cells_are_written(self, tmp_path):
        counts = np.zeros((10, 10), dtype=int)
        counts[2, 3] = 1
        grid = CueGrid(origin=(0.0, 0.0), cell_size_m=1.0, counts=counts,
                       direction="")
        path = tmp_path / "grid.csv"
        write_grid_csv(grid, path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["ix,iy,count", "2,3,1"]

    def test_missing_sidecar_is_an_error(self, tmp_path):
        grid = CueGrid(origin=(0.0, 0.0), cell_size_m=1.0,
                       counts=np.zeros((2, 2), dtype=int), direction="")
        path = tmp_path / "grid.csv"
        write_grid_csv(grid, path)
        (tmp_path / "grid.csv.meta").unlink()
        with pytest.raises(DataFormatError):
            read_grid_csv(path)


class TestHistogramCsv:
    def test_round_trip(self, tmp_path):
        hist = CueHistogram(bin_dt=0.5, counts=np.array([0, 3, 12, 1]),
                            n_trials=12, direction="tgt2src")
        path = tmp_path / "histogram.csv"
        write_histogram_csv(hist, path)
        back = read_histogram_csv(path)
        assert back.bin_dt == hist.bin_dt
        assert back.n_trials == hist.n_trials
        assert back.direction == hist.direction
        np.testing.assert_array_equal(back.counts, hist.counts)
        np.testing.assert_allclose(back.bin_starts, [0.0, 0.5, 1.0, 1.5])


class TestReportCsv:
    def test_round_trip(self, tmp_path):
        report = PeakTeReport(rows=(
            ("src2tgt", WelchResult(t_stat=-1.0, dof=8.0,
                                    p_value=0.34659350708733416, n_a=5, n_b=5)),
            ("tgt2src", WelchResult(t_stat=0.25, dof=17.5,
                                    p_value=0.8056, n_a=10, n_b=12)),
        ))
        path = tmp_path / "peak_te_report.csv"
        write_report_csv(report, path)
        back = read_report_csv(path)
        for (d_in, r_in), (d_out, r_out) in zip(report.rows, back.rows):
            assert d_in == d_out
            assert r_out.t_stat == r_in.t_stat
            assert r_out.p_value == r_in.p_value
            assert (r_out.n_a, r_out.n_b) == (r_in.n_a, r_in.n_b)
            assert np.isnan(r_out.dof)  # dof is not persisted

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "peak_te_report.csv"
        path.write_text("direction,whatever\nsrc2tgt,1\n")
        with pytest.raises(DataFormatError):
            read_report_csv(path)


class TestTrialDir:
    def trial(self, tid, scenario, seed):
        rng = np.random.default_rng(seed)
        series = TimeSeries(channels=("x", "y"),
                            data=rng.standard_normal((25, 2)), dt=0.05)
        return Trial(trial_id=tid, scenario=scenario, series=series)

    def test_round_trip_with_scenarios_and_metadata(self, tmp_path):
        trials = TrialSet(
            trials=(self.trial("t000", "baseline", 0),
                    self.trial("t001", "baseline", 1),
                    self.trial("t002", "cued", 2)),
            metadata={"trim_start_s.t002": "0.25", "note": "smoke"},
        )
        out = tmp_path / "trials"
        write_trial_dir(trials, out)
        stems = sorted(p.name for p in out.glob("*.csv"))
        assert stems == ["baseline__t000.csv", "baseline__t001.csv",
                         "cued__t002.csv"]
        back = load_trial_dir(out)
        assert back.metadata == trials.metadata
        assert [t.trial_id for t in back] == ["t000", "t001", "t002"]
        assert [t.scenario for t in back] == ["baseline", "baseline", "cued"]
        for a, b in zip(trials, back):
            np.testing.assert_array_equal(a.series.data, b.series.data)

    def test_plain_stems_have_empty_scenario(self, tmp_path):
        d = tmp_path / "trials"
        d.mkdir()
        (d / "walk01.csv").write_text("t,x\n0.0,1.0\n0.1,2.0\n")
        back = load_trial_dir(d)
        assert back.trials[0].trial_id == "walk01"
        assert back.trials[0].scenario == ""

    def test_truth_table_is_not_a_trial(self, tmp_path):
        """The ground-truth sidecar written next to synthetic trials must not
        be parsed as a trial itself."""
        d = tmp_path / "trials"
        d.mkdir()
        (d / "walk01.csv").write_text("t,x\n0.0,1.0\n0.1,2.0\n")
        (d / "truth.csv").write_text("trial,start_t,end_t\nwalk01,2.0,2.35\n")
        back = load_trial_dir(d)
        assert [t.trial_id for t in back] == ["walk01"]
