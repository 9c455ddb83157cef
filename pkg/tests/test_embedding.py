"""Delay-vector construction: lag layout, leakage, and spacing validation."""
import numpy as np
import pytest

from cueflow.embedding import EmbeddingSpec, embed
from cueflow.errors import DataFormatError
from cueflow.timeseries import TimeSeries


def series(data, dt=1.0, channels=None):
    data = np.asarray(data, dtype=float)
    if channels is None:
        n_ch = 1 if data.ndim == 1 else data.shape[1]
        channels = tuple(f"c{i}" for i in range(n_ch))
    return TimeSeries(channels=channels, data=data, dt=dt)


class TestEmbeddingSpec:
    def test_stride_and_horizon(self):
        spec = EmbeddingSpec(d=4, delta_s=0.1, dt=0.01)
        assert spec.stride == 10
        assert spec.horizon == 40

    def test_spacing_must_be_a_sample_multiple(self):
        with pytest.raises(DataFormatError):
            EmbeddingSpec(d=2, delta_s=0.15, dt=0.1)

    def test_order_must_be_a_positive_int(self):
        with pytest.raises(DataFormatError):
            EmbeddingSpec(d=0, delta_s=0.1, dt=0.1)
        with pytest.raises(DataFormatError):
            EmbeddingSpec(d=2.5, delta_s=0.1, dt=0.1)


class TestEmbed:
    def test_hand_worked_example(self):
        """d=3 lags of [10..50] leave a single row predicting the last value."""
        tgt = series([10.0, 20.0, 30.0, 40.0, 50.0])
        src = series([1.0, 2.0, 3.0, 4.0, 5.0])
        ds = embed(tgt, src, EmbeddingSpec(d=3, delta_s=1.0, dt=1.0))
        assert ds.n_rows == 2
        np.testing.assert_array_equal(ds.targets, [[40.0], [50.0]])
        np.testing.assert_array_equal(ds.target_hist,
                                      [[30.0, 20.0, 10.0], [40.0, 30.0, 20.0]])
        np.testing.assert_array_equal(ds.source_hist,
                                      [[3.0, 2.0, 1.0], [4.0, 3.0, 2.0]])
        np.testing.assert_array_equal(ds.times, [3.0, 4.0])

    def test_order_one_is_a_single_lag(self):
        tgt = series([1.0, 2.0, 3.0])
        ds = embed(tgt, tgt, EmbeddingSpec(d=1, delta_s=1.0, dt=1.0))
        np.testing.assert_array_equal(ds.targets, [[2.0], [3.0]])
        np.testing.assert_array_equal(ds.target_hist, [[1.0], [2.0]])

    def test_stride_two(self):
        tgt = series([1.0, 2.0, 3.0, 4.0, 5.0])
        ds = embed(tgt, tgt, EmbeddingSpec(d=2, delta_s=2.0, dt=1.0))
        assert ds.n_rows == 1
        np.testing.assert_array_equal(ds.targets, [[5.0]])
        np.testing.assert_array_equal(ds.target_hist, [[3.0, 1.0]])

    def test_row_count(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(10, 60))
            d = int(rng.integers(1, 4))
            stride = int(rng.integers(1, 3))
            ts = series(rng.standard_normal(n))
            spec = EmbeddingSpec(d=d, delta_s=float(stride), dt=1.0)
            assert embed(ts, ts, spec).n_rows == n - d * stride

    def test_lag_columns_are_shifts_of_the_input(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(120)
        y = rng.standard_normal(120)
        spec = EmbeddingSpec(d=3, delta_s=2.0, dt=1.0)
        ds = embed(series(x), series(y), spec)
        h = spec.horizon
        np.testing.assert_array_equal(ds.targets[:, 0], x[h:])
        for j in range(1, spec.d + 1):
            shift = j * spec.stride
            np.testing.assert_array_equal(ds.target_hist[:, j - 1],
                                          x[h - shift:len(x) - shift])
            np.testing.assert_array_equal(ds.source_hist[:, j - 1],
                                          y[h - shift:len(y) - shift])

    def test_no_future_leakage(self):
        """History columns never contain the target sample or anything after it."""
        n = 50
        x = np.zeros(n)
        x[30] = 1.0  # a single spike
        ds = embed(series(x), series(np.zeros(n)),
                   EmbeddingSpec(d=4, delta_s=1.0, dt=1.0))
        row = 30 - ds.spec.horizon  # row whose target is the spike
        assert ds.targets[row, 0] == 1.0
        assert not ds.target_hist[row].any()

    def test_multichannel_layout(self):
        """Within each lag, channels appear in series order (channels fastest)."""
        data = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]])
        ds = embed(series(data, channels=("a", "b")),
                   series(data, channels=("a", "b")),
                   EmbeddingSpec(d=2, delta_s=1.0, dt=1.0))
        np.testing.assert_array_equal(ds.targets, [[3.0, 30.0], [4.0, 40.0]])
        np.testing.assert_array_equal(ds.target_hist,
                                      [[2.0, 20.0, 1.0, 10.0],
                                       [3.0, 30.0, 2.0, 20.0]])

    def test_joint_hist_concatenates_target_then_source(self):
        rng = np.random.default_rng(2)
        ds = embed(series(rng.standard_normal(30)),
                   series(rng.standard_normal(30)),
                   EmbeddingSpec(d=2, delta_s=1.0, dt=1.0))
        np.testing.assert_array_equal(ds.joint_hist,
                                      np.hstack([ds.target_hist, ds.source_hist]))

    def test_mismatched_dt_rejected(self):
        with pytest.raises(DataFormatError):
            embed(series(np.zeros(10), dt=1.0), series(np.zeros(10), dt=0.5),
                  EmbeddingSpec(d=1, delta_s=1.0, dt=1.0))

    def test_mismatched_length_rejected(self):
        with pytest.raises(DataFormatError):
            embed(series(np.zeros(10)), series(np.zeros(11)),
                  EmbeddingSpec(d=1, delta_s=1.0, dt=1.0))

    def test_series_shorter_than_horizon_rejected(self):
        with pytest.raises(DataFormatError):
            embed(series(np.zeros(4)), series(np.zeros(4)),
                  EmbeddingSpec(d=2, delta_s=2.0, dt=1.0))
