"""Uniformly sampled multichannel time series, trial collections, and feature transforms.

The on-disk trial format is a plain CSV with header ``t,<ch1>,<ch2>,...`` and
strictly increasing timestamps.  Loading tolerates timestamp jitter; analysis
code assumes a uniform grid, so jittered recordings are resampled before use.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError

_UNIFORM_RTOL = 1e-9


@dataclass(frozen=True)
class TimeSeries:
    """A regularly sampled block of one or more named channels.

    Parameters
    ----------
    channels : tuple of str
        Channel names, one per data column.
    data : ndarray, shape (n, len(channels))
        Sample values; must be finite.
    dt : float
        Nominal sample spacing in seconds (> 0).
    t0 : float
        Timestamp of the first sample.
    raw_times : ndarray or None
        Original (possibly jittered) timestamps.  Kept only so that
        :func:`resample` can interpolate from the true sample instants;
        every other operation uses the uniform grid ``t0 + k*dt``.
    """

    channels: tuple[str, ...]
    data: np.ndarray
    dt: float
    t0: float = 0.0
    raw_times: np.ndarray | None = None

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise DataFormatError(f"data must be 2-D, got shape {data.shape}")
        channels = tuple(str(c) for c in self.channels)
        if len(channels) != data.shape[1]:
            raise DataFormatError(
                f"{len(channels)} channel names for {data.shape[1]} data columns"
            )
        if len(set(channels)) != len(channels):
            raise DataFormatError(f"duplicate channel names: {channels}")
        if data.shape[0] < 1:
            raise DataFormatError("time series must hold at least one sample")
        if not np.isfinite(data).all():
            raise DataFormatError("non-finite values in time series data")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DataFormatError(f"dt must be positive and finite, got {self.dt}")
        if self.raw_times is not None:
            raw = np.asarray(self.raw_times, dtype=float)
            if raw.shape != (data.shape[0],):
                raise DataFormatError("raw_times length must match data rows")
            object.__setattr__(self, "raw_times", raw)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", channels)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        """Uniform timestamp grid ``t0 + k*dt``."""
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def duration(self) -> float:
        """Span from the first to the last sample, in seconds."""
        return self.dt * (self.n_samples - 1)

    def channel_index(self, name: str) -> int:
        try:
            return self.channels.index(name)
        except ValueError:
            raise DataFormatError(
                f"unknown channel {name!r}; available: {list(self.channels)}"
            ) from None

    def values(self, name: str) -> np.ndarray:
        """Column of one channel as a 1-D array."""
        return self.data[:, self.channel_index(name)]

    def select(self, names) -> "TimeSeries":
        """Sub-series containing only ``names``, in the given order."""
        idx = [self.channel_index(n) for n in names]
        return TimeSeries(
            channels=tuple(names),
            data=self.data[:, idx],
            dt=self.dt,
            t0=self.t0,
            raw_times=self.raw_times,
        )


@dataclass(frozen=True)
class Trial:
    """One recorded trial: an id, a scenario label, and its time series."""

    trial_id: str
    scenario: str
    series: TimeSeries


@dataclass(frozen=True)
class TrialSet:
    """A collection of trials sharing one channel schema.

    ``metadata`` carries free-form string annotations.  The key
    ``trim_start_s.<trial_id>`` marks an alignment point: the pipeline drops
    everything before that many seconds and re-bases the trial clock there,
    so per-trial histograms line up on the common event.
    """

    trials: tuple[Trial, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        trials = tuple(self.trials)
        ids = [t.trial_id for t in trials]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DataFormatError(f"duplicate trial ids: {dupes}")
        schemas = {t.series.channels for t in trials}
        if len(schemas) > 1:
            raise DataFormatError(
                f"trials disagree on channel schema: {sorted(schemas)}"
            )
        object.__setattr__(self, "trials", trials)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def scenarios(self) -> tuple[str, ...]:
        """Distinct scenario labels, in first-appearance order."""
        seen: dict[str, None] = {}
        for t in self.trials:
            seen.setdefault(t.scenario, None)
        return tuple(seen)


def load_csv(path, schema=None) -> TimeSeries:
    """Load one trial CSV (``t,<ch1>,...``) into a :class:`TimeSeries`.

    Timestamps must be strictly increasing; ``dt`` is set to the median
    successive difference and the raw timestamps are retained for resampling
    when they deviate from a uniform grid.  ``schema`` lists channel names
    that must be present.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "t":
            raise DataFormatError(f"{path}: first column must be 't', got {header[:1]}")
        channels = tuple(header[1:])
        if not channels:
            raise DataFormatError(f"{path}: no data channels in header")
        times = []
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise DataFormatError(f"{path}: numeric parse error at row {i}") from None
            times.append(vals[0])
            rows.append(vals[1:])
    if len(times) < 2:
        raise DataFormatError(f"{path}: need at least two samples")
    t = np.asarray(times)
    diffs = np.diff(t)
    bad = np.flatnonzero(diffs <= 0)
    if bad.size:
        raise DataFormatError(
            f"{path}: timestamps not strictly increasing at row {bad[0] + 2}"
        )
    if schema is not None:
        missing = [c for c in schema if c not in channels]
        if missing:
            raise DataFormatError(f"{path}: missing channels {missing}")
    dt = float(np.median(diffs))
    grid = t[0] + dt * np.arange(len(t))
    jitter = np.max(np.abs(t - grid))
    raw = t if jitter > _UNIFORM_RTOL * max(dt, 1.0) else None
    return TimeSeries(channels=channels, data=np.asarray(rows), dt=dt, t0=float(t[0]),
                      raw_times=raw)


def write_trial_csv(ts: TimeSeries, path) -> None:
    """Write a trial CSV that :func:`load_csv` reads back losslessly."""
    times = ts.raw_times if ts.raw_times is not None else ts.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *ts.channels])
        for t, row in zip(times, ts.data):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def resample(ts: TimeSeries, rate_hz: float) -> TimeSeries:
    """Linearly interpolate onto a uniform grid at ``rate_hz``.

    The grid starts at ``t0`` and covers the recorded span; no extrapolation
    beyond the last sample.  Resampling a uniform series at its own rate is
    an identity (within float rounding).
    """
    if not (np.isfinite(rate_hz) and rate_hz > 0):
        raise DataFormatError(f"rate_hz must be positive, got {rate_hz}")
    src_t = ts.raw_times if ts.raw_times is not None else ts.times
    t_end = float(src_t[-1])
    n_out = int(np.floor((t_end - ts.t0) * rate_hz + 1e-9)) + 1
    if n_out < 1:
        raise DataFormatError("resample grid is empty")
    new_dt = 1.0 / rate_hz
    new_t = ts.t0 + new_dt * np.arange(n_out)
    out = np.column_stack([np.interp(new_t, src_t, ts.data[:, j])
                           for j in range(ts.n_channels)])
    return TimeSeries(channels=ts.channels, data=out, dt=new_dt, t0=ts.t0)


def magnitude(ts: TimeSeries, channels) -> TimeSeries:
    """Per-sample Euclidean norm of the named channels (e.g. a triaxial rate)."""
    sub = ts.select(channels)
    mag = np.sqrt(np.sum(sub.data ** 2, axis=1))
    return TimeSeries(channels=("magnitude",), data=mag[:, None], dt=ts.dt,
                      t0=ts.t0, raw_times=ts.raw_times)


def project_normalize_xy(ts: TimeSeries, channels) -> TimeSeries:
    """Project a 3-D vector channel triple onto the xy-plane and normalize.

    Rows whose planar norm falls below 1e-9 carry the previous valid
    direction forward; if the series starts degenerate, (1, 0) is used.
    """
    if len(channels) != 3:
        raise DataFormatError("project_normalize_xy expects exactly 3 channel names")
    sub = ts.select(channels)
    xy = sub.data[:, :2].copy()
    norms = np.hypot(xy[:, 0], xy[:, 1])
    out = np.empty_like(xy)
    prev = np.array([1.0, 0.0])
    for i in range(len(xy)):
        if norms[i] >= 1e-9:
            prev = xy[i] / norms[i]
        out[i] = prev
    names = (f"{channels[0]}_unit", f"{channels[1]}_unit")
    return TimeSeries(channels=names, data=out, dt=ts.dt, t0=ts.t0,
                      raw_times=ts.raw_times)


def trim_start(ts: TimeSeries, start_s: float) -> TimeSeries:
    """Drop samples before ``start_s`` (absolute time) and re-base the clock to 0."""
    src_t = ts.raw_times if ts.raw_times is not None else ts.times
    keep = src_t >= start_s - 1e-12
    if not keep.any():
        raise DataFormatError(f"trim at {start_s} s leaves no samples")
    kept_t = src_t[keep] - start_s
    raw = kept_t if ts.raw_times is not None else None
    return TimeSeries(channels=ts.channels, data=ts.data[keep], dt=ts.dt,
                      t0=float(kept_t[0]), raw_times=raw)
