"""CSV wire formats for analysis products.

Formats (all comma-separated, header row first, floats written with
shortest-round-trip ``repr`` so read-back is lossless):

* TE trace, one file per trial and direction:
  ``t,te_raw,te_filtered,threshold,cue`` (cue is 0/1; threshold starts NaN).
* Events: ``trial,direction,start_t,end_t,peak_te``.
* Grid: ``ix,iy,count`` for nonzero cells, plus a ``<path>.meta`` sidecar of
  ``key=value`` lines (origin_x, origin_y, cell_size_m, nx, ny, direction).
* Histogram: ``bin,t_start,count`` plus a sidecar (bin_dt, n_trials, direction).
* Group report: ``direction,n_a,n_b,t_stat,p_value``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .aggregate import CueGrid, CueHistogram, PeakTeReport, WelchResult
from .detector import CueEvent, DetectionTrace
from .errors import DataFormatError
from .timeseries import Trial, TrialSet, load_csv, write_trial_csv

TE_HEADER = ["t", "te_raw", "te_filtered", "threshold", "cue"]
EVENTS_HEADER = ["trial", "direction", "start_t", "end_t", "peak_te"]
REPORT_HEADER = ["direction", "n_a", "n_b", "t_stat", "p_value"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def _write_meta(path, items: dict[str, str]) -> None:
    with open(_meta_path(path), "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def _read_meta(path) -> dict[str, str]:
    meta = _meta_path(path)
    if not meta.exists():
        raise DataFormatError(f"missing sidecar {meta}")
    out: dict[str, str] = {}
    for line in meta.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"{meta}: malformed line {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# TE traces
# ---------------------------------------------------------------------------

def write_te_csv(trace: DetectionTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TE_HEADER)
        for t, raw, filt, thr, cue in zip(trace.times, trace.te_raw,
                                          trace.te_filtered, trace.threshold,
                                          trace.cue):
            writer.writerow([_fmt(t), _fmt(raw), _fmt(filt), _fmt(thr), int(cue)])


def read_te_csv(path, direction: str = "src2tgt") -> DetectionTrace:
    """Read a TE trace back; smoother internals (mu/sigma) are not stored."""
    rows = _read_rows(path, TE_HEADER)
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        raise DataFormatError(f"{path}: no samples")
    return DetectionTrace(
        direction=direction,
        times=arr[:, 0],
        te_raw=arr[:, 1],
        te_filtered=arr[:, 2],
        threshold=arr[:, 3],
        cue=arr[:, 4] != 0.0,
    )


def _read_rows(path, expected_header: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise DataFormatError(
                f"{path}: header {header} does not match {expected_header}"
            )
        out = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise DataFormatError(f"{path}: row {i} has {len(row)} fields")
            out.append(row)
    return out


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

def write_events_csv(events, path) -> None:
    """``events`` is a sequence of (trial_id, CueEvent)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENTS_HEADER)
        for trial_id, ev in events:
            writer.writerow([trial_id, ev.direction, _fmt(ev.start_t),
                             _fmt(ev.end_t), _fmt(ev.peak_te)])


def read_events_csv(path) -> list[tuple[str, CueEvent]]:
    out = []
    for row in _read_rows(path, EVENTS_HEADER):
        try:
            ev = CueEvent(start_t=float(row[2]), end_t=float(row[3]),
                          peak_te=float(row[4]), direction=row[1])
        except ValueError:
            raise DataFormatError(f"{path}: numeric parse error in {row}") from None
        out.append((row[0], ev))
    return out


# ---------------------------------------------------------------------------
# Aggregates
# ---------------------------------------------------------------------------

def write_grid_csv(grid: CueGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ix", "iy", "count"])
        for ix, iy in np.argwhere(grid.counts):
            writer.writerow([int(ix), int(iy), int(grid.counts[ix, iy])])
    _write_meta(path, {
        "origin_x": _fmt(grid.origin[0]),
        "origin_y": _fmt(grid.origin[1]),
        "cell_size_m": _fmt(grid.cell_size_m),
        "nx": str(grid.counts.shape[0]),
        "ny": str(grid.counts.shape[1]),
        "direction": grid.direction,
    })


def read_grid_csv(path) -> CueGrid:
    meta = _read_meta(path)
    try:
        shape = (int(meta["nx"]), int(meta["ny"]))
        origin = (float(meta["origin_x"]), float(meta["origin_y"]))
        cell = float(meta["cell_size_m"])
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad sidecar ({exc})") from None
    counts = np.zeros(shape, dtype=int)
    for row in _read_rows(path, ["ix", "iy", "count"]):
        ix, iy, c = int(row[0]), int(row[1]), int(row[2])
        if not (0 <= ix < shape[0] and 0 <= iy < shape[1]):
            raise DataFormatError(f"{path}: cell ({ix}, {iy}) outside {shape}")
        counts[ix, iy] = c
    return CueGrid(origin=origin, cell_size_m=cell, counts=counts,
                   direction=meta.get("direction", ""))


def write_histogram_csv(hist: CueHistogram, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "t_start", "count"])
        for i, c in enumerate(hist.counts):
            writer.writerow([i, _fmt(i * hist.bin_dt), int(c)])
    _write_meta(path, {
        "bin_dt": _fmt(hist.bin_dt),
        "n_trials": str(hist.n_trials),
        "direction": hist.direction,
    })


def read_histogram_csv(path) -> CueHistogram:
    meta = _read_meta(path)
    try:
        bin_dt = float(meta["bin_dt"])
        n_trials = int(meta["n_trials"])
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad sidecar ({exc})") from None
    rows = _read_rows(path, ["bin", "t_start", "count"])
    counts = np.zeros(len(rows), dtype=int)
    for row in rows:
        counts[int(row[0])] = int(row[2])
    return CueHistogram(bin_dt=bin_dt, counts=counts, n_trials=n_trials,
                        direction=meta.get("direction", ""))


def write_report_csv(report: PeakTeReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for direction, res in report.rows:
            writer.writerow([direction, res.n_a, res.n_b,
                             _fmt(res.t_stat), _fmt(res.p_value)])


def read_report_csv(path) -> PeakTeReport:
    rows = []
    for row in _read_rows(path, REPORT_HEADER):
        res = WelchResult(t_stat=float(row[3]), dof=float("nan"),
                          p_value=float(row[4]), n_a=int(row[1]), n_b=int(row[2]))
        rows.append((row[0], res))
    return PeakTeReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Trial directories
# ---------------------------------------------------------------------------

def load_trial_dir(path, schema=None) -> TrialSet:
    """Load every ``*.csv`` in a directory as one trial each.

    File stems of the form ``<scenario>__<trial_id>`` carry a scenario
    label; plain stems get scenario "".  An optional ``trials.meta`` file of
    ``key=value`` lines populates :attr:`TrialSet.metadata`.  ``truth.csv``
    is reserved for the ground-truth table written next to synthetic trials
    and is skipped.
    """
    path = Path(path)
    if not path.is_dir():
        raise DataFormatError(f"{path} is not a directory")
    trials = []
    for f in sorted(path.glob("*.csv")):
        if f.name == "truth.csv":
            continue
        stem = f.stem
        scenario, _, trial_id = stem.partition("__")
        if not trial_id:
            scenario, trial_id = "", stem
        trials.append(Trial(trial_id=trial_id, scenario=scenario,
                            series=load_csv(f, schema=schema)))
    if not trials:
        raise DataFormatError(f"{path}: no trial CSVs found")
    metadata: dict[str, str] = {}
    meta_file = path / "trials.meta"
    if meta_file.exists():
        for line in meta_file.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise DataFormatError(f"{meta_file}: malformed line {line!r}")
            k, v = line.split("=", 1)
            metadata[k.strip()] = v.strip()
    return TrialSet(trials=tuple(trials), metadata=metadata)


def write_trial_dir(trials: TrialSet, path) -> None:
    """Inverse of :func:`load_trial_dir` (scenario encoded in the file stem)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for trial in trials:
        stem = f"{trial.scenario}__{trial.trial_id}" if trial.scenario else trial.trial_id
        write_trial_csv(trial.series, path / f"{stem}.csv")
    if trials.metadata:
        with open(path / "trials.meta", "w") as fh:
            for k, v in trials.metadata.items():
                fh.write(f"{k}={v}\n")
