"""End-to-end orchestration: trials -> models -> local TE -> events -> aggregates.

Models are fit pooled across the trials of each scenario (matching how the
study protocol treats a scenario as one condition) and then applied to every
trial of that scenario.  Passing pre-fit models instead freezes them, which
makes per-trial outputs independent of which other trials are present.
Everything is deterministic for a fixed config and seed.
"""

from __future__ import annotations

import logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import aggregate as agg
from .config import PipelineConfig
from .detector import DetectionTrace, detect_trace, time_constants
from .embedding import EmbeddedDataset, EmbeddingSpec, embed
from .errors import CueflowError, PipelineError
from .models import (AUGMENTED, BASELINE, MLP_GAUSSIAN, VAR_LINEAR, FittedModel,
                     fit_mlp, fit_var, predict_dataset)
from .te import SRC2TGT, TGT2SRC, TeSeries, local_te
from .timeseries import TimeSeries, TrialSet, resample, trim_start

logger = logging.getLogger("cueflow")

Diagnostic = namedtuple("Diagnostic", ["severity", "message"])

TRIM_KEY_PREFIX = "trim_start_s."


@dataclass(frozen=True)
class DirectionModels:
    """Baseline/augmented pair fitted for one direction."""

    baseline: FittedModel
    augmented: FittedModel


@dataclass
class TrialResult:
    """Per-trial outputs: TE series and detection trace (with events) per direction."""

    trial_id: str
    scenario: str
    duration_s: float
    t0: float
    series: dict[str, TeSeries]
    traces: dict[str, DetectionTrace]


@dataclass
class PipelineResult:
    trials: list[TrialResult]
    models: dict[tuple[str, str], DirectionModels]  # (scenario, direction) -> pair
    histograms: dict[str, agg.CueHistogram]
    grids: dict[str, agg.CueGrid]
    report: agg.PeakTeReport | None


def validate_config(cfg: PipelineConfig) -> list[Diagnostic]:
    """Static consistency checks; returns diagnostics, raises nothing."""
    out: list[Diagnostic] = []
    dt = cfg.dt
    nyquist = 0.5 * cfg.io.resample_hz
    if cfg.detector.hp_cutoff_hz >= nyquist:
        out.append(Diagnostic("error",
                   f"high-pass cutoff {cfg.detector.hp_cutoff_hz} Hz is at or above "
                   f"the Nyquist rate {nyquist} Hz for resample_hz={cfg.io.resample_hz}"))
    stride = round(cfg.embedding.delta_s / dt)
    if stride < 1 or abs(stride * dt - cfg.embedding.delta_s) > 1e-9 * max(cfg.embedding.delta_s, dt):
        out.append(Diagnostic("error",
                   f"embedding delta_s={cfg.embedding.delta_s} s is not an integer "
                   f"multiple of the sample step {dt} s"))
    try:
        tau_level, tau_trend = time_constants(cfg.detector.alpha, cfg.detector.beta, dt)
    except CueflowError as exc:
        out.append(Diagnostic("error", str(exc)))
        return out
    out.append(Diagnostic("info",
               f"threshold level time constant {tau_level:.4g} s, "
               f"trend time constant {tau_trend:.4g} s"))
    if tau_trend > tau_level:
        out.append(Diagnostic("warning",
                   "trend smoother adapts more slowly than the level smoother "
                   f"({tau_trend:.4g} s > {tau_level:.4g} s)"))
    if cfg.aggregate.cell_size_m is not None and cfg.aggregate.position_channels is None:
        out.append(Diagnostic("warning",
                   "cell_size_m is set but position_channels is not; "
                   "no spatial grid will be produced"))
    return out


def _prepare_trial(trial, cfg: PipelineConfig) -> TimeSeries:
    series = trial.series
    return resample(series, cfg.io.resample_hz)


def _direction_roles(cfg: PipelineConfig, direction: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(modeled-target channels, history-source channels) for a direction."""
    if direction == SRC2TGT:
        return cfg.io.target_channels, cfg.io.source_channels
    return cfg.io.source_channels, cfg.io.target_channels


def _pool(datasets: list[EmbeddedDataset]) -> EmbeddedDataset:
    if len(datasets) == 1:
        return datasets[0]
    return EmbeddedDataset(
        targets=np.vstack([d.targets for d in datasets]),
        target_hist=np.vstack([d.target_hist for d in datasets]),
        source_hist=np.vstack([d.source_hist for d in datasets]),
        times=np.concatenate([d.times for d in datasets]),
        spec=datasets[0].spec,
    )


def _fit_pair(pooled: EmbeddedDataset, cfg: PipelineConfig, seed: int) -> DirectionModels:
    if cfg.model.kind == VAR_LINEAR:
        base = fit_var(pooled, BASELINE)
        full = fit_var(pooled, AUGMENTED)
    elif cfg.model.kind == MLP_GAUSSIAN:
        base = fit_mlp(pooled, BASELINE, hidden=cfg.model.hidden,
                       train=cfg.model.train_config(seed))
        full = fit_mlp(pooled, AUGMENTED, hidden=cfg.model.hidden,
                       train=cfg.model.train_config(seed + 1))
    else:  # pragma: no cover - kinds validated at config parse
        raise PipelineError(f"unknown model kind {cfg.model.kind!r}")
    logger.info("fitted %s/%s: baseline NLL %.6g, augmented NLL %.6g",
                cfg.model.kind, pooled.spec.d, base.train_report.final_nll,
                full.train_report.final_nll)
    return DirectionModels(baseline=base, augmented=full)


def fit_models(trials: TrialSet, cfg: PipelineConfig
               ) -> dict[tuple[str, str], DirectionModels]:
    """Fit pooled per-scenario models for every configured direction.

    The returned mapping can be fed back into :func:`run` to freeze models
    across datasets; its keys are ``(scenario, direction)``.
    """
    spec = EmbeddingSpec(d=cfg.embedding.d, delta_s=cfg.embedding.delta_s, dt=cfg.dt)
    by_scenario: dict[str, list] = {}
    for trial in trials:
        by_scenario.setdefault(trial.scenario, []).append(trial)
    models: dict[tuple[str, str], DirectionModels] = {}
    for s_idx, (scenario, group) in enumerate(by_scenario.items()):
        for d_idx, direction in enumerate(cfg.io.direction_list):
            tgt_ch, src_ch = _direction_roles(cfg, direction)
            datasets = []
            for trial in group:
                try:
                    series = _prepare_trial(trial, cfg)
                    series = _apply_trim(series, trial.trial_id, trials.metadata)
                    ds = embed(series.select(tgt_ch), series.select(src_ch), spec)
                except CueflowError as exc:
                    raise PipelineError(
                        f"trial {trial.trial_id!r}, stage embed ({direction}): {exc}"
                    ) from exc
                datasets.append(ds)
            seed = cfg.io.seed + 4 * s_idx + 2 * d_idx
            try:
                models[(scenario, direction)] = _fit_pair(_pool(datasets), cfg, seed)
            except CueflowError as exc:
                raise PipelineError(
                    f"scenario {scenario!r}, stage fit ({direction}): {exc}"
                ) from exc
    return models


def _apply_trim(series: TimeSeries, trial_id: str, metadata: dict[str, str]) -> TimeSeries:
    key = TRIM_KEY_PREFIX + trial_id
    if key not in metadata:
        return series
    return trim_start(series, float(metadata[key]))


def _analyze_trial(trial, cfg: PipelineConfig, spec: EmbeddingSpec,
                   models, metadata) -> TrialResult:
    try:
        series = _prepare_trial(trial, cfg)
        series = _apply_trim(series, trial.trial_id, metadata)
    except CueflowError as exc:
        raise PipelineError(f"trial {trial.trial_id!r}, stage prepare: {exc}") from exc
    traces: dict[str, DetectionTrace] = {}
    te_series_map: dict[str, TeSeries] = {}
    det_cfg = cfg.detector.to_config(cfg.dt)
    for direction in cfg.io.direction_list:
        tgt_ch, src_ch = _direction_roles(cfg, direction)
        try:
            ds = embed(series.select(tgt_ch), series.select(src_ch), spec)
            pair = models[(trial.scenario, direction)]
            base = predict_dataset(pair.baseline, ds)
            full = predict_dataset(pair.augmented, ds)
            te_series = local_te(base, full, ds.targets, mode=cfg.model.te_mode,
                                 direction=direction)
            te_series_map[direction] = te_series
            traces[direction] = detect_trace(te_series, det_cfg)
        except KeyError:
            raise PipelineError(
                f"trial {trial.trial_id!r}: no frozen models for scenario "
                f"{trial.scenario!r}, direction {direction!r}"
            ) from None
        except CueflowError as exc:
            raise PipelineError(
                f"trial {trial.trial_id!r}, stage te ({direction}): {exc}"
            ) from exc
    return TrialResult(trial_id=trial.trial_id, scenario=trial.scenario,
                       duration_s=series.duration, t0=series.t0,
                       series=te_series_map, traces=traces)


def run(trials: TrialSet, cfg: PipelineConfig,
        models: dict[tuple[str, str], DirectionModels] | None = None,
        jobs: int = 1) -> PipelineResult:
    """Analyze a trial set under one configuration.

    When ``models`` is None they are fit pooled per scenario first
    (:func:`fit_models`); passing a mapping freezes them.  ``jobs`` controls
    the thread pool for the per-trial evaluation stage; results do not
    depend on it.
    """
    if len(trials) == 0:
        raise PipelineError("no trials to analyze")
    errors = [d for d in validate_config(cfg) if d.severity == "error"]
    if errors:
        raise PipelineError("invalid configuration: " + "; ".join(d.message for d in errors))
    spec = EmbeddingSpec(d=cfg.embedding.d, delta_s=cfg.embedding.delta_s, dt=cfg.dt)
    if models is None:
        models = fit_models(trials, cfg)
    work = list(trials)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda t: _analyze_trial(t, cfg, spec, models, trials.metadata), work))
    else:
        results = [_analyze_trial(t, cfg, spec, models, trials.metadata) for t in work]

    histograms: dict[str, agg.CueHistogram] = {}
    grids: dict[str, agg.CueGrid] = {}
    for direction in cfg.io.direction_list:
        if cfg.aggregate.bin_dt is not None:
            hist_in = [([_rebase(ev, r.t0) for ev in r.traces[direction].events],
                        r.duration_s) for r in results]
            histograms[direction] = agg.temporal_histogram(
                hist_in, cfg.aggregate.bin_dt, direction=direction)
        if cfg.aggregate.cell_size_m is not None and cfg.aggregate.position_channels:
            grid_in = []
            for trial, r in zip(work, results):
                series = _apply_trim(_prepare_trial(trial, cfg), trial.trial_id,
                                     trials.metadata)
                grid_in.append((r.traces[direction].events, series))
            grids[direction] = agg.spatial_grid(
                grid_in, cfg.aggregate.cell_size_m,
                channels=tuple(cfg.aggregate.position_channels), direction=direction)

    report = None
    scenarios = trials.scenarios
    if len(scenarios) == 2:
        group_a = [r.series for r in results if r.scenario == scenarios[0]]
        group_b = [r.series for r in results if r.scenario == scenarios[1]]
        if min(len(group_a), len(group_b)) >= 2:
            report = agg.peak_te_study(group_a, group_b)

    return PipelineResult(trials=results, models=models, histograms=histograms,
                          grids=grids, report=report)


def _rebase(ev, t0: float):
    return replace(ev, start_t=ev.start_t - t0, end_t=ev.end_t - t0)


# ---------------------------------------------------------------------------
# File-level products (shared by the run and report commands)
# ---------------------------------------------------------------------------

def te_csv_name(trial_id: str, direction: str) -> str:
    return f"te_{trial_id}_{direction}.csv"


def write_run_dir(result: PipelineResult, cfg: PipelineConfig, out_dir) -> None:
    """Write per-trial TE traces, the event table, and the trial manifest."""
    from pathlib import Path

    from . import storage

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_events = []
    for r in result.trials:
        for direction in cfg.io.direction_list:
            trace = r.traces[direction]
            storage.write_te_csv(trace, out / te_csv_name(r.trial_id, direction))
            all_events.extend((r.trial_id, ev) for ev in trace.events)
    storage.write_events_csv(all_events, out / "events.csv")
    with open(out / "manifest.csv", "w", newline="") as fh:
        fh.write("trial,scenario,t0,duration_s\n")
        for r in result.trials:
            fh.write(f"{r.trial_id},{r.scenario},{r.t0!r},{r.duration_s!r}\n")


def _read_manifest(events_dir):
    import csv as _csv
    from pathlib import Path

    from .errors import DataFormatError

    path = Path(events_dir) / "manifest.csv"
    if not path.exists():
        raise DataFormatError(f"missing manifest {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header != ["trial", "scenario", "t0", "duration_s"]:
            raise DataFormatError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            rows.append((row[0], row[1], float(row[2]), float(row[3])))
    return rows


def prepare_position_series(trials: TrialSet, cfg: PipelineConfig) -> dict[str, TimeSeries]:
    """Resampled/trimmed series per trial id, for spatial-grid aggregation."""
    out = {}
    for trial in trials:
        series = _apply_trim(_prepare_trial(trial, cfg), trial.trial_id, trials.metadata)
        out[trial.trial_id] = series
    return out


def build_reports(events_dir, out_dir, cfg: PipelineConfig,
                  positions: dict[str, TimeSeries] | None = None) -> list[str]:
    """Regenerate aggregate products from a run directory's saved files.

    Reads ``manifest.csv``, ``events.csv``, and the per-trial TE traces under
    ``events_dir`` and writes histogram/grid/peak-TE products into
    ``out_dir``.  Because the trace formats round-trip losslessly, running
    this on a fresh run directory reproduces the aggregates byte for byte.
    Returns the names of the files written.
    """
    from pathlib import Path

    from . import storage
    from .te import TeSeries as _TeSeries

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events_dir = Path(events_dir)
    manifest = _read_manifest(events_dir)
    saved_events = storage.read_events_csv(events_dir / "events.csv")
    by_key: dict[tuple[str, str], list] = {}
    for trial_id, ev in saved_events:
        by_key.setdefault((trial_id, ev.direction), []).append(ev)

    written: list[str] = []
    for direction in cfg.io.direction_list:
        if cfg.aggregate.bin_dt is not None:
            hist_in = []
            for trial_id, _, t0, duration in manifest:
                evs = [_rebase(e, t0) for e in by_key.get((trial_id, direction), [])]
                hist_in.append((evs, duration))
            hist = agg.temporal_histogram(hist_in, cfg.aggregate.bin_dt,
                                          direction=direction)
            name = f"histogram_{direction}.csv"
            storage.write_histogram_csv(hist, out / name)
            written.append(name)
        if (cfg.aggregate.cell_size_m is not None
                and cfg.aggregate.position_channels and positions is not None):
            grid_in = []
            for trial_id, _, _, _ in manifest:
                if trial_id not in positions:
                    raise PipelineError(f"no position series for trial {trial_id!r}")
                grid_in.append((by_key.get((trial_id, direction), []),
                                positions[trial_id]))
            grid = agg.spatial_grid(grid_in, cfg.aggregate.cell_size_m,
                                    channels=tuple(cfg.aggregate.position_channels),
                                    direction=direction)
            name = f"grid_{direction}.csv"
            storage.write_grid_csv(grid, out / name)
            written.append(name)

    scenarios = []
    for _, scenario, _, _ in manifest:
        if scenario not in scenarios:
            scenarios.append(scenario)
    if len(scenarios) == 2:
        groups: dict[str, list[dict[str, _TeSeries]]] = {s: [] for s in scenarios}
        for trial_id, scenario, _, _ in manifest:
            series_map = {}
            for direction in cfg.io.direction_list:
                trace = storage.read_te_csv(events_dir / te_csv_name(trial_id, direction),
                                            direction=direction)
                series_map[direction] = _TeSeries(direction=direction, times=trace.times,
                                                  te_raw=trace.te_raw,
                                                  mode=cfg.model.te_mode)
            groups[scenario].append(series_map)
        if min(len(g) for g in groups.values()) >= 2:
            report = agg.peak_te_study(groups[scenarios[0]], groups[scenarios[1]])
            storage.write_report_csv(report, out / "peak_te_report.csv")
            written.append("peak_te_report.csv")
    return written
