"""Command-line interface.

Subcommands::

    run      --config C --trials DIR --out DIR   analyze trials end to end
    synth    --config C --out DIR                generate trials + ground truth
    oracle   --config C                          closed-form TE of the [synth] var1 process
    validate --config C                          static config diagnostics
    report   --events DIR --out DIR --config C   regenerate aggregates from saved outputs

Exit codes: 0 success, 1 usage error, 2 data/config error.  Diagnostics and
progress go to stderr (``--verbose`` raises verbosity); results to stdout.
Every ``--set section.key=value`` overrides one config key.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline, storage, synth
from .config import load_config
from .errors import ConfigError, CueflowError
from .synth import CueScenario, Var1Spec, X_TO_Y, Y_TO_X
from .timeseries import TimeSeries, Trial, TrialSet

logger = logging.getLogger("cueflow.cli")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; this CLI reserves 2 for data
    # errors, so usage failures are rerouted through _UsageError -> exit 1.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cueflow",
                     description="Directed-information cue detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="pipeline config file (INI sections)")
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override one config key (repeatable)")
        p.add_argument("--verbose", action="store_true",
                       help="debug-level logging on stderr")

    p_run = sub.add_parser("run", help="analyze a directory of trial CSVs")
    common(p_run)
    p_run.add_argument("--trials", required=True, help="directory of trial CSVs")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker threads for per-trial evaluation")
    p_run.set_defaults(func=_cmd_run)

    p_synth = sub.add_parser("synth", help="generate synthetic trials")
    common(p_synth)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(func=_cmd_synth)

    p_oracle = sub.add_parser("oracle", help="closed-form TE for the [synth] var1 process")
    common(p_oracle)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_val = sub.add_parser("validate", help="check a config for consistency")
    common(p_val)
    p_val.set_defaults(func=_cmd_validate)

    p_rep = sub.add_parser("report", help="rebuild aggregates from saved outputs")
    common(p_rep)
    p_rep.add_argument("--events", required=True,
                       help="directory produced by a previous run")
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--trials", default=None,
                       help="original trial directory (enables spatial grids)")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def _cmd_run(args) -> int:
    cfg, _ = load_config(args.config, args.set)
    trials = storage.load_trial_dir(args.trials)
    result = pipeline.run(trials, cfg, jobs=max(1, args.jobs))
    out = Path(args.out)
    pipeline.write_run_dir(result, cfg, out)
    positions = None
    if cfg.aggregate.cell_size_m is not None and cfg.aggregate.position_channels:
        positions = pipeline.prepare_position_series(trials, cfg)
    pipeline.build_reports(out, out, cfg, positions)
    n_events = sum(len(tr.events) for r in result.trials for tr in r.traces.values())
    print(f"analyzed {len(result.trials)} trials; {n_events} cue events -> {out}")
    return 0


def _scenario_trials(settings) -> tuple[TrialSet, list[tuple[str, float, float]]]:
    trials = []
    truths = []
    for i in range(settings.n_trials):
        scen = CueScenario(
            duration_s=settings.duration_s,
            cue_times=settings.cue_times,
            response_delay_s=settings.response_delay_s,
            amplitude=settings.amplitude,
            noise_sigma=settings.noise_sigma,
            seed=settings.seed + i,
            rate_hz=settings.rate_hz,
        )
        leader, follower, truth = synth.gen_cue_scenario(scen)
        dt = leader.dt
        # Integrated follower position, so spatial aggregation has coordinates.
        pos = np.cumsum(follower.data, axis=0) * dt
        data = np.hstack([leader.data, follower.data, pos])
        series = TimeSeries(
            channels=(*leader.channels, *follower.channels,
                      "follower_px", "follower_py"),
            data=data, dt=dt)
        trial_id = f"t{i:03d}"
        trials.append(Trial(trial_id=trial_id, scenario="cue_scenario", series=series))
        truths.extend((trial_id, s, e) for s, e in truth)
    return TrialSet(trials=tuple(trials)), truths


def _var1_trials(settings) -> TrialSet:
    trials = []
    a = np.asarray(settings.a).reshape(2, 2)
    q = np.asarray(settings.q).reshape(2, 2)
    for i in range(settings.n_trials):
        spec = Var1Spec(a=a, q=q, n=settings.n, seed=settings.seed + i, dt=settings.dt)
        x, y = synth.gen_var1(spec)
        series = TimeSeries(channels=("x", "y"),
                            data=np.hstack([x.data, y.data]), dt=settings.dt)
        trials.append(Trial(trial_id=f"t{i:03d}", scenario="var1", series=series))
    return TrialSet(trials=tuple(trials))


def _cmd_synth(args) -> int:
    _, settings = load_config(args.config, args.set)
    if settings is None:
        raise ConfigError("config has no [synth] section")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if settings.kind == "cue_scenario":
        trials, truths = _scenario_trials(settings)
        with open(out / "truth.csv", "w") as fh:
            fh.write("trial,start_t,end_t\n")
            for trial_id, s, e in truths:
                fh.write(f"{trial_id},{s!r},{e!r}\n")
    else:
        trials = _var1_trials(settings)
    storage.write_trial_dir(trials, out)
    print(f"wrote {len(trials)} trials -> {out}")
    return 0


def _cmd_oracle(args) -> int:
    _, settings = load_config(args.config, args.set)
    if settings is None:
        raise ConfigError("config has no [synth] section")
    if settings.kind != "var1":
        raise ConfigError(f"oracle requires [synth] kind=var1, got {settings.kind!r}")
    spec = Var1Spec(a=np.asarray(settings.a).reshape(2, 2),
                    q=np.asarray(settings.q).reshape(2, 2),
                    n=max(settings.n, 2), seed=settings.seed, dt=settings.dt)
    for direction in (Y_TO_X, X_TO_Y):
        te = synth.te_oracle_var1(spec, direction)
        print(f"te[{direction}] = {te!r} nats")
    return 0


def _cmd_validate(args) -> int:
    cfg, _ = load_config(args.config, args.set)
    diags = pipeline.validate_config(cfg)
    for d in diags:
        print(f"{d.severity.upper()}: {d.message}")
    n_errors = sum(1 for d in diags if d.severity == "error")
    print(f"{'INVALID' if n_errors else 'OK'}: {n_errors} error(s), "
          f"{sum(1 for d in diags if d.severity == 'warning')} warning(s)")
    return 2 if n_errors else 0


def _cmd_report(args) -> int:
    cfg, _ = load_config(args.config, args.set)
    positions = None
    if args.trials is not None:
        trials = storage.load_trial_dir(args.trials)
        positions = pipeline.prepare_position_series(trials, cfg)
    written = pipeline.build_reports(args.events, args.out, cfg, positions)
    print(f"wrote {len(written)} aggregate file(s) -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        return args.func(args)
    except CueflowError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
