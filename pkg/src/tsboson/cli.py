"""Command-line front end: ``tsboson <subcommand> ...``.

Exit codes: 0 on success, 2 for configuration or usage errors, 3 when a
stage fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import advantage as adv
from .config import PRESETS, ExperimentConfig, preset
from .distribution import Distribution, exact_distribution
from .errors import ConfigError, TsBosonError
from .events import EventLog, SourceConfig, duration_for_events, simulate_event_log
from .matrix import CharacterizationTable, TransferMatrix, assemble_transfer_matrix, haar_random_unitary
from .pipeline import FIGURES, emit_figure_data, output_dir_for, run_pipeline
from .reconstruction import counting_estimate, timestamp_estimate
from .tofs import (DEFAULT_WINDOW_PS, TofsLayout, calibrate_delays, emit_tofs_streams,
                   extract_coincidences, parse_streams)
from .validation import likelihood_ratio_test, row_norm_test

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3


def _int_list(text):
    return [int(t) for t in text.replace(",", " ").split()]


def _seed_list(text):
    """``"1,2,5"`` or ranges such as ``"0-19"`` (inclusive)."""
    seeds = []
    for t in text.replace(",", " ").split():
        lo, sep, hi = t.partition("-")
        seeds.extend(range(int(lo), int(hi) + 1) if sep else [int(t)])
    return seeds


def _float_list(text):
    return [float(t) for t in text.replace(",", " ").split()]


def _delay_map(text):
    # "1:100,2:250" -> {1: 100, 2: 250}
    out = {}
    for item in filter(None, text.split(",")):
        ch, _, d = item.partition(":")
        out[int(ch)] = int(d)
    return out


def cmd_gen_matrix(args):
    if args.amplitudes or args.phases:
        if not (args.amplitudes and args.phases):
            raise ConfigError("--amplitudes and --phases go together")
        U = assemble_transfer_matrix(CharacterizationTable.from_files(args.amplitudes, args.phases))
    else:
        if args.m is None:
            raise ConfigError("give --m for a Haar matrix or --amplitudes/--phases")
        U = haar_random_unitary(args.m, args.seed)
    U.save(args.out)
    print(f"{U.kind} {U.rows}x{U.cols} -> {args.out}")


def cmd_exact_dist(args):
    U = TransferMatrix.load(args.matrix)
    dist = exact_distribution(U, _int_list(args.inputs), args.model)
    dist.write_jsonl(args.out)
    print(f"{len(dist)} outcomes -> {args.out}")


def cmd_simulate(args):
    dist = Distribution.read_jsonl(args.dist)
    if args.events is not None:
        duration = duration_for_events(args.events, args.rate)
    elif args.duration_s is not None:
        duration = int(round(args.duration_s * 1e12))
    else:
        raise ConfigError("give --duration-s or --events")
    eff = None
    if args.efficiency is not None:
        eff = np.full(dist.m, args.efficiency)
    log = simulate_event_log(dist, SourceConfig(args.rate, eff, args.seed), duration)
    log.write_jsonl(args.out)
    print(f"{len(log)} events -> {args.out}")


def cmd_emit_tofs(args):
    log = EventLog.read_jsonl(args.events)
    layout = TofsLayout(args.trigger_channel, _delay_map(args.delays), args.jitter_ps,
                        args.dark_rate_hz)
    path = emit_tofs_streams(log, layout, args.seed).write(args.out_dir)
    print(f"streams -> {path}")


def cmd_ingest(args):
    run = parse_streams(args.manifest)
    trigger = run.trigger_channel if args.trigger_channel is None else args.trigger_channel
    if args.no_calibrate:
        delays = run.declared_delays
    else:
        cal = calibrate_delays(run, trigger, args.scan_range_ps, args.scan_step_ps)
        delays = cal.require()
        print("calibrated delays: " + json.dumps({str(k): v for k, v in delays.items()}))
    log = extract_coincidences(run, trigger, delays, args.window_ps, args.fold, args.anchor)
    log.write_jsonl(args.out)
    print(f"{len(log)} {args.fold}-fold events -> {args.out}")


def cmd_reconstruct(args):
    log = EventLog.read_jsonl(args.events)
    if args.counting_out:
        counting_estimate(log).write_jsonl(args.counting_out)
    report = timestamp_estimate(log, args.n_o, args.filter == "on", args.band_factor, args.mode)
    summary = report.to_json()
    Path(args.out).write_text(json.dumps(summary, indent=1) + "\n")
    print(f"kept {report.kept}, discarded {report.discarded} "
          f"({report.discarded_fraction:.2%}), events used {report.events_used} -> {args.out}")


def cmd_validate(args):
    log = EventLog.read_jsonl(args.events)
    U = TransferMatrix.load(args.matrix)
    fn = row_norm_test if args.test == "row-norm" else likelihood_ratio_test
    trace = fn(log, U, _int_list(args.inputs))
    trace.write(args.out)
    print(f"{args.test}: {trace.events} events, final {trace.final:+d} -> {args.out}")


def cmd_advantage(args):
    n_range = range(args.n_min, args.n_max + 1)
    rows = adv.advantage_table(n_range, _float_list(args.eta_grid), args.pump_rate, args.speedup)
    adv.write_table(rows, args.out)
    eq = adv.equivalent_photon_number(adv.BENCHMARK_N, adv.BENCHMARK_ETA, args.pump_rate, args.speedup)
    print(f"{len(rows)} rows -> {args.out}")
    print(f"n={eq.n} -> n'={eq.n_prime} (gain {eq.step_gain:.1f}); "
          f"continuous n'={eq.n_prime_continuous:.3f} (gain {eq.step_gain_continuous:.1f})")


def _campaign_member(payload):
    cfg_dict, out = payload
    return str(run_pipeline(ExperimentConfig.from_dict(cfg_dict), out))


def cmd_run(args):
    if args.config:
        config = ExperimentConfig.load(args.config)
    elif args.preset:
        config = preset(args.preset)
    else:
        raise ConfigError("give --config or --preset")
    if args.seed is not None:
        config.seed = args.seed
    base = output_dir_for(config, args.out_dir)
    if args.seeds:
        seeds = _seed_list(args.seeds)
        jobs = []
        for s in seeds:
            d = config.to_dict()
            d["seed"] = s
            jobs.append((d, str(base / f"seed_{s:04d}")))
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for path in pool.map(_campaign_member, jobs):
                print(path)
        return
    print(run_pipeline(config, base))


def cmd_figure(args):
    ids = FIGURES if args.id == "all" else [args.id]
    for fig in ids:
        print(emit_figure_data(args.bundle, fig))


def cmd_preset(args):
    sys.stdout.write(preset(args.name).dump())


def build_parser():
    p = argparse.ArgumentParser(prog="tsboson", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-matrix", help="Haar unitary or matrix from characterization tables")
    s.add_argument("--m", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--amplitudes")
    s.add_argument("--phases")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_matrix)

    s = sub.add_parser("exact-dist", help="exact collision-free output distribution")
    s.add_argument("--matrix", required=True)
    s.add_argument("--inputs", required=True, help="comma-separated input modes")
    s.add_argument("--model", choices=("indist", "dist"), default="indist")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_exact_dist)

    s = sub.add_parser("simulate", help="Poisson event log from a distribution")
    s.add_argument("--dist", required=True)
    s.add_argument("--rate", type=float, required=True, help="events per second")
    s.add_argument("--duration-s", type=float)
    s.add_argument("--events", type=float, help="expected event count (sets the duration)")
    s.add_argument("--efficiency", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("emit-tofs", help="raw per-channel time tags from an event log")
    s.add_argument("--events", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--trigger-channel", type=int, default=0)
    s.add_argument("--delays", default="", help="channel:delay_ps pairs, e.g. 1:100,2:250")
    s.add_argument("--jitter-ps", type=float, default=0.0)
    s.add_argument("--dark-rate-hz", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_emit_tofs)

    s = sub.add_parser("ingest", help="calibrate delays and extract n-fold coincidences")
    s.add_argument("--manifest", required=True, help="manifest.json or its directory")
    s.add_argument("--trigger-channel", type=int)
    s.add_argument("--window-ps", type=int, default=DEFAULT_WINDOW_PS)
    s.add_argument("--anchor", choices=("trigger", "centered"), default="trigger")
    s.add_argument("--fold", type=int, required=True)
    s.add_argument("--scan-range-ps", type=int, default=1000)
    s.add_argument("--scan-step-ps", type=int, default=50)
    s.add_argument("--no-calibrate", action="store_true", help="use the manifest's declared delays")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("reconstruct", help="timestamp estimate from an event log")
    s.add_argument("--events", required=True)
    s.add_argument("--n-o", type=int, default=5)
    s.add_argument("--filter", choices=("on", "off"), default="on")
    s.add_argument("--band-factor", type=float, default=2.0)
    s.add_argument("--mode", choices=("mean-interval", "mean-absolute", "nth-arrival"),
                   default="mean-interval")
    s.add_argument("--counting-out")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("validate", help="row-norm or likelihood-ratio drift trace")
    s.add_argument("--events", required=True)
    s.add_argument("--matrix", required=True)
    s.add_argument("--inputs", required=True)
    s.add_argument("--test", choices=("row-norm", "likelihood-ratio"), required=True)
    s.add_argument("--against", choices=("uniform", "distinguishable"),
                   help="the alternative the test is meant to reject (informational)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("advantage", help="sampling-rate / step-count table")
    s.add_argument("--n-min", type=int, default=15)
    s.add_argument("--n-max", type=int, default=30)
    s.add_argument("--eta-grid", default="0.5,0.6,0.7,0.8,0.9,1.0")
    s.add_argument("--pump-rate", type=float, default=adv.DEFAULT_PUMP_RATE)
    s.add_argument("--speedup", type=float, default=100.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_advantage)

    s = sub.add_parser("run", help="full pipeline from a config file or preset")
    s.add_argument("--config")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", help="seeds for a campaign (e.g. 1,2,5 or 0-19); one sub-directory per seed")
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("figure", help="plot-ready data from a run bundle")
    s.add_argument("--bundle", required=True)
    s.add_argument("--id", required=True, choices=list(FIGURES) + ["all"])
    s.set_defaults(func=cmd_figure)

    s = sub.add_parser("preset", help="print a preset config as YAML")
    s.add_argument("name", choices=sorted(PRESETS))
    s.set_defaults(func=cmd_preset)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TsBosonError, OSError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
