"""End-to-end runs: matrix -> distributions -> events -> time tags ->
reconstruction -> validation -> metrics -> resource tables, written into a
self-describing output bundle."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from collections import Counter
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import advantage as adv
from .config import ExperimentConfig
from .distribution import Distribution, distribution_metrics, exact_distribution, uniform_distribution
from .errors import EmptyEstimateError, MissingStageError, StageError
from .events import EventLog, SourceConfig, interarrival_gaps, interval_statistics, simulate_event_log
from .matrix import (CharacterizationTable, assemble_transfer_matrix,
                     haar_random_unitary)
from .reconstruction import counting_estimate, occurrence_census, subspace_metrics, timestamp_estimate
from .seeding import derive_seed
from .tofs import TofsLayout, calibrate_delays, emit_tofs_streams, extract_coincidences, parse_streams
from .validation import LIKELIHOOD_RATIO, ROW_NORM, likelihood_ratio_test, row_norm_test

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "TSBOSON_OUTPUT_ROOT"
FAILED = "FAILED"
SEED_LABELS = ("matrix", "simulate", "tofs", "impostor-uniform", "impostor-distinguishable")
IMPOSTOR = {ROW_NORM: "uniform", LIKELIHOOD_RATIO: "distinguishable"}
FIGURES = ("3b", "3c", "3d", "3e", "4a", "4b", "4c-h", "5")


def output_dir_for(config: ExperimentConfig, out_dir=None):
    if out_dir is not None:
        return Path(out_dir)
    if config.output_dir:
        return Path(config.output_dir)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / config.name


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _metrics_dict(m):
    return {"similarity": m.similarity, "tvd": m.tvd, "fidelity": m.fidelity}


@contextmanager
def _stage(name, out):
    logger.info("stage %s", name)
    try:
        yield
    except Exception as exc:
        (out / FAILED).write_text(f"{name}\n{type(exc).__name__}: {exc}\n")
        raise StageError(name, exc) from exc


def _efficiencies(config, m):
    if config.efficiency is None:
        return None
    if isinstance(config.efficiency, (int, float)):
        return np.full(m, float(config.efficiency))
    return np.asarray(config.efficiency, dtype=float)


def _simulate(dist, config, m, label, stretch=1.0):
    src = SourceConfig(config.rate_hz, _efficiencies(config, m), derive_seed(config.seed, label))
    log = simulate_event_log(dist, src, int(config.duration_ps * stretch))
    log.seed = config.seed
    return log


def _scan_entry(log, n_o, config, exact):
    try:
        rep = timestamp_estimate(log, n_o, config.filter, config.band_factor, config.timestamp_mode)
    except EmptyEstimateError as exc:
        return {"n_o": n_o, "error": str(exc)}
    vs_exact = subspace_metrics(rep, exact)
    truth = exact.restrict(rep.kept_support)
    return {
        "n_o": n_o, "kept": rep.kept, "discarded": rep.discarded,
        "below_threshold": rep.below_threshold, "discarded_fraction": rep.discarded_fraction,
        "events_used": rep.events_used, "vs_exact": _metrics_dict(vs_exact),
        "estimate": [[list(k), rep.estimate.probs[k], truth[k]] for k in rep.estimate.support()],
    }


def run_pipeline(config: ExperimentConfig, out_dir=None):
    """Run every stage and return the bundle directory.

    Rerunning with the same config and seed rewrites identical files. A
    failing stage leaves a ``FAILED`` marker naming it and raises
    ``StageError``.
    """
    out = output_dir_for(config, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / FAILED).unlink(missing_ok=True)
    config.dump(out / "config.yaml")
    written = ["config.yaml"]

    with _stage("matrix", out):
        if config.matrix_source == "haar":
            U = haar_random_unitary(config.m, derive_seed(config.seed, "matrix"))
        else:
            U = assemble_transfer_matrix(CharacterizationTable.from_files(
                config.amplitudes_file, config.phases_file))
        U.save(out / "matrix.json")
        written.append("matrix.json")
    m, n = U.cols, config.n

    with _stage("exact", out):
        exact = exact_distribution(U, config.inputs, "indist")
        exact_dist = exact_distribution(U, config.inputs, "dist")
        exact.write_jsonl(out / "exact_indist.jsonl")
        exact_dist.write_jsonl(out / "exact_dist.jsonl")
        written += ["exact_indist.jsonl", "exact_dist.jsonl"]

    with _stage("simulate", out):
        simulated = _simulate(exact, config, m, "simulate")
        if config.tofs:
            # without the time-tag stage this would duplicate events.jsonl
            simulated.write_jsonl(out / "events_simulated.jsonl")
            written.append("events_simulated.jsonl")

    with _stage("tofs", out):
        if config.tofs:
            layout = TofsLayout(0, dict(config.delays_ps), config.jitter_ps, config.dark_rate_hz)
            run = emit_tofs_streams(simulated, layout, derive_seed(config.seed, "tofs"))
            manifest = run.write(out / "tofs")
            written += [f"tofs/{p.name}" for p in sorted((out / "tofs").iterdir())]
            parsed = parse_streams(manifest)
            if config.calibrate:
                cal = calibrate_delays(parsed, parsed.trigger_channel,
                                       config.scan_range_ps, config.scan_step_ps)
                _dump(out / "calibration.json",
                      {"delays_ps": {str(k): v for k, v in cal.delays.items()},
                       "failed": cal.failed, "step_ps": config.scan_step_ps})
                written.append("calibration.json")
                if config.calibration_fallback == "declared" and cal.failed:
                    # too few counts to locate a peak; trust the manifest for those channels
                    logger.warning("calibration failed for %s; using declared delays", cal.failed)
                    delays = {**parsed.declared_delays, **cal.delays}
                else:
                    delays = cal.require()
            else:
                delays = parsed.declared_delays
            log = extract_coincidences(parsed, parsed.trigger_channel, delays, config.window_ps,
                                       n, config.window_anchor, m, simulated.duration_ps)
            log.seed, log.rate_hz = config.seed, config.rate_hz
        else:
            log = simulated
        log.write_jsonl(out / "events.jsonl")
        written.append("events.jsonl")

    with _stage("reconstruct", out):
        counting = counting_estimate(log)
        counting.write_jsonl(out / "counting.jsonl")
        report = timestamp_estimate(log, config.n_o, config.filter, config.band_factor,
                                    config.timestamp_mode)
        report.estimate.write_jsonl(out / "timestamp.jsonl")
        summary = report.to_json()
        summary.pop("estimate_jsonl")
        _dump(out / "timestamp.json", summary)
        _dump(out / "reconstruction_scan.json",
              [_scan_entry(log, k, config, exact) for k in config.n_o_scan])
        written += ["counting.jsonl", "timestamp.jsonl", "timestamp.json", "reconstruction_scan.json"]

    with _stage("validate", out):
        impostors = {"uniform": uniform_distribution(m, n), "distinguishable": exact_dist}
        results = {}
        for test in config.validation:
            against = IMPOSTOR[test]
            # a longer run, cut to the data's length, so both traces cover the same event count
            fake = _simulate(impostors[against], config, m, f"impostor-{against}", 1.5).head(len(log))
            fn = row_norm_test if test == ROW_NORM else likelihood_ratio_test
            for tag, sample in (("data", log), (against, fake)):
                trace = fn(sample, U, config.inputs)
                name = f"validation_{test}_{tag}.tsv"
                trace.write(out / name)
                written.append(name)
                results[f"{test}/{tag}"] = {"events": trace.events, "final": trace.final,
                                            "skipped": trace.skipped,
                                            "infinite_ratios": trace.infinite_ratios}
        _dump(out / "validation.json", results)
        written.append("validation.json")

    with _stage("metrics", out):
        stats = interval_statistics(log, config.bins)
        metrics = {
            "events": len(log), "simulated_events": len(simulated),
            "interval": {"bins": config.bins, "mean": stats.mean, "variance": stats.variance},
            "census": {str(k): v for k, v in occurrence_census(log).items()},
            "counting_vs_exact": _metrics_dict(distribution_metrics(counting, exact)),
            "timestamp_vs_counting": _metrics_dict(
                distribution_metrics(report.estimate, counting.restrict(report.kept_support))),
            "timestamp_vs_exact": _metrics_dict(subspace_metrics(report, exact)),
            "n_o": config.n_o, "events_used": report.events_used,
            "events_used_fraction": report.events_used / len(log),
            "discarded_fraction": report.discarded_fraction,
        }
        _dump(out / "metrics.json", metrics)
        written.append("metrics.json")

    with _stage("advantage", out):
        n_lo, n_hi = config.advantage_n
        n_range = range(n_lo, n_hi + 1)
        rows = adv.advantage_table(n_range, config.advantage_eta, config.pump_rate_hz, config.speedup)
        adv.write_table(rows, out / "advantage.tsv")
        curve = adv.efficiency_curve(n_range, pump_rate=config.pump_rate_hz, speedup=config.speedup)
        with open(out / "efficiency.tsv", "w") as fh:
            fh.write("n\tm\teta_standard\teta_timestamp\tsteps\tadvantage_flag\n")
            for p in curve:
                fh.write(f"{p.n}\t{p.m}\t{p.eta_standard!r}\t{p.eta_timestamp!r}\t{p.steps}\t{int(p.advantage)}\n")
        crossing = adv.advantage_crossing(curve)
        eq = adv.equivalent_photon_number(adv.BENCHMARK_N, adv.BENCHMARK_ETA,
                                          config.pump_rate_hz, config.speedup)
        _dump(out / "advantage.json", {
            "advantage_steps": adv.ADVANTAGE_STEPS,
            "crossing": None if crossing is None else {
                "n": crossing.n, "eta_standard": crossing.eta_standard,
                "eta_timestamp": crossing.eta_timestamp},
            "equivalent_photons": {"n": eq.n, "n_prime": eq.n_prime, "step_gain": eq.step_gain,
                                   "n_prime_continuous": eq.n_prime_continuous,
                                   "step_gain_continuous": eq.step_gain_continuous},
        })
        written += ["advantage.tsv", "efficiency.tsv", "advantage.json"]

    seeds = {label: int(derive_seed(config.seed, label).generate_state(1)[0]) for label in SEED_LABELS}
    _dump(out / "manifest.json", {
        "config_hash": config.digest(), "root_seed": config.seed, "seeds": seeds,
        "files": {name: _sha256(out / name) for name in sorted(written)},
    })
    return out


# ---------------------------------------------------------------- figure data

def _need(bundle, *names):
    for name in names:
        if not (bundle / name).exists():
            raise MissingStageError(f"{bundle}: missing {name}; run the pipeline first")
    return [bundle / name for name in names]


def _write_rows(path, header, rows, footer=()):
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")
        for line in footer:
            fh.write(f"# {line}\n")
    return path


def _modes_str(k):
    return "-".join(map(str, k))


def _fig_3b(bundle, cfg, dest):
    (path,) = _need(bundle, "events.jsonl")
    stats = interval_statistics(EventLog.read_jsonl(path), cfg.bins)
    return _write_rows(dest, ("bin", "count"), enumerate(stats.counts.tolist()),
                       [f"mean={stats.mean!r}", f"variance={stats.variance!r}"])


def _fig_3c(bundle, cfg, dest):
    ts, cnt = _need(bundle, "timestamp.jsonl", "counting.jsonl")
    p = Distribution.read_jsonl(ts)
    c = Distribution.read_jsonl(cnt).restrict(p.support())
    met = distribution_metrics(p, c)
    rows = [(i, _modes_str(k), repr(p[k]), repr(c[k])) for i, k in enumerate(p.support())]
    return _write_rows(dest, ("index", "modes", "p_timestamp", "c_counting"), rows,
                       [f"similarity={met.similarity!r}", f"tvd={met.tvd!r}"])


def _fig_trace(test, against):
    def emit(bundle, cfg, dest):
        a, b = _need(bundle, f"validation_{test}_data.tsv", f"validation_{test}_{against}.tsv")
        data = np.loadtxt(a, comments="#", skiprows=2, dtype=np.int64, ndmin=2)
        fake = np.loadtxt(b, comments="#", skiprows=2, dtype=np.int64, ndmin=2)
        k = min(len(data), len(fake))
        rows = [(int(data[i, 0]), int(data[i, 1]), int(fake[i, 1])) for i in range(k)]
        return _write_rows(dest, ("event", "data", against), rows, [f"test={test}"])
    return emit


def _fig_4a(bundle, cfg, dest):
    (path,) = _need(bundle, "events.jsonl")
    log = EventLog.read_jsonl(path)
    if cfg.fixed_outcome is not None:
        outcome = tuple(sorted(cfg.fixed_outcome))
    else:
        outcome = Counter(log.combinations()).most_common(1)[0][0]
    rows = []
    footer = [f"outcome={_modes_str(outcome)}"]
    for series, gaps in (("all", interarrival_gaps(log)), ("outcome", interarrival_gaps(log, outcome))):
        if len(gaps) == 0:
            continue
        counts, edges = np.histogram(gaps, bins=50)
        mean = gaps.mean()
        # exponential expectation for the same number of gaps
        expected = len(gaps) * (np.exp(-edges[:-1] / mean) - np.exp(-edges[1:] / mean))
        rows += [(series, repr(float(lo)), repr(float(hi)), int(c), repr(float(e)))
                 for lo, hi, c, e in zip(edges[:-1], edges[1:], counts, expected)]
        footer.append(f"{series}_mean_gap_ps={mean!r}")
    return _write_rows(dest, ("series", "bin_lo_ps", "bin_hi_ps", "count", "expected"), rows, footer)


def _fig_4b(bundle, cfg, dest):
    scan_path, met_path = _need(bundle, "reconstruction_scan.json", "metrics.json")
    scan = json.loads(scan_path.read_text())
    census = json.loads(met_path.read_text())["census"]
    rows = [(e["n_o"], e["kept"], e["discarded"], e["below_threshold"], repr(e["discarded_fraction"]))
            for e in scan if "error" not in e]
    footer = [f"census {k}:{census[k]}" for k in sorted(census, key=int)]
    return _write_rows(dest, ("n_o", "kept", "discarded", "below_threshold", "discarded_fraction"),
                       rows, footer)


def _fig_4ch(bundle, cfg, dest):
    (scan_path,) = _need(bundle, "reconstruction_scan.json")
    rows, footer = [], []
    for e in json.loads(scan_path.read_text()):
        if "error" in e:
            footer.append(f"n_o={e['n_o']} error={e['error']}")
            continue
        rows += [(e["n_o"], _modes_str(k), repr(p), repr(t)) for k, p, t in e["estimate"]]
        footer.append(f"n_o={e['n_o']} fidelity={e['vs_exact']['fidelity']!r} tvd={e['vs_exact']['tvd']!r}")
    return _write_rows(dest, ("n_o", "modes", "p_timestamp", "p_exact"), rows, footer)


def _fig_5(bundle, cfg, dest):
    curve, summary = _need(bundle, "efficiency.tsv", "advantage.json")
    info = json.loads(summary.read_text())
    lines = curve.read_text().splitlines()
    rows = [line.split("\t") for line in lines[1:]]
    footer = [f"advantage_steps={info['advantage_steps']}"]
    if info["crossing"]:
        c = info["crossing"]
        footer.append(f"crossing n={c['n']} eta_standard={c['eta_standard']!r} "
                      f"eta_timestamp={c['eta_timestamp']!r}")
    eq = info["equivalent_photons"]
    footer.append(f"n={eq['n']} n_prime={eq['n_prime']} step_gain={eq['step_gain']!r} "
                  f"n_prime_continuous={eq['n_prime_continuous']!r} "
                  f"step_gain_continuous={eq['step_gain_continuous']!r}")
    return _write_rows(dest, tuple(lines[0].split("\t")), rows, footer)


_FIGURE_WRITERS = {
    "3b": _fig_3b, "3c": _fig_3c,
    "3d": _fig_trace(ROW_NORM, "uniform"), "3e": _fig_trace(LIKELIHOOD_RATIO, "distinguishable"),
    "4a": _fig_4a, "4b": _fig_4b, "4c-h": _fig_4ch, "5": _fig_5,
}


def emit_figure_data(bundle, fig_id):
    """Write ``figures/fig<id>.tsv`` from an existing bundle and return its path."""
    if fig_id not in _FIGURE_WRITERS:
        raise ValueError(f"unknown figure {fig_id!r}; choose from {list(FIGURES)}")
    bundle = Path(bundle)
    (cfg_path,) = _need(bundle, "config.yaml")
    cfg = ExperimentConfig.load(cfg_path)
    dest = bundle / "figures"
    dest.mkdir(exist_ok=True)
    path = _FIGURE_WRITERS[fig_id](bundle, cfg, dest / f"fig{fig_id}.tsv")
    manifest = bundle / "manifest.json"
    if manifest.exists():
        info = json.loads(manifest.read_text())
        info["files"][f"figures/{path.name}"] = _sha256(path)
        info["files"] = dict(sorted(info["files"].items()))
        _dump(manifest, info)
    return path
