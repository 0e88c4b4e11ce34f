"""Estimating the output distribution from an event log.

Two estimators are provided: plain occurrence counting, and the timestamp
estimator, which weights each combination by the inverse of its (averaged)
registration time, ``p_i = tau_i^-1 / sum_j tau_j^-1``. The timestamp
estimate only needs the first ``n_o`` occurrences of each combination.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .distribution import Distribution, distribution_metrics
from .errors import EmptyEstimateError, EmptyLogError
from .events import EventLog

logger = logging.getLogger(__name__)

TIMESTAMP_MODES = ("mean-interval", "mean-absolute", "nth-arrival")


@dataclass(eq=False)
class OccurrenceRecord:
    combination: tuple
    timestamps: np.ndarray

    @property
    def count(self):
        return len(self.timestamps)

    def tau_bar(self, n_o=1, mode="mean-interval"):
        return float(_tau_bar(self.timestamps[None, :n_o], n_o, mode)[0])


def _tau_bar(first, n_o, mode):
    """Averaged registration time from an ``(K, n_o)`` array of first arrivals.

    ``mean-interval`` is the mean gap over the first ``n_o`` occurrences
    counted from the start of the run (``t_{n_o} / n_o``); it reduces to the
    raw first timestamp for ``n_o = 1`` and stays on the ``1/rate`` scale, so
    ``T / tau_bar`` is comparable with the actual count.
    """
    first = np.asarray(first, dtype=float)
    if mode == "mean-interval":
        return first[:, n_o - 1] / n_o
    if mode == "mean-absolute":
        return first[:, :n_o].mean(axis=1)
    if mode == "nth-arrival":
        return first[:, n_o - 1]
    raise ValueError(f"unknown timestamp mode {mode!r}")


def _tau_bar_all(g, mode):
    last = g.taus[g.starts + g.counts - 1].astype(float)
    if mode == "mean-interval":
        return last / g.counts
    if mode == "mean-absolute":
        return np.add.reduceat(g.taus.astype(float), g.starts) / g.counts
    return last


@dataclass(eq=False)
class _Groups:
    modes: np.ndarray      # (K, n) observed combinations in colex order
    counts: np.ndarray     # (K,)
    starts: np.ndarray     # (K,) offsets into taus
    taus: np.ndarray       # event times grouped by combination, time-ordered within a group


def _group(log: EventLog):
    ranks = log.ranks()
    order = np.argsort(ranks, kind="stable")
    _, starts, counts = np.unique(ranks[order], return_index=True, return_counts=True)
    return _Groups(log.modes[order][starts], counts, starts, log.taus[order])


def occurrence_records(log: EventLog):
    """One record per observed combination, in colex order."""
    g = _group(log)
    return [OccurrenceRecord(tuple(int(c) for c in row), g.taus[s:s + k])
            for row, s, k in zip(g.modes, g.starts, g.counts)]


def occurrence_census(log: EventLog):
    """Map occurrence count -> number of combinations seen that many times."""
    if not len(log):
        return {}
    counts = _group(log).counts
    return dict(sorted(Counter(counts.tolist()).items()))


def counting_estimate(log: EventLog) -> Distribution:
    """c_i = N_i / N over the observed combinations."""
    if not len(log):
        raise EmptyLogError("cannot estimate from an empty log")
    g = _group(log)
    return Distribution.from_weights(log.m, log.n, g.modes, g.counts, "counting",
                                     {"events": int(len(log))})


def reshape_mask(tau_bar, n_a, duration, band_factor=2.0):
    """Keep iff ``n_a / band < T / tau_bar < band * n_a`` (strict)."""
    n_tau = duration / np.asarray(tau_bar, dtype=float)
    n_a = np.asarray(n_a, dtype=float)
    return (n_a / band_factor < n_tau) & (n_tau < band_factor * n_a)


def reshape_filter(records, duration, n_o=1, band_factor=2.0, mode="mean-interval"):
    """Split records into (kept, singular) by comparing the timestamp-implied
    occurrence number ``T / tau_bar`` with the actual count."""
    records = [r for r in records if r.count >= n_o]
    if not records:
        return [], []
    tau = np.array([r.tau_bar(n_o, mode) for r in records])
    mask = reshape_mask(tau, [r.count for r in records], duration, band_factor)
    kept = [r for r, k in zip(records, mask) if k]
    singular = [r for r, k in zip(records, mask) if not k]
    return kept, singular


@dataclass(eq=False)
class ReconstructionReport:
    estimate: Distribution
    kept: int
    discarded: int
    below_threshold: int
    n_o: int
    duration_ps: int
    events_used: int
    filtered: bool = True
    band_factor: float = 2.0
    timestamp_mode: str = "mean-interval"
    discarded_combinations: list = field(default_factory=list)

    @property
    def discarded_fraction(self):
        total = self.kept + self.discarded
        return self.discarded / total if total else 0.0

    @property
    def kept_support(self):
        return list(self.estimate.probs)

    @property
    def high_variance(self):
        # the inverse of a single exponential arrival time has no finite mean
        return self.n_o == 1

    def to_json(self):
        lines = [json.dumps({"modes": list(k), "probability": self.estimate.probs[k]})
                 for k in self.estimate.support()]
        return {
            "m": self.estimate.m, "n": self.estimate.n,
            "n_o": self.n_o, "kept": self.kept, "discarded": self.discarded,
            "below_threshold": self.below_threshold, "T_ps": self.duration_ps,
            "events_used": self.events_used, "filter": self.filtered,
            "band_factor": self.band_factor, "timestamp_mode": self.timestamp_mode,
            "discarded_fraction": self.discarded_fraction,
            "high_variance": self.high_variance,
            "discarded_combinations": [list(c) for c in self.discarded_combinations],
            "estimate_jsonl": "\n".join(lines),
        }


def timestamp_estimate(log: EventLog, n_o=5, filter=True, band_factor=2.0,
                       mode="mean-interval") -> ReconstructionReport:
    """Timestamp reconstruction from the first ``n_o`` occurrences of each combination.

    Combinations seen fewer than ``n_o`` times are left out; ``n_o=None``
    averages over every occurrence. With ``filter``
    on, combinations whose ``T / tau_bar`` falls outside
    ``(N_a / band, band * N_a)`` are discarded as singular. Weights
    ``1 / tau_bar`` are normalized over what remains; unobserved combinations
    get probability zero.
    """
    if n_o is not None and n_o < 1:
        raise ValueError("n_o must be >= 1")
    if mode not in TIMESTAMP_MODES:
        raise ValueError(f"unknown timestamp mode {mode!r}")
    if not len(log):
        raise EmptyEstimateError("empty log")
    g = _group(log)
    if n_o is None:
        # every occurrence of every observed combination
        ok = np.ones(len(g.counts), dtype=bool)
        tau = _tau_bar_all(g, mode)
        used = len(log)
    else:
        ok = g.counts >= n_o
        if not ok.any():
            raise EmptyEstimateError(f"no combination occurs {n_o} times")
        starts = g.starts[ok]
        first = g.taus[starts[:, None] + np.arange(n_o)[None, :]]
        tau = _tau_bar(first, n_o, mode)
        used = int(n_o * ok.sum())
    if filter:
        keep = reshape_mask(tau, g.counts[ok], log.duration_ps, band_factor)
    else:
        keep = np.ones(len(tau), dtype=bool)
    if not keep.any():
        raise EmptyEstimateError("every combination was discarded by the reshape filter")
    modes = g.modes[ok]
    est = Distribution.from_weights(log.m, log.n, modes[keep], 1.0 / tau[keep], "timestamp",
                                    {"n_o": n_o})
    if n_o == 1:
        logger.debug("n_o = 1 timestamp estimates are heavy-tailed; prefer ensemble medians")
    return ReconstructionReport(
        estimate=est,
        kept=int(keep.sum()),
        discarded=int((~keep).sum()),
        below_threshold=int((~ok).sum()),
        n_o=n_o,
        duration_ps=log.duration_ps,
        events_used=used,
        filtered=filter,
        band_factor=band_factor,
        timestamp_mode=mode,
        discarded_combinations=[tuple(int(c) for c in row) for row in modes[~keep]],
    )


def subspace_metrics(report: ReconstructionReport, reference: Distribution):
    """Compare a timestamp estimate with ``reference`` renormalized onto the kept subspace."""
    return distribution_metrics(report.estimate, reference.restrict(report.kept_support))
