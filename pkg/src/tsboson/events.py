"""Timestamped sampling events: the marked Poisson process a boson sampler
produces, and the statistics computed on it.

Time is kept in integer picoseconds from the start of the run.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distribution import Distribution, rank_array
from .errors import DegenerateDistributionError, InvalidDimensionError
from .seeding import make_rng

PS_PER_S = 10 ** 12


@dataclass(eq=False)
class EventLog:
    """Time-ordered post-coincidence samples ``(tau_ps, modes)``."""

    m: int
    n: int
    duration_ps: int
    taus: np.ndarray
    modes: np.ndarray
    seed: int | None = None
    rate_hz: float | None = None

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=np.int64).reshape(-1)
        self.modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, self.n)
        self.duration_ps = int(self.duration_ps)
        if len(self.taus) != len(self.modes):
            raise InvalidDimensionError("taus and modes differ in length")
        if self.duration_ps <= 0:
            raise ValueError("duration must be positive")
        if len(self.taus):
            if np.any(np.diff(self.taus) <= 0):
                raise ValueError("event timestamps must be strictly increasing")
            if self.taus[0] <= 0 or self.taus[-1] > self.duration_ps:
                raise ValueError("event timestamps must lie in (0, T]")
            if self.n > 1 and np.any(np.diff(self.modes, axis=1) <= 0):
                raise ValueError("event modes must be strictly increasing")
            if self.modes.min() < 0 or self.modes.max() >= self.m:
                raise ValueError(f"event modes must lie in [0, {self.m})")

    def __len__(self):
        return len(self.taus)

    def ranks(self):
        """Colex rank of every event's combination."""
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        return rank_array(self.modes, self.m)

    def head(self, k):
        """The first ``k`` events as a new log over the same duration."""
        return EventLog(self.m, self.n, self.duration_ps, self.taus[:k], self.modes[:k],
                        self.seed, self.rate_hz)

    def combinations(self):
        return [tuple(int(c) for c in row) for row in self.modes]

    def write_jsonl(self, path):
        header = {"m": self.m, "n": self.n, "T_ps": self.duration_ps,
                  "seed": self.seed, "rate": self.rate_hz}
        with open(path, "w") as fh:
            fh.write(json.dumps(header) + "\n")
            for tau, row in zip(self.taus.tolist(), self.modes.tolist()):
                fh.write('{"tau_ps": %d, "modes": [%s]}\n' % (tau, ", ".join(map(str, row))))

    @classmethod
    def read_jsonl(cls, path):
        with open(path) as fh:
            header = json.loads(fh.readline())
            taus, modes = [], []
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    taus.append(rec["tau_ps"])
                    modes.append(rec["modes"])
        return cls(header["m"], header["n"], header["T_ps"], taus,
                   np.array(modes, dtype=np.int64).reshape(-1, header["n"]),
                   header.get("seed"), header.get("rate"))


@dataclass
class SourceConfig:
    """Raw event rate (events/s) and optional per-output-mode detection efficiency."""

    rate_hz: float
    efficiencies: np.ndarray | None = None
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ValueError("rate must be positive")
        if self.efficiencies is not None:
            eff = np.asarray(self.efficiencies, dtype=float)
            if np.any(eff <= 0) or np.any(eff > 1):
                raise ValueError("efficiencies must lie in (0, 1]")
            self.efficiencies = eff


def _poisson_arrivals(rng, mean_gap_ps, duration_ps):
    # integer gaps; a zero gap would tie two events, so it is redrawn
    expected = duration_ps / mean_gap_ps
    chunk = int(expected + 5 * math.sqrt(expected) + 16)
    out = []
    now = 0
    while True:
        gaps = np.rint(rng.exponential(mean_gap_ps, chunk)).astype(np.int64)
        zero = gaps == 0
        while zero.any():
            gaps[zero] = np.rint(rng.exponential(mean_gap_ps, int(zero.sum()))).astype(np.int64)
            zero = gaps == 0
        times = now + np.cumsum(gaps)
        if times[-1] > duration_ps:
            out.append(times[times <= duration_ps])
            break
        out.append(times)
        now = int(times[-1])
    return np.concatenate(out)


def simulate_event_log(dist: Distribution, cfg: SourceConfig, duration_ps) -> EventLog:
    """Homogeneous Poisson arrivals at ``cfg.rate_hz`` over ``[0, T]``, each
    marked with an outcome drawn from ``dist``.

    With efficiencies set, each marked event survives with the product of
    the efficiencies of its modes; survivors keep their timestamps, so the
    surviving stream is again Poisson with renormalized marks.
    """
    modes, p = dist.arrays()
    if len(p) == 0:
        raise DegenerateDistributionError("cannot sample from an empty distribution")
    duration_ps = int(duration_ps)
    if duration_ps <= 0:
        raise ValueError("duration must be positive")
    rng = make_rng(cfg.seed)
    times = _poisson_arrivals(rng, PS_PER_S / cfg.rate_hz, duration_ps)
    marks = rng.choice(len(p), size=len(times), p=p / p.sum())
    if cfg.efficiencies is not None:
        if len(cfg.efficiencies) != dist.m:
            raise InvalidDimensionError(f"need {dist.m} efficiencies, got {len(cfg.efficiencies)}")
        survive = np.prod(cfg.efficiencies[modes], axis=1)
        keep = rng.random(len(times)) < survive[marks]
        times, marks = times[keep], marks[keep]
    seed = cfg.seed if isinstance(cfg.seed, (int, np.integer)) else None
    return EventLog(dist.m, dist.n, duration_ps, times, modes[marks], seed, cfg.rate_hz)


@dataclass
class IntervalStats:
    counts: np.ndarray
    mean: float
    variance: float


def interval_statistics(log: EventLog, bins) -> IntervalStats:
    """Events per equal-width time bin, with the mean and (population) variance."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    edges = np.array([k * log.duration_ps // bins for k in range(1, bins)], dtype=np.int64)
    idx = np.searchsorted(edges, log.taus, side="left")
    counts = np.bincount(idx, minlength=bins)
    return IntervalStats(counts, float(counts.mean()), float(counts.var()))


def interarrival_gaps(log: EventLog, outcome=None):
    """Gaps (ps) between successive events, optionally for one outcome only."""
    taus = log.taus
    if outcome is not None:
        target = np.asarray(sorted(outcome), dtype=np.int64)
        if target.shape != (log.n,):
            return np.zeros(0, dtype=np.int64)
        taus = taus[np.all(log.modes == target, axis=1)]
    return np.diff(taus)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    samples: np.ndarray


def interarrival_histogram(log: EventLog, outcome=None, bins=50) -> Histogram:
    gaps = interarrival_gaps(log, outcome)
    if len(gaps) == 0:
        return Histogram(np.zeros(0), np.zeros(0, dtype=np.int64), gaps)
    counts, edges = np.histogram(gaps, bins=bins)
    return Histogram(edges, counts, gaps)


def duration_for_events(expected_events, rate_hz):
    """Run length in ps that gives ``expected_events`` at ``rate_hz``."""
    return int(round(expected_events / rate_hz * PS_PER_S))
