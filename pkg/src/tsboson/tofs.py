"""Raw multi-channel time tags: synthesis from an event log, plain-text
storage, delay calibration and n-fold coincidence extraction.

Detection channel ``k + 1`` records output mode ``k``; channel 0 is the
trigger unless a layout says otherwise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .errors import (CalibrationError, StreamIntegrityError, StreamParseError,
                     UnknownChannelError)
from .events import PS_PER_S, EventLog
from .seeding import make_rng

DEFAULT_WINDOW_PS = 2000
MANIFEST = "manifest.json"


@dataclass(eq=False)
class ChannelTagStream:
    channel: int
    tags: np.ndarray
    mode: int | None = None

    def __post_init__(self):
        self.tags = np.asarray(self.tags, dtype=np.int64).reshape(-1)
        if len(self.tags) > 1 and np.any(np.diff(self.tags) < 0):
            raise ValueError(f"channel {self.channel}: tags are not sorted")

    def __len__(self):
        return len(self.tags)


@dataclass
class TofsLayout:
    trigger_channel: int = 0
    delays_ps: dict = field(default_factory=dict)
    jitter_ps: float = 0.0
    dark_rate_hz: float = 0.0
    trigger_dark_rate_hz: float = 0.0

    @staticmethod
    def channel_of_mode(mode):
        return mode + 1


@dataclass(eq=False)
class TofsRun:
    """A set of per-channel streams plus what the manifest declares about them."""

    streams: dict
    trigger_channel: int
    declared_delays: dict = field(default_factory=dict)
    duration_ps: int | None = None

    @property
    def detection_channels(self):
        return sorted(c for c in self.streams if c != self.trigger_channel)

    def write(self, directory):
        """Write one ``chNNN.txt`` per channel (one integer tick per line) and a manifest."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for ch in sorted(self.streams):
            s = self.streams[ch]
            name = f"ch{ch:03d}.txt"
            with open(directory / name, "w") as fh:
                if len(s):
                    fh.write("\n".join(map(str, s.tags.tolist())) + "\n")
            entries.append({"id": ch, "file": name, "mode": s.mode,
                            "delay_ps": int(self.declared_delays.get(ch, 0))})
        manifest = {"trigger_channel": self.trigger_channel, "duration_ps": self.duration_ps,
                    "channels": entries}
        path = directory / MANIFEST
        path.write_text(json.dumps(manifest, indent=1) + "\n")
        return path


def emit_tofs_streams(log: EventLog, layout: TofsLayout | None = None, seed=None) -> TofsRun:
    """Turn an event log into raw per-channel time tags.

    The trigger records ``tau``; each fired mode channel records
    ``tau + delay + N(0, jitter)``. Independent Poisson dark counts are added
    per channel before sorting.
    """
    layout = layout or TofsLayout()
    if any(d < 0 for d in layout.delays_ps.values()):
        raise ValueError("channel delays must be nonnegative")
    if layout.jitter_ps < 0:
        raise ValueError("jitter must be nonnegative")
    if 1 <= layout.trigger_channel <= log.m:
        raise ValueError(f"trigger channel {layout.trigger_channel} collides with a detection channel")
    rng = make_rng(0 if seed is None else seed)
    T = log.duration_ps

    def dark(rate_hz):
        if rate_hz <= 0:
            return np.zeros(0, dtype=np.int64)
        k = rng.poisson(rate_hz * T / PS_PER_S)
        return rng.integers(0, T + 1, size=k, dtype=np.int64)

    trig = np.sort(np.concatenate([log.taus, dark(layout.trigger_dark_rate_hz)]))
    streams = {layout.trigger_channel: ChannelTagStream(layout.trigger_channel, trig)}
    for mode in range(log.m):
        ch = layout.channel_of_mode(mode)
        fired = log.taus[np.any(log.modes == mode, axis=1)]
        tags = fired + int(layout.delays_ps.get(ch, 0))
        if layout.jitter_ps > 0:
            tags = tags + np.rint(rng.normal(0.0, layout.jitter_ps, len(tags))).astype(np.int64)
        tags = np.concatenate([np.maximum(tags, 0), dark(layout.dark_rate_hz)])
        streams[ch] = ChannelTagStream(ch, np.sort(tags), mode)
    delays = {ch: int(layout.delays_ps.get(ch, 0)) for ch in streams if ch != layout.trigger_channel}
    return TofsRun(streams, layout.trigger_channel, delays, T)


def _parse_tag_file(path):
    text = Path(path).read_text()
    lines = text.splitlines()
    numbered = [(i + 1, s.strip()) for i, s in enumerate(lines) if s.strip()]
    if not numbered:
        return np.zeros(0, dtype=np.int64)
    try:
        tags = np.array([s for _, s in numbered]).astype(np.int64)
    except (ValueError, OverflowError):
        for lineno, s in numbered:
            try:
                int(s)
            except ValueError:
                raise StreamParseError(path, lineno, s) from None
        raise
    bad = np.flatnonzero(np.diff(tags) < 0)
    if bad.size:
        raise StreamIntegrityError(path, numbered[bad[0] + 1][0])
    if tags[0] < 0:
        raise StreamIntegrityError(path, numbered[0][0], "negative time tag")
    return tags


def parse_streams(manifest_path) -> TofsRun:
    """Load every channel listed in a manifest.

    Unsorted files are rejected rather than sorted, since a disordered stream
    points at an upstream fault.
    """
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST
    manifest = json.loads(manifest_path.read_text())
    try:
        trigger = int(manifest["trigger_channel"])
        entries = manifest["channels"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{manifest_path}: malformed manifest ({exc})") from None
    streams, delays = {}, {}
    for entry in entries:
        ch = int(entry["id"])
        if ch in streams:
            raise ValueError(f"{manifest_path}: channel {ch} listed twice")
        tags = _parse_tag_file(manifest_path.parent / entry["file"])
        streams[ch] = ChannelTagStream(ch, tags, entry.get("mode"))
        if ch != trigger:
            delays[ch] = int(entry.get("delay_ps", 0))
    if trigger not in streams:
        raise UnknownChannelError(f"trigger channel {trigger} not in manifest")
    return TofsRun(streams, trigger, delays, manifest.get("duration_ps"))


@dataclass
class Calibration:
    delays: dict
    failed: list
    grid: np.ndarray
    histograms: dict

    def require(self):
        if self.failed:
            raise CalibrationError(self.failed)
        return self.delays


def _pair_differences(trig, tags, lo_off, hi_off):
    lo = np.searchsorted(tags, trig + lo_off, side="left")
    hi = np.searchsorted(tags, trig + hi_off, side="left")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.repeat(lo, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return tags[starts + offsets] - np.repeat(trig, counts)


def calibrate_delays(streams, trigger, scan_range_ps, step_ps, min_snr=5.0, min_counts=3) -> Calibration:
    """Scan each detection channel's delay against the trigger.

    For every grid delay ``d = j * step`` with ``|d| <= scan_range`` the
    twofold coincidences with ``tag - tau`` in ``[d - step/2, d + step/2)`` are
    counted; the delay with the most counts wins, ties going to the smallest
    ``|d|``. A channel whose peak does not stand out from the median of its
    scan by ``min_snr`` standard deviations is reported as failed.
    """
    streams = streams.streams if isinstance(streams, TofsRun) else streams
    if trigger not in streams:
        raise UnknownChannelError(f"trigger channel {trigger} not found")
    trig = streams[trigger].tags
    if len(trig) == 0:
        raise ValueError("trigger stream is empty")
    if step_ps <= 0 or scan_range_ps < 0:
        raise ValueError("need step > 0 and range >= 0")
    J = int(scan_range_ps // step_ps)
    grid = np.arange(-J, J + 1, dtype=np.int64) * int(step_ps)
    half = step_ps / 2
    delays, failed, hists = {}, [], {}
    for ch in sorted(streams):
        if ch == trigger:
            continue
        diffs = _pair_differences(trig, streams[ch].tags,
                                  int(np.floor(grid[0] - half)), int(np.ceil(grid[-1] + half)))
        idx = np.floor((diffs - (grid[0] - half)) / step_ps).astype(np.int64)
        idx = idx[(idx >= 0) & (idx < len(grid))]
        hist = np.bincount(idx, minlength=len(grid))
        hists[ch] = hist
        peak = hist.max() if len(hist) else 0
        bg = float(np.median(hist))
        if peak < min_counts or peak < bg + min_snr * np.sqrt(max(bg, 1.0)):
            failed.append(ch)
            continue
        best = np.flatnonzero(hist == peak)
        order = np.lexsort((grid[best], np.abs(grid[best])))
        delays[ch] = int(grid[best[order[0]]])
    return Calibration(delays, failed, grid, hists)


@nb.njit(cache=True)
def _greedy_match(trig, tags, lo, hi):
    matched = np.zeros(trig.shape[0], dtype=np.bool_)
    p = 0
    n_tags = tags.shape[0]
    for i in range(trig.shape[0]):
        start = trig[i] + lo
        while p < n_tags and tags[p] < start:
            p += 1
        if p < n_tags and tags[p] < trig[i] + hi:
            matched[i] = True
            p += 1
    return matched


def window_bounds(window_ps, anchor="trigger"):
    """Half-open offsets ``[lo, hi)`` relative to the trigger.

    A zero-width window matches only tags exactly equal to the trigger.
    """
    w = int(window_ps)
    if w < 0:
        raise ValueError("window must be nonnegative")
    if anchor == "trigger":
        lo, hi = 0, w
    elif anchor == "centered":
        lo, hi = -(w // 2), w - w // 2
    else:
        raise ValueError(f"unknown window anchor {anchor!r}")
    if w == 0:
        hi = lo + 1
    return lo, hi


def extract_coincidences(streams, trigger, delays, window_ps=DEFAULT_WINDOW_PS, fold=3,
                         anchor="trigger", m=None, duration_ps=None) -> EventLog:
    """Keep triggers at which exactly ``fold`` detection channels fire.

    A detection tag ``t`` joins trigger ``tau`` when ``t - delay`` falls in
    the window around ``tau``. Triggers are processed in time order and each
    takes the earliest unused tag per channel, so no tag serves two triggers.
    """
    run = streams if isinstance(streams, TofsRun) else None
    streams = run.streams if run else streams
    if fold < 1:
        raise ValueError("fold must be >= 1")
    unknown = sorted(set(delays) - set(streams))
    if unknown:
        raise UnknownChannelError(f"delays given for unknown channel(s) {unknown}")
    if trigger not in streams:
        raise UnknownChannelError(f"trigger channel {trigger} not found")
    channels = sorted(c for c in streams if c != trigger)
    missing = [c for c in channels if c not in delays]
    if missing:
        raise ValueError(f"no delay for channel(s) {missing}")
    modes = np.array([streams[c].mode if streams[c].mode is not None else c for c in channels],
                     dtype=np.int64)
    order = np.argsort(modes, kind="stable")
    channels = [channels[i] for i in order]
    modes = modes[order]

    trig = np.unique(streams[trigger].tags - int(delays.get(trigger, 0)))
    trig = trig[trig > 0]
    lo, hi = window_bounds(window_ps, anchor)
    fired = np.zeros((len(channels), len(trig)), dtype=np.bool_)
    for k, ch in enumerate(channels):
        corrected = streams[ch].tags - int(delays[ch])
        fired[k] = _greedy_match(trig, corrected, lo, hi)
    keep = fired.sum(axis=0) == fold
    cols = np.nonzero(fired[:, keep].T)[1].reshape(-1, fold)
    if m is None:
        m = int(modes.max()) + 1 if len(modes) else fold
    if duration_ps is None:
        if run is not None and run.duration_ps:
            duration_ps = run.duration_ps
        else:
            duration_ps = int(trig[-1]) if len(trig) else 1
    return EventLog(m, fold, duration_ps, trig[keep], modes[cols])


def accidental_rate(trigger_rate_hz, channel_rates_hz, window_ps, fold):
    """Expected rate of accidental ``fold``-fold coincidences per second.

    Each detection channel with background rate ``r`` has probability
    ``q = 1 - exp(-r w)`` of a tag in a trigger's window; the accidental rate
    is the trigger rate times the probability that exactly ``fold`` channels
    have one. For small ``q`` this reduces to ``R_t * sum prod r_c w``.
    """
    w = window_ps / PS_PER_S
    q = 1.0 - np.exp(-np.asarray(channel_rates_hz, dtype=float) * w)
    poly = np.zeros(len(q) + 1)
    poly[0] = 1.0
    for qc in q:
        poly[1:] = poly[1:] * (1 - qc) + poly[:-1] * qc
        poly[0] *= 1 - qc
    return trigger_rate_hz * poly[fold]
