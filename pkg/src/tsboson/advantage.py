"""Resource arithmetic for reaching a sampling-based quantum advantage.

The sampling rate of an n-photon, m-mode sampler with per-channel
efficiency ``eta`` and pump repetition rate ``R`` is

    SR = (R / n) * eta**n / C(m, n)

and the classical cost of the full output distribution is taken to be
``n * 2**n * C(m, n)`` steps. The advantage line is ``50 * 2**50`` steps.
All binomials and step counts are exact Python integers.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import UnattainableEfficiencyError

DEFAULT_PUMP_RATE = 76e6
BENCHMARK_N = 15
BENCHMARK_ETA = 0.6
ADVANTAGE_N = 50
ADVANTAGE_STEPS = ADVANTAGE_N * 2 ** ADVANTAGE_N


def _check(n, m, eta=None, pump_rate=None):
    if not (isinstance(n, int) and isinstance(m, int)) or not m >= n >= 1:
        raise ValueError(f"need integers m >= n >= 1, got n={n}, m={m}")
    if eta is not None and not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if pump_rate is not None and not pump_rate > 0:
        raise ValueError("pump rate must be positive")


def sampling_rate(n, m, eta, pump_rate=DEFAULT_PUMP_RATE):
    _check(n, m, eta, pump_rate)
    return pump_rate / n * eta ** n / math.comb(m, n)


def required_efficiency(n, m, target_rate, pump_rate=DEFAULT_PUMP_RATE, allow_above_one=False):
    """Per-channel efficiency at which an (n, m) sampler runs at ``target_rate``.

    Raises ``UnattainableEfficiencyError`` when that efficiency exceeds 1,
    unless ``allow_above_one`` (used to draw curves past the physical limit).
    """
    _check(n, m, pump_rate=pump_rate)
    if not target_rate > 0:
        raise ValueError("target rate must be positive")
    log_eta = (math.log(target_rate) + math.log(n) + math.log(math.comb(m, n)) - math.log(pump_rate)) / n
    eta = math.exp(log_eta)
    if eta > 1 and not allow_above_one:
        raise UnattainableEfficiencyError(f"n={n}, m={m} would need eta={eta:.4f} > 1")
    return eta


def computational_steps(n, m):
    _check(n, m)
    return n * 2 ** n * math.comb(m, n)


@dataclass(frozen=True)
class EquivalentPhotons:
    n: int
    n_prime: int
    step_gain: float
    n_prime_continuous: float
    step_gain_continuous: float


def _log_rate_2n(x, eta, pump_rate):
    # sampling rate on the m = 2n line, continued to real n through the gamma function
    return (math.log(pump_rate) - math.log(x) + x * math.log(eta)
            - (gammaln(2 * x + 1) - 2 * gammaln(x + 1)))


def _log_steps_2n(x):
    return math.log(x) + x * math.log(2) + gammaln(2 * x + 1) - 2 * gammaln(x + 1)


def equivalent_photon_number(n, eta, pump_rate=DEFAULT_PUMP_RATE, speedup=100.0):
    """Photon number reachable when ``speedup`` times lower sampling rates are acceptable.

    ``n_prime`` is the largest integer with ``SR(n', 2n') >= SR(n, 2n) / speedup``
    at equal ``eta``. The continuous solution of ``SR(n) = speedup * SR(n')``
    (binomials continued through the gamma function) is reported alongside,
    with its step gain.
    """
    if speedup < 1:
        raise ValueError("speedup must be >= 1")
    target = sampling_rate(n, 2 * n, eta, pump_rate) / speedup
    k = n
    while sampling_rate(k + 1, 2 * k + 2, eta, pump_rate) >= target:
        k += 1
    gain = computational_steps(k, 2 * k) / computational_steps(n, 2 * n)
    if speedup == 1:
        x = float(n)
    else:
        log_target = _log_rate_2n(n, eta, pump_rate) - math.log(speedup)
        hi = n + 1.0
        while _log_rate_2n(hi, eta, pump_rate) > log_target:
            hi += 1.0
        x = brentq(lambda v: _log_rate_2n(v, eta, pump_rate) - log_target, float(n), hi, xtol=1e-12)
    gain_c = math.exp(_log_steps_2n(x) - _log_steps_2n(n))
    return EquivalentPhotons(n, k, gain, x, gain_c)


@dataclass(frozen=True)
class RegimePoint:
    n: int
    m: int
    eta: float
    sampling_rate: float
    steps: int
    protocol: str

    @property
    def log10_steps(self):
        return math.log10(self.steps)

    @property
    def advantage(self):
        return self.steps >= ADVANTAGE_STEPS

    def row(self):
        d = asdict(self)
        d["log10_steps"] = self.log10_steps
        d["advantage"] = self.advantage
        return d


def advantage_table(n_range, eta_grid, pump_rate=DEFAULT_PUMP_RATE, speedup=100.0):
    """Sweep (n, m = 2n, eta) for both protocols.

    A standard row is the sampler as built. The matching timestamp row is the
    larger sampler (n', 2n') that the same hardware reaches when a
    ``speedup``-times lower sampling rate suffices.
    """
    rows = []
    for n in n_range:
        for eta in eta_grid:
            m = 2 * n
            rows.append(RegimePoint(n, m, eta, sampling_rate(n, m, eta, pump_rate),
                                    computational_steps(n, m), "standard"))
            k = equivalent_photon_number(n, eta, pump_rate, speedup).n_prime
            rows.append(RegimePoint(k, 2 * k, eta, sampling_rate(k, 2 * k, eta, pump_rate),
                                    computational_steps(k, 2 * k), "timestamp"))
    return rows


@dataclass(frozen=True)
class EfficiencyPoint:
    n: int
    m: int
    eta_standard: float
    eta_timestamp: float
    steps: int

    @property
    def advantage(self):
        return self.steps >= ADVANTAGE_STEPS


def efficiency_curve(n_range, benchmark_n=BENCHMARK_N, benchmark_eta=BENCHMARK_ETA,
                     pump_rate=DEFAULT_PUMP_RATE, speedup=100.0):
    """Efficiency each (n, 2n) sampler needs to match the benchmark sampling rate,
    for the standard protocol and for one tolerating ``speedup`` times lower rates."""
    sr0 = sampling_rate(benchmark_n, 2 * benchmark_n, benchmark_eta, pump_rate)
    return [EfficiencyPoint(n, 2 * n,
                            required_efficiency(n, 2 * n, sr0, pump_rate, allow_above_one=True),
                            required_efficiency(n, 2 * n, sr0 / speedup, pump_rate, allow_above_one=True),
                            computational_steps(n, 2 * n))
            for n in n_range]


def advantage_crossing(curve):
    """First point of an efficiency curve that lies in the advantage region."""
    for point in curve:
        if point.advantage:
            return point
    return None


TABLE_COLUMNS = ("n", "m", "eta", "SR", "steps", "log10_steps", "advantage_flag", "protocol")


def write_table(rows, path, delimiter="\t"):
    with open(path, "w") as fh:
        fh.write(delimiter.join(TABLE_COLUMNS) + "\n")
        for r in rows:
            fh.write(delimiter.join([str(r.n), str(r.m), repr(r.eta), repr(r.sampling_rate),
                                     str(r.steps), f"{r.log10_steps:.6f}", str(int(r.advantage)),
                                     r.protocol]) + "\n")
