"""Collision-free output combinations and probability distributions over them.

Combinations are sorted tuples of distinct output modes. They are ordered
colexicographically, which makes rank/unrank O(n) binomial arithmetic:
``rank(c) = sum_k C(c_k, k + 1)`` for ``c_0 < c_1 < ...``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateDistributionError, InvalidDimensionError
from .matrix import TransferMatrix
from .permanent import permanents_ryser

log = logging.getLogger(__name__)

PROVENANCES = ("exact-indist", "exact-dist", "uniform", "counting", "timestamp")
NORM_TOL = 1e-9
_CHUNK = 1 << 16


def n_combinations(m, n):
    """Number of collision-free outcomes, C(m, n), as an exact integer."""
    if not 0 < n <= m:
        raise InvalidDimensionError(f"need 0 < n <= m, got m={m}, n={n}")
    return math.comb(m, n)


def enumerate_combinations(m, n):
    """Yield every n-subset of ``range(m)`` once, in colexicographic order.

    The stream is lazy; ``n_combinations`` gives its length without walking it.
    """
    n_combinations(m, n)

    def colex(top, k):
        if k == 0:
            yield ()
            return
        for last in range(k - 1, top):
            for head in colex(last, k - 1):
                yield head + (last,)

    return colex(m, n)


def _binom_table(m, n):
    table = np.zeros((m + 1, n + 1), dtype=np.int64)
    for a in range(m + 1):
        for b in range(min(a, n) + 1):
            table[a, b] = math.comb(a, b)
    return table


def combination_rank(modes):
    """Colex rank of a single combination."""
    return sum(math.comb(c, k + 1) for k, c in enumerate(sorted(modes)))


def combination_unrank(rank, n):
    """Inverse of ``combination_rank`` for n-subsets."""
    out = []
    r = int(rank)
    for k in range(n, 0, -1):
        c = k - 1
        while math.comb(c + 1, k) <= r:
            c += 1
        out.append(c)
        r -= math.comb(c, k)
    return tuple(reversed(out))


def rank_array(modes, m):
    """Vectorized colex rank of an ``(N, n)`` array of sorted combinations."""
    modes = np.asarray(modes, dtype=np.int64)
    if modes.ndim != 2:
        raise InvalidDimensionError("expected an (N, n) array of modes")
    n = modes.shape[1]
    table = _binom_table(m, n)
    ranks = np.zeros(modes.shape[0], dtype=np.int64)
    for k in range(n):
        ranks += table[modes[:, k], k + 1]
    return ranks


def combinations_array(m, n):
    """All combinations as an ``(C(m,n), n)`` int array, row r having rank r."""
    return np.array(list(enumerate_combinations(m, n)), dtype=np.int64).reshape(-1, n)


@dataclass
class Distribution:
    """Normalized probabilities over collision-free outcomes.

    Combinations missing from ``probs`` have probability zero.
    """

    m: int
    n: int
    probs: dict
    provenance: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        n_combinations(self.m, self.n)
        probs = {}
        for modes, p in self.probs.items():
            key = tuple(int(c) for c in modes)
            if len(key) != self.n or any(b <= a for a, b in zip(key, key[1:])) \
                    or key[0] < 0 or key[-1] >= self.m:
                raise ValueError(f"{modes} is not a collision-free {self.n}-combination of {self.m} modes")
            p = float(p)
            if not p >= 0:
                raise ValueError(f"negative probability {p} for {key}")
            probs[key] = p
        total = math.fsum(probs.values())
        if abs(total - 1.0) > NORM_TOL:
            raise DegenerateDistributionError(f"probabilities sum to {total}, not 1")
        self.probs = probs

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, modes):
        return self.probs.get(tuple(modes), 0.0)

    def support(self):
        """Combinations with an entry, sorted by colex rank."""
        return sorted(self.probs, key=combination_rank)

    def arrays(self):
        """``(modes, probs)`` arrays in colex order, suitable for sampling."""
        keys = self.support()
        modes = np.array(keys, dtype=np.int64).reshape(-1, self.n)
        return modes, np.array([self.probs[k] for k in keys])

    def restrict(self, support, provenance=None):
        """Renormalized restriction to ``support`` (absent entries are dropped)."""
        sub = {tuple(k): self.probs.get(tuple(k), 0.0) for k in support}
        total = math.fsum(sub.values())
        if total <= 0:
            raise DegenerateDistributionError("restriction has zero mass")
        return Distribution(self.m, self.n, {k: v / total for k, v in sub.items() if v > 0},
                            provenance or self.provenance, dict(self.meta))

    @classmethod
    def from_weights(cls, m, n, modes, weights, provenance, meta=None):
        weights = np.asarray(weights, dtype=float)
        total = math.fsum(weights)
        if not total > 0:
            raise DegenerateDistributionError("all weights are zero")
        probs = {tuple(int(c) for c in row): w / total
                 for row, w in zip(np.asarray(modes), weights) if w > 0}
        return cls(m, n, probs, provenance, dict(meta or {}))

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            header = {"m": self.m, "n": self.n, "provenance": self.provenance}
            if self.meta:
                header["meta"] = self.meta
            fh.write(json.dumps(header) + "\n")
            for key in self.support():
                fh.write(json.dumps({"modes": list(key), "probability": self.probs[key]}) + "\n")

    @classmethod
    def read_jsonl(cls, path):
        lines = Path(path).read_text().splitlines()
        header = json.loads(lines[0])
        probs = {}
        for line in lines[1:]:
            if line.strip():
                rec = json.loads(line)
                probs[tuple(rec["modes"])] = rec["probability"]
        return cls(header["m"], header["n"], probs, header["provenance"], header.get("meta", {}))


def exact_distribution(U: TransferMatrix, inputs, model="indist"):
    """Exact output distribution over all collision-free outcomes of ``U``.

    ``model`` is ``"indist"`` (|Perm U_S|^2) or ``"dist"`` (Perm |U_S|^2).
    The result is renormalized over the collision-free subspace; the mass
    found there before renormalization is kept in ``meta["collision_free_mass"]``.
    """
    inputs = [int(i) for i in inputs]
    n = len(inputs)
    if n == 0 or len(set(inputs)) != n:
        raise ValueError("inputs must be a non-empty set of distinct modes")
    if max(inputs) >= U.rows or min(inputs) < 0:
        raise IndexError(f"input mode out of range [0, {U.rows})")
    if model not in ("indist", "dist"):
        raise ValueError(f"model must be 'indist' or 'dist', got {model!r}")
    m = U.cols
    combos = combinations_array(m, n)
    rows = U.entries[inputs]
    weights = np.empty(len(combos))
    for start in range(0, len(combos), _CHUNK):
        block = combos[start:start + _CHUNK]
        stack = np.transpose(rows[:, block], (1, 0, 2))
        if model == "indist":
            perms = permanents_ryser(stack)
            weights[start:start + len(block)] = perms.real ** 2 + perms.imag ** 2
        else:
            weights[start:start + len(block)] = permanents_ryser(stack.real ** 2 + stack.imag ** 2).real
    mass = math.fsum(weights)
    if mass < 1e-12:
        raise DegenerateDistributionError(
            f"collision-free mass is {mass:.3g}; nothing to renormalize")
    log.info("renormalizing %s distribution: collision-free mass %.6g", model, mass)
    provenance = "exact-indist" if model == "indist" else "exact-dist"
    return Distribution.from_weights(m, n, combos, weights, provenance,
                                     {"collision_free_mass": mass, "inputs": inputs})


def uniform_distribution(m, n):
    K = n_combinations(m, n)
    return Distribution(m, n, {c: 1.0 / K for c in enumerate_combinations(m, n)}, "uniform")


@dataclass(frozen=True)
class Metrics:
    similarity: float
    tvd: float
    fidelity: float


def distribution_metrics(p: Distribution, q: Distribution) -> Metrics:
    """Similarity sum(sqrt(p q)) and total variation distance on the union support.

    ``fidelity`` is the same functional as ``similarity``; both names are kept
    because comparisons against theory are conventionally called fidelity.
    """
    if (p.m, p.n) != (q.m, q.n):
        raise InvalidDimensionError(f"cannot compare ({p.m},{p.n}) with ({q.m},{q.n})")
    keys = set(p.probs) | set(q.probs)
    s = math.fsum(math.sqrt(p[k] * q[k]) for k in keys)
    d = 0.5 * math.fsum(abs(p[k] - q[k]) for k in keys)
    s = min(max(s, 0.0), 1.0)
    d = min(max(d, 0.0), 1.0)
    return Metrics(s, d, s)
