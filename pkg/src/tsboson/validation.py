"""Sampler validation by cumulative +/-1 discriminator traces.

Row-norm test (against uniform samplers): for an outcome S the statistic is
``prod_{j in S} (m / n) * sum_{i in inputs} |U_ij|^2``. A genuine boson
sampler favours outcomes whose columns carry more weight, so its trace drifts
upwards; a uniform sampler drifts down.

Likelihood-ratio test (against distinguishable photons): per event compare
``|Perm U_S|^2`` with ``Perm |U_S|^2``.

Decisions are +1 when the statistic exceeds 1, otherwise -1. Ties count
against the sampler; a statistic within a relative 1e-12 of the threshold
is a tie, so rounding in products of exactly-balanced entries cannot flip it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distribution import rank_array
from .events import EventLog
from .matrix import TransferMatrix
from .permanent import permanents_ryser

ROW_NORM = "row-norm"
LIKELIHOOD_RATIO = "likelihood-ratio"
TIE_RTOL = 1e-12


@dataclass(eq=False)
class ValidationTrace:
    kind: str
    decisions: np.ndarray
    skipped: int = 0
    infinite_ratios: int = 0
    statistics: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.decisions = np.asarray(self.decisions, dtype=np.int64)
        self.running = np.cumsum(self.decisions)

    @property
    def events(self):
        return len(self.decisions)

    @property
    def final(self):
        return int(self.running[-1]) if len(self.running) else 0

    def write(self, path):
        """Two columns: event index (1-based) and running sum."""
        with open(path, "w") as fh:
            fh.write(f"# {self.kind} trace; skipped={self.skipped} infinite_ratios={self.infinite_ratios}\n")
            fh.write("event\trunning_sum\n")
            for k, r in enumerate(self.running.tolist(), start=1):
                fh.write(f"{k}\t{r}\n")


def _decide(stat, threshold):
    above = (stat > threshold) & ~np.isclose(stat, threshold, rtol=TIE_RTOL, atol=0.0)
    return np.where(above, 1, -1)


def _check_inputs(U, inputs, log):
    inputs = [int(i) for i in inputs]
    if len(inputs) != log.n:
        raise ValueError(f"{len(inputs)} inputs for {log.n}-photon events")
    if len(log) and log.modes.max() >= U.cols:
        raise IndexError(f"event mode {int(log.modes.max())} outside the matrix's {U.cols} outputs")
    return inputs


def row_norm_statistics(log: EventLog, U: TransferMatrix, inputs):
    inputs = _check_inputs(U, inputs, log)
    m, n = U.cols, len(inputs)
    rows = U.entries[inputs]
    weight = (m / n) * np.sum(rows.real ** 2 + rows.imag ** 2, axis=0)
    if not len(log):
        return np.zeros(0)
    return np.prod(weight[log.modes], axis=1)


def row_norm_test(log: EventLog, U: TransferMatrix, inputs, threshold=1.0) -> ValidationTrace:
    stat = row_norm_statistics(log, U, inputs)
    return ValidationTrace(ROW_NORM, _decide(stat, threshold), statistics=stat)


def _outcome_probabilities(log, U, inputs):
    # evaluate once per distinct outcome, then scatter back to events
    ranks = rank_array(log.modes, U.cols)
    _, first, inverse = np.unique(ranks, return_index=True, return_inverse=True)
    modes = log.modes[first]
    rows = U.entries[inputs]
    stack = np.transpose(rows[:, modes], (1, 0, 2))
    perms = permanents_ryser(stack)
    p_ind = perms.real ** 2 + perms.imag ** 2
    p_dis = permanents_ryser(stack.real ** 2 + stack.imag ** 2).real
    return p_ind[inverse], p_dis[inverse]


def likelihood_ratio_test(log: EventLog, U: TransferMatrix, inputs, threshold=1.0) -> ValidationTrace:
    """Per-event indistinguishable/distinguishable probability ratio.

    An event with ``P_dist = 0 < P_indist`` counts +1 and is tallied in
    ``infinite_ratios``; an event where both vanish is skipped.
    """
    inputs = _check_inputs(U, inputs, log)
    if not len(log):
        return ValidationTrace(LIKELIHOOD_RATIO, np.zeros(0), statistics=np.zeros(0))
    p_ind, p_dis = _outcome_probabilities(log, U, inputs)
    both_zero = (p_ind == 0) & (p_dis == 0)
    infinite = (p_dis == 0) & (p_ind > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p_dis > 0, p_ind / np.where(p_dis > 0, p_dis, 1.0), np.inf)
    ratio = ratio[~both_zero]
    decisions = _decide(ratio, threshold)
    return ValidationTrace(LIKELIHOOD_RATIO, decisions, skipped=int(both_zero.sum()),
                           infinite_ratios=int(infinite.sum()), statistics=ratio)
