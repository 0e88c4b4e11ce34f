"""Matrix permanents and the photon-counting probabilities built on them.

``permanent_ryser`` is the production path (Gray-code Ryser, O(n 2^n));
``permanent_naive`` sums over all n! permutations and exists as an oracle.
"""
from __future__ import annotations

import itertools

import numba as nb
import numpy as np

from .errors import InvalidDimensionError, SizeLimitError
from .matrix import TransferMatrix

RYSER_MAX_N = 24
NAIVE_MAX_N = 9


@nb.njit(cache=True)
def _ryser_gray(a):
    n = a.shape[0]
    rowsum = np.zeros(n, dtype=np.complex128)
    # Kahan-compensated accumulators for the 2^n alternating terms
    s_re = 0.0
    s_im = 0.0
    c_re = 0.0
    c_im = 0.0
    gray_prev = 0
    size = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        flipped = gray ^ gray_prev
        j = 0
        while (flipped >> j) & 1 == 0:
            j += 1
        if gray & flipped:
            for i in range(n):
                rowsum[i] += a[i, j]
            size += 1
        else:
            for i in range(n):
                rowsum[i] -= a[i, j]
            size -= 1
        gray_prev = gray
        prod = rowsum[0]
        for i in range(1, n):
            prod *= rowsum[i]
        if (n - size) & 1:
            prod = -prod
        y = prod.real - c_re
        t = s_re + y
        c_re = (t - s_re) - y
        s_re = t
        y = prod.imag - c_im
        t = s_im + y
        c_im = (t - s_im) - y
        s_im = t
    return complex(s_re, s_im)


@nb.njit(cache=True)
def _ryser_batch(stack):
    out = np.empty(stack.shape[0], dtype=np.complex128)
    for k in range(stack.shape[0]):
        out[k] = _ryser_gray(stack[k])
    return out


def _as_square(a, limit):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidDimensionError(f"permanent needs a square matrix, got shape {a.shape}")
    if a.shape[0] > limit:
        raise SizeLimitError(f"n = {a.shape[0]} exceeds the limit of {limit}")
    return np.ascontiguousarray(a)


def permanent_ryser(a):
    """Permanent of a square complex matrix by Ryser's formula.

    Subsets of columns are visited in Gray-code order so each step adds or
    removes a single column from the running row sums.

    >>> permanent_ryser(np.ones((4, 4)))
    (24+0j)
    """
    a = _as_square(a, RYSER_MAX_N)
    if a.shape[0] == 0:
        return 1 + 0j
    return complex(_ryser_gray(a))


def permanents_ryser(stack):
    """Vectorized ``permanent_ryser`` over a ``(k, n, n)`` stack."""
    stack = np.ascontiguousarray(stack, dtype=np.complex128)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise InvalidDimensionError(f"expected a (k, n, n) stack, got {stack.shape}")
    if stack.shape[1] > RYSER_MAX_N:
        raise SizeLimitError(f"n = {stack.shape[1]} exceeds the limit of {RYSER_MAX_N}")
    if stack.shape[1] == 0:
        return np.ones(stack.shape[0], dtype=np.complex128)
    return _ryser_batch(stack)


def permanent_naive(a):
    """Permanent as the plain sum over permutations (n <= 9)."""
    a = _as_square(a, NAIVE_MAX_N)
    n = a.shape[0]
    if n == 0:
        return 1 + 0j
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    return complex(np.prod(a[np.arange(n), perms], axis=1).sum())


def _check_modes(U, inputs, outcome):
    inputs = [int(i) for i in inputs]
    outcome = [int(j) for j in outcome]
    if len(inputs) != len(outcome):
        raise InvalidDimensionError(f"{len(inputs)} inputs but {len(outcome)} detected modes")
    if len(set(inputs)) != len(inputs) or len(set(outcome)) != len(outcome):
        raise ValueError("repeated mode index")
    if any(i < 0 or i >= U.rows for i in inputs):
        raise IndexError(f"input mode out of range [0, {U.rows})")
    if any(j < 0 or j >= U.cols for j in outcome):
        raise IndexError(f"output mode out of range [0, {U.cols})")
    return inputs, sorted(outcome)


def submatrix(U, inputs, outcome):
    """The n x n block of ``U`` picked by input rows and detected output columns."""
    inputs, outcome = _check_modes(U, inputs, outcome)
    return U.entries[np.ix_(inputs, outcome)]


def indistinguishable_probability(U: TransferMatrix, inputs, outcome) -> float:
    """|Perm(U_S)|^2 for identical photons (not renormalized)."""
    z = permanent_ryser(submatrix(U, inputs, outcome))
    return z.real ** 2 + z.imag ** 2


def distinguishable_probability(U: TransferMatrix, inputs, outcome) -> float:
    """Perm(|U_S|^2): photons that do not interfere."""
    sub = submatrix(U, inputs, outcome)
    return permanent_ryser(sub.real ** 2 + sub.imag ** 2).real


__all__ = [
    "permanent_ryser", "permanents_ryser", "permanent_naive",
    "indistinguishable_probability", "distinguishable_probability",
    "submatrix", "RYSER_MAX_N", "NAIVE_MAX_N",
]
