"""Transfer matrices: Haar-random unitaries and matrices assembled from
measured amplitude/phase tables.

Convention used throughout the package: ``entries[i, j]`` is the amplitude
for a photon entering input mode ``i`` to leave through output mode ``j``.
A full unitary is square; a row-block keeps only the characterized input
rows (e.g. 3 inputs x 30 outputs).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateRowError, InvalidDimensionError
from .seeding import make_rng

FULL_UNITARY = "full-unitary"
ROW_BLOCK = "row-block"
UNITARITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    entries: np.ndarray
    kind: str = FULL_UNITARY
    # row norms divided out during assembly (values < 1 indicate loss)
    row_scale: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidDimensionError(f"transfer matrix must be 2-D and non-empty, got shape {a.shape}")
        if self.kind == FULL_UNITARY:
            if a.shape[0] != a.shape[1]:
                raise InvalidDimensionError("a full unitary must be square")
            report = check_unitarity(a, UNITARITY_TOL)
            if not report.passed:
                raise ValueError(f"matrix is not unitary (max deviation {report.max_deviation:.3e})")
        elif self.kind == ROW_BLOCK:
            if a.shape[0] > a.shape[1]:
                raise InvalidDimensionError("a row-block needs rows <= cols")
            norms = np.sum(np.abs(a) ** 2, axis=1)
            if np.any(norms > 1 + UNITARITY_TOL):
                raise ValueError("row-block rows must have squared norm <= 1")
        else:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        if self.row_scale is not None:
            s = np.array(self.row_scale, dtype=float)
            s.setflags(write=False)
            object.__setattr__(self, "row_scale", s)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def to_json(self):
        d = {
            "kind": self.kind,
            "rows": self.rows,
            "cols": self.cols,
            "real": self.entries.real.tolist(),
            "imag": self.entries.imag.tolist(),
        }
        if self.row_scale is not None:
            d["row_scale"] = self.row_scale.tolist()
        return d

    @classmethod
    def from_json(cls, d):
        entries = np.array(d["real"], dtype=float) + 1j * np.array(d["imag"], dtype=float)
        return cls(entries, kind=d.get("kind", FULL_UNITARY), row_scale=d.get("row_scale"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class CharacterizationTable:
    """Measured moduli and phases (radians) of a transfer matrix block."""

    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        amp = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))
        ph = np.atleast_2d(np.asarray(self.phases, dtype=float))
        if amp.shape != ph.shape:
            raise InvalidDimensionError(
                f"amplitude table {amp.shape} and phase table {ph.shape} differ in shape")
        if np.any(amp < 0):
            raise ValueError("amplitudes must be nonnegative")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "phases", np.mod(ph, 2 * np.pi))

    @classmethod
    def from_files(cls, amplitudes_path, phases_path):
        return cls(_read_table(amplitudes_path), _read_table(phases_path))


def _read_table(path):
    # whitespace- or comma-delimited, row-major
    text = Path(path).read_text().replace(",", " ")
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise InvalidDimensionError(f"{path}: empty table")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidDimensionError(f"{path}: ragged table")
    return np.array(rows, dtype=float)


@dataclass(frozen=True)
class UnitarityReport:
    max_deviation: float
    passed: bool


def check_unitarity(matrix, tol=UNITARITY_TOL):
    """Largest absolute entry of ``M^dagger M - I`` and whether it is within ``tol``.

    Row-blocks are checked for orthonormal rows (``M M^dagger``) since a wide
    block cannot satisfy the column condition.
    """
    kind = matrix.kind if isinstance(matrix, TransferMatrix) else None
    a = matrix.entries if isinstance(matrix, TransferMatrix) else np.asarray(matrix, dtype=np.complex128)
    if kind == ROW_BLOCK or (kind is None and a.shape[0] < a.shape[1]):
        gram = a @ a.conj().T
    else:
        gram = a.conj().T @ a
    dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    return UnitarityReport(dev, dev <= tol)


def haar_random_unitary(m, seed=None):
    """Draw an ``m x m`` unitary from the Haar measure.

    A complex Ginibre matrix is QR-factorized and the columns of Q are
    rescaled by the phases of R's diagonal; without that correction the
    factorization is not Haar distributed.
    """
    if m < 1:
        raise InvalidDimensionError("m must be >= 1")
    rng = make_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return TransferMatrix(q, FULL_UNITARY)


def assemble_transfer_matrix(table):
    """Build a row-block matrix ``a_ij * exp(i phi_ij)`` with unit-norm rows.

    The norm removed from each row is kept in ``row_scale`` so that loss in
    the characterized device stays visible to callers.
    """
    entries = table.amplitudes * np.exp(1j * table.phases)
    norms = np.sqrt(np.sum(np.abs(entries) ** 2, axis=1))
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise DegenerateRowError(f"row(s) {bad.tolist()} have zero norm")
    return TransferMatrix(entries / norms[:, None], ROW_BLOCK, row_scale=norms)
