"""Piecewise constant 1-periodic coefficient fields.

A material is described on the unit cell [0, 1) by a breakpoint grid and one
constant complex 2x2 matrix per piece (half-open pieces [b_j, b_{j+1})).  The
oscillatory field seen by the solver is the unit-cell pattern traversed n
times, i.e. x -> M(frac(n x)).  Everything downstream (assembly, fiber
decomposition, averaging) only ever needs exact piece geometry, so the pieces
are kept symbolic rather than sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np


class CoercivityError(ValueError):
    """Raised when a field fails the positivity requirements."""


def _as_pieces(values, count: int) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.shape != (count, 2, 2):
        raise ValueError(f"expected {count} pieces of shape (2, 2), got {arr.shape}")
    return arr


def _check_breakpoints(breakpoints) -> np.ndarray:
    b = np.asarray(breakpoints, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("breakpoints must be a 1d grid with at least two entries")
    if abs(b[0]) > 0 or abs(b[-1] - 1.0) > 0:
        raise ValueError("unit-cell breakpoints must start at 0 and end at 1")
    if not np.all(np.diff(b) > 0):
        raise ValueError("breakpoints must be strictly increasing")
    return b


def _hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


@dataclass(frozen=True)
class MaterialField:
    """Pair of piecewise constant 2x2 fields (M0, M1) on the unit cell.

    M0 must be Hermitian positive semidefinite piece by piece; M1 is an
    arbitrary complex matrix per piece.  Both share the breakpoint grid.
    """

    breakpoints: np.ndarray
    m0: np.ndarray
    m1: np.ndarray

    def __post_init__(self):
        b = _check_breakpoints(self.breakpoints)
        count = b.size - 1
        m0 = _as_pieces(self.m0, count)
        m1 = _as_pieces(self.m1, count)
        herm_gap = np.abs(m0 - np.conj(np.swapaxes(m0, -1, -2))).max()
        if herm_gap > 1e-12:
            raise CoercivityError(f"M0 pieces must be Hermitian (gap {herm_gap:.2e})")
        eigs = np.linalg.eigvalsh(_hermitian_part(m0))
        if eigs.min() < -1e-12:
            raise CoercivityError(f"M0 pieces must be positive semidefinite (min eig {eigs.min():.2e})")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "m1", m1)

    @property
    def piece_count(self) -> int:
        return self.breakpoints.size - 1

    def piece_widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)


@dataclass(frozen=True)
class MatrixField:
    """Single piecewise constant complex 2x2 field on the unit cell."""

    breakpoints: np.ndarray
    pieces: np.ndarray

    def __post_init__(self):
        b = _check_breakpoints(self.breakpoints)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "pieces", _as_pieces(self.pieces, b.size - 1))

    @property
    def piece_count(self) -> int:
        return self.breakpoints.size - 1

    def piece_widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def coercivity(self) -> float:
        """Smallest eigenvalue of the Hermitian part over all pieces."""
        return float(np.linalg.eigvalsh(_hermitian_part(self.pieces)).min())

    def sup_norm(self) -> float:
        """Essential sup of the pointwise spectral norm, i.e. max over pieces."""
        return float(max(np.linalg.norm(p, 2) for p in self.pieces))

    def average(self) -> np.ndarray:
        """Exact cell average, sum of piece values times widths."""
        return np.einsum("p,pij->ij", self.piece_widths(), self.pieces)

    def require_coercive(self, c: float | None = None) -> float:
        got = self.coercivity()
        ok = got > 0 if c is None else got >= c - 1e-12
        if not ok:
            raise CoercivityError(f"field is not coercive enough (min Re eig {got:.3e})")
        return got


def piece_index(breakpoints: np.ndarray, y) -> np.ndarray:
    """Index of the half-open piece [b_j, b_{j+1}) containing each y in [0, 1)."""
    idx = np.searchsorted(breakpoints, np.asarray(y, dtype=float), side="right") - 1
    return np.clip(idx, 0, breakpoints.size - 2)


def evaluate_oscillatory(field: MaterialField, oscillation: int, x):
    """Value (M0, M1) of the oscillatory field at x in [0, 1).

    The field repeats the unit-cell pattern ``oscillation`` times, so the
    lookup happens at frac(oscillation * x).
    """
    if oscillation < 1:
        raise ValueError("oscillation count must be a positive integer")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa >= 1.0):
        raise ValueError("evaluation points must lie in [0, 1)")
    y = np.mod(oscillation * xa, 1.0)
    idx = piece_index(field.breakpoints, y)
    return field.m0[idx], field.m1[idx]


def averaged_coefficients(field: MaterialField) -> tuple[np.ndarray, np.ndarray]:
    """Cell averages of (M0, M1); this is the homogenised material."""
    w = field.piece_widths()
    return (
        np.einsum("p,pij->ij", w, field.m0),
        np.einsum("p,pij->ij", w, field.m1),
    )


def verify_positivity(field: MaterialField, rho: float) -> float:
    """Largest c with rho*M0 + Re M1 >= c on every piece.

    Raises CoercivityError when no positive c exists, since the solver and
    the stability estimates are meaningless in that case.
    """
    if rho < 0:
        raise ValueError("the exponential weight rate rho must be >= 0")
    sym = rho * field.m0 + _hermitian_part(field.m1)
    c = float(np.linalg.eigvalsh(sym).min())
    if c <= 0:
        raise CoercivityError(f"rho*M0 + Re M1 is not uniformly positive (min eig {c:.3e})")
    return c


def shifted_field(field: MaterialField, z: complex) -> MatrixField:
    """The combination z*M0 + M1 as a single matrix field.

    For z = i*xi + rho this is the symbol of the evolutionary operator on the
    frequency line; its Hermitian part equals rho*M0 + Re M1, so coercivity
    transfers verbatim from verify_positivity.
    """
    return MatrixField(field.breakpoints, z * field.m0 + field.m1)


def oscillatory_breakpoints(breakpoints: np.ndarray, oscillation: int) -> np.ndarray:
    """All discontinuity locations of the oscillatory field inside [0, 1]."""
    if oscillation < 1:
        raise ValueError("oscillation count must be a positive integer")
    cells = (np.asarray(breakpoints)[:-1][None, :] + np.arange(oscillation)[:, None]) / oscillation
    return np.append(np.unique(cells.ravel()), 1.0)


def random_coercive_field(rng: np.random.Generator, piece_count: int, c: float = 1.0,
                          spread: float = 1.0) -> MatrixField:
    """Random piecewise constant field with Re M >= c, for randomized checks."""
    interior = np.sort(rng.uniform(0.05, 0.95, piece_count - 1))
    breaks = np.concatenate(([0.0], interior, [1.0]))
    pieces = np.empty((piece_count, 2, 2), dtype=complex)
    for j in range(piece_count):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        herm = c * np.eye(2) + spread * (g @ np.conj(g.T))
        skew = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        pieces[j] = herm + spread * 0.5 * (skew - np.conj(skew.T))
    return MatrixField(breaks, pieces)


SourceFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EvolutionaryProblem:
    """Data of d/dt M0(n.) U + M1(n.) U + A U = F on (0, T] with weight rho.

    oscillation None selects the averaged (homogenised) coefficients.
    ``source(t, x)`` must return the two components as an array (2, len(x)).
    ``initial`` is an optional spatial function for the starting trace.
    """

    field: MaterialField
    oscillation: int | None
    source: SourceFn
    rho: float = 1.0
    t_final: float = 1.0
    initial: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.oscillation is not None and self.oscillation < 1:
            raise ValueError("oscillation must be a positive integer or None")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        verify_positivity(self.field, self.rho)

    def coercivity(self) -> float:
        return verify_positivity(self.field, self.rho)

    def coefficient_breakpoints(self) -> np.ndarray:
        if self.oscillation is None:
            return np.array([0.0, 1.0])
        return oscillatory_breakpoints(self.field.breakpoints, self.oscillation)


@dataclass(frozen=True)
class StaticProblem:
    """Data of (M(n.) + A) U = (f, g) on the unit interval, M coercive."""

    field: MatrixField
    oscillation: int | None
    rhs: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.oscillation is not None and self.oscillation < 1:
            raise ValueError("oscillation must be a positive integer or None")
        self.field.require_coercive()

    def coefficient_breakpoints(self) -> np.ndarray:
        if self.oscillation is None:
            return np.array([0.0, 1.0])
        return oscillatory_breakpoints(self.field.breakpoints, self.oscillation)
