r"""Discrete Gelfand decomposition of step functions.

Functions on (0, N) that are constant on cells of width 1/P are split into N
fibers on the unit interval: fiber k carries the quasimomentum theta_k =
2 pi k / N and collects

    (V f)_k(y) = N^{-1/2} sum_{m=0}^{N-1} f(y + m) e^{-i theta_k m}.

The map is unitary from L^2(0, N) onto the stack of N unit-interval spaces,
and on the cell grid it is a plain DFT across the period index.  The
companion scaling map T f = N^{-1/2} f(./N) moves problems posed on the unit
interval with N-fold oscillation onto (0, N); V after T is the decomposition
the fiber analysis diagonalises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepFunctionN:
    """Cell-constant function on (0, N): values[m*P + j] on [m + j/P, m + (j+1)/P)."""

    periods: int
    cells_per_period: int
    values: np.ndarray

    def __post_init__(self):
        if self.periods < 1 or self.cells_per_period < 1:
            raise ValueError("periods and cells_per_period must be positive")
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.periods * self.cells_per_period,):
            raise ValueError(
                f"expected {self.periods * self.cells_per_period} cell values, got {v.shape}")
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        """L^2(0, N) norm."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) / self.cells_per_period))


@dataclass(frozen=True)
class FiberStack:
    """One unit-interval step function per quasimomentum, values[k, j]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2:
            raise ValueError("fiber stack must be a (fibers, cells) array")
        object.__setattr__(self, "values", v)

    @property
    def fiber_count(self) -> int:
        return self.values.shape[0]

    @property
    def cells_per_period(self) -> int:
        return self.values.shape[1]

    def thetas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.fiber_count) / self.fiber_count

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) / self.cells_per_period))


def gelfand_transform(f: StepFunctionN) -> FiberStack:
    """Fiber decomposition; a DFT over the period index, cell by cell."""
    grid = f.values.reshape(f.periods, f.cells_per_period)
    return FiberStack(np.fft.fft(grid, axis=0) / np.sqrt(f.periods))


def inverse_gelfand(stack: FiberStack) -> StepFunctionN:
    """Adjoint (= inverse) of gelfand_transform."""
    n = stack.fiber_count
    grid = np.fft.ifft(stack.values, axis=0) * np.sqrt(n)
    return StepFunctionN(n, stack.cells_per_period, grid.ravel())


def scaling_transform(unit_values: np.ndarray, periods: int) -> StepFunctionN:
    """T f = N^{-1/2} f(./N) for a cell-constant f on (0, 1).

    unit_values lists f on N*P equal cells of (0, 1); the result lives on
    (0, N) with the same cell values compressed by 1/sqrt(N), which keeps the
    map unitary.
    """
    v = np.asarray(unit_values, dtype=complex)
    if periods < 1 or v.ndim != 1 or v.size % periods:
        raise ValueError("unit cell count must be a positive multiple of periods")
    return StepFunctionN(periods, v.size // periods, v / np.sqrt(periods))


def inverse_scaling(f: StepFunctionN) -> np.ndarray:
    """Unit-interval cell values of T^{-1} f."""
    return f.values * np.sqrt(f.periods)


def roots_of_unity_sum(periods: int, shift: int) -> complex:
    """sum_l e^{-2 pi i shift l / periods}, evaluated term by term.

    Only the cancelling case is allowed (shift not divisible by periods);
    the return value is the accumulated roundoff around 0.
    """
    if periods < 1:
        raise ValueError("periods must be positive")
    if shift % periods == 0:
        raise ValueError("shift divisible by periods does not cancel")
    ls = np.arange(periods)
    return complex(np.sum(np.exp(-2j * np.pi * shift * ls / periods)))
