r"""Fiber operators of the oscillatory material and resolvent-gap bounds.

The decomposition of gelfand.py turns multiplication by M(n x) plus the skew
derivative block A on the unit circle into a direct sum over quasimomenta
theta_k = 2 pi k / n of operators

    M(y) + n * [[0, d_theta], [d_theta, 0]]

acting on unit-interval functions with f(1) = e^{i theta} f(0).  In the
orthonormal wave basis e^{i (2 pi m + theta) y}, |m| <= L, multiplication by
a piecewise constant field is a block Toeplitz matrix of its exact Fourier
coefficients and the derivative is diagonal, so each fiber truncates to a
dense 2(2L+1) matrix.  The quantity of interest is the operator-norm gap
between the resolvent of the oscillatory fiber and the resolvent of the
averaged (homogenised) fiber, which decays like 1/n with the explicit
constant checked by homogenisation_bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .coefficients import (MatrixField, StaticProblem, oscillatory_breakpoints,
                           piece_index)
from .fem_space import (PeriodicCgSpace, assemble_derivative, assemble_load_pair,
                        assemble_scalar_mass)


class PowerIterationError(RuntimeError):
    """Power iteration failed to settle within the iteration budget."""


@dataclass(frozen=True)
class FiberOperator:
    """Dense truncation of one fiber at quasimomentum theta."""

    scale: int
    fiber_index: int
    mode_cutoff: int
    theta: float
    modes: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class BoundReport:
    """Measured resolvent gap for one fiber against the a priori bound."""

    scale: int
    fiber_index: int
    mode_cutoff: int
    computed_norm: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.computed_norm


def fourier_coefficients(field: MatrixField, r_max: int) -> np.ndarray:
    """Exact unit-cell Fourier coefficients c_r, r = -r_max..r_max.

    Entry [r + r_max] holds the 2x2 matrix int_0^1 M(y) e^{-2 pi i r y} dy,
    evaluated in closed form piece by piece.
    """
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    b = field.breakpoints
    out = np.zeros((2 * r_max + 1, 2, 2), dtype=complex)
    out[r_max] = field.average()
    rs = np.arange(1, r_max + 1)
    if rs.size:
        # (e^{-2 pi i r b_{j+1}} - e^{-2 pi i r b_j}) / (-2 pi i r), all r at once
        phases = np.exp(-2j * np.pi * np.outer(rs, b))
        steps = (phases[:, 1:] - phases[:, :-1]) / (-2j * np.pi * rs)[:, None]
        coeffs = np.einsum("rp,pij->rij", steps, field.pieces)
        out[r_max + rs] = coeffs
        # c_{-r} of the pieces: conjugate phases, same values
        phases_m = np.exp(2j * np.pi * np.outer(rs, b))
        steps_m = (phases_m[:, 1:] - phases_m[:, :-1]) / (2j * np.pi * rs)[:, None]
        out[r_max - rs] = np.einsum("rp,pij->rij", steps_m, field.pieces)
    return out


def multiplication_matrix(field: MatrixField, mode_cutoff: int) -> np.ndarray:
    """Block Toeplitz matrix of M(y) in the truncated wave basis."""
    L = mode_cutoff
    coeffs = fourier_coefficients(field, 2 * L)
    modes = np.arange(-L, L + 1)
    shift = modes[:, None] - modes[None, :] + 2 * L
    blocks = [[coeffs[shift, a, b] for b in range(2)] for a in range(2)]
    return np.block(blocks)


def derivative_multipliers(theta: float, mode_cutoff: int) -> np.ndarray:
    """Diagonal symbols i (2 pi m + theta) of d_theta in the wave basis."""
    modes = np.arange(-mode_cutoff, mode_cutoff + 1)
    return 1j * (2.0 * np.pi * modes + theta)


def build_fiber(field: MatrixField, scale: int, fiber_index: int,
                mode_cutoff: int) -> FiberOperator:
    """Truncated fiber operator M(y) + scale * A_theta at theta_k = 2 pi k / scale."""
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    if not 0 <= fiber_index < scale:
        raise ValueError(f"fiber index {fiber_index} outside 0..{scale - 1}")
    field.require_coercive()
    theta = 2.0 * np.pi * fiber_index / scale
    d = scale * derivative_multipliers(theta, mode_cutoff)
    width = d.size
    mat = multiplication_matrix(field, mode_cutoff)
    mat[:width, width:] += np.diag(d)
    mat[width:, :width] += np.diag(d)
    modes = np.arange(-mode_cutoff, mode_cutoff + 1)
    return FiberOperator(scale=scale, fiber_index=fiber_index,
                         mode_cutoff=mode_cutoff, theta=theta,
                         modes=modes, matrix=mat)


def operator_norm(matrix: np.ndarray, rng: np.random.Generator | None = None,
                  tol: float = 1e-8, max_iter: int = 2000, block: int = 4) -> float:
    """Largest singular value by block power iteration on X* X.

    A random complex block is iterated and re-orthogonalised; the estimate is
    the largest Ritz value of X* X on the block.  The block makes clustered
    top singular values harmless: convergence is governed by the gap to the
    first value outside the block, not between the top two.  Raises
    PowerIterationError when the estimate has not settled.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n = matrix.shape[1]
    b = min(block, n)
    vecs = rng.normal(size=(n, b)) + 1j * rng.normal(size=(n, b))
    vecs, _ = np.linalg.qr(vecs)
    sigma = sigma_prev = np.inf
    for _ in range(max_iter):
        z = matrix.conj().T @ (matrix @ vecs)
        if np.linalg.norm(z) < 1e-300:
            return 0.0
        ritz = np.linalg.eigvalsh(vecs.conj().T @ z)
        sigma = float(np.sqrt(max(ritz[-1], 0.0)))
        vecs, _ = np.linalg.qr(z)
        if abs(sigma - sigma_prev) <= tol * max(sigma, 1e-300):
            return sigma
        sigma_prev = sigma
    raise PowerIterationError(
        f"singular value estimate still moving after {max_iter} iterations "
        f"(last {sigma_prev:.6e} -> {sigma:.6e})")


def homogenisation_bound(field: MatrixField, scale: int) -> float:
    """A priori resolvent-gap bound (2 (1 + |M|_inf / c)^2 + 1) / (pi * scale)."""
    c = field.require_coercive()
    ratio = field.sup_norm() / c
    return (2.0 * (1.0 + ratio) ** 2 + 1.0) / (np.pi * scale)


def averaged_field(field: MatrixField) -> MatrixField:
    return MatrixField(np.array([0.0, 1.0]), field.average()[None, :, :])


def resolvent_difference(field: MatrixField, scale: int, fiber_index: int,
                         mode_cutoff: int) -> np.ndarray:
    """inv(oscillatory fiber) - inv(averaged fiber) in the truncated basis."""
    rough = build_fiber(field, scale, fiber_index, mode_cutoff).matrix
    avg = build_fiber(averaged_field(field), scale, fiber_index, mode_cutoff).matrix
    return np.linalg.inv(rough) - np.linalg.inv(avg)


def resolvent_difference_norm(field: MatrixField, scale: int, fiber_index: int,
                              mode_cutoff: int,
                              rng: np.random.Generator | None = None,
                              truncation_rtol: float = 0.01) -> float:
    """Operator norm of the resolvent gap, with a truncation sanity check.

    The norm is computed at mode_cutoff and at twice that cutoff; the two
    values must agree within truncation_rtol, and the finer one is returned.
    """
    coarse = operator_norm(resolvent_difference(field, scale, fiber_index,
                                                mode_cutoff), rng)
    fine = operator_norm(resolvent_difference(field, scale, fiber_index,
                                              2 * mode_cutoff), rng)
    ref = max(fine, 1e-300)
    if abs(fine - coarse) > truncation_rtol * ref and fine > 1e-12:
        raise RuntimeError(
            f"mode truncation not converged at L={mode_cutoff}: "
            f"{coarse:.6e} vs {fine:.6e}")
    return fine


def check_fiber_bound(field: MatrixField, scale: int, fiber_index: int,
                      mode_cutoff: int,
                      rng: np.random.Generator | None = None) -> BoundReport:
    """Measured gap against the a priori bound for one fiber."""
    norm = resolvent_difference_norm(field, scale, fiber_index, mode_cutoff, rng)
    return BoundReport(scale=scale, fiber_index=fiber_index,
                       mode_cutoff=mode_cutoff, computed_norm=norm,
                       bound=homogenisation_bound(field, scale))


@dataclass(frozen=True)
class DynamicBoundSample:
    """One frequency sample of the time-dependent resolvent-gap check."""

    xi: float
    gap_norm: float
    scaled_value: float  # scale * gap * |i xi + rho|^{-2}


@dataclass(frozen=True)
class DynamicBoundReport:
    scale: int
    fiber_index: int
    mode_cutoff: int
    rho: float
    samples: tuple[DynamicBoundSample, ...]

    @property
    def kappa(self) -> float:
        """Empirical constant sup over frequency samples."""
        return max(s.scaled_value for s in self.samples)


def dynamic_bound_check(m0_field: MatrixField, m1_field: MatrixField, rho: float,
                        xi_samples, scale: int, fiber_index: int,
                        mode_cutoff: int,
                        rng: np.random.Generator | None = None) -> DynamicBoundReport:
    """Frequency-sliced check of the evolutionary resolvent gap.

    For each frequency xi the composite field (i xi + rho) M0 + M1 is itself
    coercive with the same constant, so the static gap machinery applies; the
    evolutionary estimate weights the gap by |i xi + rho|^{-2}.
    """
    if rho <= 0:
        raise ValueError("the dynamic check needs rho > 0")
    if not np.array_equal(m0_field.breakpoints, m1_field.breakpoints):
        raise ValueError("M0 and M1 must share their breakpoint grid")
    samples = []
    for xi in xi_samples:
        z = 1j * float(xi) + rho
        composite = MatrixField(m0_field.breakpoints,
                                z * m0_field.pieces + m1_field.pieces)
        gap = resolvent_difference_norm(composite, scale, fiber_index,
                                        mode_cutoff, rng)
        samples.append(DynamicBoundSample(
            xi=float(xi), gap_norm=gap,
            scaled_value=scale * gap / abs(z) ** 2))
    return DynamicBoundReport(scale=scale, fiber_index=fiber_index,
                              mode_cutoff=mode_cutoff, rho=rho,
                              samples=tuple(samples))


def static_solve_fem(problem: StaticProblem, space: PeriodicCgSpace) -> np.ndarray:
    """Galerkin solution of (M(n.) + A) U = rhs on the periodic cG space."""
    field = problem.field
    if problem.oscillation is None:
        cuts = np.array([0.0, 1.0])
        avg = field.average()
        value = lambda x, a, b: complex(avg[a, b])
    else:
        cuts = oscillatory_breakpoints(field.breakpoints, problem.oscillation)

        def value(x, a, b):
            y = np.mod(problem.oscillation * x, 1.0)
            return complex(field.pieces[int(piece_index(field.breakpoints, y))][a, b])

    blocks = [[assemble_scalar_mass(space, cuts, lambda x, a=a, b=b: value(x, a, b))
               for b in range(2)] for a in range(2)]
    d = assemble_derivative(space)
    system = scipy.sparse.bmat([[blocks[0][0], blocks[0][1] + d],
                                [blocks[1][0] + d, blocks[1][1]]]).tocsc()
    rhs = assemble_load_pair(space, problem.rhs)
    return scipy.sparse.linalg.spsolve(system, rhs)
