"""Periodic continuous Galerkin space of degree p on the unit circle.

Nodal Lagrange elements at Gauss-Lobatto points, with the rightmost node of
the last cell identified with the leftmost node of the first; K cells of
degree p give exactly K*p degrees of freedom.  Coefficient fields are
piecewise constant, so weighted mass matrices are integrated exactly by
splitting each cell at the coefficient breakpoints and applying Gauss
quadrature per sub-interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from . import lagrange
from .coefficients import (EvolutionaryProblem, MaterialField, averaged_coefficients,
                           evaluate_oscillatory, oscillatory_breakpoints)


@dataclass(frozen=True)
class SpacePartition:
    """Strictly increasing mesh nodes 0 = x_0 < ... < x_K = 1."""

    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ValueError("a periodic mesh needs at least two cells")
        if abs(x[0]) > 0 or abs(x[-1] - 1.0) > 0:
            raise ValueError("mesh must cover [0, 1]")
        if not np.all(np.diff(x) > 0):
            raise ValueError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, cell_count: int) -> "SpacePartition":
        if cell_count < 2:
            raise ValueError("need at least two cells")
        return cls(np.linspace(0.0, 1.0, cell_count + 1))

    @property
    def cell_count(self) -> int:
        return self.nodes.size - 1

    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)


class PeriodicCgSpace:
    """Degree-p nodal Lagrange space on a periodic mesh."""

    def __init__(self, partition: SpacePartition, degree: int):
        if degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.partition = partition
        self.degree = degree
        self.dof_count = partition.cell_count * degree
        self.ref_nodes = lagrange.gauss_lobatto(degree + 1)
        k = np.arange(partition.cell_count)
        dofs = k[:, None] * degree + np.arange(degree + 1)[None, :]
        self.cell_dof_table = dofs % self.dof_count

    def cell_dofs(self, k: int) -> np.ndarray:
        return self.cell_dof_table[k]

    def node_coordinates(self) -> np.ndarray:
        """Physical position of each global degree of freedom."""
        x = np.empty(self.dof_count)
        nodes = self.partition.nodes
        widths = self.partition.widths()
        for k in range(self.partition.cell_count):
            sel = self.cell_dof_table[k, : self.degree]
            x[sel] = nodes[k] + widths[k] * self.ref_nodes[: self.degree]
        return x

    def locate(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell index and local coordinate of each point of [0, 1]."""
        xs = np.asarray(xs, dtype=float)
        if np.any(xs < 0.0) or np.any(xs > 1.0):
            raise ValueError("evaluation points must lie in [0, 1]")
        nodes = self.partition.nodes
        cells = np.clip(np.searchsorted(nodes, xs, side="right") - 1, 0,
                        self.partition.cell_count - 1)
        local = (xs - nodes[cells]) / self.partition.widths()[cells]
        return cells, np.clip(local, 0.0, 1.0)

    def evaluation_matrix(self, xs, derivative: bool = False) -> scipy.sparse.csr_matrix:
        """Sparse E with (E @ coeffs)[i] = u^{(d)}(xs[i]), d = 0 or 1."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        cells, local = self.locate(xs)
        vals = lagrange.evaluation_matrix(self.ref_nodes, local)
        if derivative:
            vals = vals @ lagrange.differentiation_matrix(self.ref_nodes)
            vals /= self.partition.widths()[cells][:, None]
        rows = np.repeat(np.arange(xs.size), self.degree + 1)
        cols = self.cell_dof_table[cells].ravel()
        mat = scipy.sparse.coo_matrix((vals.ravel(), (rows, cols)),
                                      shape=(xs.size, self.dof_count))
        return mat.tocsr()


def build_space(partition: SpacePartition, degree: int) -> PeriodicCgSpace:
    return PeriodicCgSpace(partition, degree)


def _reference_blocks(space: PeriodicCgSpace, quad_points: int):
    """Reference Gauss data: points, weights, basis values at the points."""
    xg, wg = lagrange.gauss_legendre(quad_points)
    phi = lagrange.evaluation_matrix(space.ref_nodes, xg)
    return xg, wg, phi


def assemble_scalar_mass(space: PeriodicCgSpace, cut_points, value_at) -> scipy.sparse.csr_matrix:
    """Mass matrix with a piecewise constant scalar weight.

    cut_points lists every discontinuity of the weight in [0, 1]; cells are
    split there so each Gauss panel sees a constant value, which value_at
    reports at the panel midpoint.  Quadrature uses p+1 points per panel and
    is exact for the degree-2p integrand.
    """
    p = space.degree
    K = space.partition.cell_count
    xg, wg, phi = _reference_blocks(space, p + 1)
    ref_block = phi.T @ (phi * wg[:, None])
    cuts = np.asarray(cut_points, dtype=float)
    nodes = space.partition.nodes
    widths = space.partition.widths()
    blocks = np.empty((K, p + 1, p + 1), dtype=complex)
    for k in range(K):
        xa, xb = nodes[k], nodes[k + 1]
        inner = cuts[(cuts > xa + 1e-14) & (cuts < xb - 1e-14)]
        if inner.size == 0:
            blocks[k] = value_at(0.5 * (xa + xb)) * widths[k] * ref_block
            continue
        acc = np.zeros((p + 1, p + 1), dtype=complex)
        edges = np.concatenate(([xa], inner, [xb]))
        for a, b in zip(edges[:-1], edges[1:]):
            pts = a + (b - a) * xg
            local = (pts - xa) / widths[k]
            phi_loc = lagrange.evaluation_matrix(space.ref_nodes, local)
            panel = phi_loc.T @ (phi_loc * wg[:, None]) * (b - a)
            acc += value_at(0.5 * (a + b)) * panel
        blocks[k] = acc
    rows = np.repeat(space.cell_dof_table, p + 1, axis=1).ravel()
    cols = np.tile(space.cell_dof_table, (1, p + 1)).ravel()
    mat = scipy.sparse.coo_matrix((blocks.ravel(), (rows, cols)),
                                  shape=(space.dof_count, space.dof_count))
    return mat.tocsr()


def assemble_mass(space: PeriodicCgSpace) -> scipy.sparse.csr_matrix:
    """Plain L^2 mass matrix."""
    return assemble_scalar_mass(space, (), lambda x: 1.0 + 0.0j)


def assemble_weighted_mass(space: PeriodicCgSpace, field: MaterialField,
                           oscillation: int | None, matrix_index: int,
                           entry: tuple[int, int]) -> scipy.sparse.csr_matrix:
    """Mass matrix weighted by one scalar entry of M0 or M1.

    matrix_index picks M0 (0) or M1 (1); entry is the (row, col) pair of the
    2x2 coefficient.  oscillation None uses the homogenised average.
    """
    a, b = entry
    if oscillation is None:
        avg = averaged_coefficients(field)[matrix_index][a, b]
        return assemble_scalar_mass(space, (), lambda x: avg)
    cuts = oscillatory_breakpoints(field.breakpoints, oscillation)

    def value_at(x: float) -> complex:
        m0, m1 = evaluate_oscillatory(field, oscillation, np.array([x]))
        return complex((m0 if matrix_index == 0 else m1)[0, a, b])

    return assemble_scalar_mass(space, cuts, value_at)


def assemble_derivative(space: PeriodicCgSpace) -> scipy.sparse.csr_matrix:
    """D with D[i, j] = int phi_j' phi_i dx; skew-symmetric on the circle."""
    p = space.degree
    xg, wg, phi = _reference_blocks(space, p + 1)
    dphi = phi @ lagrange.differentiation_matrix(space.ref_nodes)
    ref_block = phi.T @ (dphi * wg[:, None])  # h and 1/h cancel
    rows = np.repeat(space.cell_dof_table, p + 1, axis=1).ravel()
    cols = np.tile(space.cell_dof_table, (1, p + 1)).ravel()
    data = np.tile(ref_block.ravel(), space.partition.cell_count)
    mat = scipy.sparse.coo_matrix((data, (rows, cols)),
                                  shape=(space.dof_count, space.dof_count))
    return mat.tocsr()


def assemble_load(space: PeriodicCgSpace, g) -> np.ndarray:
    """Load vector int g phi_i dx with p+2 Gauss points per cell.

    g is evaluated pointwise and must accept an array of positions.
    """
    p = space.degree
    K = space.partition.cell_count
    xg, wg, phi = _reference_blocks(space, p + 2)
    nodes = space.partition.nodes
    widths = space.partition.widths()
    points = nodes[:-1, None] + widths[:, None] * xg[None, :]
    vals = np.asarray(g(points.ravel()), dtype=complex).reshape(K, xg.size)
    local = widths[:, None] * ((vals * wg[None, :]) @ phi)
    out = np.zeros(space.dof_count, dtype=complex)
    np.add.at(out, space.cell_dof_table, local)
    return out


def assemble_load_pair(space: PeriodicCgSpace, g) -> np.ndarray:
    """Stacked load vector for a two-component source, one quadrature pass.

    g(xs) must return shape (2, len(xs)); the result has length 2n with the
    first component first.
    """
    p = space.degree
    K = space.partition.cell_count
    xg, wg, phi = _reference_blocks(space, p + 2)
    nodes = space.partition.nodes
    widths = space.partition.widths()
    points = nodes[:-1, None] + widths[:, None] * xg[None, :]
    vals = np.asarray(g(points.ravel()), dtype=complex)
    if vals.shape != (2, points.size):
        raise ValueError(f"source must return shape (2, {points.size}), got {vals.shape}")
    out = np.zeros(2 * space.dof_count, dtype=complex)
    for comp in range(2):
        local = widths[:, None] * ((vals[comp].reshape(K, xg.size) * wg[None, :]) @ phi)
        np.add.at(out[comp * space.dof_count:(comp + 1) * space.dof_count],
                  space.cell_dof_table, local)
    return out


@dataclass
class AssembledOperators:
    """Galerkin matrices of the two-component system on the periodic space.

    m0 and m1 are the 2x2-block weighted mass matrices (size 2n), a is the
    skew block [[0, D], [D, 0]], mass the scalar n x n mass matrix.
    """

    space: PeriodicCgSpace
    m0: scipy.sparse.csr_matrix
    m1: scipy.sparse.csr_matrix
    a: scipy.sparse.csr_matrix
    mass: scipy.sparse.csr_matrix

    @property
    def state_size(self) -> int:
        return 2 * self.space.dof_count

    def block_mass(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.block_diag((self.mass, self.mass)).tocsr()


def assemble_operator_blocks(space: PeriodicCgSpace, field: MaterialField,
                             oscillation: int | None) -> AssembledOperators:
    """All matrices needed by the time stepper for one material."""
    if oscillation is None:
        cuts = np.array([0.0, 1.0])
        m0_avg, m1_avg = averaged_coefficients(field)
        matrix_at = lambda x: (m0_avg, m1_avg)
    else:
        cuts = oscillatory_breakpoints(field.breakpoints, oscillation)

        def matrix_at(x: float):
            m0, m1 = evaluate_oscillatory(field, oscillation, np.array([x]))
            return m0[0], m1[0]

    cache: dict[tuple[int, int, int], scipy.sparse.csr_matrix] = {}

    def weighted(which: int, a: int, b: int) -> scipy.sparse.csr_matrix:
        key = (which, a, b)
        if key not in cache:
            cache[key] = assemble_scalar_mass(
                space, cuts, lambda x: complex(matrix_at(x)[which][a, b]))
        return cache[key]

    m0 = scipy.sparse.bmat([[weighted(0, 0, 0), weighted(0, 0, 1)],
                            [weighted(0, 1, 0), weighted(0, 1, 1)]]).tocsr()
    m1 = scipy.sparse.bmat([[weighted(1, 0, 0), weighted(1, 0, 1)],
                            [weighted(1, 1, 0), weighted(1, 1, 1)]]).tocsr()
    d = assemble_derivative(space)
    a_blk = scipy.sparse.bmat([[None, d], [d, None]]).tocsr()
    return AssembledOperators(space=space, m0=m0, m1=m1, a=a_blk,
                              mass=assemble_mass(space))


def operators_for_problem(problem: EvolutionaryProblem, space: PeriodicCgSpace) -> AssembledOperators:
    return assemble_operator_blocks(space, problem.field, problem.oscillation)


def save_matrix_coo(matrix, path) -> None:
    """Text export 'row col real imag', one nonzero per line."""
    coo = scipy.sparse.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# shape {coo.shape[0]} {coo.shape[1]} nnz {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
