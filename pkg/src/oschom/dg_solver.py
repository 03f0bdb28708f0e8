r"""Discontinuous Galerkin time stepping for the two-component system.

On each slab (t_{m-1}, t_m] the solution is a polynomial of degree q in time
with values in the periodic cG space, represented in the Lagrange basis at
the slab's own weighted Gauss-Radau nodes.  Testing the equation

    d/dt M0 U + M1 U + A U = F

with the same basis under the weighted slab quadrature Q_m, and adding the
upwind coupling <M0 [U]_{m-1}, Phi(t_{m-1}+)>, gives one linear solve per
slab for the stacked node values:

    sum_j [ w_i Dt_{ij} M0h + delta_{ij} w_i (M1h + Ah)
            + ell_i(0) ell_j(0) M0h ] U_j
        = w_i F_i + ell_i(0) M0h u_in,        w_i = (tau/2) omega_i.

Dt is the nodal differentiation matrix and ell(0) the basis values at the
slab start.  Because the rightmost quadrature node sits exactly at tau, the
outgoing trace is the last node value and feeds the next slab directly.  The
system matrix depends on the slab only through tau, so uniform partitions
factorise once and reuse the LU across all slabs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import lagrange
from .coefficients import EvolutionaryProblem
from .fem_space import (AssembledOperators, PeriodicCgSpace, assemble_load,
                        assemble_load_pair, operators_for_problem)
from .quadrature import (QuadratureRule, TimePartition, _tau_key,
                         gauss_radau_weighted)


@dataclass
class SlabSystem:
    """One slab's linear system, kept for inspection and testing."""

    matrix: scipy.sparse.csc_matrix
    rhs: np.ndarray
    rule: QuadratureRule
    t_start: float
    incoming_trace: np.ndarray


@dataclass
class DiscreteSolution:
    """Space-time Galerkin solution; coeffs[m, i] is the state at node i of slab m."""

    partition: TimePartition
    space: PeriodicCgSpace
    time_degree: int
    rho: float
    rules: list[QuadratureRule]
    coeffs: np.ndarray
    initial_trace: np.ndarray

    def slab_of(self, t: float) -> int:
        e = self.partition.endpoints
        if t < 0.0 or t > e[-1] + 1e-12 * e[-1]:
            raise ValueError(f"time {t} outside [0, {e[-1]}]")
        if t <= 0.0:
            return 0
        return min(int(np.searchsorted(e, min(t, e[-1]), side="left")) - 1,
                   self.partition.slab_count - 1)

    def profile(self, t: float) -> np.ndarray:
        """Stacked dof vector at time t (left limits at slab endpoints, right limit at 0)."""
        m = self.slab_of(t)
        s = t - self.partition.endpoints[m]
        ell = lagrange.evaluation_matrix(self.rules[m].nodes, np.array([s]))[0]
        return ell @ self.coeffs[m]

    def right_limit(self, m: int) -> np.ndarray:
        """Value of the slab-m polynomial at the slab start t_m^+."""
        ell = lagrange.evaluation_matrix(self.rules[m].nodes, np.array([0.0]))[0]
        return ell @ self.coeffs[m]

    def jump(self, m: int) -> np.ndarray:
        """[U]_m at the start of slab m (against initial trace for m = 0)."""
        before = self.initial_trace if m == 0 else self.coeffs[m - 1, -1]
        return self.right_limit(m) - before


class _TimeStructures:
    """Per-tau pieces of the slab system."""

    def __init__(self, rule: QuadratureRule):
        self.rule = rule
        nodes = rule.nodes
        self.diff = lagrange.differentiation_matrix(nodes)
        self.ell0 = lagrange.evaluation_matrix(nodes, np.array([0.0]))[0]
        self.wq = 0.5 * rule.tau * rule.weights
        self.c_time = self.wq[:, None] * self.diff + np.outer(self.ell0, self.ell0)


def _slab_matrix(ts: _TimeStructures, ops: AssembledOperators) -> scipy.sparse.csc_matrix:
    zero_order = ops.m1 + ops.a
    mat = scipy.sparse.kron(ts.c_time, ops.m0, format="csc")
    mat = mat + scipy.sparse.kron(np.diag(ts.wq), zero_order, format="csc")
    return mat.tocsc()


def _slab_rhs(ts: _TimeStructures, ops: AssembledOperators,
              problem: EvolutionaryProblem, t_start: float,
              incoming) -> np.ndarray:
    n_nodes = ts.rule.nodes.size
    rhs = np.empty((n_nodes, ops.state_size), dtype=complex)
    for i, s in enumerate(ts.rule.nodes):
        t = t_start + s
        rhs[i] = ts.wq[i] * assemble_load_pair(ops.space, lambda xs: problem.source(t, xs))
    rhs += np.outer(ts.ell0, ops.m0 @ incoming)
    return rhs.ravel()


def initial_trace(problem: EvolutionaryProblem, space: PeriodicCgSpace,
                  ops: AssembledOperators | None = None) -> np.ndarray:
    """L^2 projection of the starting state onto the discrete space."""
    if problem.initial is None:
        return np.zeros(2 * space.dof_count, dtype=complex)
    if ops is None:
        ops = operators_for_problem(problem, space)
    lu = scipy.sparse.linalg.splu(ops.mass.tocsc())
    out = np.empty(2 * space.dof_count, dtype=complex)
    n = space.dof_count
    for comp in range(2):
        load = assemble_load(space, lambda xs: np.asarray(problem.initial(xs))[comp])
        out[comp * n:(comp + 1) * n] = lu.solve(load)
    return out


def assemble_slab(problem: EvolutionaryProblem, partition: TimePartition,
                  space: PeriodicCgSpace, q: int, slab_index: int,
                  incoming_trace: np.ndarray,
                  ops: AssembledOperators | None = None) -> SlabSystem:
    """Materialise the slab system; the marching loop uses the same pieces."""
    if ops is None:
        ops = operators_for_problem(problem, space)
    tau = _tau_key(float(partition.lengths()[slab_index]))
    rule = gauss_radau_weighted(q, tau, problem.rho)
    ts = _TimeStructures(rule)
    t_start = float(partition.endpoints[slab_index])
    return SlabSystem(matrix=_slab_matrix(ts, ops),
                      rhs=_slab_rhs(ts, ops, problem, t_start, incoming_trace),
                      rule=rule, t_start=t_start,
                      incoming_trace=np.asarray(incoming_trace, dtype=complex))


def iter_slab_solutions(problem: EvolutionaryProblem, partition: TimePartition,
                        space: PeriodicCgSpace, q: int,
                        ops: AssembledOperators | None = None):
    """March through the slabs, yielding (m, t_start, rule, node_states).

    node_states has shape (q+1, 2n) and is freshly owned by the consumer;
    nothing but the outgoing trace is retained, so arbitrarily fine
    partitions stream in bounded memory.
    """
    if q < 0:
        raise ValueError("time degree q must be >= 0")
    if ops is None:
        ops = operators_for_problem(problem, space)
    factorised: dict[float, tuple[_TimeStructures, object]] = {}
    incoming = initial_trace(problem, space, ops)
    endpoints = partition.endpoints
    for m, tau_raw in enumerate(partition.lengths()):
        tau = _tau_key(float(tau_raw))
        if tau not in factorised:
            ts = _TimeStructures(gauss_radau_weighted(q, tau, problem.rho))
            try:
                lu = scipy.sparse.linalg.splu(_slab_matrix(ts, ops))
            except RuntimeError as err:
                raise RuntimeError(f"singular slab system at slab {m} "
                                   f"(tau={tau}, rho={problem.rho}): {err}") from None
            factorised[tau] = (ts, lu)
        ts, lu = factorised[tau]
        rhs = _slab_rhs(ts, ops, problem, float(endpoints[m]), incoming)
        states = lu.solve(rhs).reshape(q + 1, ops.state_size)
        if not np.all(np.isfinite(states)):
            raise RuntimeError(f"non-finite slab solution at slab {m}")
        incoming = states[-1]
        yield m, float(endpoints[m]), ts.rule, states


def solve(problem: EvolutionaryProblem, partition: TimePartition,
          space: PeriodicCgSpace, q: int,
          ops: AssembledOperators | None = None) -> DiscreteSolution:
    """Solve the evolutionary problem, storing every slab."""
    if ops is None:
        ops = operators_for_problem(problem, space)
    rules: list[QuadratureRule] = []
    coeffs = np.empty((partition.slab_count, q + 1, ops.state_size), dtype=complex)
    for m, _t0, rule, states in iter_slab_solutions(problem, partition, space, q, ops):
        rules.append(rule)
        coeffs[m] = states
    return DiscreteSolution(partition=partition, space=space, time_degree=q,
                            rho=problem.rho, rules=rules, coeffs=coeffs,
                            initial_trace=initial_trace(problem, space, ops))


def evaluate_solution(sol: DiscreteSolution, t: float, xs) -> np.ndarray:
    """Both solution components at time t and positions xs, shape (2, len(xs))."""
    coeff = sol.profile(t)
    eval_mat = sol.space.evaluation_matrix(xs)
    n = sol.space.dof_count
    return np.vstack((eval_mat @ coeff[:n], eval_mat @ coeff[n:]))


def variational_residual(sol: DiscreteSolution, problem: EvolutionaryProblem,
                         slab_index: int,
                         ops: AssembledOperators | None = None) -> float:
    """Relative residual of the slab equations, re-derived from the pieces.

    Rebuilds the time coupling from the quadrature rule instead of reusing
    the assembled slab matrix, so a bookkeeping bug in either path shows up.
    """
    if ops is None:
        ops = operators_for_problem(problem, sol.space)
    ts = _TimeStructures(sol.rules[slab_index])
    states = sol.coeffs[slab_index]
    incoming = (sol.initial_trace if slab_index == 0
                else sol.coeffs[slab_index - 1, -1])
    t_start = float(sol.partition.endpoints[slab_index])
    n_nodes = ts.rule.nodes.size
    residual = np.empty((n_nodes, ops.state_size), dtype=complex)
    m0_states = (ops.m0 @ states.T).T
    for i in range(n_nodes):
        t = t_start + ts.rule.nodes[i]
        load = assemble_load_pair(ops.space, lambda xs: problem.source(t, xs))
        acc = ts.wq[i] * (ts.diff[i] @ m0_states + (ops.m1 + ops.a) @ states[i] - load)
        acc += ts.ell0[i] * (ops.m0 @ (ts.ell0 @ states - incoming))
        residual[i] = acc
    rhs = _slab_rhs(ts, ops, problem, t_start, incoming)
    scale = np.linalg.norm(rhs)
    return float(np.linalg.norm(residual.ravel()) / (scale if scale > 0 else 1.0))


def save_solution_csv(sol: DiscreteSolution, path, times, xs) -> None:
    """Snapshot table t, x, Re/Im of both components."""
    xs = np.asarray(xs, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,re_u,im_u,re_v,im_v\n")
        for t in times:
            vals = evaluate_solution(sol, float(t), xs)
            for j, x in enumerate(xs):
                u, v = vals[0, j], vals[1, j]
                fh.write(f"{t:.12g},{x:.12g},{u.real:.12g},{u.imag:.12g},"
                         f"{v.real:.12g},{v.imag:.12g}\n")


def save_coefficients(sol: DiscreteSolution, path) -> None:
    """Binary dump of the node states plus enough metadata to rebuild."""
    node_matrix = np.array([r.nodes for r in sol.rules])
    np.savez(path,
             endpoints=sol.partition.endpoints,
             mesh_nodes=sol.space.partition.nodes,
             space_degree=sol.space.degree,
             time_degree=sol.time_degree,
             rho=sol.rho,
             slab_nodes=node_matrix,
             coeffs=sol.coeffs,
             initial_trace=sol.initial_trace)
