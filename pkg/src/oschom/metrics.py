r"""Error functionals of the space-time scheme and convergence-rate helpers.

Two functionals measure a time-dependent two-component field a:

* sup-type: the largest weighted spatial energy <W(x) a(t), a(t)> over a
  finite set of sample times (slab quadrature nodes and slab endpoints from
  the left), with W the degenerate mass coefficient of the problem;
* quadrature-type: E_Q(a)^2 = e^{2 rho T} sum_m Q_m[a, a] e^{-2 rho t_{m-1}},
  the slab-by-slab weighted space-time L^2 norm.

Spatial integrals run over a composite Gauss grid split at every mesh node
and coefficient breakpoint, so piecewise polynomial integrands are integrated
exactly.  Fields enter as callables t -> (2, nq) sampled on that fixed grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lagrange
from .quadrature import QuadratureRule, TimePartition


@dataclass(frozen=True)
class SpatialQuadrature:
    """Composite Gauss grid on [0, 1]: flat points and weights."""

    points: np.ndarray
    weights: np.ndarray


def spatial_quadrature(breakpoints, points_per_segment: int) -> SpatialQuadrature:
    """Composite rule with the given Gauss order between consecutive breakpoints."""
    b = np.unique(np.concatenate((np.asarray(breakpoints, dtype=float), [0.0, 1.0])))
    if b[0] < -1e-14 or b[-1] > 1.0 + 1e-14:
        raise ValueError("breakpoints must lie inside [0, 1]")
    xg, wg = lagrange.gauss_legendre(points_per_segment)
    lengths = np.diff(b)
    points = (b[:-1, None] + lengths[:, None] * xg[None, :]).ravel()
    weights = (lengths[:, None] * wg[None, :]).ravel()
    return SpatialQuadrature(points=points, weights=weights)


def weighted_energy(values: np.ndarray, quad: SpatialQuadrature,
                    mats: np.ndarray | None = None) -> float:
    """int <W a, a> dx for sampled values (2, nq); W = identity when mats is None."""
    if mats is None:
        dens = np.sum(np.abs(values) ** 2, axis=0)
    else:
        dens = np.real(np.einsum("iq,qij,jq->q", np.conj(values), mats, values))
    return float(np.real(np.dot(quad.weights, dens)))


def error_sup(a_of_t, times, quad: SpatialQuadrature,
              mats: np.ndarray | None = None) -> float:
    """sup-type error over the given sample times."""
    best = 0.0
    for t in times:
        best = max(best, weighted_energy(a_of_t(float(t)), quad, mats))
    return float(np.sqrt(best))


def sup_sample_times(partition: TimePartition, rules: list[QuadratureRule]) -> np.ndarray:
    """All slab quadrature nodes; the right endpoints double as left limits."""
    chunks = [partition.endpoints[m] + rules[m].nodes
              for m in range(partition.slab_count)]
    return np.concatenate(chunks)


def error_q(a_of_t, partition: TimePartition, rho: float,
            rules: list[QuadratureRule], quad: SpatialQuadrature) -> float:
    """Quadrature-type error accumulated slab by slab."""
    t_final = partition.t_final
    acc = 0.0
    for m in range(partition.slab_count):
        t0 = partition.endpoints[m]
        rule = rules[m]
        slab = 0.0
        for s, w in zip(rule.nodes, rule.weights):
            slab += w * weighted_energy(a_of_t(float(t0 + s)), quad, None)
        acc += np.exp(-2.0 * rho * t0) * 0.5 * rule.tau * slab
    return float(np.sqrt(np.exp(2.0 * rho * t_final) * acc))


def convergence_rates(errors) -> list[float]:
    """Dyadic rates log2(e_i / e_{i+1}) between successive refinement levels."""
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0):
        raise ValueError("rates need strictly positive errors")
    return [float(r) for r in np.log2(e[:-1] / e[1:])]


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)),
                            np.log(np.asarray(ys, dtype=float)), 1)[0])


@dataclass(frozen=True)
class LevelErrors:
    """Errors of one refinement level n against both references."""

    n: int
    e_sup_vs_ref: float
    e_q_vs_ref: float
    e_sup_vs_hom: float
    e_q_vs_hom: float


@dataclass
class ErrorReport:
    """Stacked per-level errors plus dyadic rates, Table-style."""

    levels: list[LevelErrors]

    def column(self, name: str) -> list[float]:
        return [getattr(lv, name) for lv in self.levels]

    def rates(self, name: str) -> list[float]:
        return convergence_rates(self.column(name))


_COLUMNS = ("e_sup_vs_ref", "e_q_vs_ref", "e_sup_vs_hom", "e_q_vs_hom")


def _table_rows(report: ErrorReport):
    rates = {c: report.rates(c) for c in _COLUMNS}
    for i, lv in enumerate(report.levels):
        row: list[str] = [str(lv.n)]
        for c in _COLUMNS:
            row.append(f"{getattr(lv, c):.6e}")
            row.append("" if i == 0 else f"{rates[c][i - 1]:.2f}")
        yield row


def error_table_csv(report: ErrorReport, header_notes: tuple[str, ...] = ()) -> str:
    lines = [f"# {note}" for note in header_notes]
    lines.append("n,e_sup_vs_ref,rate,e_q_vs_ref,rate,e_sup_vs_hom,rate,e_q_vs_hom,rate")
    for row in _table_rows(report):
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def error_table_whitespace(report: ErrorReport, header_notes: tuple[str, ...] = ()) -> str:
    """Same table with aligned columns and 'nan' placeholders, for gnuplot."""
    lines = [f"# {note}" for note in header_notes]
    lines.append("# n e_sup_vs_ref rate e_q_vs_ref rate e_sup_vs_hom rate e_q_vs_hom rate")
    for row in _table_rows(report):
        padded = [cell if cell else "nan" for cell in row]
        lines.append(" ".join(f"{cell:>12s}" for cell in padded))
    return "\n".join(lines) + "\n"
