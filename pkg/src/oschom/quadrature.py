r"""Gauss-Radau rules for the weight e^{-2 rho s} on a slab (0, tau].

The time stepping scheme integrates every slab integral against the decaying
exponential weight, so the quadrature has to be Gaussian with respect to that
weight, with the right endpoint tau held fixed (Radau).  The construction is
the classical moment route:

1. weighted moments mu_j = int_0^tau s^j e^{-2 rho s} ds,
2. three-term recurrence coefficients of the orthogonal polynomials from the
   Cholesky factor of the Hankel moment matrix,
3. endpoint modification of the last recurrence coefficient (Golub's trick
   for preassigned nodes),
4. nodes and weights from the symmetric tridiagonal eigenproblem.

Steps 1-3 run in extended precision (mpmath); the moment map is badly
conditioned in floating point whenever 2*rho*tau is small, and extended
precision keeps the final double precision rule exact to rounding.  A rule
with q+1 nodes integrates polynomials up to degree 2q exactly against the
weight.  Weights are scaled so that

    Q[a, b] = (tau / 2) * sum_i omega_i <a(s_i), b(s_i)>,

which for rho = 0 reproduces the textbook right-sided Radau weights.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import mpmath as mp
import numpy as np
import scipy.linalg


class QuadratureConstructionError(RuntimeError):
    """Moment problem too degenerate to produce a usable rule."""


@dataclass(frozen=True)
class TimePartition:
    """Strictly increasing slab endpoints 0 = t_0 < t_1 < ... < t_M."""

    endpoints: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.endpoints, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise ValueError("a partition needs at least one slab")
        if abs(e[0]) > 0:
            raise ValueError("partitions start at t = 0")
        if not np.all(np.diff(e) > 0):
            raise ValueError("slab endpoints must be strictly increasing")
        object.__setattr__(self, "endpoints", e)

    @classmethod
    def uniform(cls, slab_count: int, t_final: float) -> "TimePartition":
        if slab_count < 1 or t_final <= 0:
            raise ValueError("need slab_count >= 1 and t_final > 0")
        return cls(np.linspace(0.0, t_final, slab_count + 1))

    @property
    def slab_count(self) -> int:
        return self.endpoints.size - 1

    @property
    def t_final(self) -> float:
        return float(self.endpoints[-1])

    def lengths(self) -> np.ndarray:
        return np.diff(self.endpoints)

    def slab(self, m: int) -> tuple[float, float]:
        return float(self.endpoints[m]), float(self.endpoints[m + 1])


@dataclass(frozen=True)
class QuadratureRule:
    """Weighted Gauss-Radau rule on (0, tau] with the last node at tau."""

    degree: int
    tau: float
    rho: float
    nodes: np.ndarray
    weights: np.ndarray

    def apply(self, samples: np.ndarray) -> complex:
        """(tau/2) * sum_i omega_i * samples[i] for precomputed samples."""
        return 0.5 * self.tau * np.tensordot(self.weights, samples, axes=(0, 0))


def _mp_moments(j_max: int, tau, rho):
    """Moments mu_0..mu_{j_max} of the weight in the current mpmath context."""
    tau = mp.mpf(tau)
    rho = mp.mpf(rho)
    # below ~1e-18 the weight deviates from 1 by less than double roundoff,
    # so the unweighted moments are the correct float64 answer
    if rho == 0 or 2 * rho * tau < mp.mpf("1e-18"):
        return [tau ** (j + 1) / (j + 1) for j in range(j_max + 1)]
    two_rho = 2 * rho
    decay = mp.e ** (-two_rho * tau)
    mu = [-mp.expm1(-two_rho * tau) / two_rho]
    for j in range(1, j_max + 1):
        mu.append((j * mu[-1] - tau ** j * decay) / two_rho)
    return mu


def _working_dps(tau: float, rho: float, j_max: int) -> int:
    """Digits needed by the moment recursion.

    Every step divides a cancellation of relative size ~ 2*rho*tau by
    2*rho, so the absolute error grows by that factor per moment; cover
    the full chain of j_max divisions.
    """
    x = 2.0 * rho * tau
    if rho == 0.0 or x >= 1.0 or x < 1e-18:
        return 60
    return 60 + (j_max + 1) * int(np.ceil(-np.log10(x)))


def weighted_moments(j_max: int, tau: float, rho: float) -> np.ndarray:
    """mu_j = int_0^tau s^j e^{-2 rho s} ds for j = 0..j_max, as floats."""
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    with mp.workdps(_working_dps(tau, rho, j_max)):
        return np.array([float(m) for m in _mp_moments(j_max, tau, rho)])


def _recurrence_from_moments(moments, q: int):
    """Monic three-term coefficients (alpha_0..alpha_{q-1}, beta_1..beta_q).

    Uses the Cholesky factor R of the Hankel matrix H_{ij} = mu_{i+j}:
    alpha_k = R[k,k+1]/R[k,k] - R[k-1,k]/R[k-1,k-1] and
    beta_k = (R[k,k]/R[k-1,k-1])^2.  Runs inside an mpmath context.
    """
    n = q + 1
    H = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            H[i, j] = moments[i + j]
    try:
        L = mp.cholesky(H)
    except ValueError as err:
        raise QuadratureConstructionError(
            f"singular moment problem (q={q}): {err}") from None
    # R = L^T, upper triangular
    r = lambda i, j: L[j, i]
    alphas = []
    betas = []
    for k in range(q):
        prev = r(k - 1, k) / r(k - 1, k - 1) if k > 0 else mp.mpf(0)
        alphas.append(r(k, k + 1) / r(k, k) - prev)
    for k in range(1, q + 1):
        betas.append((r(k, k) / r(k - 1, k - 1)) ** 2)
    return alphas, betas


def _radau_last_alpha(alphas, betas, tau, q: int):
    """Last diagonal entry pinning the node at tau (monic p_k recurrence)."""
    tau = mp.mpf(tau)
    if q == 0:
        return tau
    p_prev, p_cur = mp.mpf(1), tau - alphas[0]
    for k in range(1, q):
        p_prev, p_cur = p_cur, (tau - alphas[k]) * p_cur - betas[k - 1] * p_prev
    return tau - betas[q - 1] * p_prev / p_cur


@functools.lru_cache(maxsize=None)
def gauss_radau_weighted(q: int, tau: float, rho: float) -> QuadratureRule:
    """Weighted Gauss-Radau rule with q+1 nodes, right node fixed at tau.

    Cached; the cache key is the exact (q, tau, rho) triple, so time steppers
    should normalise tau before calling.  lru_cache keeps the memo table
    consistent under concurrent use.
    """
    if q < 0:
        raise ValueError("polynomial degree q must be >= 0")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    with mp.workdps(_working_dps(tau, rho, 2 * q)):
        moments = _mp_moments(2 * q, tau, rho)
        mu0 = float(moments[0])
        if not np.isfinite(mu0) or mu0 <= 0:
            raise QuadratureConstructionError(
                f"vanishing weight mass for tau={tau}, rho={rho}")
        alphas, betas = _recurrence_from_moments(moments, q)
        diag = [float(a) for a in alphas]
        diag.append(float(_radau_last_alpha(alphas, betas, tau, q)))
        off = [float(mp.sqrt(b)) for b in betas]
    if not all(np.isfinite(diag)) or not all(np.isfinite(off)):
        raise QuadratureConstructionError(
            f"recurrence coefficients overflow for tau={tau}, rho={rho}")
    nodes, vecs = scipy.linalg.eigh_tridiagonal(np.array(diag), np.array(off[: max(q, 0)]))
    weights_nat = mu0 * vecs[0, :] ** 2
    order = np.argsort(nodes)
    nodes = nodes[order]
    weights_nat = weights_nat[order]
    if abs(nodes[-1] - tau) > 1e-8 * max(1.0, tau):
        raise QuadratureConstructionError(
            f"endpoint node drifted to {nodes[-1]} (tau={tau}, rho={rho})")
    nodes[-1] = tau
    if nodes[0] <= 0 or np.any(weights_nat <= 0):
        raise QuadratureConstructionError(
            f"degenerate rule for q={q}, tau={tau}, rho={rho}")
    omega = (2.0 / tau) * weights_nat
    nodes.setflags(write=False)
    omega.setflags(write=False)
    return QuadratureRule(degree=q, tau=tau, rho=rho, nodes=nodes, weights=omega)


def slab_inner_product(rule: QuadratureRule, a, b, pairing=None) -> complex:
    """Q[a, b] = (tau/2) sum_i omega_i <a(s_i), b(s_i)>.

    a and b map a slab-local time s in (0, tau] to arrays; the default
    pairing is the Euclidean inner product with the second slot conjugated.
    """
    if pairing is None:
        pairing = lambda x, y: complex(np.vdot(np.asarray(y), np.asarray(x)))
    total = 0.0 + 0.0j
    for s, w in zip(rule.nodes, rule.weights):
        total += w * pairing(a(s), b(s))
    return 0.5 * rule.tau * total


def _tau_key(tau: float) -> float:
    """Collapse last-ulp wobble so uniform partitions share one cached rule."""
    return float(f"{tau:.13e}")


def rules_for_partition(partition: TimePartition, q: int, rho: float) -> list[QuadratureRule]:
    """One rule per slab, deduplicated across equal slab lengths."""
    return [gauss_radau_weighted(q, _tau_key(tau), rho) for tau in partition.lengths()]


def dump_rule_csv(rule: QuadratureRule, path) -> None:
    """Write the rule as 'node,weight' rows for eyeballing."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,weight\n")
        for s, w in zip(rule.nodes, rule.weights):
            fh.write(f"{float(s)!r},{float(w)!r}\n")
