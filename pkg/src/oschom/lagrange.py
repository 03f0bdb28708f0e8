"""Barycentric Lagrange interpolation and small Gauss rules on intervals."""

from __future__ import annotations

import numpy as np


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    w = np.ones(n)
    for j in range(n):
        diff = nodes[j] - np.delete(nodes, j)
        w[j] = 1.0 / np.prod(diff)
    return w


def evaluation_matrix(nodes: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Values L[i, j] = ell_j(xs[i]) of the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    w = barycentric_weights(nodes)
    out = np.zeros((xs.size, nodes.size))
    diff = xs[:, None] - nodes[None, :]
    exact = np.abs(diff) < 1e-14 * max(1.0, np.abs(nodes).max())
    hit = exact.any(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = w[None, :] / diff
        out = terms / terms.sum(axis=1)[:, None]
    if hit.any():
        rows = np.nonzero(hit)[0]
        out[rows] = 0.0
        out[rows, exact[rows].argmax(axis=1)] = 1.0
    return out


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[i, j] = ell_j'(nodes[i]) via the barycentric form."""
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    w = barycentric_weights(nodes)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (nodes[i] - nodes[j])
        D[i, i] = -D[i].sum()
    return D


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    """n-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_lobatto(n: int) -> np.ndarray:
    """n Gauss-Lobatto points on [0, 1], endpoints included.  Needs n >= 2."""
    if n < 2:
        raise ValueError("Lobatto grids need at least two points")
    if n == 2:
        return np.array([0.0, 1.0])
    # interior points are the roots of P'_{n-1}
    coeff = np.zeros(n)
    coeff[-1] = 1.0
    interior = np.polynomial.legendre.legroots(np.polynomial.legendre.legder(coeff))
    return np.concatenate(([0.0], 0.5 * (interior + 1.0), [1.0]))
