"""Figure rendering for the report paths.

Imported lazily by the experiment drivers and the CLI so that the numerical
modules never pull in matplotlib.  Uses the Agg backend: figures go to files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def convergence_figure(report, path) -> None:
    ns = np.array([lvl.n for lvl in report.levels], dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    series = (("e_sup_vs_ref", "sup error vs reference", "o-"),
              ("e_q_vs_ref", "weighted L2 error vs reference", "s-"),
              ("e_sup_vs_hom", "sup error vs homogenised", "o--"),
              ("e_q_vs_hom", "weighted L2 error vs homogenised", "s--"))
    for attr, label, style in series:
        ax.loglog(ns, report.column(attr), style, label=label, base=2)
    anchor = max(report.column("e_sup_vs_ref")[0], report.column("e_sup_vs_hom")[0])
    for order, ls in ((1, ":"), (2, "-.")):
        guide = anchor * (ns[0] / ns) ** order
        ax.loglog(ns, guide, ls, color="gray", linewidth=0.8,
                  label=f"order {order}", base=2)
    ax.set_xlabel("oscillation index n")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def fiber_gap_figure(result, path) -> None:
    has_kappa = bool(result.kappa_by_scale)
    fig, axes = plt.subplots(1, 2 if has_kappa else 1,
                             figsize=(10.0 if has_kappa else 6.0, 4.5))
    ax = axes[0] if has_kappa else axes
    by_field: dict[int, list] = {}
    for row in result.static_rows:
        by_field.setdefault(row.field_id, []).append(row)
    for fid, rows in sorted(by_field.items()):
        ns = np.array([r.scale for r in rows], dtype=float)
        ax.loglog(ns, [r.max_norm for r in rows], "o-", base=2,
                  label=f"field {fid} (slope {result.slopes[fid]:.2f})")
    if by_field:
        rows = next(iter(by_field.values()))
        ns = np.array([r.scale for r in rows], dtype=float)
        ax.loglog(ns, [r.bound for r in rows], "k--", base=2, label="a priori bound")
    ax.set_xlabel("scale n")
    ax.set_ylabel("max fiber resolvent gap")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    if has_kappa:
        ns = sorted(result.kappa_by_scale)
        axes[1].semilogx(ns, [result.kappa_by_scale[n] for n in ns], "o-", base=2)
        axes[1].set_xlabel("scale n")
        axes[1].set_ylabel("empirical constant")
        axes[1].grid(True, which="both", alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def solution_figure(solution, times, path) -> None:
    xs = np.linspace(0.0, 1.0, 513)
    fig, axes = plt.subplots(2, 1, figsize=(6.5, 5.5), sharex=True)
    for t in times:
        vals = np.vstack([
            solution.space.evaluation_matrix(xs) @ part
            for part in (solution.profile(t)[:solution.space.dof_count],
                         solution.profile(t)[solution.space.dof_count:])])
        axes[0].plot(xs, vals[0].real, label=f"t={t:g}")
        axes[1].plot(xs, vals[1].real, label=f"t={t:g}")
    axes[0].set_ylabel("first component")
    axes[1].set_ylabel("second component")
    axes[1].set_xlabel("x")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
