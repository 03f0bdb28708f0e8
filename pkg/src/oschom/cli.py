"""Command line front end.

Subcommands: solve, study, homog, selftest.  Exit status is 0 on success,
1 when a numerical check fails, 2 for configuration errors (argparse uses
the same convention for bad flags).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dg_solver, experiments, fiber_analysis
from .coefficients import CoercivityError
from .experiments import (BUILTIN_PROBLEM, ConfigError, HomogConfig,
                          StudyConfig, load_family, parse_mesh_law,
                          run_convergence_study, run_homog_sweep,
                          run_selftests)
from .fem_space import SpacePartition, build_space
from .quadrature import TimePartition


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_common(parser: argparse.ArgumentParser, n_default: str) -> None:
    parser.add_argument("--problem", default=BUILTIN_PROBLEM,
                        help=f"builtin name ({BUILTIN_PROBLEM!r}) or problem file path")
    parser.add_argument("--n-list", type=_int_list, default=_int_list(n_default),
                        metavar="N1,N2,...", help=f"oscillation indices (default {n_default})")
    parser.add_argument("--p", type=int, default=2, help="spatial degree (default 2)")
    parser.add_argument("--q", type=int, default=1, help="temporal degree (default 1)")
    parser.add_argument("--rho", type=float, default=None,
                        help="exponential weight, overrides the problem default")
    parser.add_argument("--t-final", type=float, default=None,
                        help="final time, overrides the problem default")
    parser.add_argument("--mesh-law", default="M=2K=8N",
                        help="cells/slabs per index, e.g. 'M=2K=8N' or 'K=4N,M=8N'")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)


def _cmd_solve(args) -> int:
    family = load_family(args.problem, args.rho, args.t_final)
    k_per_n, m_per_n = parse_mesh_law(args.mesh_law)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for n in args.n_list:
        family.validate_n(n)
        problem = family.make(n)
        space = build_space(SpacePartition.uniform(k_per_n * n), args.p)
        partition = TimePartition.uniform(m_per_n * n, family.t_final)
        sol = dg_solver.solve(problem, partition, space, args.q)
        final = sol.profile(family.t_final)
        nrm = float(np.linalg.norm(final) / np.sqrt(space.dof_count))
        print(f"n={n}: cells={space.partition.cell_count} slabs={partition.slab_count} "
              f"dofs={2 * space.dof_count} final-trace rms={nrm:.6e}")
        if out:
            times = np.linspace(0.0, family.t_final, 9)
            xs = np.linspace(0.0, 1.0, 257)
            dg_solver.save_solution_csv(sol, out / f"solution_n{n}.csv", times, xs)
            dg_solver.save_coefficients(sol, out / f"solution_n{n}.npz")
            from . import plots
            plots.solution_figure(sol, times[::4], out / f"solution_n{n}.png")
    if out:
        print(f"wrote solution files to {out}")
    return 0


def _cmd_study(args) -> int:
    cfg = StudyConfig(problem=args.problem, n_list=args.n_list,
                      space_degree=args.p, time_degree=args.q, rho=args.rho,
                      t_final=args.t_final, mesh_law=args.mesh_law,
                      ref_factors=args.ref_factors, out=args.out,
                      seed=args.seed, threads=args.threads)
    result = run_convergence_study(cfg)
    sys.stdout.write(result.table_text)
    print(f"# elapsed {result.seconds:.1f}s")
    for kind, path in result.paths.items():
        print(f"# {kind}: {path}")
    return 0


def _cmd_homog(args) -> int:
    cfg = HomogConfig(n_list=args.n_list, field_count=args.fields,
                      mode_cutoff=args.mode_cutoff, xi_list=args.xi_list,
                      kappa_n_list=args.kappa_n_list, rho=args.rho,
                      seed=args.seed, threads=args.threads, out=args.out)
    result = run_homog_sweep(cfg)
    failed = False
    for fid in sorted(result.slopes):
        rows = [r for r in result.static_rows if r.field_id == fid]
        within = all(r.max_norm <= r.bound for r in rows)
        slope = result.slopes[fid]
        ok = within and slope <= -0.9
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} field {fid}: slope {slope:.3f}, "
              f"max norm/bound {max(r.max_norm / r.bound for r in rows):.3f}")
    if result.kappa_by_scale:
        values = [result.kappa_by_scale[n] for n in sorted(result.kappa_by_scale)]
        ratio = max(values) / min(values)
        ok = ratio <= 3.0
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} dynamic constant: per-n values "
              + ", ".join(f"{v:.4f}" for v in values) + f" (max/min {ratio:.2f})")
    print(f"# elapsed {result.seconds:.1f}s")
    for kind, path in result.paths.items():
        print(f"# {kind}: {path}")
    return 1 if failed else 0


def _cmd_selftest(args) -> int:
    checks = experiments.run_selftests(seed=args.seed, fault=args.fault)
    failed = False
    for check in checks:
        failed |= not check.passed
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oschom",
        description="Space-time Galerkin solver and homogenisation checks for "
                    "oscillatory mixed-type evolutionary systems on the unit interval")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve and store one or more discretisations")
    _add_common(p_solve, "4")
    p_solve.set_defaults(fn=_cmd_solve)

    p_study = sub.add_parser("study", help="convergence study against streamed references")
    _add_common(p_study, "4,8,16,32,64")
    p_study.add_argument("--ref-factors", type=_int_list, default=(4, 4, 1, 1),
                         metavar="KF,MF,PA,QA",
                         help="reference refinement: cell factor, slab factor, "
                              "extra spatial degree, extra temporal degree")
    p_study.set_defaults(fn=_cmd_study)

    p_homog = sub.add_parser("homog", help="fiber resolvent-gap sweeps")
    p_homog.add_argument("--n-list", type=_int_list, default=(2, 4, 8, 16, 32, 64),
                         metavar="N1,N2,...")
    p_homog.add_argument("--fields", type=int, default=5,
                         help="number of random coercive fields (default 5)")
    p_homog.add_argument("--mode-cutoff", type=int, default=16,
                         help="Fourier truncation per fiber (default 16)")
    p_homog.add_argument("--xi-list", type=_float_list, default=(),
                         metavar="X1,X2,...",
                         help="frequency samples for the dynamic constant check")
    p_homog.add_argument("--kappa-n-list", type=_int_list, default=(4, 8, 16, 32),
                         metavar="N1,N2,...")
    p_homog.add_argument("--rho", type=float, default=1.0)
    p_homog.add_argument("--seed", type=int, default=0)
    p_homog.add_argument("--threads", type=int, default=1)
    p_homog.add_argument("--out", default=None)
    p_homog.set_defaults(fn=_cmd_homog)

    p_self = sub.add_parser("selftest", help="fast invariant checks")
    p_self.add_argument("--seed", type=int, default=0)
    p_self.add_argument("--fault", choices=["quadrature-weight"], default=None,
                        help="inject a fault to confirm the checks can fail")
    p_self.set_defaults(fn=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CoercivityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
