"""Reproducible experiment drivers: convergence studies, fiber sweeps, selftests.

Everything here is deterministic given the configuration: randomized checks
draw from seeded generators, results are sorted before writing, and the CSV
emitters format numbers explicitly, so repeated runs produce byte-identical
tables.  Figures are rendered only on the report paths and import matplotlib
lazily; the numerical core stays free of plotting dependencies.
"""

from __future__ import annotations

import concurrent.futures
import re
import time
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from . import dg_solver, fiber_analysis, gelfand, lagrange
from .coefficients import (EvolutionaryProblem, MaterialField, MatrixField,
                           averaged_coefficients, evaluate_oscillatory,
                           random_coercive_field, verify_positivity)
from .fem_space import (SpacePartition, assemble_derivative, build_space,
                        operators_for_problem)
from .metrics import (ErrorReport, LevelErrors, SpatialQuadrature,
                      error_table_csv, error_table_whitespace, loglog_slope,
                      spatial_quadrature, weighted_energy)
from .quadrature import TimePartition, gauss_radau_weighted, weighted_moments


class ConfigError(ValueError):
    """Bad problem file or inconsistent experiment configuration."""


BUILTIN_PROBLEM = "maxwell-mixed"


def ramped_sine_source(t: float, xs: np.ndarray) -> np.ndarray:
    """First component sin(2 pi x) ramped to steady drive, second zero."""
    xs = np.asarray(xs)
    ramp = min(1.0, 10.0 * float(t))
    return np.vstack((np.sin(2.0 * np.pi * xs) * ramp, np.zeros(xs.size)))


def zero_source(t: float, xs: np.ndarray) -> np.ndarray:
    return np.zeros((2, np.asarray(xs).size))


SOURCES = {"ramped-sine": ramped_sine_source, "zero": zero_source}


def builtin_material() -> MaterialField:
    """Checkerboard material: the first diagonal entry swaps between time
    derivative (first half cell) and zero-order damping (second half)."""
    breaks = np.array([0.0, 0.5, 1.0])
    m0 = np.array([np.diag([1.0, 1.0]), np.diag([0.0, 1.0])], dtype=complex)
    m1 = np.array([np.diag([0.0, 0.0]), np.diag([1.0, 0.0])], dtype=complex)
    return MaterialField(breaks, m0, m1)


@dataclass(frozen=True)
class ProblemFamily:
    """A material plus source, instantiable at any admissible table index n.

    table_divisor maps the reported index to the unit-cell repeat count: the
    builtin checkerboard alternates every 1/n, i.e. the 1-periodic cell
    pattern is traversed n/2 times, so its divisor is 2 and n must be even.
    """

    name: str
    field: MaterialField
    source_name: str
    rho: float
    t_final: float
    table_divisor: int = 1

    def validate_n(self, n: int) -> None:
        if n < self.table_divisor or n % self.table_divisor:
            raise ConfigError(
                f"problem {self.name!r} needs n to be a positive multiple of "
                f"{self.table_divisor}, got {n}")

    def make(self, n: int | None, averaged: bool = False) -> EvolutionaryProblem:
        if not averaged:
            if n is None:
                raise ConfigError("an oscillation index n is required")
            self.validate_n(n)
        return EvolutionaryProblem(
            field=self.field,
            oscillation=None if averaged else n // self.table_divisor,
            source=SOURCES[self.source_name],
            rho=self.rho,
            t_final=self.t_final)


def builtin_family(rho: float | None = None, t_final: float | None = None) -> ProblemFamily:
    return ProblemFamily(name=BUILTIN_PROBLEM, field=builtin_material(),
                         source_name="ramped-sine",
                         rho=1.0 if rho is None else rho,
                         t_final=1.0 if t_final is None else t_final,
                         table_divisor=2)


def _parse_complex_tokens(tokens: list[str], where: str) -> list[complex]:
    out = []
    for tok in tokens:
        try:
            out.append(complex(tok))
        except ValueError:
            raise ConfigError(f"cannot parse {tok!r} in {where}") from None
    return out


def parse_problem_file(path) -> dict:
    """Line-oriented key = value problem description.

    Keys: breakpoints (grid incl. 0 and 1), m0[j] / m1[j] (row-major 2x2 per
    piece, complex entries in Python syntax like 1+2j), rho, T, N, source.
    '#' starts a comment.
    """
    entries: dict[str, list[str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key.lower()] = value.split()
    if "breakpoints" not in entries:
        raise ConfigError(f"{path}: missing 'breakpoints'")
    breaks = [float(tok) for tok in entries.pop("breakpoints")]
    pieces = len(breaks) - 1
    m0 = np.zeros((pieces, 2, 2), dtype=complex)
    m1 = np.zeros((pieces, 2, 2), dtype=complex)
    for j in range(pieces):
        for tag, dest in (("m0", m0), ("m1", m1)):
            key = f"{tag}[{j}]"
            if key not in entries:
                raise ConfigError(f"{path}: missing '{key}'")
            vals = _parse_complex_tokens(entries.pop(key), key)
            if len(vals) != 4:
                raise ConfigError(f"{path}: '{key}' needs 4 row-major entries")
            dest[j] = np.array(vals).reshape(2, 2)
    try:
        field = MaterialField(np.array(breaks), m0, m1)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None
    out = {"field": field,
           "rho": float(entries.pop("rho", ["1.0"])[0]),
           "t_final": float(entries.pop("t", ["1.0"])[0]),
           "n": int(entries.pop("n", ["1"])[0]),
           "source": entries.pop("source", ["zero"])[0]}
    if out["source"] not in SOURCES:
        raise ConfigError(f"{path}: unknown source {out['source']!r} "
                          f"(have {sorted(SOURCES)})")
    if entries:
        raise ConfigError(f"{path}: unknown keys {sorted(entries)}")
    return out


def load_family(problem: str, rho: float | None = None,
                t_final: float | None = None) -> ProblemFamily:
    """Builtin name or path to a problem file, with optional overrides."""
    if problem == BUILTIN_PROBLEM:
        return builtin_family(rho, t_final)
    path = Path(problem)
    if not path.exists():
        raise ConfigError(f"unknown problem {problem!r}: not a builtin name "
                          f"and no such file")
    data = parse_problem_file(path)
    family = ProblemFamily(name=str(path), field=data["field"],
                           source_name=data["source"],
                           rho=data["rho"] if rho is None else rho,
                           t_final=data["t_final"] if t_final is None else t_final,
                           table_divisor=1)
    verify_positivity(family.field, family.rho)
    return family


_MESH_TERM = re.compile(r"^(\d*)([MKN])$")


def parse_mesh_law(text: str) -> tuple[int, int]:
    """Cells-per-n and slabs-per-n from a law like 'M=2K=8N' or 'K=4N,M=8N'."""
    scale = {"N": 1.0}
    pending = []
    for chain in text.replace(" ", "").split(","):
        terms = chain.split("=")
        if len(terms) < 2:
            raise ConfigError(f"mesh law chain {chain!r} needs an '='")
        parsed = []
        for term in terms:
            m = _MESH_TERM.match(term)
            if not m or float(m.group(1) or 1) == 0:
                raise ConfigError(f"cannot parse mesh-law term {term!r}")
            parsed.append((float(m.group(1) or 1), m.group(2)))
        pending.extend(zip(parsed[:-1], parsed[1:]))
    for _ in range(len(pending) + 1):
        for (ca, va), (cb, vb) in pending:
            if va in scale and vb not in scale:
                scale[vb] = ca * scale[va] / cb
            elif vb in scale and va not in scale:
                scale[va] = cb * scale[vb] / ca
    missing = {"K", "M"} - set(scale)
    if missing:
        raise ConfigError(f"mesh law {text!r} does not determine {sorted(missing)}")
    for (ca, va), (cb, vb) in pending:
        if abs(ca * scale[va] - cb * scale[vb]) > 1e-9:
            raise ConfigError(f"mesh law {text!r} is inconsistent")
    k_per_n, m_per_n = scale["K"], scale["M"]
    if k_per_n <= 0 or m_per_n <= 0 or abs(k_per_n - round(k_per_n)) > 1e-9 \
            or abs(m_per_n - round(m_per_n)) > 1e-9:
        raise ConfigError(f"mesh law {text!r} must give positive integer ratios")
    return int(round(k_per_n)), int(round(m_per_n))


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one convergence study."""

    problem: str = BUILTIN_PROBLEM
    n_list: tuple[int, ...] = (4, 8, 16, 32, 64)
    space_degree: int = 2
    time_degree: int = 1
    rho: float | None = None
    t_final: float | None = None
    mesh_law: str = "M=2K=8N"
    ref_factors: tuple[int, int, int, int] = (4, 4, 1, 1)
    out: str | None = None
    seed: int = 0
    threads: int = 1
    figures: bool = True


def _m0_weight_matrices(problem: EvolutionaryProblem,
                        quad: SpatialQuadrature) -> np.ndarray:
    """Sampled degenerate-mass weight for the sup functional."""
    if problem.oscillation is None:
        avg = averaged_coefficients(problem.field)[0]
        return np.broadcast_to(avg, (quad.points.size, 2, 2))
    m0, _ = evaluate_oscillatory(problem.field, problem.oscillation, quad.points)
    return m0


def _coarse_quadrature_samples(coarse: dg_solver.DiscreteSolution, rho: float):
    """Sample times and discrete weights of the coarse slab functional.

    The weighted L2-type error is the slabwise quadrature sum of the solver
    itself, so it samples the error at the coarse Radau nodes with weights
    exp(-2 rho t_{m-1}) (tau/2) omega_i.
    """
    times, weights = [], []
    for m in range(coarse.partition.slab_count):
        t0 = coarse.partition.endpoints[m]
        rule = coarse.rules[m]
        times.append(t0 + rule.nodes)
        weights.append(np.exp(-2.0 * rho * t0) * 0.5 * rule.tau * rule.weights)
    return np.concatenate(times), np.concatenate(weights)


def _stream_reference_errors(coarse: dg_solver.DiscreteSolution,
                             comparisons: list[tuple[EvolutionaryProblem, np.ndarray]],
                             ref_partition: TimePartition, ref_degree: int,
                             ref_space, quad: SpatialQuadrature,
                             rho: float) -> list[tuple[float, float]]:
    """Errors of one coarse solution against streamed reference solves.

    Each comparison is (reference problem, sup-weight matrices); all share
    the reference partition and space, so the references march in lockstep
    and the coarse solution is evaluated once per sample time.  The sup
    error is sampled densely at every reference quadrature node, while the
    weighted L2-type error is the coarse solver's own slab quadrature sum,
    so it samples at the coarse Radau nodes inside each reference slab.
    """
    n_c = coarse.space.dof_count
    n_r = ref_space.dof_count
    eval_coarse = coarse.space.evaluation_matrix(quad.points)
    eval_ref = ref_space.evaluation_matrix(quad.points)

    q_times, q_weights = _coarse_quadrature_samples(coarse, rho)
    ref_ends = ref_partition.endpoints
    owner = np.clip(np.searchsorted(ref_ends, q_times, side="left") - 1,
                    0, ref_partition.slab_count - 1)
    by_slab = [np.flatnonzero(owner == j) for j in range(ref_partition.slab_count)]

    sup_best = [0.0 for _ in comparisons]
    q_acc = [0.0 for _ in comparisons]
    streams = [dg_solver.iter_slab_solutions(problem, ref_partition, ref_space,
                                             ref_degree)
               for problem, _ in comparisons]
    for steps in zip(*streams):
        j, t0, rule, _ = steps[0]
        for i, s in enumerate(rule.nodes):
            prof = coarse.profile(t0 + s)
            cvals = np.vstack((eval_coarse @ prof[:n_c], eval_coarse @ prof[n_c:]))
            for idx, (step, (_, mats)) in enumerate(zip(steps, comparisons)):
                diff = cvals - np.vstack((eval_ref @ step[3][i][:n_r],
                                          eval_ref @ step[3][i][n_r:]))
                sup_best[idx] = max(sup_best[idx],
                                    weighted_energy(diff, quad, mats))
        for sample in by_slab[j]:
            t = q_times[sample]
            s_loc = min(max(t - t0, 0.0), rule.tau)
            ell = lagrange.evaluation_matrix(rule.nodes, np.array([s_loc]))[0]
            prof = coarse.profile(t)
            cvals = np.vstack((eval_coarse @ prof[:n_c], eval_coarse @ prof[n_c:]))
            for idx, step in enumerate(steps):
                rvec = ell @ step[3]
                rvals = np.vstack((eval_ref @ rvec[:n_r], eval_ref @ rvec[n_r:]))
                diff = cvals - rvals
                q_acc[idx] += q_weights[sample] * weighted_energy(diff, quad, None)
    grow = np.exp(2.0 * rho * ref_partition.t_final)
    return [(float(np.sqrt(s)), float(np.sqrt(grow * q)))
            for s, q in zip(sup_best, q_acc)]


def run_study_level(family: ProblemFamily, n: int, cfg: StudyConfig) -> LevelErrors:
    """Solve one refinement level and measure it against both references."""
    k_per_n, m_per_n = parse_mesh_law(cfg.mesh_law)
    ref_k, ref_m, p_add, q_add = cfg.ref_factors
    cells, slabs = k_per_n * n, m_per_n * n
    space = build_space(SpacePartition.uniform(cells), cfg.space_degree)
    partition = TimePartition.uniform(slabs, family.t_final)
    rough = family.make(n)
    sol = dg_solver.solve(rough, partition, space, cfg.time_degree)

    ref_space = build_space(SpacePartition.uniform(cells * ref_k),
                            cfg.space_degree + p_add)
    ref_partition = TimePartition.uniform(slabs * ref_m, family.t_final)
    breaks = np.union1d(ref_space.partition.nodes, rough.coefficient_breakpoints())
    quad = spatial_quadrature(breaks, cfg.space_degree + p_add + 1)

    homogenised = family.make(n, averaged=True)
    comparisons = [(rough, _m0_weight_matrices(rough, quad)),
                   (homogenised, _m0_weight_matrices(homogenised, quad))]
    (e_sup_ref, e_q_ref), (e_sup_hom, e_q_hom) = _stream_reference_errors(
        sol, comparisons, ref_partition, cfg.time_degree + q_add, ref_space,
        quad, family.rho)
    return LevelErrors(n=n, e_sup_vs_ref=e_sup_ref, e_q_vs_ref=e_q_ref,
                       e_sup_vs_hom=e_sup_hom, e_q_vs_hom=e_q_hom)


@dataclass
class StudyResult:
    config: StudyConfig
    report: ErrorReport
    csv_text: str
    table_text: str
    seconds: float
    paths: dict[str, Path] = dc_field(default_factory=dict)


def run_convergence_study(cfg: StudyConfig) -> StudyResult:
    """Full refinement sweep with CSV / whitespace / figure outputs."""
    started = time.perf_counter()
    family = load_family(cfg.problem, cfg.rho, cfg.t_final)
    n_list = tuple(cfg.n_list)
    if not n_list:
        raise ConfigError("n_list must not be empty")
    for n in n_list:
        family.validate_n(n)
    if cfg.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            levels = list(pool.map(lambda n: run_study_level(family, n, cfg), n_list))
    else:
        levels = [run_study_level(family, n, cfg) for n in n_list]
    report = ErrorReport(levels)
    notes = (
        f"problem={family.name} p={cfg.space_degree} q={cfg.time_degree} "
        f"rho={family.rho:g} T={family.t_final:g}",
        f"mesh law {cfg.mesh_law}; reference factors cells x{cfg.ref_factors[0]} "
        f"slabs x{cfg.ref_factors[1]} degrees +{cfg.ref_factors[2]}/+{cfg.ref_factors[3]}",
        "sup weight: oscillatory M0 against the resolved reference, averaged M0 "
        "against the homogenised reference",
    )
    result = StudyResult(config=cfg, report=report,
                         csv_text=error_table_csv(report, notes),
                         table_text=error_table_whitespace(report, notes),
                         seconds=time.perf_counter() - started)
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "convergence.csv"
        csv_path.write_text(result.csv_text, encoding="utf-8")
        dat_path = out / "convergence.dat"
        dat_path.write_text(result.table_text, encoding="utf-8")
        result.paths = {"csv": csv_path, "table": dat_path}
        if cfg.figures:
            from . import plots
            fig_path = out / "convergence.png"
            plots.convergence_figure(report, fig_path)
            result.paths["figure"] = fig_path
    return result


@dataclass(frozen=True)
class HomogConfig:
    """Configuration of the fiber resolvent-gap sweeps."""

    n_list: tuple[int, ...] = (2, 4, 8, 16, 32, 64)
    field_count: int = 5
    piece_range: tuple[int, int] = (2, 4)
    coercivity: float = 1.0
    mode_cutoff: int = 16
    xi_list: tuple[float, ...] = ()
    kappa_n_list: tuple[int, ...] = (4, 8, 16, 32)
    rho: float = 1.0
    seed: int = 0
    threads: int = 1
    out: str | None = None
    figures: bool = True


@dataclass(frozen=True)
class StaticSweepRow:
    field_id: int
    scale: int
    worst_fiber: int
    max_norm: float
    bound: float


@dataclass
class HomogResult:
    config: HomogConfig
    static_rows: list[StaticSweepRow]
    slopes: dict[int, float]
    kappa_by_scale: dict[int, float]
    seconds: float
    paths: dict[str, Path] = dc_field(default_factory=dict)

    def static_csv(self) -> str:
        lines = ["field,n,worst_fiber,max_norm,bound,ratio"]
        for row in self.static_rows:
            lines.append(f"{row.field_id},{row.scale},{row.worst_fiber},"
                         f"{row.max_norm:.6e},{row.bound:.6e},"
                         f"{row.max_norm / row.bound:.6f}")
        lines.append("")
        lines.append("field,slope")
        for fid in sorted(self.slopes):
            lines.append(f"{fid},{self.slopes[fid]:.4f}")
        return "\n".join(lines) + "\n"

    def kappa_csv(self) -> str:
        lines = ["n,kappa"]
        for n in sorted(self.kappa_by_scale):
            lines.append(f"{n},{self.kappa_by_scale[n]:.6e}")
        return "\n".join(lines) + "\n"


def _sweep_one_field(field: MatrixField, n_list, mode_cutoff: int,
                     rng: np.random.Generator):
    rows = []
    for scale in n_list:
        norms = [fiber_analysis.resolvent_difference_norm(field, scale, k,
                                                          mode_cutoff, rng)
                 for k in range(scale)]
        worst = int(np.argmax(norms))
        rows.append((scale, worst, float(norms[worst]),
                     fiber_analysis.homogenisation_bound(field, scale)))
    return rows


def run_homog_sweep(cfg: HomogConfig) -> HomogResult:
    """Randomized static sweeps plus the frequency-sliced constant check."""
    started = time.perf_counter()
    root_rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.piece_range
    fields = [random_coercive_field(root_rng, int(root_rng.integers(lo, hi + 1)),
                                    cfg.coercivity)
              for _ in range(cfg.field_count)]

    def job(args):
        fid, field = args
        rng = np.random.default_rng(cfg.seed + 1000 + fid)
        return fid, _sweep_one_field(field, cfg.n_list, cfg.mode_cutoff, rng)

    jobs = list(enumerate(fields))
    if cfg.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(j) for j in jobs]
    static_rows: list[StaticSweepRow] = []
    slopes: dict[int, float] = {}
    for fid, rows in sorted(results):
        for scale, worst, norm, bound in rows:
            static_rows.append(StaticSweepRow(field_id=fid, scale=scale,
                                              worst_fiber=worst,
                                              max_norm=norm, bound=bound))
        slopes[fid] = loglog_slope([r[0] for r in rows], [r[2] for r in rows])

    kappa_by_scale: dict[int, float] = {}
    if cfg.xi_list:
        material = builtin_material()
        m0_field = MatrixField(material.breakpoints, material.m0)
        m1_field = MatrixField(material.breakpoints, material.m1)
        rng = np.random.default_rng(cfg.seed + 5000)
        for scale in cfg.kappa_n_list:
            worst = 0.0
            for k in range(scale):
                rep = fiber_analysis.dynamic_bound_check(
                    m0_field, m1_field, cfg.rho, cfg.xi_list, scale, k,
                    cfg.mode_cutoff, rng)
                worst = max(worst, rep.kappa)
            kappa_by_scale[scale] = worst

    result = HomogResult(config=cfg, static_rows=static_rows, slopes=slopes,
                         kappa_by_scale=kappa_by_scale,
                         seconds=time.perf_counter() - started)
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        gaps = out / "fiber_gaps.csv"
        gaps.write_text(result.static_csv(), encoding="utf-8")
        result.paths["static"] = gaps
        if kappa_by_scale:
            kappa = out / "kappa.csv"
            kappa.write_text(result.kappa_csv(), encoding="utf-8")
            result.paths["kappa"] = kappa
        if cfg.figures:
            from . import plots
            fig = out / "fiber_gaps.png"
            plots.fiber_gap_figure(result, fig)
            result.paths["figure"] = fig
    return result


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name: str, fn) -> CheckResult:
    try:
        detail = fn()
        return CheckResult(name, True, detail or "ok")
    except Exception as err:  # noqa: BLE001 - report, do not crash the suite
        return CheckResult(name, False, f"{type(err).__name__}: {err}")


def run_selftests(seed: int = 0, fault: str | None = None) -> list[CheckResult]:
    """Fast invariant suite; fault='quadrature-weight' must make it fail."""
    rng = np.random.default_rng(seed)
    checks: list[CheckResult] = []

    def quadrature_exact():
        worst = 0.0
        for q in range(5):
            for rho_tau in (0.0, 0.1, 1.0, 10.0):
                tau = 0.7
                rule = gauss_radau_weighted(q, tau, rho_tau / tau)
                weights = rule.weights.copy()
                if fault == "quadrature-weight":
                    weights = weights * (1.0 + 2e-7)
                mus = weighted_moments(2 * q, tau, rho_tau / tau)
                for j in range(2 * q + 1):
                    got = 0.5 * tau * np.dot(weights, rule.nodes ** j)
                    worst = max(worst, abs(got - mus[j]) / abs(mus[j]))
        assert worst <= 1e-12, f"relative moment error {worst:.3e}"
        return f"max relative moment error {worst:.2e}"

    def quadrature_classic():
        r0 = gauss_radau_weighted(0, 1.0, 0.0)
        assert np.allclose(r0.nodes, [1.0], atol=1e-14)
        assert np.allclose(r0.weights, [2.0], atol=1e-13)
        r1 = gauss_radau_weighted(1, 1.0, 0.0)
        assert np.allclose(r1.nodes, [1.0 / 3.0, 1.0], atol=1e-13)
        assert np.allclose(r1.weights, [1.5, 0.5], atol=1e-13)
        return "rho=0 rules match the classical tables"

    def gelfand_unitary():
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(2, 33))
            p = int(rng.integers(1, 9))
            vals = rng.normal(size=n * p) + 1j * rng.normal(size=n * p)
            f = gelfand.StepFunctionN(n, p, vals)
            stack = gelfand.gelfand_transform(f)
            worst = max(worst, abs(stack.norm() - f.norm()))
            back = gelfand.inverse_gelfand(stack)
            worst = max(worst, np.abs(back.values - f.values).max())
        assert worst <= 1e-12, f"unitarity defect {worst:.3e}"
        return f"worst defect {worst:.2e}"

    def roots_cancel():
        worst = max(abs(gelfand.roots_of_unity_sum(n, s))
                    for n in (2, 3, 7, 16, 64) for s in (1, n - 1, 3 * n + 2)
                    if s % n)
        assert worst <= 1e-12
        return f"worst |sum| {worst:.2e}"

    def skew_operator():
        space = build_space(SpacePartition.uniform(7), 3)
        d = assemble_derivative(space)
        gap = abs((d + d.T).toarray()).max()
        assert gap <= 1e-12, f"skew defect {gap:.3e}"
        return f"skew defect {gap:.2e}"

    def fiber_resolvent():
        field = random_coercive_field(np.random.default_rng(seed + 7), 3, 1.0)
        c = field.coercivity()
        worst = 0.0
        for k in (0, 1, 2):
            fib = fiber_analysis.build_fiber(field, 4, k, 12)
            norm = fiber_analysis.operator_norm(np.linalg.inv(fib.matrix), rng)
            worst = max(worst, norm)
        assert worst <= (1.0 + 1e-6) / c, f"resolvent norm {worst:.6f} > 1/c"
        return f"max resolvent norm {worst:.4f} <= 1/c = {1 / c:.4f}"

    def solver_exact():
        family = builtin_family()
        space = build_space(SpacePartition.uniform(8), 2)
        partition = TimePartition.uniform(4, 1.0)
        problem = family.make(4)
        ops = operators_for_problem(problem, space)
        coeff = rng.normal(size=space.dof_count)
        eval_nodes = space.evaluation_matrix

        def manufactured(t, xs):
            e = eval_nodes(xs)
            de = eval_nodes(xs, derivative=True)
            u = e @ coeff
            m0, m1 = evaluate_oscillatory(problem.field, problem.oscillation, xs)
            row0 = m0[:, 0, 0] * u + t * m1[:, 0, 0] * u
            row1 = t * (de @ coeff)
            return np.vstack((row0, row1))

        exact_problem = EvolutionaryProblem(field=problem.field,
                                            oscillation=problem.oscillation,
                                            source=manufactured,
                                            rho=problem.rho, t_final=1.0)
        sol = dg_solver.solve(exact_problem, partition, space, 1, ops)
        got = sol.profile(1.0)
        want = np.concatenate((1.0 * coeff, np.zeros(space.dof_count)))
        err = np.abs(got - want).max()
        assert err <= 1e-10, f"manufactured reproduction error {err:.3e}"
        return f"reproduction error {err:.2e}"

    def builtin_averages():
        m0_avg, m1_avg = averaged_coefficients(builtin_material())
        assert np.allclose(m0_avg, np.diag([0.5, 1.0]), atol=1e-15)
        assert np.allclose(m1_avg, np.diag([0.5, 0.0]), atol=1e-15)
        return "cell averages are diag(1/2, 1) and diag(1/2, 0)"

    checks.append(_check("quadrature-exactness", quadrature_exact))
    checks.append(_check("quadrature-classic-tables", quadrature_classic))
    checks.append(_check("gelfand-unitary", gelfand_unitary))
    checks.append(_check("roots-of-unity", roots_cancel))
    checks.append(_check("derivative-skew", skew_operator))
    checks.append(_check("fiber-resolvent-bound", fiber_resolvent))
    checks.append(_check("solver-manufactured", solver_exact))
    checks.append(_check("builtin-averages", builtin_averages))
    return checks
