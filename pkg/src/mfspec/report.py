"""Run orchestration: execute configured tasks, write artifacts, check bounds.

Tasks run sequentially in a fixed order and funnel all file writes through
one writer, so identical configs produce byte-identical CSV and JSON
output.  Analytic preconditions that fail at run time (inadmissible
suprema, divergent integrals, exhausted subdivision budgets) are recorded
as refusal flags in the report instead of aborting the whole run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .coarse import coarse_dimension, coarse_profile, per_level_zeros
from .config import ExperimentConfig, serialize_measure
from .cubes import DyadicCube
from .eigen import assemble, compare_modes, eigencount
from .measures import MeasureModel
from .numerics import fit_line
from .partitions import (
    PartitionDepthError,
    bs_refine,
    gamma_n,
    partition_count,
    stopping_partition,
)
from .setfun import RefusalError, set_function_eval
from .spectra import (
    DimensionSummary,
    dim_infty,
    dimension_bounds,
    kappa_estimate,
    q_zero,
    tau_n,
)

__all__ = ["RunResult", "recompute_checks", "run", "check_report"]

# exceptions that mean "the mathematics refused", not "the code is broken";
# MemoryError covers exhausted cube-store budgets, not host OOM
_REFUSABLE = (
    RefusalError,
    PartitionDepthError,
    NotImplementedError,
    ValueError,
    ArithmeticError,
    MemoryError,
)


@dataclass(frozen=True)
class RunResult:
    report: dict
    outdir: Path
    exit_code: int  # 0 ok, 1 bound-check failure, 3 refusal


# ======================================================================
# deterministic writers
# ======================================================================


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


# ======================================================================
# individual tasks
# ======================================================================


def _task_dims(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    lo, hi = cfg.levels
    window = (max(1, hi - 3), hi)
    report["dim_infty"] = dim_infty(cfg.measure, window)
    report["dim_infty_window"] = f"n={window[0]}..{window[1]}"
    report["minkowski"] = tau_n(cfg.set_function, hi, 0.0, "neumann")
    q_n = q_zero(cfg.set_function, hi, "neumann")
    report["q_neumann"] = q_n
    q_d = None
    if "dirichlet" in cfg.modes:
        q_d = q_zero(cfg.set_function, hi, "dirichlet")
        report["q_dirichlet"] = q_d
    kappa = None
    if cfg.kappa is not None:
        est = kappa_estimate(
            cfg.set_function,
            cfg.kappa.q_grid or cfg.q_grid,
            level_budget=cfg.kappa.level_budget,
            margin=cfg.kappa.margin,
        )
        kappa = est.value
        report["kappa"] = est.value
        report["kappa_lo"], report["kappa_hi"] = est.interval
        report["kappa_conclusive"] = est.conclusive
    summary = DimensionSummary(
        dim_infty=report["dim_infty"],
        minkowski=report["minkowski"],
        q_N=q_n,
        q_D=q_d if q_d is not None else q_n,
        kappa=kappa,
    )
    try:
        bounds = dimension_bounds(summary, cfg.measure.d, tol=cfg.tolerance)
        report["bound_lower"], report["bound_upper"] = bounds.lower, bounds.upper
    except RefusalError as exc:
        refusals["bounds"] = f"RefusalError: {exc}"


def _task_tau(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    lo, hi = cfg.levels
    for mode in cfg.modes:
        rows = []
        start = max(lo, 2) if mode == "dirichlet" else lo
        for n in range(start, hi + 1):
            for q in cfg.q_grid:
                rows.append([mode, n, q, tau_n(cfg.set_function, n, q, mode)])
        _write_csv(out / f"tau_{mode}.csv", ["mode", "n", "q", "tau"], rows)


def _task_qzero(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    lo, hi = cfg.levels
    J = cfg.set_function
    rows = []
    for mode in cfg.modes:
        start = max(lo, 2) if mode == "dirichlet" else lo
        # a zero only exists where the level has support (tau_n(0) finite);
        # sparse supports can have empty interior at small n
        levels = [n for n in range(start, hi + 1) if tau_n(J, n, 0.0, mode) > float("-inf")]
        if not levels:
            continue
        zeros = per_level_zeros(J, levels, mode)
        for z in zeros:
            rows.append([mode, z.n, z.q_n, z.balanced])
        if mode == "neumann":
            report["q_neumann"] = zeros[-1].q_n
            report["zero_min"] = min(z.q_n for z in zeros)
            report["zero_max"] = max(z.q_n for z in zeros)
            report["zeros_balanced"] = all(z.balanced for z in zeros)
        else:
            report["q_dirichlet"] = zeros[-1].q_n
    _write_csv(out / "zeros.csv", ["mode", "n", "q_zero", "balanced"], rows)


def _task_partition(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    J = cfg.set_function
    root_value = set_function_eval(J, DyadicCube.unit(cfg.measure.d)).value
    t = cfg.partition.threshold
    if t is None:
        t = root_value * 2.0 ** (-2 * cfg.measure.d)
    part = stopping_partition(J, t)
    rows = [
        [c.level, *c.coords, v]
        for c, v in zip(part.cubes, part.values)
    ]
    kcols = [f"k{i+1}" for i in range(cfg.measure.d)]
    _write_csv(out / "partition.csv", ["level", *kcols, "J_value"], rows)
    report["partition_threshold"] = t
    report["partition_cardinality"] = len(part)
    report["partition_zero_count"] = part.zero_count
    report["partition_max_value"] = part.max_value

    # entropy counting: M(x) over the configured dyadic x grid
    exps = [e for e in cfg.partition.x_exponents if 2.0**e > 1.0 / root_value]
    if len(exps) >= 2:
        ms = [partition_count(J, 2.0**e) for e in exps]
        _write_csv(out / "entropy.csv", ["x_log2", "M"], [[e, m] for e, m in zip(exps, ms)])
        slope, _ = fit_line([float(e) for e in exps], [math.log2(m) for m in ms])
        report["h_upper"] = slope
        tail = list(zip(exps, ms))[len(exps) // 2 :]
        report["h_lower_canonical"] = min(math.log2(m) / e for e, m in tail)
        report["entropy_window"] = f"x=2^{exps[0]}..2^{exps[-1]}"


def _task_gamma(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    levels = cfg.gamma.levels
    gs = [gamma_n(cfg.set_function, n) for n in levels]
    _write_csv(out / "gamma.csv", ["n", "gamma"], [[n, g] for n, g in zip(levels, gs)])
    pairs = [(math.log2(n), math.log2(g)) for n, g in zip(levels, gs) if g > 0.0]
    if len(pairs) >= 2:
        slope, _ = fit_line([p[0] for p in pairs], [p[1] for p in pairs])
        report["alpha_gamma"] = slope
        report["gamma_window"] = f"n={levels[0]}..{levels[-1]}"


def _task_bs(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    trace = bs_refine(cfg.measure, cfg.bs.a, steps=cfg.bs.steps)
    rows = [[0, trace.initial_cardinality, cfg.measure.total_mass, 0]]
    rows.extend([s.k, s.cardinality, s.g_value, s.splits] for s in trace.steps)
    _write_csv(out / "trace.csv", ["k", "N_k", "G_a", "splits"], rows)
    slope, _ = trace.decay_fit()
    report["bs_a"] = cfg.bs.a
    report["bs_slope"] = slope
    report["bs_final_cardinality"] = trace.steps[-1].cardinality


def _task_coarse(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    lo, hi = cfg.levels
    J = cfg.set_function
    rows = []
    neumann_profile = None
    for mode in cfg.modes:
        start = max(lo, 2) if mode == "dirichlet" else lo
        profile = coarse_profile(J, range(start, hi + 1), mode=mode, alpha_grid=cfg.alpha_grid)
        if mode == "neumann":
            neumann_profile = profile
        for n, row in zip(profile.levels, profile.counts):
            for alpha, count in zip(profile.alpha_grid, row):
                rows.append([mode, n, alpha, count])
    _write_csv(out / "coarse.csv", ["mode", "n", "alpha", "count"], rows)
    if neumann_profile is not None:
        dim = coarse_dimension(neumann_profile, J)
        _write_csv(
            out / "coarse_summary.csv",
            ["F_upper", "F_lower", "alpha_star"],
            [[dim.f_upper, dim.f_lower, dim.alpha_star]],
        )
        report["f_upper"] = dim.f_upper
        report["f_lower"] = dim.f_lower
        report["alpha_star"] = dim.alpha_star
        report["coarse_at_grid_edge"] = dim.at_grid_edge
        report["coarse_window"] = f"n={neumann_profile.levels[0]}..{neumann_profile.levels[-1]}"


def _task_eigen(cfg: ExperimentConfig, out: Path, report: dict, refusals: dict) -> None:
    d = cfg.measure.d
    report["eigen_tolerance"] = cfg.eigen.tolerance
    if d > 2:
        report["eigen_status"] = (
            f"not attempted: no d={d} harness (dense slope fits are unreliable "
            "at desk scale; dimension identities cover these models)"
        )
        return
    level = cfg.eigen.level if cfg.eigen.level is not None else (11 if d == 1 else 6)
    report["eigen_level"] = level
    results = {}
    for mode in cfg.modes:
        res = eigencount(assemble(cfg.measure, level, mode=mode))
        results[mode] = res
        _write_csv(
            out / f"eigen_values_{mode}.csv",
            ["eigenvalue"],
            [[float(v)] for v in res.eigenvalues],
        )
        _write_csv(
            out / f"eigen_counts_{mode}.csv",
            ["x", "N"],
            [[float(x), int(c)] for x, c in zip(res.xs, res.counts)],
        )
    primary = "neumann" if "neumann" in results else cfg.modes[0]
    report["eigen_slope"] = results[primary].slope
    if "dirichlet" in results and "neumann" in results:
        comparison = compare_modes(cfg.measure, level)
        _write_csv(
            out / "eigen_comparison.csv",
            ["slope_neumann", "slope_dirichlet", "gap", "shift_constant", "fit_lo", "fit_hi"],
            [[
                comparison.slope_neumann,
                comparison.slope_dirichlet,
                comparison.gap,
                comparison.shift_constant,
                comparison.fit_range[0],
                comparison.fit_range[1],
            ]],
        )
        report["eigen_slope_dirichlet"] = results["dirichlet"].slope
        report["eigen_gap"] = comparison.gap
        report["eigen_shift_constant"] = comparison.shift_constant
    report["eigen_status"] = "ok"


_TASK_FUNCS = {
    "dims": _task_dims,
    "tau": _task_tau,
    "qzero": _task_qzero,
    "partition": _task_partition,
    "gamma": _task_gamma,
    "bs": _task_bs,
    "coarse": _task_coarse,
    "eigen": _task_eigen,
}


# ======================================================================
# bound checks (pure functions of report numbers)
# ======================================================================


def recompute_checks(report: dict) -> dict:
    """Every boolean is a function of stored numbers only, so an
    independent reader can recompute them all from the report file."""
    tol = report["tolerance"]
    checks: dict[str, bool] = {}
    if "bound_lower" in report and "q_neumann" in report:
        checks["check_dim_sandwich"] = (
            report["bound_lower"] - tol <= report["q_neumann"] <= report["bound_upper"] + tol
        )
    if "q_neumann" in report and "q_dirichlet" in report:
        checks["check_dirichlet_le_neumann"] = (
            report["q_dirichlet"] <= report["q_neumann"] + 1e-9
        )
    if "h_upper" in report and "q_neumann" in report:
        checks["check_hbar_equals_qn"] = abs(report["h_upper"] - report["q_neumann"]) <= tol
    if "f_upper" in report and "q_neumann" in report:
        checks["check_fbar_equals_qn"] = abs(report["f_upper"] - report["q_neumann"]) <= tol
    if "f_upper" in report and "f_lower" in report:
        checks["check_forder"] = report["f_lower"] <= report["f_upper"] + 1e-12
    if "alpha_gamma" in report and "q_neumann" in report:
        checks["check_gamma_identity"] = (
            abs(report["alpha_gamma"] * report["q_neumann"] + 1.0) <= tol
        )
    if "bs_slope" in report:
        checks["check_bs_decay"] = report["bs_slope"] <= -(1.0 + report["bs_a"]) + 0.1
    if "kappa" in report and "q_neumann" in report:
        checks["check_kappa_equals_qn"] = abs(report["kappa"] - report["q_neumann"]) <= tol
    if "eigen_slope" in report and "q_neumann" in report:
        checks["check_eigen_neumann"] = (
            abs(report["eigen_slope"] - report["q_neumann"]) <= report["eigen_tolerance"]
        )
    return checks


_SUMMARY_ORDER = [
    ("dim_infty", "dim_infty_window", None),
    ("minkowski", None, None),
    ("q_neumann", None, None),
    ("q_dirichlet", None, "check_dirichlet_le_neumann"),
    ("bound_lower", None, None),
    ("bound_upper", None, "check_dim_sandwich"),
    ("h_upper", "entropy_window", "check_hbar_equals_qn"),
    ("h_lower_canonical", "entropy_window", None),
    ("alpha_gamma", "gamma_window", "check_gamma_identity"),
    ("bs_slope", None, "check_bs_decay"),
    ("f_upper", "coarse_window", "check_fbar_equals_qn"),
    ("f_lower", "coarse_window", "check_forder"),
    ("alpha_star", "coarse_window", None),
    ("kappa", None, "check_kappa_equals_qn"),
    ("eigen_slope", None, "check_eigen_neumann"),
    ("eigen_gap", None, None),
]


def _write_summary(out: Path, report: dict) -> None:
    rows = []
    for key, window_key, check_key in _SUMMARY_ORDER:
        if key not in report:
            continue
        window = report.get(window_key, "") if window_key else ""
        flag = ""
        if check_key and check_key in report:
            flag = "pass" if report[check_key] else "fail"
        rows.append([key, report[key], window, flag])
    _write_csv(out / "summary.csv", ["quantity", "value", "window", "tolerance_flag"], rows)


# ======================================================================
# driver
# ======================================================================


def run(cfg: ExperimentConfig, outdir_override: Path | str | None = None) -> RunResult:
    out = Path(outdir_override) if outdir_override is not None else cfg.outdir
    out.mkdir(parents=True, exist_ok=True)

    report: dict = {
        "name": cfg.name,
        "dimension": cfg.measure.d,
        "measure_spec": json.dumps(serialize_measure(cfg.measure), sort_keys=True),
        "set_function": cfg.set_function.label,
        "tasks": ",".join(cfg.tasks),
        "modes": ",".join(cfg.modes),
        "levels_lo": cfg.levels[0],
        "levels_hi": cfg.levels[1],
        "tolerance": cfg.tolerance,
        "seed": cfg.seed,
    }
    refusals: dict[str, str] = {}
    for task in cfg.tasks:
        if task == "report":
            continue
        try:
            _TASK_FUNCS[task](cfg, out, report, refusals)
        except _REFUSABLE as exc:
            refusals[task] = f"{type(exc).__name__}: {exc}"

    for task, message in sorted(refusals.items()):
        report[f"refusal_{task}"] = message
    checks = recompute_checks(report)
    report.update(checks)
    report["all_checks_pass"] = bool(checks) and all(checks.values()) and not refusals

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_summary(out, report)

    if checks and not all(checks.values()):
        code = 1
    elif refusals:
        code = 3
    elif checks:
        code = 0
    else:
        # nothing checkable was requested; success means no refusals
        code = 0
    return RunResult(report=report, outdir=out, exit_code=code)


def check_report(path: str | Path) -> tuple[bool, dict, dict]:
    """Recompute the bound booleans of a stored report.

    Returns (agree, recomputed, stored); ``agree`` also requires the
    stored ``all_checks_pass`` to match.
    """
    data = json.loads(Path(path).read_text())
    recomputed = recompute_checks(data)
    stored = {k: data[k] for k in recomputed if k in data}
    refusals = [k for k in data if k.startswith("refusal_")]
    expected_all = bool(recomputed) and all(recomputed.values()) and not refusals
    agree = stored == recomputed and data.get("all_checks_pass") == expected_all
    return agree, recomputed, stored
