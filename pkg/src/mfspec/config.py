"""Experiment configuration: JSON parsing, validation, measure construction.

A config file is a JSON object; every validation error names the offending
field path.  Rational weights may be given as strings ("9/25") and are kept
exact end to end, so serializing a parsed measure reproduces them bit for
bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .densities import CuspMeasure, cusp_measure
from .measures import (
    CascadeMeasure,
    ConstantSchedule,
    MeasureModel,
    PeriodicSchedule,
    PowerLawDensity,
    ProductMeasure,
    build_block_cascade,
    lebesgue,
)
from .registry import get_measure
from .setfun import SetFunction

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TASKS",
    "build_measure",
    "build_set_function",
    "load_config",
    "parse_config",
    "serialize_measure",
]

# canonical execution order; "report" always runs last
TASKS = ("dims", "tau", "qzero", "partition", "gamma", "bs", "coarse", "eigen", "report")

_QUAD_FLOOR = 1e-12  # density masses are always computed at least this tight


class ConfigError(ValueError):
    """Invalid configuration, carrying the offending field path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


# ======================================================================
# scalar parsing
# ======================================================================


def _as_fraction(value: Any, path: str) -> Fraction:
    """Exact rational from an int, float, or 'p/q' string."""
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)  # exact binary value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(path, f"not a rational: {value!r} ({exc})") from None
    raise ConfigError(path, f"expected number or rational string, got {type(value).__name__}")


def _as_float(value: Any, path: str) -> float:
    return float(_as_fraction(value, path))


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, known: set[str], path: str) -> None:
    extra = sorted(set(obj) - known)
    if extra:
        raise ConfigError(path, f"unknown field(s) {extra}; known: {sorted(known)}")


def _grid(value: Any, path: str) -> tuple[float, ...]:
    """A grid is either an explicit list or {lo, hi, step}."""
    if isinstance(value, list):
        if len(value) < 2:
            raise ConfigError(path, "grid needs at least two points")
        pts = tuple(_as_float(v, f"{path}[{i}]") for i, v in enumerate(value))
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ConfigError(path, "grid must be strictly increasing")
        return pts
    if isinstance(value, dict):
        _reject_unknown(value, {"lo", "hi", "step"}, path)
        lo = _as_float(value.get("lo", 0.0), f"{path}.lo")
        hi = _as_float(value.get("hi"), f"{path}.hi") if "hi" in value else None
        if hi is None:
            raise ConfigError(path, "grid object needs 'hi'")
        step = _as_float(value.get("step", 0.25), f"{path}.step")
        if step <= 0 or hi <= lo:
            raise ConfigError(path, f"need lo < hi and step > 0, got lo={lo} hi={hi} step={step}")
        count = int(round((hi - lo) / step))
        return tuple(lo + i * step for i in range(count + 1))
    raise ConfigError(path, "expected a list of points or {lo, hi, step}")


# ======================================================================
# measure construction
# ======================================================================

_CUSP_IDS = {"cusp-f1": 1, "cusp-f2": 2, "cusp-f3": 3}


def _weights_exact(entries: list, d: int, path: str) -> tuple[tuple[float, ...], tuple[Fraction, ...] | None]:
    if len(entries) != 1 << d:
        raise ConfigError(path, f"need {1 << d} child weights for dimension {d}, got {len(entries)}")
    fracs = [_as_fraction(v, f"{path}[{i}]") for i, v in enumerate(entries)]
    if any(f < 0 for f in fracs):
        raise ConfigError(path, "negative weight")
    all_rational = all(isinstance(v, (str, int)) for v in entries)
    if all_rational:
        if sum(fracs) != 1:
            raise ConfigError(path, f"rational weights sum to {sum(fracs)}, not 1")
        return tuple(float(f) for f in fracs), tuple(fracs)
    w = tuple(float(f) for f in fracs)
    if abs(sum(w) - 1.0) > 1e-12:
        raise ConfigError(path, f"weights sum to {sum(w)!r}, not 1")
    return w, None


def _build_cascade(spec: dict, path: str) -> CascadeMeasure:
    _reject_unknown(spec, {"kind", "dimension", "weights", "block"}, path)
    d = _as_int(spec.get("dimension"), f"{path}.dimension") if "dimension" in spec else None
    if "block" in spec:
        if "weights" in spec:
            raise ConfigError(path, "give either 'weights' or 'block', not both")
        blk = spec["block"]
        if not isinstance(blk, dict):
            raise ConfigError(f"{path}.block", "expected an object")
        _reject_unknown(blk, {"c_plus", "c_minus", "unit"}, f"{path}.block")
        if d not in (None, 1):
            raise ConfigError(f"{path}.dimension", "block cascades are 1-dimensional")
        for key in ("c_plus", "c_minus", "unit"):
            if key not in blk:
                raise ConfigError(f"{path}.block.{key}", "required")
        try:
            return build_block_cascade(
                _as_fraction(blk["c_plus"], f"{path}.block.c_plus"),
                _as_fraction(blk["c_minus"], f"{path}.block.c_minus"),
                _as_int(blk["unit"], f"{path}.block.unit"),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}.block", str(exc)) from None
    if d is None:
        raise ConfigError(f"{path}.dimension", "required")
    if not 1 <= d <= 4:
        raise ConfigError(f"{path}.dimension", f"expected 1..4, got {d}")
    wspec = spec.get("weights")
    if wspec is None:
        raise ConfigError(f"{path}.weights", "required")
    if isinstance(wspec, dict):
        _reject_unknown(wspec, {"periodic"}, f"{path}.weights")
        cyc = wspec.get("periodic")
        if not isinstance(cyc, list) or not cyc:
            raise ConfigError(f"{path}.weights.periodic", "expected a non-empty list of weight vectors")
        floats, exacts = [], []
        for i, entry in enumerate(cyc):
            if not isinstance(entry, list):
                raise ConfigError(f"{path}.weights.periodic[{i}]", "expected a weight vector")
            w, ex = _weights_exact(entry, d, f"{path}.weights.periodic[{i}]")
            floats.append(w)
            exacts.append(ex)
        exact = tuple(exacts) if all(e is not None for e in exacts) else None
        return CascadeMeasure(d, PeriodicSchedule(tuple(floats), exact))
    if isinstance(wspec, list):
        w, exact = _weights_exact(wspec, d, f"{path}.weights")
        return CascadeMeasure(d, ConstantSchedule(w, exact))
    raise ConfigError(f"{path}.weights", "expected a list or {'periodic': [...]}")


def _build_density(spec: dict, path: str) -> MeasureModel:
    _reject_unknown(spec, {"kind", "dimension", "density_id", "tolerance", "beta"}, path)
    did = _as_str(spec.get("density_id", ""), f"{path}.density_id")
    if not did:
        raise ConfigError(f"{path}.density_id", "required")
    d = _as_int(spec.get("dimension"), f"{path}.dimension") if "dimension" in spec else None
    if "tolerance" in spec:
        tol = _as_float(spec["tolerance"], f"{path}.tolerance")
        if not 0 < tol < 1:
            raise ConfigError(f"{path}.tolerance", f"expected a relative tolerance in (0,1), got {tol}")
        if tol < _QUAD_FLOOR:
            raise ConfigError(
                f"{path}.tolerance", f"tighter than the supported quadrature floor {_QUAD_FLOOR}"
            )
    if did == "constant":
        if d is None:
            raise ConfigError(f"{path}.dimension", "required for constant density")
        return lebesgue(d)
    if did in _CUSP_IDS:
        if d not in (None, 3):
            raise ConfigError(f"{path}.dimension", "cusp densities live on the unit cube in dimension 3")
        return cusp_measure(_CUSP_IDS[did])
    if did == "power-law":
        if d not in (None, 1):
            raise ConfigError(f"{path}.dimension", "power-law density is 1-dimensional")
        if "beta" not in spec:
            raise ConfigError(f"{path}.beta", "required for power-law density")
        beta = _as_fraction(spec["beta"], f"{path}.beta")
        if not beta > -1:
            raise ConfigError(f"{path}.beta", f"must exceed -1, got {beta}")
        return PowerLawDensity(beta)
    raise ConfigError(
        f"{path}.density_id",
        f"unknown id {did!r}; known: constant, cusp-f1, cusp-f2, cusp-f3, power-law",
    )


def build_measure(spec: Any, path: str = "measure") -> MeasureModel:
    """Build a measure from a registry name or a {kind: ...} object."""
    if isinstance(spec, str):
        try:
            return get_measure(spec)
        except KeyError as exc:
            raise ConfigError(path, str(exc.args[0])) from None
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected a registry name or an object with a 'kind' field")
    kind = spec.get("kind")
    if kind == "cascade":
        return _build_cascade(spec, path)
    if kind == "density":
        return _build_density(spec, path)
    if kind == "product":
        _reject_unknown(spec, {"kind", "factors"}, path)
        factors = spec.get("factors")
        if not isinstance(factors, list) or len(factors) < 2:
            raise ConfigError(f"{path}.factors", "expected a list of at least two factor specs")
        built = [build_measure(f, f"{path}.factors[{i}]") for i, f in enumerate(factors)]
        for i, m in enumerate(built):
            if m.d != 1:
                raise ConfigError(f"{path}.factors[{i}]", f"factors must be 1-dimensional, got d={m.d}")
        return ProductMeasure(built)
    raise ConfigError(f"{path}.kind", f"expected one of cascade, density, product; got {kind!r}")


def _frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 else str(f.numerator)


def serialize_measure(measure: MeasureModel) -> Any:
    """Measure back to spec form; exact rationals survive bit for bit."""
    if isinstance(measure, CascadeMeasure):
        sched = measure.schedule
        if isinstance(sched, ConstantSchedule):
            weights: Any
            if sched.exact is not None:
                weights = [_frac_str(w) for w in sched.exact]
            else:
                weights = list(sched.w)
            return {"kind": "cascade", "dimension": measure.d, "weights": weights}
        if isinstance(sched, PeriodicSchedule):
            if sched.exact is not None:
                cyc = [[_frac_str(w) for w in vec] for vec in sched.exact]
            else:
                cyc = [list(vec) for vec in sched.cycle]
            return {"kind": "cascade", "dimension": measure.d, "weights": {"periodic": cyc}}
        if hasattr(sched, "c_plus"):
            return {
                "kind": "cascade",
                "block": {
                    "c_plus": _frac_str(sched.c_plus),
                    "c_minus": _frac_str(sched.c_minus),
                    "unit": sched.unit,
                },
            }
        raise ValueError(f"cannot serialize schedule {type(sched).__name__}")
    if isinstance(measure, CuspMeasure):
        which = {(-2.0, 0.0): 1, (-2.0, -4.0 / 3.0): 2, (-2.0, 1.0): 3}[
            (measure.profile.p, measure.profile.s)
        ]
        return {"kind": "density", "dimension": 3, "density_id": f"cusp-f{which}"}
    if isinstance(measure, PowerLawDensity):
        beta = measure.beta
        val = _frac_str(beta) if isinstance(beta, Fraction) else float(beta)
        return {"kind": "density", "dimension": 1, "density_id": "power-law", "beta": val}
    if isinstance(measure, ProductMeasure):
        return {"kind": "product", "factors": [serialize_measure(f) for f in measure.factors]}
    raise ValueError(f"cannot serialize measure {type(measure).__name__}")


# ======================================================================
# set-function construction
# ======================================================================


def build_set_function(spec: Any, measure: MeasureModel, path: str = "set_function") -> SetFunction:
    if spec is None:
        spec = {"kind": "nu-spectral"}
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with a 'kind' field")
    kind = spec.get("kind")
    if kind == "plain":
        _reject_unknown(spec, {"kind"}, path)
        return SetFunction.plain(measure)
    if kind == "nu-spectral":
        _reject_unknown(spec, {"kind"}, path)
        return SetFunction.nu_spectral(measure)
    if kind == "nu-spectral-t":
        _reject_unknown(spec, {"kind", "t"}, path)
        if "t" not in spec:
            raise ConfigError(f"{path}.t", "required")
        return SetFunction.nu_spectral_t(measure, _as_float(spec["t"], f"{path}.t"))
    if kind == "spectral":
        _reject_unknown(spec, {"kind", "a", "b"}, path)
        a = _as_float(spec.get("a", 0.0), f"{path}.a")
        b = _as_float(spec.get("b", 1.0), f"{path}.b")
        if b <= 0:
            raise ConfigError(f"{path}.b", f"must be positive, got {b}")
        return SetFunction.spectral(measure, a=a, b=b)
    if kind == "log-spectral":
        _reject_unknown(spec, {"kind", "b"}, path)
        b = _as_float(spec.get("b", 1.0), f"{path}.b")
        if b <= 0:
            raise ConfigError(f"{path}.b", f"must be positive, got {b}")
        return SetFunction.log_spectral(measure, b=b)
    if kind == "density-norm":
        _reject_unknown(spec, {"kind", "r"}, path)
        if "r" not in spec:
            raise ConfigError(f"{path}.r", "required")
        r = _as_float(spec["r"], f"{path}.r")
        if r <= 1:
            raise ConfigError(f"{path}.r", f"needs r > 1, got {r}")
        if not hasattr(measure, "lr_integral_histogram"):
            raise ConfigError(path, "density-norm requires a density measure with L^r integrals")
        return SetFunction.density_norm(measure, r=r)
    raise ConfigError(
        f"{path}.kind",
        f"expected one of plain, nu-spectral, nu-spectral-t, spectral, log-spectral, density-norm; got {kind!r}",
    )


# ======================================================================
# task blocks
# ======================================================================


@dataclass(frozen=True)
class PartitionTask:
    threshold: float | None = None  # default: J(unit) * 2^(-2d), resolved at run time
    x_exponents: tuple[int, ...] = tuple(range(4, 17, 2))


@dataclass(frozen=True)
class GammaTask:
    levels: tuple[int, ...] = tuple(2**k for k in range(5, 26, 2))


@dataclass(frozen=True)
class BsTask:
    a: float = 1.0
    steps: int = 8


@dataclass(frozen=True)
class EigenTask:
    level: int | None = None  # default 11 (d=1) or 6 (d=2)
    tolerance: float = 0.1


@dataclass(frozen=True)
class KappaTask:
    level_budget: int = 12
    margin: float = 0.05
    q_grid: tuple[float, ...] | None = None  # default: the config q_grid


def _parse_partition(obj: Any, path: str) -> PartitionTask:
    if obj is None:
        return PartitionTask()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(obj, {"threshold", "x_exponents"}, path)
    threshold = None
    if "threshold" in obj:
        threshold = _as_float(obj["threshold"], f"{path}.threshold")
        if threshold <= 0:
            raise ConfigError(f"{path}.threshold", f"must be positive, got {threshold}")
    xs = PartitionTask().x_exponents
    if "x_exponents" in obj:
        raw = obj["x_exponents"]
        if not isinstance(raw, list) or len(raw) < 2:
            raise ConfigError(f"{path}.x_exponents", "expected a list of at least two integers")
        xs = tuple(_as_int(v, f"{path}.x_exponents[{i}]") for i, v in enumerate(raw))
        if any(b <= a for a, b in zip(xs, xs[1:])) or xs[0] < 1:
            raise ConfigError(f"{path}.x_exponents", "must be strictly increasing and >= 1")
    return PartitionTask(threshold, xs)


def _parse_gamma(obj: Any, path: str) -> GammaTask:
    if obj is None:
        return GammaTask()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(obj, {"levels"}, path)
    levels = GammaTask().levels
    if "levels" in obj:
        raw = obj["levels"]
        if not isinstance(raw, list) or len(raw) < 2:
            raise ConfigError(f"{path}.levels", "expected a list of at least two integers")
        levels = tuple(_as_int(v, f"{path}.levels[{i}]") for i, v in enumerate(raw))
        if any(b <= a for a, b in zip(levels, levels[1:])) or levels[0] < 1:
            raise ConfigError(f"{path}.levels", "must be strictly increasing and >= 1")
    return GammaTask(levels)


def _parse_bs(obj: Any, path: str) -> BsTask:
    if obj is None:
        return BsTask()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(obj, {"a", "steps"}, path)
    a = _as_float(obj.get("a", 1.0), f"{path}.a")
    if a <= 0:
        raise ConfigError(f"{path}.a", f"refinement exponent must be positive, got {a}")
    steps = _as_int(obj.get("steps", 8), f"{path}.steps")
    if not 1 <= steps <= 200:
        raise ConfigError(f"{path}.steps", f"expected 1..200, got {steps}")
    return BsTask(a, steps)


def _parse_eigen(obj: Any, path: str, d: int) -> EigenTask:
    if obj is None:
        return EigenTask()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(obj, {"level", "tolerance"}, path)
    level = None
    if "level" in obj:
        level = _as_int(obj["level"], f"{path}.level")
        if d <= 2 and not 1 <= level * d <= 26:
            raise ConfigError(f"{path}.level", f"need 1 <= d*L <= 26, got d={d} L={level}")
    tol = _as_float(obj.get("tolerance", 0.1), f"{path}.tolerance")
    if tol <= 0:
        raise ConfigError(f"{path}.tolerance", "must be positive")
    return EigenTask(level, tol)


def _parse_kappa(obj: Any, path: str) -> KappaTask | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(obj, {"level_budget", "margin", "q_grid"}, path)
    budget = _as_int(obj.get("level_budget", 12), f"{path}.level_budget")
    if not 2 <= budget <= 24:
        raise ConfigError(f"{path}.level_budget", f"expected 2..24, got {budget}")
    margin = _as_float(obj.get("margin", 0.05), f"{path}.margin")
    if margin <= 0:
        raise ConfigError(f"{path}.margin", "must be positive")
    qg = _grid(obj["q_grid"], f"{path}.q_grid") if "q_grid" in obj else None
    return KappaTask(budget, margin, qg)


# ======================================================================
# top level
# ======================================================================

_TOP_KEYS = {
    "name",
    "measure",
    "set_function",
    "tasks",
    "modes",
    "levels",
    "q_grid",
    "alpha_grid",
    "outdir",
    "seed",
    "tolerance",
    "partition",
    "gamma",
    "bs",
    "eigen",
    "kappa",
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    measure: MeasureModel
    set_function: SetFunction
    tasks: tuple[str, ...]
    modes: tuple[str, ...]
    levels: tuple[int, int]
    q_grid: tuple[float, ...]
    alpha_grid: tuple[float, ...] | None
    outdir: Path
    seed: int
    tolerance: float
    partition: PartitionTask = field(default_factory=PartitionTask)
    gamma: GammaTask = field(default_factory=GammaTask)
    bs: BsTask = field(default_factory=BsTask)
    eigen: EigenTask = field(default_factory=EigenTask)
    kappa: KappaTask | None = None

    @property
    def finest_level(self) -> int:
        return self.levels[1]


def parse_config(raw: Any, source: str = "config") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(source, "top level must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, source)
    if "measure" not in raw:
        raise ConfigError("measure", "required")
    measure = build_measure(raw["measure"])
    set_function = build_set_function(raw.get("set_function"), measure)

    name = raw.get("name")
    if name is None:
        name = raw["measure"] if isinstance(raw["measure"], str) else "run"
    name = _as_str(name, "name")

    tasks_raw = raw.get("tasks", ["dims", "tau", "qzero", "report"])
    if not isinstance(tasks_raw, list) or not tasks_raw:
        raise ConfigError("tasks", "expected a non-empty list")
    for i, t in enumerate(tasks_raw):
        if t not in TASKS:
            raise ConfigError(f"tasks[{i}]", f"unknown task {t!r}; known: {list(TASKS)}")
    seen = set()
    tasks = tuple(t for t in TASKS if t in tasks_raw and not (t in seen or seen.add(t)))

    modes_raw = raw.get("modes", ["neumann", "dirichlet"])
    if not isinstance(modes_raw, list) or not modes_raw:
        raise ConfigError("modes", "expected a non-empty list")
    for i, m in enumerate(modes_raw):
        if m not in ("neumann", "dirichlet"):
            raise ConfigError(f"modes[{i}]", f"unknown mode {m!r}")
    modes = tuple(m for m in ("neumann", "dirichlet") if m in modes_raw)

    lv = raw.get("levels", [2, 8])
    if not (isinstance(lv, list) and len(lv) == 2):
        raise ConfigError("levels", "expected [lo, hi]")
    lo, hi = _as_int(lv[0], "levels[0]"), _as_int(lv[1], "levels[1]")
    if not 1 <= lo <= hi <= 60:
        raise ConfigError("levels", f"need 1 <= lo <= hi <= 60, got [{lo}, {hi}]")

    q_grid = _grid(raw.get("q_grid", {"lo": 0.0, "hi": 4.0, "step": 0.25}), "q_grid")
    if any(q < 0 for q in q_grid):
        raise ConfigError("q_grid", "moments are defined for q >= 0 only")
    alpha_grid = _grid(raw["alpha_grid"], "alpha_grid") if "alpha_grid" in raw else None
    if alpha_grid is not None and any(a <= 0 for a in alpha_grid):
        raise ConfigError("alpha_grid", "hoelder exponents must be positive")

    outdir = Path(_as_str(raw.get("outdir", f"out/{name}"), "outdir"))
    seed = _as_int(raw.get("seed", 0), "seed")
    tolerance = _as_float(raw.get("tolerance", 0.1), "tolerance")
    if tolerance <= 0:
        raise ConfigError("tolerance", "must be positive")

    return ExperimentConfig(
        name=name,
        measure=measure,
        set_function=set_function,
        tasks=tasks,
        modes=modes,
        levels=(lo, hi),
        q_grid=q_grid,
        alpha_grid=alpha_grid,
        outdir=outdir,
        seed=seed,
        tolerance=tolerance,
        partition=_parse_partition(raw.get("partition"), "partition"),
        gamma=_parse_gamma(raw.get("gamma"), "gamma"),
        bs=_parse_bs(raw.get("bs"), "bs"),
        eigen=_parse_eigen(raw.get("eigen"), "eigen", measure.d),
        kappa=_parse_kappa(raw.get("kappa"), "kappa"),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(str(path), "config file not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    return parse_config(raw, source=str(path))
