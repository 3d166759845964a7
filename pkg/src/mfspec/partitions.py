"""Stopping-time partitions, partition-entropy counting and greedy refinement.

Two evaluation regimes coexist:

* ``stopping_partition`` materializes the partition cube by cube — needed
  for dumps, validity checks and measures without multiplicative level
  structure;
* ``stopping_count`` / ``partition_count`` / ``gamma_n`` count through
  whole-level value tables, which scales to thresholds where the partition
  itself would have ~2^70 elements.

Both implement the same rule: a cube is *bad* when its set-function value
is >= the threshold; bad cubes are subdivided, good cubes are emitted, and
zero-value cubes are counted but not stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .cubes import DyadicCube
from .measures import CascadeMeasure, MeasureModel, ProductMeasure
from .numerics import NEG_INF, fit_line
from .setfun import (
    RefusalError,
    SetFunction,
    _homogeneous_shift,
    count_values_at_least,
    log2_max_value,
    set_function_eval,
    value_table,
)

__all__ = [
    "Partition",
    "PartitionDepthError",
    "StoppingCount",
    "check_partition",
    "stopping_partition",
    "stopping_count",
    "partition_count",
    "gamma_n",
    "TraceStep",
    "RefinementTrace",
    "bs_refine",
]

_EPS = 1e-9


class PartitionDepthError(RuntimeError):
    """Subdivision exhausted its depth budget with bad cubes remaining.

    Carries the deepest bad cube as a diagnostic: a set function that is
    not uniformly vanishing keeps such witnesses alive forever.
    """

    def __init__(self, cube: DyadicCube, value: float, budget: int) -> None:
        self.cube = cube
        self.value = value
        super().__init__(
            f"depth budget {budget} exhausted; bad cube remains: "
            f"{cube} with value {value:.6g} (set function may not vanish "
            "uniformly)"
        )


# ======================================================================
# partition container
# ======================================================================


@dataclass(frozen=True)
class Partition:
    """Positive-value part of a full dyadic partition of the unit cube.

    ``cubes`` is level-major lexicographic; zero-value complement cubes are
    retained only as ``zero_count`` with their exact total volume, so the
    coverage identity stays checkable by address arithmetic.
    """

    cubes: tuple[DyadicCube, ...]
    values: tuple[float, ...]
    origin: str
    zero_count: int = 0
    zero_volume: Fraction = Fraction(0)
    threshold: float | None = None

    def __len__(self) -> int:
        return len(self.cubes)

    @property
    def max_value(self) -> float:
        return max(self.values) if self.values else 0.0

    def finest_level(self) -> int:
        return max((c.level for c in self.cubes), default=0)


def check_partition(
    partition: Partition,
    J: SetFunction | None = None,
    t: float | None = None,
) -> None:
    """Assert the partition invariants; raises AssertionError on violation.

    Address arithmetic: stored + zero volumes must tile the unit cube
    exactly, and no stored cube may be an ancestor of another.  When the
    originating set function and threshold are supplied, also re-checks the
    stopping rule (every stored cube good, every parent bad).
    """
    vol = partition.zero_volume
    seen = set()
    for cube in partition.cubes:
        key = (cube.level, cube.coords)
        assert key not in seen, f"duplicate cube {cube}"
        seen.add(key)
        vol += Fraction(1, 1 << (cube.d * cube.level))
    assert vol == 1, f"partition volumes sum to {vol}, not 1"
    for cube in partition.cubes:
        anc = cube
        while anc.level > 0:
            anc = anc.parent()
            assert (anc.level, anc.coords) not in seen, (
                f"{cube} is nested inside a stored cube"
            )
    if J is None or t is None:
        return
    for cube, value in zip(partition.cubes, partition.values):
        assert value < t, f"stored cube {cube} is bad: {value:.6g} >= {t:.6g}"
        if cube.level > 0:
            pv = set_function_eval(J, cube.parent()).value
            assert pv >= t, (
                f"parent of {cube} is good ({pv:.6g} < {t:.6g}); "
                "the subdivision stopped too late"
            )


# ======================================================================
# materialized stopping partition
# ======================================================================


def stopping_partition(
    J: SetFunction,
    t: float,
    depth_budget: int = 64,
    store_budget: int = 1 << 20,
) -> Partition:
    """Breadth-first subdivision of every cube with value >= t.

    Requires 0 < t < J(unit cube).  Zero-value children are counted, not
    stored.  Termination is guarded by ``depth_budget``; exhausting it
    raises :class:`PartitionDepthError` naming a surviving bad cube.
    """
    root = DyadicCube.unit(J.d)
    ev = set_function_eval(J, root)
    if not 0.0 < t < ev.value:
        raise ValueError(
            f"threshold must satisfy 0 < t < J(unit) = {ev.value:.6g}; got {t}"
        )
    stored: list[tuple[DyadicCube, float]] = []
    zero_count = 0
    zero_volume = Fraction(0)
    frontier: list[tuple[DyadicCube, float]] = [(root, ev.value)]
    level = 0
    while frontier:
        if level >= depth_budget:
            worst = max(frontier, key=lambda cv: cv[1])
            raise PartitionDepthError(worst[0], worst[1], depth_budget)
        level += 1
        nxt: list[tuple[DyadicCube, float]] = []
        for cube, _ in frontier:
            for child in cube.children():
                cev = set_function_eval(J, child)
                if not cev.exact and cev.value < t <= cev.tail_bound:
                    raise RefusalError(
                        f"cannot classify {child}: certified value interval "
                        f"[{cev.value:.6g}, {cev.tail_bound:.6g}] straddles "
                        f"the threshold {t:.6g}"
                    )
                if cev.value <= 0.0:
                    zero_count += 1
                    zero_volume += Fraction(1, 1 << (child.d * child.level))
                elif cev.value >= t:
                    nxt.append((child, cev.value))
                else:
                    stored.append((child, cev.value))
        if len(stored) + len(nxt) > store_budget:
            raise MemoryError(
                f"stopping partition exceeds store budget {store_budget} "
                f"at level {level}; use stopping_count for cardinalities"
            )
        frontier = nxt
    stored.sort(key=lambda cv: (cv[0].level, cv[0].coords))
    return Partition(
        cubes=tuple(c for c, _ in stored),
        values=tuple(v for _, v in stored),
        origin=f"stopping({t!r})",
        zero_count=zero_count,
        zero_volume=zero_volume,
        threshold=t,
    )


# ======================================================================
# whole-level counting
# ======================================================================


def _uniform_child_count(measure: MeasureModel, level: int) -> int | None:
    """Positive children per support cube when shared by the whole level."""
    if isinstance(measure, CascadeMeasure):
        return sum(1 for w in measure.schedule.weights(level + 1) if w > 0.0)
    if isinstance(measure, ProductMeasure):
        out = 1
        for f in measure.factors:
            part = _uniform_child_count(f, level)
            if part is None:
                return None
            out *= part
        return out
    return None


def _child_log2_ratios(measure: MeasureModel, level: int) -> list[float] | None:
    """log2 mass ratios child/parent over the positive children, or None."""
    if isinstance(measure, CascadeMeasure):
        return [math.log2(w) for w in measure.schedule.weights(level + 1) if w > 0.0]
    if isinstance(measure, ProductMeasure):
        acc = [0.0]
        for f in measure.factors:
            part = _child_log2_ratios(f, level)
            if part is None:
                return None
            acc = [x + y for x in acc for y in part]
        return acc
    return None


def _value_shift(J: SetFunction, n: int) -> float | None:
    """log2 J(Q) - b log2 nu(Q), when shared across the level; else None."""
    if J.kind == "plain":
        return 0.0
    if J.kind == "density-norm":
        return None
    try:
        return _homogeneous_shift(J, n)
    except NotImplementedError:
        return None


@dataclass(frozen=True)
class StoppingCount:
    """Cardinalities of a stopping partition, without materializing it."""

    threshold: float
    positive: int
    zero: int
    bad_total: int
    max_stored_log2: float
    deepest_level: int


def _counting_supported(J: SetFunction) -> bool:
    if _value_shift(J, 0) is None:
        return False
    return _uniform_child_count(J.measure, 0) is not None


def stopping_count(
    J: SetFunction,
    t: float,
    depth_budget: int = 2048,
    with_max: bool = True,
) -> StoppingCount:
    """Count the stopping partition through per-level value tables.

    Uses the identity: stored cubes at level n are the positive children
    of bad level-(n-1) cubes minus the bad level-n cubes (set functions
    are monotone, so a bad cube always has a bad parent).  Falls back to
    materializing when the measure has no shared level structure.
    """
    if t <= 0.0:
        raise ValueError("threshold must be positive")
    if not _counting_supported(J):
        part = stopping_partition(J, t, depth_budget=min(depth_budget, 64))
        return StoppingCount(
            t,
            len(part),
            part.zero_count,
            -1,
            math.log2(part.max_value) if part.cubes else NEG_INF,
            part.finest_level(),
        )
    log2_t = math.log2(t)
    v0 = log2_max_value(J, 0)
    if log2_t > v0:
        return StoppingCount(t, 1, 0, 0, v0, 0)

    d = J.d
    positive = 0
    zero = 0
    bad_total = 0
    bad_prev = 1  # the unit cube is bad
    n = 0
    while bad_prev > 0:
        if n >= depth_budget:
            raise PartitionDepthError(
                DyadicCube.unit(d), 2.0 ** log2_max_value(J, n), depth_budget
            )
        bad_total += bad_prev
        m = _uniform_child_count(J.measure, n)
        bad_next = count_values_at_least(J, n + 1, log2_t)
        positive += m * bad_prev - bad_next
        zero += ((1 << d) - m) * bad_prev
        bad_prev = bad_next
        n += 1

    max_stored = NEG_INF
    if with_max:
        shift = [_value_shift(J, k) for k in range(n + 1)]
        for k in range(n):
            vals, _ = value_table(J, k)
            i0 = len(vals) - 1
            while i0 >= 0 and vals[i0] >= log2_t - 1e-9:
                i0 -= 1
            factors = [
                J.b * r + shift[k + 1] - shift[k]
                for r in _child_log2_ratios(J.measure, k)
            ]
            for v in vals[i0 + 1 :]:  # bad classes at level k
                for f in factors:
                    cand = v + f
                    if cand < log2_t - 1e-9 and cand > max_stored:
                        max_stored = cand
    return StoppingCount(t, positive, zero, bad_total, max_stored, n)


def partition_count(J: SetFunction, x: float) -> int:
    """Partition-entropy counting: cardinality at value threshold 1/x."""
    v0 = 2.0 ** log2_max_value(J, 0)
    if x <= 1.0 / v0:
        raise ValueError(f"need x > 1/J(unit cube) = {1.0 / v0:.6g}; got {x}")
    return stopping_count(J, 1.0 / x, with_max=False).positive


def gamma_n(J: SetFunction, n: int) -> float:
    """Best max-value over realized stopping partitions of cardinality <= n.

    Bisects the threshold on a log scale (60 iterations) for the smallest
    t whose stopping partition stays within n positive cubes, then reports
    that partition's largest stored value.  n = 1 returns J(unit cube).
    """
    if n < 1:
        raise ValueError("cardinality bound must be >= 1")
    v0 = log2_max_value(J, 0)
    if n == 1:
        return 2.0**v0

    def card(log2_t: float) -> int:
        return stopping_count(J, 2.0**log2_t, with_max=False).positive

    hi = v0 + 1e-9
    lo, step = v0 - 1.0, 1.0
    while card(lo) <= n:
        hi = lo
        step *= 2.0
        lo = v0 - step
        if lo < -1100.0:  # threshold below float range: nothing left to gain
            return 2.0 ** stopping_count(J, 2.0**hi).max_stored_log2
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if card(mid) <= n:
            hi = mid
        else:
            lo = mid
    return 2.0 ** stopping_count(J, 2.0**hi).max_stored_log2


# ======================================================================
# greedy max-chasing refinement
# ======================================================================


@dataclass(frozen=True)
class TraceStep:
    k: int
    cardinality: int
    g_value: float
    splits: int


@dataclass(frozen=True)
class RefinementTrace:
    """Trace of the split-everything-near-the-max refinement.

    ``steps[k]`` records the positive cardinality N_k, the partition
    maximum G_a(P_k) of mass * volume^a, and how many cubes were split to
    get there.
    """

    a: float
    d: int
    initial_cardinality: int
    steps: tuple[TraceStep, ...]
    final: Partition

    def decay_fit(self) -> tuple[float, float]:
        """Slope and log2-intercept of log G against log (N_k - N_0)."""
        xs = [
            math.log2(s.cardinality - self.initial_cardinality)
            for s in self.steps
            if s.cardinality > self.initial_cardinality
        ]
        ys = [
            math.log2(s.g_value)
            for s in self.steps
            if s.cardinality > self.initial_cardinality
        ]
        if len(xs) < 2:
            raise ValueError("trace too short for a decay fit")
        return fit_line(xs, ys)


def _check_split_hypotheses(measure: MeasureModel, tol: float = 1e-9) -> None:
    """Spot-check subadditivity and monotonicity on shallow support cubes."""
    root = DyadicCube.unit(measure.d)
    frontier = [(root, measure.mass(root))]
    for _ in range(3):
        nxt = []
        for cube, m in frontier:
            child_masses = [(ch, measure.mass(ch)) for ch in cube.children()]
            total = sum(mm for _, mm in child_masses)
            if m > total + tol * max(1.0, m):
                raise RefusalError(
                    f"subadditivity fails at {cube}: mass {m:.6g} > "
                    f"children total {total:.6g}"
                )
            for ch, mm in child_masses:
                if mm > m * (1.0 + 1e-12) + tol * 1e-3:
                    raise RefusalError(
                        f"monotonicity fails at {ch}: child mass {mm:.6g} "
                        f"exceeds parent mass {m:.6g}"
                    )
                if mm > 0.0:
                    nxt.append((ch, mm))
        frontier = nxt[:64]


def bs_refine(
    J_base: MeasureModel,
    a: float,
    initial: Partition | None = None,
    steps: int = 10,
    store_budget: int = 1 << 20,
) -> RefinementTrace:
    """Iteratively split every cube within 2^(-da) of the partition max.

    The functional driving the refinement is mass(Q) * volume(Q)^a.  Each
    step contracts the maximum by at least 2^(-ad) exactly (monotone mass,
    deterministic volume), which the loop asserts.
    """
    if a <= 0.0:
        raise ValueError("exponent a must be positive")
    if steps < 1:
        raise ValueError("need at least one refinement step")
    _check_split_hypotheses(J_base)
    d = J_base.d

    def value(cube: DyadicCube, m: float) -> float:
        return m * 2.0 ** (a * cube.log2_volume)

    if initial is None:
        root = DyadicCube.unit(d)
        current = [(root, J_base.mass(root))]
        zero_count, zero_volume = 0, Fraction(0)
    else:
        current = [(c, J_base.mass(c)) for c in initial.cubes]
        current = [(c, m) for c, m in current if m > 0.0]
        zero_count, zero_volume = initial.zero_count, initial.zero_volume
    n0 = len(current)
    contraction = 2.0 ** (-a * d)

    trace: list[TraceStep] = []
    g_prev = max(value(c, m) for c, m in current)
    for k in range(1, steps + 1):
        thresh = contraction * g_prev
        keep: list[tuple[DyadicCube, float]] = []
        splits = 0
        for cube, m in current:
            if value(cube, m) >= thresh:
                splits += 1
                for child in cube.children():
                    cm = J_base.mass(child)
                    if cm > 0.0:
                        keep.append((child, cm))
                    else:
                        zero_count += 1
                        zero_volume += Fraction(1, 1 << (d * (cube.level + 1)))
            else:
                keep.append((cube, m))
        current = keep
        if len(current) > store_budget:
            raise MemoryError(f"refinement exceeds store budget {store_budget}")
        g_now = max(value(c, m) for c, m in current)
        assert g_now <= contraction * g_prev * (1.0 + 1e-12), (
            f"contraction violated at step {k}: {g_now:.6g} > "
            f"{contraction * g_prev:.6g}"
        )
        trace.append(TraceStep(k, len(current), g_now, splits))
        g_prev = g_now

    current.sort(key=lambda cv: (cv[0].level, cv[0].coords))
    final = Partition(
        cubes=tuple(c for c, _ in current),
        values=tuple(value(c, m) for c, m in current),
        origin=f"birman-solomyak({steps})",
        zero_count=zero_count,
        zero_volume=zero_volume,
    )
    return RefinementTrace(a, d, n0, tuple(trace), final)
