"""Measure models on the unit cube: dyadic cascades and products.

Every model answers ``log2_mass`` on dyadic cubes exactly (cascades multiply
child weights down the tree, products multiply projections).  Models also
expose per-level mass histograms and, where the structure factorizes,
closed-form level moments, so that moment sums never require enumerating
``2^{dn}`` cubes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Sequence

import numpy as np

from .cubes import AXIS_MID, AXIS_START, DyadicCube, axis_step
from .numerics import NEG_INF, log2_sum, log2_weighted_sum

__all__ = [
    "MeasureModel",
    "CascadeMeasure",
    "ProductMeasure",
    "ConstantSchedule",
    "SequenceSchedule",
    "PeriodicSchedule",
    "BlockSchedule",
    "build_block_cascade",
    "lebesgue",
    "Histogram",
]

# A per-level mass histogram: (log2 mass, number of support cubes) pairs.
Histogram = list[tuple[float, int]]

_KEY_DIGITS = 9  # bucket rounding for float log2 keys


def _merge(buckets: dict, key, count: int) -> None:
    buckets[key] = buckets.get(key, 0) + count


def _validate_weights(w: Sequence[float], d: int) -> None:
    if len(w) != 1 << d:
        raise ValueError(f"need {1 << d} child weights for d={d}, got {len(w)}")
    if any(x < 0 for x in w):
        raise ValueError("negative child weight")
    if abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError(f"child weights sum to {math.fsum(w)!r}, not 1")


# ======================================================================
# Schedules: level -> weight vector over the 2^d children
# ======================================================================


class Schedule:
    """Weight schedule of a cascade; subclasses fix the level dependence."""

    d: int

    def weights(self, level: int) -> tuple[float, ...]:
        raise NotImplementedError

    def exact_weights(self, level: int) -> tuple[Fraction, ...] | None:
        """Rational weights when the schedule was built from rationals."""
        return None

    def log2_child_moment(self, level: int, q: float) -> float:
        """log2 of sum of w^q over the positive weights at one level."""
        return log2_sum(q * math.log2(w) for w in self.weights(level) if w > 0)

    def log2_moment_prefix(self, n: int, q: float) -> float:
        """Sum of ``log2_child_moment`` over levels 1..n (O(n) fallback)."""
        return math.fsum(self.log2_child_moment(ell, q) for ell in range(1, n + 1))

    def log2_max_prefix(self, n: int) -> float:
        """Sum over levels 1..n of log2 of the max child weight."""
        return math.fsum(
            math.log2(max(self.weights(ell))) for ell in range(1, n + 1)
        )

    def max_ratio_limsup(self) -> float:
        """limsup over levels of the largest single-step mass ratio."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantSchedule(Schedule):
    """Level-independent weights: the self-similar case."""

    w: tuple[float, ...]
    exact: tuple[Fraction, ...] | None = None

    @property
    def d(self) -> int:
        return (len(self.w) - 1).bit_length()

    def weights(self, level: int) -> tuple[float, ...]:
        return self.w

    def exact_weights(self, level: int) -> tuple[Fraction, ...] | None:
        return self.exact

    def log2_child_moment(self, level: int, q: float) -> float:
        return log2_sum(q * math.log2(w) for w in self.w if w > 0)

    def log2_moment_prefix(self, n: int, q: float) -> float:
        return n * self.log2_child_moment(1, q)

    def log2_max_prefix(self, n: int) -> float:
        return n * math.log2(max(self.w))

    def max_ratio_limsup(self) -> float:
        return max(self.w)


@dataclass(frozen=True)
class SequenceSchedule(Schedule):
    """Explicit weight vectors for the first levels, then a constant tail."""

    head: tuple[tuple[float, ...], ...]
    tail: tuple[float, ...]

    @property
    def d(self) -> int:
        return (len(self.tail) - 1).bit_length()

    def weights(self, level: int) -> tuple[float, ...]:
        if level <= len(self.head):
            return self.head[level - 1]
        return self.tail

    def log2_moment_prefix(self, n: int, q: float) -> float:
        k = min(n, len(self.head))
        head = math.fsum(self.log2_child_moment(ell, q) for ell in range(1, k + 1))
        if n <= len(self.head):
            return head
        tail_one = log2_sum(q * math.log2(w) for w in self.tail if w > 0)
        return head + (n - len(self.head)) * tail_one

    def log2_max_prefix(self, n: int) -> float:
        k = min(n, len(self.head))
        head = math.fsum(math.log2(max(h)) for h in self.head[:k])
        if n <= len(self.head):
            return head
        return head + (n - len(self.head)) * math.log2(max(self.tail))

    def max_ratio_limsup(self) -> float:
        return max(self.tail)


@dataclass(frozen=True)
class PeriodicSchedule(Schedule):
    cycle: tuple[tuple[float, ...], ...]
    exact: tuple[tuple[Fraction, ...], ...] | None = None

    @property
    def d(self) -> int:
        return (len(self.cycle[0]) - 1).bit_length()

    def weights(self, level: int) -> tuple[float, ...]:
        return self.cycle[(level - 1) % len(self.cycle)]

    def exact_weights(self, level: int) -> tuple[Fraction, ...] | None:
        if self.exact is None:
            return None
        return self.exact[(level - 1) % len(self.exact)]

    def log2_moment_prefix(self, n: int, q: float) -> float:
        full, rem = divmod(n, len(self.cycle))
        per = [self.log2_child_moment(ell, q) for ell in range(1, len(self.cycle) + 1)]
        return full * math.fsum(per) + math.fsum(per[:rem])

    def log2_max_prefix(self, n: int) -> float:
        full, rem = divmod(n, len(self.cycle))
        per = [math.log2(max(w)) for w in self.cycle]
        return full * math.fsum(per) + math.fsum(per[:rem])

    def max_ratio_limsup(self) -> float:
        return max(max(w) for w in self.cycle)


class BlockSchedule(Schedule):
    """Branching-in-{1,2} schedule realizing oscillating Cesàro split ratios.

    At each level either the cube is split into its two children with equal
    weight or the whole mass is passed to the lower child.  The split
    decisions follow a greedy rule against a phase target that alternates
    between ``c_plus`` and ``c_minus`` over geometrically growing blocks, so
    ``c_n = (number of splits up to n)/n`` attains both targets exactly at
    the block boundaries ``unit * 2^(k-1)``.
    """

    d = 1

    def __init__(self, c_plus: Fraction, c_minus: Fraction, unit: int) -> None:
        if not (0 < c_minus <= c_plus <= 1):
            raise ValueError(
                f"need 0 < c_minus <= c_plus <= 1, got {c_minus}, {c_plus}"
            )
        if unit < 1:
            raise ValueError("block unit must be >= 1")
        self.c_plus = Fraction(c_plus)
        self.c_minus = Fraction(c_minus)
        self.unit = int(unit)
        self._splits: list[bool] = []  # split flag per level, 1-based level i -> [i-1]
        self._split_prefix: list[int] = [0]  # S_n, index n

    def _target(self, level: int) -> Fraction:
        # phase 1 covers levels [1, unit]; phase k >= 2 covers
        # (unit * 2^(k-2), unit * 2^(k-1)]; odd phases aim high, even aim low
        if level <= self.unit:
            return self.c_plus
        k = 2
        hi = 2 * self.unit
        while level > hi:
            hi *= 2
            k += 1
        return self.c_plus if k % 2 == 1 else self.c_minus

    def _extend(self, n: int) -> None:
        while len(self._splits) < n:
            ell = len(self._splits) + 1
            s = self._split_prefix[-1]
            split = Fraction(s + 1, ell) <= self._target(ell)
            self._splits.append(split)
            self._split_prefix.append(s + (1 if split else 0))

    def split_count(self, n: int) -> int:
        """S_n, the number of split levels among 1..n."""
        self._extend(n)
        return self._split_prefix[n]

    def is_split(self, level: int) -> bool:
        self._extend(level)
        return self._splits[level - 1]

    def weights(self, level: int) -> tuple[float, ...]:
        return (0.5, 0.5) if self.is_split(level) else (1.0, 0.0)

    def exact_weights(self, level: int) -> tuple[Fraction, ...]:
        half = Fraction(1, 2)
        one = Fraction(1)
        return (half, half) if self.is_split(level) else (one, Fraction(0))

    def log2_moment_prefix(self, n: int, q: float) -> float:
        # split levels contribute log2(2 * 2^-q) = 1 - q, pass levels 0
        return self.split_count(n) * (1.0 - q)

    def log2_max_prefix(self, n: int) -> float:
        return -float(self.split_count(n))

    def max_ratio_limsup(self) -> float:
        # pass-through levels (ratio 1) recur forever unless every level splits
        return 0.5 if self.c_minus == 1 else 1.0


# ======================================================================
# Measure models
# ======================================================================


class MeasureModel:
    """Finite Borel measure on the unit cube, evaluatable on dyadic cubes."""

    d: int

    @property
    def total_mass(self) -> float:
        return self.mass(DyadicCube.unit(self.d))

    def log2_mass(self, cube: DyadicCube) -> float:
        raise NotImplementedError

    def mass(self, cube: DyadicCube) -> float:
        lv = self.log2_mass(cube)
        return 0.0 if lv == NEG_INF else 2.0**lv

    def positive_children(self, cube: DyadicCube) -> Iterable[tuple[DyadicCube, float]]:
        """Children with positive mass, with their log2 masses."""
        for child in cube.children():
            lv = self.log2_mass(child)
            if lv != NEG_INF:
                yield child, lv

    def mass_histogram(self, n: int, mode: str = "neumann") -> Histogram:
        raise NotImplementedError

    def log2_level_moment(self, n: int, q: float, mode: str = "neumann") -> float | None:
        """log2 of the level-n moment sum, or None when no fast path exists."""
        return None

    def max_level_log2_mass(self, n: int) -> float:
        raise NotImplementedError

    def step_ratio_bound(self, level: int) -> float:
        """Upper bound for mass(child)/mass(parent) at the given level."""
        raise NotImplementedError

    def step_ratio_limsup(self) -> float:
        raise NotImplementedError

    def supports_open_cube(self, probe_level: int = 8) -> bool:
        """Whether all deep support cubes stay away from the unit-cube boundary."""
        return False


def _check_mode(mode: str) -> str:
    m = mode.lower()
    if m not in ("neumann", "dirichlet"):
        raise ValueError(f"unknown boundary mode {mode!r}")
    return m


class CascadeMeasure(MeasureModel):
    """Dyadic cascade: mass flows down the tree through schedule weights."""

    def __init__(self, d: int, schedule: Schedule) -> None:
        self.d = d
        self.schedule = schedule
        for probe in (1, 2, 3):
            _validate_weights(schedule.weights(probe), d)
        self._hist_cache: dict[tuple[int, str], Histogram] = {}

    # ---- point evaluation ------------------------------------------------

    def log2_mass(self, cube: DyadicCube) -> float:
        acc = 0.0
        for level, bits in enumerate(cube.path_from_root(), start=1):
            w = self.schedule.weights(level)[_bits_to_index(bits)]
            if w == 0.0:
                return NEG_INF
            acc += math.log2(w)
        return acc

    def positive_children(self, cube: DyadicCube) -> Iterable[tuple[DyadicCube, float]]:
        lv = self.log2_mass(cube)
        if lv == NEG_INF:
            return
        w = self.schedule.weights(cube.level + 1)
        for bits in iproduct((0, 1), repeat=self.d):
            wi = w[_bits_to_index(bits)]
            if wi > 0.0:
                yield cube.child(bits), lv + math.log2(wi)

    # ---- aggregates --------------------------------------------------------

    def mass_histogram(self, n: int, mode: str = "neumann") -> Histogram:
        mode = _check_mode(mode)
        key = (n, mode)
        if key not in self._hist_cache:
            self._hist_cache[key] = self._histogram(n, mode)
        return self._hist_cache[key]

    def _histogram(self, n: int, mode: str) -> Histogram:
        track_states = mode == "dirichlet"
        start = (AXIS_START,) * self.d if track_states else None
        buckets: dict = {(start, 0.0): 1}
        for level in range(1, n + 1):
            w = self.schedule.weights(level)
            steps = []
            for bits in iproduct((0, 1), repeat=self.d):
                wi = w[_bits_to_index(bits)]
                if wi > 0.0:
                    steps.append((bits, math.log2(wi)))
            nxt: dict = {}
            for (state, lv), cnt in buckets.items():
                for bits, dlv in steps:
                    ns = (
                        tuple(axis_step(s, b) for s, b in zip(state, bits))
                        if track_states
                        else None
                    )
                    _merge(nxt, (ns, round(lv + dlv, _KEY_DIGITS)), cnt)
            buckets = nxt
        out: dict[float, int] = {}
        for (state, lv), cnt in buckets.items():
            if track_states and not all(s == AXIS_MID for s in state):
                continue
            _merge(out, lv, cnt)
        return sorted(out.items(), key=lambda t: -t[0])

    def log2_level_moment(self, n: int, q: float, mode: str = "neumann") -> float | None:
        mode = _check_mode(mode)
        if mode == "neumann":
            return self.schedule.log2_moment_prefix(n, q)
        return self._dirichlet_moment(n, q)

    def _dirichlet_moment(self, n: int, q: float) -> float:
        """Transfer-matrix sweep over per-axis boundary states.

        States are vectors in {LOW, HIGH, MID}^d reached after the first
        level; constant-tail schedules use matrix powers so even n ~ 2^26
        costs only O(log n) multiplies.
        """
        states = list(iproduct((1, 2, 3), repeat=self.d))
        index = {s: i for i, s in enumerate(states)}
        m = len(states)

        def step_matrix(level: int) -> np.ndarray:
            w = self.schedule.weights(level)
            T = np.zeros((m, m))
            for bits in iproduct((0, 1), repeat=self.d):
                wi = w[_bits_to_index(bits)]
                if wi == 0.0:
                    continue
                wq = wi**q
                for s in states:
                    ns = tuple(axis_step(a, b) for a, b in zip(s, bits))
                    T[index[ns], index[s]] += wq
            return T

        # level-1 distribution over states
        v = np.zeros(m)
        w1 = self.schedule.weights(1)
        for bits in iproduct((0, 1), repeat=self.d):
            wi = w1[_bits_to_index(bits)]
            if wi > 0.0:
                s = tuple(axis_step(AXIS_START, b) for b in bits)
                v[index[s]] += wi**q
        scale = 0.0
        if n >= 2:
            if isinstance(self.schedule, ConstantSchedule):
                v, scale = _matpow_apply(step_matrix(2), n - 1, v)
            elif isinstance(self.schedule, SequenceSchedule):
                head = len(self.schedule.head)
                k = min(n, head)
                for level in range(2, k + 1):
                    v = step_matrix(level) @ v
                    v, scale = _rescale(v, scale)
                if n > head:
                    v, ds = _matpow_apply(step_matrix(head + 1), n - max(1, head), v)
                    scale += ds
            else:
                for level in range(2, n + 1):
                    v = step_matrix(level) @ v
                    v, scale = _rescale(v, scale)
        total = sum(
            v[index[s]] for s in states if all(x == AXIS_MID for x in s)
        )
        if total <= 0.0:
            return NEG_INF
        return math.log2(total) + scale

    def max_level_log2_mass(self, n: int) -> float:
        return self.schedule.log2_max_prefix(n)

    def step_ratio_bound(self, level: int) -> float:
        return max(self.schedule.weights(level))

    def step_ratio_limsup(self) -> float:
        return self.schedule.max_ratio_limsup()

    def supports_open_cube(self, probe_level: int = 8) -> bool:
        states = {(AXIS_START,) * self.d}
        for level in range(1, probe_level + 1):
            w = self.schedule.weights(level)
            nxt = set()
            for bits in iproduct((0, 1), repeat=self.d):
                if w[_bits_to_index(bits)] > 0.0:
                    for s in states:
                        nxt.add(tuple(axis_step(a, b) for a, b in zip(s, bits)))
            states = nxt
            if all(all(x == AXIS_MID for x in s) for s in states):
                return True
        return False


class ProductMeasure(MeasureModel):
    """Product of lower-dimensional models, one block of axes per factor."""

    def __init__(self, factors: Sequence[MeasureModel]) -> None:
        if not factors:
            raise ValueError("empty factor list")
        self.factors = list(factors)
        self.d = sum(f.d for f in self.factors)

    def _project(self, cube: DyadicCube) -> list[DyadicCube]:
        out, at = [], 0
        for f in self.factors:
            out.append(DyadicCube(cube.level, cube.coords[at : at + f.d]))
            at += f.d
        return out

    def log2_mass(self, cube: DyadicCube) -> float:
        acc = 0.0
        for f, sub in zip(self.factors, self._project(cube)):
            lv = f.log2_mass(sub)
            if lv == NEG_INF:
                return NEG_INF
            acc += lv
        return acc

    def mass_histogram(self, n: int, mode: str = "neumann") -> Histogram:
        mode = _check_mode(mode)
        hist: dict[float, int] = {0.0: 1}
        for f in self.factors:
            fh = f.mass_histogram(n, mode)
            nxt: dict[float, int] = {}
            for lv, cnt in hist.items():
                for flv, fcnt in fh:
                    _merge(nxt, round(lv + flv, _KEY_DIGITS), cnt * fcnt)
            hist = nxt
        return sorted(hist.items(), key=lambda t: -t[0])

    def log2_level_moment(self, n: int, q: float, mode: str = "neumann") -> float | None:
        acc = 0.0
        for f in self.factors:
            part = f.log2_level_moment(n, q, mode)
            if part is None:
                return None
            if part == NEG_INF:
                return NEG_INF
            acc += part
        return acc

    def max_level_log2_mass(self, n: int) -> float:
        return sum(f.max_level_log2_mass(n) for f in self.factors)

    def step_ratio_bound(self, level: int) -> float:
        out = 1.0
        for f in self.factors:
            out *= f.step_ratio_bound(level)
        return out

    def step_ratio_limsup(self) -> float:
        # exact when at most one factor is level-dependent; otherwise an
        # upper bound (refusal then errs on the safe side)
        out = 1.0
        for f in self.factors:
            out *= f.step_ratio_limsup()
        return out

    def supports_open_cube(self, probe_level: int = 8) -> bool:
        return all(f.supports_open_cube(probe_level) for f in self.factors)


class PowerLawDensity(MeasureModel):
    """1-D measure with density (beta+1) x^beta, exact on dyadic intervals.

    ``mass((a, b]) = b^(beta+1) - a^(beta+1)``; requires beta > -1 so the
    total mass is 1.
    """

    _LEVEL_CAP = 22  # histogram enumeration is 2^n cells

    def __init__(self, beta: float | Fraction) -> None:
        if not float(beta) > -1.0:
            raise ValueError(f"power-law exponent must be > -1, got {beta}")
        self.d = 1
        self.beta = beta
        self._g = float(beta) + 1.0

    def log2_mass(self, cube: DyadicCube) -> float:
        h = 0.5**cube.level
        a, b = cube.coords[0] * h, (cube.coords[0] + 1) * h
        m = b**self._g - a**self._g
        return math.log2(m) if m > 0.0 else NEG_INF

    def mass_histogram(self, n: int, mode: str = "neumann") -> Histogram:
        mode = _check_mode(mode)
        if n > self._LEVEL_CAP:
            raise ValueError(f"level {n} exceeds enumeration cap {self._LEVEL_CAP}")
        edges = np.arange(0, (1 << n) + 1, dtype=float) * 0.5**n
        masses = np.diff(edges**self._g)
        if mode == "dirichlet":
            masses = masses[1:-1] if (1 << n) >= 4 else masses[:0]
        masses = masses[masses > 0.0]
        keys = np.round(np.log2(masses), _KEY_DIGITS)
        vals, counts = np.unique(keys, return_counts=True)
        return [(float(v), int(c)) for v, c in zip(vals[::-1], counts[::-1])]

    def max_level_log2_mass(self, n: int) -> float:
        # the density is monotone, so an extreme cell sits at an end
        h = 0.5**n
        return max(math.log2(h**self._g), math.log2(1.0 - (1.0 - h) ** self._g))

    def step_ratio_bound(self, level: int) -> float:
        # extremal child/parent ratio is attained at the corner cell
        return max(0.5**self._g, 1.0 - 0.5**self._g)

    def step_ratio_limsup(self) -> float:
        return self.step_ratio_bound(1)


# ======================================================================
# Builders
# ======================================================================


def _bits_to_index(bits: tuple[int, ...]) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    return idx


def _rescale(v: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    m = float(v.max())
    if m <= 0.0:
        return v, scale
    if m < 1e-120 or m > 1e120:
        e = math.log2(m)
        return v / 2.0**e, scale + e
    return v, scale


def _matpow_apply(T: np.ndarray, k: int, v: np.ndarray) -> tuple[np.ndarray, float]:
    """Compute T^k v with periodic rescaling; returns (vector, log2 scale)."""
    scale = 0.0
    base = T.copy()
    base_scale = 0.0
    while k > 0:
        if k & 1:
            v = base @ v
            scale += base_scale
            v, scale = _rescale(v, scale)
        k >>= 1
        if k:
            base = base @ base
            base_scale *= 2
            m = float(np.abs(base).max())
            if m > 0 and (m < 1e-120 or m > 1e120):
                e = math.log2(m)
                base /= 2.0**e
                base_scale += e
    return v, scale


def lebesgue(d: int) -> CascadeMeasure:
    """Lebesgue measure on [0,1]^d as the uniform cascade."""
    k = 1 << d
    w = (1.0 / k,) * k
    exact = (Fraction(1, k),) * k
    return CascadeMeasure(d, ConstantSchedule(w, exact))


def build_block_cascade(
    c_plus: Fraction | str | float,
    c_minus: Fraction | str | float,
    block_unit: int,
) -> CascadeMeasure:
    """1-D homogeneous block cascade with oscillating split frequency.

    The returned measure puts equal weight on the surviving children; the
    number of splits up to level ``n`` has Cesàro ratio exactly ``c_plus``
    at odd block boundaries and exactly ``c_minus`` at even ones (block
    lengths double each phase, so limsup/liminf are attained, not merely
    approached).
    """
    cp, cm = Fraction(c_plus), Fraction(c_minus)
    sched = BlockSchedule(cp, cm, block_unit)
    # sanity: whenever a boundary target is representable (c * boundary is
    # an integer) the greedy schedule must hit it exactly
    for k in (1, 2, 3):
        boundary = block_unit * (1 << (k - 1))
        want = cp if k % 2 == 1 else cm
        if (want * boundary).denominator != 1:
            continue
        got = Fraction(sched.split_count(boundary), boundary)
        if got != want:
            raise ValueError(
                f"block targets infeasible: c_{boundary} = {got}, wanted {want}"
            )
    return CascadeMeasure(1, sched)
