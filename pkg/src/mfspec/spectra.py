"""Partition functions of set functions and derived dimension quantities.

The central object is the per-level partition function

    tau_n(q) = log2( sum_{Q in D_n^mode} J(Q)^q ) / n,

a convex decreasing function of q >= 0 (convention 0^0 = 0: zero-value
cubes never contribute).  Its unique zero q^N (resp. q^D) estimates the
upper spectral dimension; kappa is the critical summability exponent of
the full double sum over levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measures import MeasureModel, _check_mode
from .numerics import NEG_INF, bisect_root, fit_line, log2_weighted_sum
from .setfun import RefusalError, SetFunction, log2_max_value, value_histogram

__all__ = [
    "tau_n",
    "PartitionFunctionCurve",
    "compute_curve",
    "q_zero",
    "dim_infty",
    "set_function_dim_infty",
    "BoundsRecord",
    "DimensionSummary",
    "dimension_bounds",
    "SubdifferentialBound",
    "subdifferential_bound",
    "KappaEstimate",
    "kappa_estimate",
    "q_zero_parametrized_t",
]


# ======================================================================
# tau_n
# ======================================================================


def tau_n(J: SetFunction, n: int, q: float, mode: str = "neumann") -> float:
    """Level-n partition function of J at exponent q.

    Uses closed-form level moments where the model provides them (constant
    and scheduled cascades, products, including the Dirichlet
    transfer-matrix path), falling back to exact per-level value
    histograms.  Returns ``-inf`` for an empty family (e.g. Dirichlet at
    levels with no interior support cube).
    """
    if n < 1:
        raise ValueError("tau_n needs n >= 1")
    if q < 0:
        raise ValueError("tau_n is defined for q >= 0")
    mode = _check_mode(mode)

    measure = J.measure
    if J.kind == "plain":
        mom = measure.log2_level_moment(n, q, mode)
        if mom is not None:
            return mom / n if mom != NEG_INF else NEG_INF
    elif J.kind in ("spectral", "log-spectral"):
        try:
            from .setfun import _homogeneous_shift

            shift = _homogeneous_shift(J, n)
        except NotImplementedError:
            shift = None
        if shift is not None:
            mom = measure.log2_level_moment(n, J.b * q, mode)
            if mom is not None:
                if mom == NEG_INF:
                    return NEG_INF
                return (q * shift + mom) / n

    hist = value_histogram(J, n, mode)
    if not hist:
        return NEG_INF
    return log2_weighted_sum([q * k for k, _ in hist], [c for _, c in hist]) / n


@dataclass(frozen=True)
class PartitionFunctionCurve:
    """tau_n(q) sampled on a q-grid for a list of levels, one mode."""

    set_function: SetFunction
    mode: str
    q_grid: tuple[float, ...]
    levels: tuple[int, ...]
    values: np.ndarray  # shape (len(levels), len(q_grid))

    def row(self, n: int) -> np.ndarray:
        return self.values[self.levels.index(n)]

    def row_callable(self, n: int) -> Callable[[float], float]:
        """Fresh evaluations of tau_n (not an interpolation of the grid)."""
        return lambda q: tau_n(self.set_function, n, q, self.mode)

    def finest(self) -> int:
        return max(self.levels)


def compute_curve(
    J: SetFunction,
    q_grid: Sequence[float],
    levels: Sequence[int],
    mode: str = "neumann",
) -> PartitionFunctionCurve:
    qs = tuple(float(q) for q in q_grid)
    ns = tuple(int(n) for n in levels)
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError("q_grid must be strictly increasing")
    vals = np.array([[tau_n(J, n, q, mode) for q in qs] for n in ns])
    return PartitionFunctionCurve(J, _check_mode(mode), qs, ns, vals)


# ======================================================================
# zeros
# ======================================================================


def q_zero(J: SetFunction, n: int, mode: str = "neumann", tol: float = 1e-9) -> float:
    """Unique zero of the (convex, decreasing) level-n partition function.

    The bracket is [0, q_hi] with q_hi = d / max(eps, dim-estimate) + 1,
    the dimension estimate coming from the largest level-n value of J.
    """
    mode = _check_mode(mode)
    top = log2_max_value(J, n, mode)
    # the max-value probe is mode-blind for sup kinds, so emptiness of the
    # interior family has to be checked on the partition function itself
    if top == NEG_INF or tau_n(J, n, 0.0, mode) == NEG_INF:
        raise ValueError(f"empty level-{n} {mode} family: no zero exists")
    if top >= 0.0:
        raise ValueError(
            f"precondition violated: some J(Q) >= 1 at level {n} "
            f"(max log2 value {top:.3g}), tau_n is not decreasing"
        )
    dim_est = -top / n
    q_hi = J.d / max(1e-9, dim_est) + 1.0
    f = lambda q: tau_n(J, n, q, mode)
    return bisect_root(f, 0.0, q_hi, tol=tol)


def q_zero_parametrized_t(
    measure: MeasureModel,
    t: float,
    n: int = 8,
    mode: str = "neumann",
    tol: float = 1e-9,
) -> float:
    """Zero of the t-parametrized spectral set function, a = t(2/d-1)/2.

    Admissible range: 2 < t < 2 dim_infty / (d - 2) (no upper constraint
    for d <= 2); t -> 2 recovers the canonical zero.
    """
    d = measure.d
    if t <= 2.0:
        raise RefusalError(f"t = {t} outside the admissible range t > 2")
    if d > 2:
        dim_est = dim_infty(measure, (1, min(12, max(4, n))))
        upper = 2.0 * dim_est / (d - 2)
        if t >= upper:
            raise RefusalError(
                f"t = {t} outside the admissible range (2, {upper:.6g}) "
                f"for dim_infty ~ {dim_est:.6g}, d = {d}"
            )
    J = SetFunction.nu_spectral_t(measure, t)
    return q_zero(J, n, mode, tol=tol)


# ======================================================================
# dimensions
# ======================================================================


def dim_infty(measure: MeasureModel, level_window: tuple[int, int]) -> float:
    """Lower infinity-dimension estimate: min over the window of
    -log2(max level-n mass)/n."""
    n0, n1 = level_window
    if not 1 <= n0 <= n1:
        raise ValueError("level window must satisfy 1 <= n0 <= n1")
    return min(-measure.max_level_log2_mass(n) / n for n in range(n0, n1 + 1))


def set_function_dim_infty(
    J: SetFunction, level_window: tuple[int, int], mode: str = "neumann"
) -> float:
    """Same liminf estimate applied to J-values instead of masses."""
    n0, n1 = level_window
    if not 1 <= n0 <= n1:
        raise ValueError("level window must satisfy 1 <= n0 <= n1")
    return min(-log2_max_value(J, n, mode) / n for n in range(n0, n1 + 1))


@dataclass(frozen=True)
class BoundsRecord:
    lower: float
    upper: float
    consistent: bool


@dataclass(frozen=True)
class DimensionSummary:
    """Headline quantities of one set-function analysis."""

    dim_infty: float
    minkowski: float
    q_N: float
    q_D: float
    kappa: float | None = None
    kappa_interval: tuple[float, float] | None = None
    bounds: BoundsRecord | None = None


def dimension_bounds(
    summary: DimensionSummary, d: int, tol: float = 1e-9
) -> BoundsRecord:
    """Sandwich max(d/2, dimM/(dimM-d+2)) <= q^N <= dim_infty/(dim_infty-d+2).

    Requires the supercritical condition dim_infty > d - 2; at or below
    criticality the sandwich does not apply and the call is refused.
    """
    di, dm = summary.dim_infty, summary.minkowski
    if di <= d - 2:
        raise RefusalError(
            f"critical/subcritical regime: dim_infty = {di:.6g} <= d - 2 = "
            f"{d - 2}; the spectral-dimension sandwich does not apply"
        )
    lower = max(d / 2.0, dm / (dm - d + 2.0))
    upper = di / (di - d + 2.0)
    consistent = lower - tol <= summary.q_N <= upper + tol
    return BoundsRecord(lower, upper, consistent)


# ======================================================================
# subdifferential bound
# ======================================================================


@dataclass(frozen=True)
class SubdifferentialBound:
    """One-sided slopes [a, b] of -tau at q and the induced lower bound
    (a q + tau(q)) / b for the lower spectral dimension."""

    a: float
    b: float
    tau_q: float
    bound: float


def subdifferential_bound(
    tau: Callable[[float], float],
    q: float,
    steps: Sequence[float] = (1e-2, 1e-3, 1e-4),
    agree_tol: float = 1e-3,
) -> SubdifferentialBound:
    """Estimate [a, b] = -dtau(q) by refined one-sided difference quotients.

    Each side must stabilize (two finest steps within ``agree_tol``);
    convexity requires a <= b, which is checked.
    """
    if q <= min(steps):
        raise ValueError("q too close to 0 for two-sided quotients")
    t0 = tau(q)
    right = [(tau(q + h) - t0) / h for h in steps]
    left = [(t0 - tau(q - h)) / h for h in steps]
    if abs(right[-1] - right[-2]) > agree_tol:
        raise ValueError(
            f"right quotient did not stabilize: {right[-2]:.6g} vs {right[-1]:.6g}"
        )
    if abs(left[-1] - left[-2]) > agree_tol:
        raise ValueError(
            f"left quotient did not stabilize: {left[-2]:.6g} vs {left[-1]:.6g}"
        )
    a, b = -right[-1], -left[-1]
    if b < a - 1e-9:
        raise ValueError(f"non-convex row at q = {q}: slopes [{a:.6g}, {b:.6g}]")
    return SubdifferentialBound(a, b, t0, (a * q + t0) / b)


# ======================================================================
# kappa (critical summability exponent)
# ======================================================================


@dataclass(frozen=True)
class KappaEstimate:
    value: float
    interval: tuple[float, float]
    conclusive: bool
    level_budget: int


def kappa_estimate(
    J: SetFunction,
    q_grid: Sequence[float],
    level_budget: int = 12,
    mode: str = "neumann",
    margin: float = 0.05,
) -> KappaEstimate:
    """Critical q where sum_n sum_Q J(Q)^q flips divergent -> convergent.

    Classifies each q by the log2 growth rate of the level sums s_n(q)
    (straight-line fit over the tail half of the level window; growth
    beyond +margin bits/level is divergent, below -margin convergent),
    then bisects the classifier.  The returned interval brackets the
    marginal band; ``conclusive`` is False when the midpoint itself sits
    inside the band.
    """
    if level_budget < 10:
        raise ValueError("level budget must be >= 10")
    levels = [n for n in range(1, level_budget + 1)]

    def growth(q: float) -> float:
        ys, xs = [], []
        for n in levels:
            t = tau_n(J, n, q, mode)
            if t == NEG_INF:
                continue
            xs.append(float(n))
            ys.append(n * t)  # log2 s_n(q)
        tail = len(xs) // 2
        slope, _ = fit_line(xs[tail:], ys[tail:])
        return slope

    qs = [float(q) for q in q_grid]
    rates = [growth(q) for q in qs]
    lo = hi = None
    for q, r in zip(qs, rates):
        if r > 0:
            lo = q
        elif hi is None:
            hi = q
    if lo is None or hi is None or hi < lo:
        raise ValueError(
            "q_grid does not bracket the summability threshold "
            f"(growth rates {rates[0]:.3g} .. {rates[-1]:.3g})"
        )
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if growth(mid) > 0:
            lo = mid
        else:
            hi = mid
    value = 0.5 * (lo + hi)

    # marginal band: walk outward until the classifier is decisive
    step = max(0.01, 0.005 * value)
    band_lo, band_hi = value, value
    while growth(band_lo) < margin and band_lo - step >= qs[0]:
        band_lo -= step
    while growth(band_hi) > -margin and band_hi + step <= qs[-1]:
        band_hi += step
    conclusive = (band_hi - band_lo) <= 10 * step
    return KappaEstimate(value, (band_lo, band_hi), conclusive, level_budget)
