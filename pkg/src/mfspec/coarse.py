"""Coarse multifractal counting and the optimized coarse dimensions.

The central object is the count of level-n cubes whose set-function value
is at least 2^(-alpha n).  Its exponential growth in n, optimized over
alpha, produces the upper/lower coarse dimensions that sandwich the
partition-function zero on converged models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .numerics import NEG_INF, golden_section_max, log2_weighted_sum
from .setfun import SetFunction, count_values_at_least, value_histogram
from .spectra import q_zero, set_function_dim_infty, tau_n

__all__ = [
    "CoarseProfile",
    "CoarseDimension",
    "LevelZero",
    "coarse_counts",
    "coarse_profile",
    "coarse_dimension",
    "per_level_zeros",
    "tilted_diagnostic",
]

_DEFAULT_ALPHA_STEP = 0.02


# ======================================================================
# counts
# ======================================================================


def coarse_counts(
    J: SetFunction,
    n: int,
    alpha_grid: Sequence[float],
    mode: str = "neumann",
) -> list[int]:
    """Counts of level-n cubes with value >= 2^(-alpha n), one per alpha."""
    if n < 1:
        raise ValueError("level must be >= 1")
    if any(a <= 0 for a in alpha_grid):
        raise ValueError("alpha grid must be positive")
    return [count_values_at_least(J, n, -a * n, mode) for a in alpha_grid]


@dataclass(frozen=True)
class CoarseProfile:
    """Count matrix over (level, alpha), one boundary mode."""

    alpha_grid: tuple[float, ...]
    levels: tuple[int, ...]
    counts: tuple[tuple[int, ...], ...]  # rows indexed like levels
    mode: str

    def column(self, j: int) -> list[int]:
        return [row[j] for row in self.counts]


def coarse_profile(
    J: SetFunction,
    levels: Sequence[int],
    mode: str = "neumann",
    alpha_grid: Sequence[float] | None = None,
) -> CoarseProfile:
    """Tabulate coarse counts; the default alpha grid spans
    [0.5 dim_infty, 3 dim_infty] of the set function in steps of 0.02."""
    ns = tuple(sorted(int(n) for n in levels))
    if alpha_grid is None:
        hi = max(ns)
        di = set_function_dim_infty(J, (max(1, hi - 3), hi), mode="neumann")
        if not di > 0.0:
            raise ValueError(
                "cannot derive an alpha grid: dim_infty estimate is not positive"
            )
        lo, top = 0.5 * di, 3.0 * di
        count = int(round((top - lo) / _DEFAULT_ALPHA_STEP)) + 1
        alpha_grid = [lo + _DEFAULT_ALPHA_STEP * i for i in range(count)]
    alphas = tuple(float(a) for a in alpha_grid)
    rows = tuple(tuple(coarse_counts(J, n, alphas, mode)) for n in ns)
    return CoarseProfile(alphas, ns, rows, mode)


# ======================================================================
# optimized coarse dimensions
# ======================================================================


def _tail_estimates(xs: Sequence[float]) -> tuple[float, float]:
    """(max, min) over suffix means — limsup/liminf surrogates."""
    best_hi, best_lo = -math.inf, math.inf
    for k in range(len(xs)):
        m = sum(xs[k:]) / (len(xs) - k)
        best_hi = max(best_hi, m)
        best_lo = min(best_lo, m)
    return best_hi, best_lo


def _rate_pair(counts: Sequence[int], levels: Sequence[int]) -> tuple[float, float]:
    """Tail-window limsup/liminf of log2+ count / n (log2+(0) = 0)."""
    start = len(levels) // 2
    xs = [
        (math.log2(c) if c > 1 else 0.0) / n
        for n, c in zip(levels[start:], counts[start:])
    ]
    return _tail_estimates(xs)


@dataclass(frozen=True)
class CoarseDimension:
    f_upper: float
    f_lower: float
    alpha_star: float
    at_grid_edge: bool


def coarse_dimension(profile: CoarseProfile, J: SetFunction | None = None) -> CoarseDimension:
    """Maximize the limsup/liminf count rates over alpha.

    Works on the tabulated grid; when the set function is supplied the
    maximizer is refined by golden-section with freshly computed counts
    around the best grid point.  Flags a maximizer sitting on the grid
    edge (the grid was then too narrow to bracket the optimum).
    """
    if len(profile.levels) < 4:
        raise ValueError("need at least 4 levels for rate estimates")
    ratios_hi: list[float] = []
    ratios_lo: list[float] = []
    for j, alpha in enumerate(profile.alpha_grid):
        hi, lo = _rate_pair(profile.column(j), profile.levels)
        ratios_hi.append(hi / alpha)
        ratios_lo.append(lo / alpha)
    j_star = max(range(len(ratios_hi)), key=ratios_hi.__getitem__)
    f_upper = ratios_hi[j_star]
    f_lower = max(ratios_lo)
    alpha_star = profile.alpha_grid[j_star]
    at_edge = j_star in (0, len(profile.alpha_grid) - 1)

    if J is not None and not at_edge:
        grid_step = profile.alpha_grid[1] - profile.alpha_grid[0]

        def ratio(alpha: float) -> float:
            counts = [
                coarse_counts(J, n, [alpha], profile.mode)[0] for n in profile.levels
            ]
            return _rate_pair(counts, profile.levels)[0] / alpha

        refined_alpha, refined = golden_section_max(
            ratio, alpha_star - grid_step, alpha_star + grid_step, iters=24
        )
        if refined > f_upper:
            f_upper, alpha_star = refined, refined_alpha
    return CoarseDimension(f_upper, f_lower, alpha_star, at_edge)


# ======================================================================
# per-level zeros and the tilted concentration diagnostic
# ======================================================================


@dataclass(frozen=True)
class LevelZero:
    n: int
    q_n: float
    balanced: bool


def per_level_zeros(
    J: SetFunction,
    levels: Sequence[int],
    mode: str = "neumann",
    balance_constant: float = 10.0,
) -> list[LevelZero]:
    """Zero of each level-n partition function with a max/mean balance flag.

    The flag records whether max J(Q)^{q_n} <= K 2^{-n tau_n(0)} Sigma_Q
    J(Q)^{q_n} holds (K = ``balance_constant``); under the flag the tail
    minimum of the q_n upper-bounds the lower partition entropy.
    """
    out = []
    for n in levels:
        qn = q_zero(J, n, mode)
        hist = value_histogram(J, n, mode)
        log2_max = max(lv for lv, _ in hist)
        log2_sum_q = log2_weighted_sum([qn * lv for lv, _ in hist], [c for _, c in hist])
        lhs = qn * log2_max
        rhs = math.log2(balance_constant) - n * tau_n(J, n, 0.0, mode) + log2_sum_q
        out.append(LevelZero(n, qn, lhs <= rhs))
    return out


def tilted_diagnostic(
    J: SetFunction,
    n: int,
    q: float,
    window: tuple[float, float],
    mode: str = "neumann",
) -> float:
    """Escape mass of the tilted distribution J(C)^q 2^{-n tau_n(q)}.

    Returns the tilted probability of cubes whose value exponent
    -log2 J(C) / n falls outside the open window; exponential decay of
    this mass in n witnesses concentration around the tau-derivative.
    """
    s, t = window
    if not s < t:
        raise ValueError("window must satisfy s < t")
    if q < 0:
        raise ValueError("tilt parameter q must be >= 0")
    hist = value_histogram(J, n, mode)
    if not hist:
        raise ValueError(f"level {n} has no support cubes in mode {mode!r}")
    log2_z = log2_weighted_sum([q * lv for lv, _ in hist], [c for _, c in hist])
    total = 0.0
    escape = 0.0
    for lv, cnt in hist:
        p = cnt * 2.0 ** (q * lv - log2_z)
        total += p
        x = -lv / n
        if not s < x < t:
            escape += p
    if abs(total - 1.0) > 1e-10:
        raise ArithmeticError(
            f"tilted masses sum to {total:.12f}, expected 1 within 1e-10"
        )
    return escape
