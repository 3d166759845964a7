"""Small numeric helpers shared across modules: log-domain sums and fits."""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

NEG_INF = float("-inf")


def log2_sum(terms: Iterable[float]) -> float:
    """log2 of a sum of nonnegative quantities given by their log2 values.

    Empty input (or all ``-inf``) yields ``-inf``, matching the 0^0 = 0
    summation convention for empty moment sums.
    """
    ts = [t for t in terms if t != NEG_INF]
    if not ts:
        return NEG_INF
    m = max(ts)
    acc = sum(2.0 ** (t - m) for t in ts)
    return m + math.log2(acc)


def log2_weighted_sum(log_values: Sequence[float], counts: Sequence[int]) -> float:
    """log2 of ``sum(c * 2**v)`` with exact integer counts."""
    terms = []
    for v, c in zip(log_values, counts):
        if c <= 0 or v == NEG_INF:
            continue
        # counts can exceed 2**53; go through log2 of the integer exactly
        terms.append(v + _log2_int(c))
    return log2_sum(terms)


def _log2_int(c: int) -> float:
    if c < (1 << 52):
        return math.log2(c)
    # big integers: normalize mantissa manually
    bits = c.bit_length()
    shift = bits - 52
    return math.log2(c >> shift) + shift


def log2_pos(x: float) -> float:
    """The paper-style positive part of log2: log2(x) for x > 1, else 0."""
    return math.log2(x) if x > 1.0 else 0.0


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-9,
) -> float:
    """Root of a decreasing function by plain bisection to absolute ``tol``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo < 0.0 or fhi > 0.0:
        raise ValueError(
            f"no sign change on [{lo}, {hi}]: f(lo)={flo:.6g}, f(hi)={fhi:.6g}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    iters: int = 40,
) -> tuple[float, float]:
    """Golden-section search for a maximum; returns (argmax, value).

    Robust enough for the piecewise-constant-over-x ratios it is applied to:
    it localizes a high plateau edge rather than assuming smoothness.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc >= fd else d
    return x, max(fc, fd)


def fit_line(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of y against x."""
    slope, intercept = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(slope), float(intercept)
