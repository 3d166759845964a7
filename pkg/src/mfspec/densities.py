"""Density measures with a power-log cusp along the z-axis.

The supported family lives on the cone ``{(x, y, z): 0 <= x, y <= z,
0 < z < 1/2}`` in d = 3 with a radial density ``rho(z) = z^p * log(1/z)^s``
(natural log).  Cube masses reduce to 1-D z-integrals of ``rho`` against the
piecewise-quadratic cross-section area; the integrals are evaluated in
closed form where elementary and by adaptive quadrature otherwise.

Whole levels aggregate into O(2^n) slab classes (bulk / edge / corner per
z-slab), each class holding identical cube masses, which is what makes
level sums affordable without touching all 8^n cubes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from scipy.integrate import quad

from .cubes import DyadicCube
from .measures import Histogram, MeasureModel, _merge
from .numerics import NEG_INF

__all__ = [
    "RadialProfile",
    "CuspMeasure",
    "cusp_measure",
    "CUSP_PROFILES",
    "Z_MAX",
]

Z_MAX = 0.5
_QUAD_KW = dict(epsabs=1e-14, epsrel=1e-11, limit=200)
_KEY_DIGITS = 9


@dataclass(frozen=True)
class RadialProfile:
    """Exponents of the radial factor ``z^p * log(1/z)^s``."""

    p: float
    s: float

    def powered(self, r: float) -> RadialProfile:
        """Profile of ``|f|^r`` for the same support."""
        return RadialProfile(self.p * r, self.s * r)

    def value(self, z: float) -> float:
        out = z**self.p
        if self.s != 0.0:
            out *= math.log(1.0 / z) ** self.s
        return out


# density ids 1, 2, 3 from the critical-cusp family
CUSP_PROFILES: dict[int, RadialProfile] = {
    1: RadialProfile(-2.0, 0.0),
    2: RadialProfile(-2.0, -4.0 / 3.0),
    3: RadialProfile(-2.0, 1.0),
}


# ----------------------------------------------------------------------
# 1-D integrals  int z^m log(1/z)^s dz  via u = -log z
# ----------------------------------------------------------------------


def _exp_power_integral(w: float, s: float, u1: float, u2: float) -> float:
    """``int_{u1}^{u2} exp(-w u) u^s du`` for 0 < u1 <= u2 <= inf."""
    if u2 <= u1:
        return 0.0
    if s == 0.0:
        if w == 0.0:
            if math.isinf(u2):
                raise ValueError("divergent integral (w=0, s=0, infinite range)")
            return u2 - u1
        hi = 0.0 if math.isinf(u2) else math.exp(-w * u2)
        if math.isinf(u2) and w < 0.0:
            raise ValueError("divergent integral (w<0, infinite range)")
        return (math.exp(-w * u1) - hi) / w
    if w == 0.0:
        if s == -1.0:
            if math.isinf(u2):
                raise ValueError("divergent integral (w=0, s=-1, infinite range)")
            return math.log(u2 / u1)
        if math.isinf(u2):
            if s > -1.0:
                raise ValueError("divergent integral (w=0, s>-1, infinite range)")
            return -(u1 ** (s + 1.0)) / (s + 1.0)
        return (u2 ** (s + 1.0) - u1 ** (s + 1.0)) / (s + 1.0)
    if s == 1.0 and w > 0.0:
        def anti(u: float) -> float:
            return -math.exp(-w * u) * (u / w + 1.0 / (w * w))

        lo = anti(u1)
        hi = 0.0 if math.isinf(u2) else anti(u2)
        return hi - lo
    if w < 0.0 and math.isinf(u2):
        raise ValueError("divergent integral (w<0, infinite range)")
    val, err = quad(lambda u: math.exp(-w * u) * u**s, u1, u2, **_QUAD_KW)
    return val


def profile_z_integral(profile: RadialProfile, m_extra: float, z_lo: float, z_hi: float) -> float:
    """``int z^(p+m_extra) log(1/z)^s dz`` over ``(z_lo, z_hi)`` inside (0, 1)."""
    if z_hi <= z_lo:
        return 0.0
    w = profile.p + m_extra + 1.0
    u1 = -math.log(z_hi)
    u2 = math.inf if z_lo == 0.0 else -math.log(z_lo)
    return _exp_power_integral(w, profile.s, u1, u2)


# ----------------------------------------------------------------------
# cube masses on the cone
# ----------------------------------------------------------------------


def _axis_length(z: float, a: float, b: float) -> float:
    """Length of ``(a, b] âˆ© [0, z]`` for a >= 0."""
    return max(0.0, min(z, b) - a)


def cone_cube_integral(profile: RadialProfile, cube: DyadicCube) -> float:
    """Integral of the profile density over one dyadic cube.

    Splits the z-range at the cross-section breakpoints; on each piece the
    integrand is smooth and is integrated by quadrature (the dyadic
    differences inside are exact in binary, so no cancellation), except the
    piece touching z = 0 where the area is exactly z^2 and the closed-form
    tail integral applies.
    """
    if cube.d != 3:
        raise ValueError("cusp densities live in d = 3")
    (x0, y0, z0), side = [k * cube.side for k in cube.coords], cube.side
    x1, y1, z1 = x0 + side, y0 + side, z0 + side
    hi = min(z1, Z_MAX)
    if hi <= z0 or hi <= x0 or hi <= y0:
        return 0.0
    breaks = sorted({z0, x0, x1, y0, y1, hi})
    total = 0.0
    for a, b in zip(breaks, breaks[1:]):
        if b <= z0 or a >= hi:
            continue
        a, b = max(a, z0), min(b, hi)
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        if _axis_length(mid, x0, x1) == 0.0 or _axis_length(mid, y0, y1) == 0.0:
            continue
        if a == 0.0:
            # only the corner piece reaches z = 0, where the area is z^2
            if x0 != 0.0 or y0 != 0.0 or b > min(x1, y1):
                raise AssertionError("unexpected piece at z = 0")
            total += profile_z_integral(profile, 2.0, 0.0, b)
            continue
        val, _ = quad(
            lambda z: profile.value(z)
            * _axis_length(z, x0, x1)
            * _axis_length(z, y0, y1),
            a,
            b,
            **_QUAD_KW,
        )
        total += val
    return max(total, 0.0)


def _cube_positive(cube: DyadicCube) -> bool:
    """Exact predicate for positive cone mass (no quadrature involved)."""
    (x0, y0, z0) = [k * cube.side for k in cube.coords]
    hi = min(z0 + cube.side, Z_MAX)
    return hi > z0 and hi > x0 and hi > y0


# ----------------------------------------------------------------------
# per-level slab classes
# ----------------------------------------------------------------------


def _slab_values(profile: RadialProfile, n: int, j: int) -> tuple[float, float, float]:
    """Raw (bulk, edge, corner) per-cube integrals of one z-slab.

    Within the z-slab ``((j-1) 2^-n, j 2^-n]`` every support cube has one of
    three cross-section shapes: full square h*h (bulk), h times a straddling
    strip (edge), or the straddling square (corner).  The j = 1 slab only
    has the corner cube, whose area is exactly z^2.
    """
    h = 2.0**-n
    a, b = (j - 1) * h, j * h
    beta = a
    if j == 1:
        # only the corner cube exists in the first slab (area exactly z^2)
        return 0.0, 0.0, profile_z_integral(profile, 2.0, 0.0, b)
    bulk = profile_z_integral(profile, 0.0, a, b) * h * h
    corner, _ = quad(lambda z: profile.value(z) * (z - beta) ** 2, a, b, **_QUAD_KW)
    edge, _ = quad(lambda z: profile.value(z) * (z - beta) * h, a, b, **_QUAD_KW)
    return bulk, edge, corner


def slab_classes(profile: RadialProfile, n: int, mode: str = "neumann") -> Histogram:
    """Level-n histogram of per-cube integrals of the profile density.

    One integral per slab congruence class covers the whole level: class
    cardinalities are (j-1)^2 bulk, 2(j-1) edge, 1 corner per slab (with
    j-1 replaced by j-2 for the Dirichlet interior family, which also
    drops the j = 1 slab).
    """
    dirichlet = mode.lower() == "dirichlet"
    buckets: dict[float, int] = {}
    for j in range(1, (1 << n) // 2 + 1):
        bulk, edge, corner = _slab_values(profile, n, j)
        if dirichlet:
            if j < 2:
                continue
            n_bulk, n_edge, n_corner = (j - 2) ** 2, 2 * (j - 2), 1
        else:
            n_bulk, n_edge, n_corner = (j - 1) ** 2, 2 * (j - 1), 1
        for val, cnt in ((bulk, n_bulk), (edge, n_edge), (corner, n_corner)):
            if cnt > 0 and val > 0.0:
                _merge(buckets, round(math.log2(val), _KEY_DIGITS), cnt)
    return sorted(buckets.items(), key=lambda t: -t[0])


def corner_chain_log2(profile: RadialProfile, level: int) -> float:
    """log2 of the corner-cube integral at any depth, without underflow.

    The corner cube at ``level`` covers ``0 < z <= h`` with section z^2;
    substituting z = h e^-t turns the integral into
    ``e^(-w u1) * int_0^inf e^(-w t) (u1 + t)^s dt`` with w = p + 3 and
    u1 = log(1/h), whose logarithm is computed directly.
    """
    h = min(2.0**-level, Z_MAX)
    w = profile.p + 3.0
    u1 = -math.log(h)
    if profile.s == 0.0:
        rest = 1.0 / w
    else:
        rest, _ = quad(
            lambda t: math.exp(-w * t) * (u1 + t) ** profile.s,
            0.0,
            math.inf,
            **_QUAD_KW,
        )
    return -w * u1 / math.log(2.0) + math.log2(rest)


def max_slab_log2(profile: RadialProfile, n: int) -> float:
    """log2 of the largest per-cube integral over the level-n family.

    Within a slab j >= 2 the corner and edge sections are dominated
    pointwise by the bulk square, and the bulk value inherits the
    monotonicity of the radial profile across slabs, so the level maximum
    sits at the corner chain, the first full slab, or the last slab.
    """
    if n == 0:
        return corner_chain_log2(profile, 0)
    jmax = (1 << n) // 2
    best = corner_chain_log2(profile, n)
    for j in {min(2, jmax), jmax}:
        if j < 2:
            continue
        for v in _slab_values(profile, n, j):
            if v > 0.0:
                best = max(best, math.log2(v))
    return best


# ----------------------------------------------------------------------
# the measure model
# ----------------------------------------------------------------------


class CuspMeasure(MeasureModel):
    """d = 3 measure with density ``z^p log(1/z)^s`` on the axis cone."""

    d = 3

    def __init__(self, profile: RadialProfile, label: str = "cusp") -> None:
        self.profile = profile
        self.label = label
        if profile.p <= -3.0:
            raise ValueError("density is not integrable on the cone (p <= -3)")
        self._hist_cache: dict[tuple, Histogram] = {}
        self._corner_cache: dict[int, float] = {}

    # ---- masses ---------------------------------------------------------

    def log2_mass(self, cube: DyadicCube) -> float:
        m = cone_cube_integral(self.profile, cube)
        return math.log2(m) if m > 0.0 else NEG_INF

    def positive_children(self, cube: DyadicCube) -> Iterable[tuple[DyadicCube, float]]:
        for child in cube.children():
            if _cube_positive(child):
                lv = self.log2_mass(child)
                if lv != NEG_INF:
                    yield child, lv

    @property
    def total_mass(self) -> float:
        return profile_z_integral(self.profile, 2.0, 0.0, Z_MAX)

    # ---- aggregates -------------------------------------------------------

    def mass_histogram(self, n: int, mode: str = "neumann") -> Histogram:
        key = ("mass", n, mode.lower())
        if key not in self._hist_cache:
            self._hist_cache[key] = slab_classes(self.profile, n, mode)
        return self._hist_cache[key]

    def lr_integral_histogram(self, r: float, n: int, mode: str = "neumann") -> Histogram:
        """Histogram of ``int_Q |f|^r`` over level-n support cubes."""
        key = ("lr", r, n, mode.lower())
        if key not in self._hist_cache:
            self._hist_cache[key] = slab_classes(self.profile.powered(r), n, mode)
        return self._hist_cache[key]

    def lr_integral(self, cube: DyadicCube, r: float) -> float:
        return cone_cube_integral(self.profile.powered(r), cube)

    def lr_max_log2_integral(self, r: float, n: int) -> float:
        """log2 of the largest level-n integral of |f|^r."""
        return max_slab_log2(self.profile.powered(r), n)

    def max_level_log2_mass(self, n: int) -> float:
        return max_slab_log2(self.profile, n)

    # ---- decay data -----------------------------------------------------

    def _corner_log2(self, level: int) -> float:
        if level not in self._corner_cache:
            self._corner_cache[level] = corner_chain_log2(self.profile, level)
        return self._corner_cache[level]

    def step_ratio_bound(self, level: int) -> float:
        """Per-step mass-ratio modulus derived from the radial profile.

        The corner chain dominates all other parent/child ratios for these
        cusp profiles (checked by enumeration in the test suite); the bound
        carries a small safety factor and is capped at 1.
        """
        r = 2.0 ** (self._corner_log2(level) - self._corner_log2(level - 1))
        return min(1.0, 1.0001 * max(r, 2.0 ** -(self.profile.p + 3.0)))

    def step_ratio_limsup(self) -> float:
        return 2.0 ** -(self.profile.p + 3.0)

    def __repr__(self) -> str:
        return f"CuspMeasure({self.label}, p={self.profile.p}, s={self.profile.s})"


def cusp_measure(which: int) -> CuspMeasure:
    """The three critical cusp measures, by index 1, 2, 3."""
    return CuspMeasure(CUSP_PROFILES[which], label=f"cusp-{which}")
