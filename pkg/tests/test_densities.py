"""Cusp density measures on the axis cone: cube masses and slab classes."""

import math
from itertools import product

import pytest
from scipy.integrate import quad

from mfspec import CuspMeasure, DyadicCube, RadialProfile, cusp_measure
from mfspec.densities import (
    Z_MAX,
    cone_cube_integral,
    profile_z_integral,
    slab_classes,
)

LN2 = math.log(2.0)


def _hist_total(hist):
    return math.fsum(cnt * 2.0**lv for lv, cnt in hist)


def _hist_count(hist):
    return sum(cnt for _, cnt in hist)


# == radial profiles =========================================================

class TestRadialProfile:
    def test_value(self):
        assert RadialProfile(-2.0, 0.0).value(0.25) == pytest.approx(16.0)
        assert RadialProfile(-2.0, 1.0).value(0.25) == pytest.approx(16.0 * 2 * LN2)

    def test_powered(self):
        prof = RadialProfile(-2.0, 1.0).powered(1.4)
        assert prof.p == pytest.approx(-2.8)
        assert prof.s == pytest.approx(1.4)

    def test_nonintegrable_profile_rejected(self):
        with pytest.raises(ValueError, match="not integrable"):
            CuspMeasure(RadialProfile(-3.0, 0.0))


# == total masses ============================================================

class TestTotalMass:
    def test_bounded_regime(self):
        # int_0^(1/2) z^-2 * z^2 dz = 1/2
        assert cusp_measure(1).total_mass == pytest.approx(0.5, abs=1e-12)

    def test_unbounded_regime(self):
        # int_0^(1/2) ln(1/z) dz = (1/2)(1 + ln 2)
        want = 0.5 * (1.0 + LN2)
        assert cusp_measure(3).total_mass == pytest.approx(want, abs=1e-12)

    def test_vanishing_regime_against_quadrature(self):
        want, _ = quad(lambda z: math.log(1.0 / z) ** (-4.0 / 3.0), 0.0, 0.5)
        assert cusp_measure(2).total_mass == pytest.approx(want, rel=1e-9)


# == cube masses =============================================================

class TestCubeMasses:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_corner_chain_bounded_regime(self, n):
        # corner cube covers 0 < z <= 2^-n with section z^2, so the
        # z^-2 density integrates to exactly 2^-n
        nu = cusp_measure(1)
        assert nu.log2_mass(DyadicCube(n, (0, 0, 0))) == pytest.approx(
            -float(n), abs=1e-9
        )

    def test_bulk_cube(self):
        # full square section 1/64 times int_{3/8}^{1/2} z^-2 dz = 2/3
        got = cusp_measure(1).mass(DyadicCube(3, (0, 0, 3)))
        assert got == pytest.approx((2.0 / 3.0) / 64.0, rel=1e-10)

    def test_edge_cube(self):
        # section (z - 3/8) * 1/8; the z-integral is ln(4/3) - 1/4
        got = cusp_measure(1).mass(DyadicCube(3, (3, 0, 3)))
        assert got == pytest.approx((math.log(4.0 / 3.0) - 0.25) / 8.0, rel=1e-10)

    def test_mass_beyond_cutoff_is_zero(self):
        nu = cusp_measure(1)
        assert nu.mass(DyadicCube(1, (0, 0, 1))) == 0.0  # z > 1/2
        assert nu.mass(DyadicCube(2, (3, 0, 0))) == 0.0  # x0 above the cone

    def test_positive_children_of_root(self):
        kids = list(cusp_measure(1).positive_children(DyadicCube.unit(3)))
        assert len(kids) == 1
        cube, lv = kids[0]
        assert cube == DyadicCube(1, (0, 0, 0))
        assert lv == pytest.approx(-1.0, abs=1e-9)


# == slab classes ============================================================

class TestSlabClasses:
    def test_level2_support_counts(self):
        nu = cusp_measure(1)
        assert _hist_count(nu.mass_histogram(2)) == 5
        assert _hist_count(nu.mass_histogram(2, mode="dirichlet")) == 1

    @pytest.mark.parametrize("which", [1, 2, 3])
    def test_histogram_totals_match_total_mass(self, which):
        nu = cusp_measure(which)
        for n in (1, 2, 3):
            assert _hist_total(nu.mass_histogram(n)) == pytest.approx(
                nu.total_mass, rel=1e-9
            )

    def test_dirichlet_is_strictly_smaller(self):
        nu = cusp_measure(1)
        full = _hist_total(nu.mass_histogram(3))
        inner = _hist_total(nu.mass_histogram(3, mode="dirichlet"))
        assert inner < full

    def test_level3_histogram_matches_cube_sweep(self):
        # independent oracle: integrate the density on every level-3 cube
        prof = RadialProfile(-2.0, 0.0)
        brute = []
        for coords in product(range(8), repeat=3):
            m = cone_cube_integral(prof, DyadicCube(3, coords))
            if m > 0.0:
                brute.append(m)
        hist = slab_classes(prof, 3)
        from_hist = sorted(2.0**lv for lv, cnt in hist for _ in range(cnt))
        assert from_hist == pytest.approx(sorted(brute), rel=1e-8)

    def test_max_level_mass_is_corner_chain(self):
        nu = cusp_measure(1)
        assert nu.max_level_log2_mass(2) == pytest.approx(-2.0, abs=1e-9)
        assert nu.max_level_log2_mass(3) == pytest.approx(-3.0, abs=1e-9)


# == integrals of |f|^r ======================================================

class TestDensityPowers:
    def test_bounded_regime_total(self):
        # int_0^(1/2) z^(-2*1.4) z^2 dz = 5 * 2^-0.2
        got = cusp_measure(1).lr_integral(DyadicCube.unit(3), 1.4)
        assert got == pytest.approx(5.0 * 2.0**-0.2, rel=1e-10)

    def test_vanishing_regime_corner_value(self):
        # |f2|^(3/2) has p = -3, s = -2; the level-2 corner integral is
        # int_{ln 4}^inf u^-2 du = 1 / (2 ln 2)
        got = cusp_measure(2).lr_integral(DyadicCube(2, (0, 0, 0)), 1.5)
        assert got == pytest.approx(1.0 / (2.0 * LN2), rel=1e-10)

    def test_vanishing_regime_total(self):
        got = cusp_measure(2).lr_integral(DyadicCube.unit(3), 1.5)
        assert got == pytest.approx(1.0 / LN2, rel=1e-10)

    def test_lr_histogram_total(self):
        nu = cusp_measure(1)
        total = _hist_total(nu.lr_integral_histogram(1.4, 2))
        assert total == pytest.approx(5.0 * 2.0**-0.2, rel=1e-9)

    def test_lr_max_tracks_corner(self):
        # corner of |f1|^1.4: int_0^h z^(-0.8) dz = 5 h^0.2
        nu = cusp_measure(1)
        want = math.log2(5.0 * (2.0**-2) ** 0.2)
        assert nu.lr_max_log2_integral(1.4, 2) == pytest.approx(want, abs=1e-9)


# == divergent z-integrals ===================================================

class TestDivergence:
    def test_critical_exponent_diverges(self):
        prof = RadialProfile(-2.0, 0.0)
        with pytest.raises(ValueError, match="w=0, s=0"):
            profile_z_integral(prof, 1.0, 0.0, Z_MAX)

    def test_log_excess_diverges(self):
        prof = RadialProfile(-2.0, 1.0)
        with pytest.raises(ValueError, match="s>-1"):
            profile_z_integral(prof, 1.0, 0.0, Z_MAX)

    def test_supercritical_diverges(self):
        prof = RadialProfile(-2.0, 0.0)
        with pytest.raises(ValueError, match="w<0"):
            profile_z_integral(prof, 0.0, 0.0, Z_MAX)

    def test_borderline_log_converges(self):
        # s < -1 keeps int u^s du finite at infinity
        prof = RadialProfile(-3.0, -2.0)
        got = profile_z_integral(prof, 2.0, 0.0, Z_MAX)
        assert got == pytest.approx(1.0 / LN2, rel=1e-10)


# == step ratios =============================================================

class TestStepRatios:
    @pytest.mark.parametrize("which", [1, 2, 3])
    def test_limsup_is_half(self, which):
        assert cusp_measure(which).step_ratio_limsup() == pytest.approx(0.5)

    def test_bounded_regime_step_bound(self):
        # corner masses are exactly 2^-n, so the ratio bound sits at 1/2
        # up to its built-in safety factor
        b = cusp_measure(1).step_ratio_bound(5)
        assert 0.5 <= b <= 0.50006

    def test_bounds_never_exceed_one(self):
        for which in (1, 2, 3):
            nu = cusp_measure(which)
            for level in (1, 3, 8):
                assert nu.step_ratio_bound(level) <= 1.0
