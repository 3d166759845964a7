"""Cascade, product, block, and density measure models."""

import math
from fractions import Fraction
from itertools import product

import pytest

from mfspec import (
    BlockSchedule,
    CascadeMeasure,
    ConstantSchedule,
    DyadicCube,
    PeriodicSchedule,
    PowerLawDensity,
    ProductMeasure,
    SequenceSchedule,
    build_block_cascade,
    lebesgue,
)
from mfspec.registry import ahlfors_4of8, block_cantor_product, sierpinski_tetraeder

NEG_INF = float("-inf")


def _binary_cascade(p=0.7):
    """1-D cascade splitting mass p / (1-p) at every level."""
    return CascadeMeasure(1, ConstantSchedule((p, 1.0 - p)))


def _hist_total(hist):
    return math.fsum(cnt * 2.0**lv for lv, cnt in hist)


# == point evaluation ========================================================

class TestCascadeMass:
    def test_binary_level2_masses(self):
        nu = _binary_cascade(0.7)
        masses = [nu.mass(DyadicCube(2, (k,))) for k in range(4)]
        assert masses == pytest.approx([0.49, 0.21, 0.21, 0.09])

    def test_lebesgue_is_uniform(self):
        nu = lebesgue(3)
        assert nu.log2_mass(DyadicCube(2, (1, 3, 0))) == pytest.approx(-6.0)
        assert nu.log2_mass(DyadicCube(5, (7, 7, 7))) == pytest.approx(-15.0)

    def test_total_mass_is_one(self):
        for nu in (lebesgue(2), _binary_cascade(), sierpinski_tetraeder()):
            assert nu.total_mass == pytest.approx(1.0)

    def test_off_support_cube_has_no_mass(self):
        nu = sierpinski_tetraeder()
        dead = DyadicCube(1, (1, 0, 0))  # corner without a child weight
        assert nu.log2_mass(dead) == NEG_INF
        assert nu.mass(dead) == 0.0

    def test_positive_children_of_root(self):
        nu = sierpinski_tetraeder()
        kids = dict(nu.positive_children(DyadicCube.unit(3)))
        assert len(kids) == 4
        got = sorted(2.0**lv for lv in kids.values())
        assert got == pytest.approx([0.08, 0.2, 0.36, 0.36])


# == per-level histograms ====================================================

class TestHistograms:
    def test_lebesgue_single_atom(self):
        hist = lebesgue(2).mass_histogram(2)
        assert hist == [(-4.0, 16)]

    def test_dirichlet_drops_boundary_cells(self):
        hist = lebesgue(1).mass_histogram(3, mode="dirichlet")
        assert hist == [(-3.0, 6)]

    def test_binary_level2(self):
        hist = _binary_cascade(0.7).mass_histogram(2)
        want = [(math.log2(0.49), 1), (math.log2(0.21), 2), (math.log2(0.09), 1)]
        for (lv, cnt), (wlv, wcnt) in zip(hist, want):
            assert lv == pytest.approx(wlv)
            assert cnt == wcnt

    def test_sierpinski_level2_matches_convolution(self):
        # independent oracle: convolve the weight multiset with itself
        w = [0.36, 0.36, 0.2, 0.08]
        buckets = {}
        for a in w:
            for b in w:
                key = round(math.log2(a * b), 6)
                buckets[key] = buckets.get(key, 0) + 1
        want = sorted(buckets.items(), key=lambda t: -t[0])
        got = sierpinski_tetraeder().mass_histogram(2)
        assert len(got) == len(want)
        for (lv, cnt), (wlv, wcnt) in zip(got, want):
            assert lv == pytest.approx(wlv, abs=1e-6)
            assert cnt == wcnt

    def test_sierpinski_has_no_interior_mass_at_level2(self):
        # an interior cell needs every axis to flip between levels 1 and 2,
        # i.e. the second corner must be the first one's componentwise
        # complement -- and no complement pair lies in the 4-corner support
        assert sierpinski_tetraeder().mass_histogram(2, mode="dirichlet") == []

    def test_histogram_counts_and_mass(self):
        for nu, d in ((ahlfors_4of8(), 3), (_binary_cascade(), 1)):
            hist = nu.mass_histogram(3)
            assert _hist_total(hist) == pytest.approx(1.0)
            assert nu.mass_histogram(2, mode="dirichlet") is not None

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            lebesgue(1).mass_histogram(2, mode="robin")


# == level moments ===========================================================

class TestLevelMoments:
    @pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 2.0])
    def test_moment_matches_histogram(self, q):
        # histogram keys carry 9-digit rounding, hence the 1e-8 tolerance
        nu = sierpinski_tetraeder()
        hist = nu.mass_histogram(3)
        brute = math.log2(math.fsum(cnt * (2.0**lv) ** q for lv, cnt in hist))
        assert nu.log2_level_moment(3, q) == pytest.approx(brute, abs=1e-8)

    def test_dirichlet_moment_matches_histogram(self):
        nu = _binary_cascade(0.6)
        hist = nu.mass_histogram(4, mode="dirichlet")
        brute = math.log2(math.fsum(cnt * (2.0**lv) ** 1.5 for lv, cnt in hist))
        got = nu.log2_level_moment(4, 1.5, mode="dirichlet")
        assert got == pytest.approx(brute, abs=1e-8)

    def test_empty_dirichlet_level_is_minus_inf(self):
        got = sierpinski_tetraeder().log2_level_moment(2, 1.0, mode="dirichlet")
        assert got == NEG_INF

    def test_max_level_mass(self):
        assert lebesgue(2).max_level_log2_mass(5) == pytest.approx(-10.0)
        assert sierpinski_tetraeder().max_level_log2_mass(3) == pytest.approx(
            3 * math.log2(0.36)
        )


# == schedules ===============================================================

class TestSchedules:
    def test_constant_prefix_closed_form(self):
        s = ConstantSchedule((0.7, 0.3))
        one = math.log2(0.7**1.3 + 0.3**1.3)
        assert s.log2_moment_prefix(9, 1.3) == pytest.approx(9 * one)
        assert s.log2_max_prefix(9) == pytest.approx(9 * math.log2(0.7))

    def test_sequence_schedule_head_then_tail(self):
        s = SequenceSchedule(
            head=((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 1.0)),
            tail=(0.4, 0.2, 0.2, 0.2),
        )
        assert s.weights(1) == (1.0, 0.0, 0.0, 0.0)
        assert s.weights(2) == (0.0, 0.0, 0.0, 1.0)
        assert s.weights(3) == (0.4, 0.2, 0.2, 0.2)
        assert s.weights(99) == (0.4, 0.2, 0.2, 0.2)

    @pytest.mark.parametrize("n", [1, 2, 3, 7])
    def test_sequence_prefix_matches_slow_sum(self, n):
        s = SequenceSchedule(
            head=((0.5, 0.5, 0.0, 0.0), (0.0, 0.25, 0.25, 0.5)),
            tail=(0.1, 0.2, 0.3, 0.4),
        )
        q = 1.7
        slow = math.fsum(s.log2_child_moment(ell, q) for ell in range(1, n + 1))
        assert s.log2_moment_prefix(n, q) == pytest.approx(slow, abs=1e-12)
        slow_max = math.fsum(math.log2(max(s.weights(ell))) for ell in range(1, n + 1))
        assert s.log2_max_prefix(n) == pytest.approx(slow_max, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 11])
    def test_periodic_prefix_matches_slow_sum(self, n):
        s = PeriodicSchedule(cycle=((0.8, 0.2), (0.5, 0.5), (0.3, 0.7)))
        q = 0.9
        slow = math.fsum(s.log2_child_moment(ell, q) for ell in range(1, n + 1))
        assert s.log2_moment_prefix(n, q) == pytest.approx(slow, abs=1e-12)
        slow_max = math.fsum(math.log2(max(s.weights(ell))) for ell in range(1, n + 1))
        assert s.log2_max_prefix(n) == pytest.approx(slow_max, abs=1e-12)

    def test_periodic_cycle_indexing(self):
        s = PeriodicSchedule(cycle=((0.8, 0.2), (0.5, 0.5)))
        assert s.weights(1) == (0.8, 0.2)
        assert s.weights(2) == (0.5, 0.5)
        assert s.weights(3) == (0.8, 0.2)


# == weight validation =======================================================

class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            CascadeMeasure(1, ConstantSchedule((0.7, 0.2)))

    def test_weights_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            CascadeMeasure(1, ConstantSchedule((1.5, -0.5)))

    def test_weight_count_must_match_dimension(self):
        with pytest.raises(ValueError):
            CascadeMeasure(2, ConstantSchedule((0.5, 0.5)))


# == block cascades ==========================================================

class TestBlockCascade:
    def test_split_counts_hit_targets_at_boundaries(self):
        nu = build_block_cascade(Fraction(1, 2), Fraction(1, 4), 8)
        s = nu.schedule
        assert s.split_count(8) == 4  # c_8 = 1/2
        assert s.split_count(16) == 4  # c_16 = 1/4
        assert s.split_count(32) == 16  # c_32 = 1/2 again

    def test_weights_are_half_split_or_pass(self):
        s = build_block_cascade(Fraction(3, 8), Fraction(3, 10), 40).schedule
        for level in range(1, 60):
            assert s.exact_weights(level) in (
                (Fraction(1, 2), Fraction(1, 2)),
                (Fraction(1), Fraction(0)),
            )

    def test_max_prefix_counts_splits(self):
        s = build_block_cascade(Fraction(1, 2), Fraction(1, 4), 8).schedule
        assert s.log2_max_prefix(16) == -4.0
        assert s.max_ratio_limsup() == 1.0  # pass-through levels recur

    def test_invalid_targets_rejected(self):
        with pytest.raises(ValueError):
            BlockSchedule(Fraction(1, 4), Fraction(1, 2), 8)  # c_minus > c_plus
        with pytest.raises(ValueError):
            BlockSchedule(Fraction(1, 2), Fraction(1, 4), 0)


# == products ================================================================

class TestProducts:
    def test_mass_factorizes(self):
        nu = ProductMeasure([_binary_cascade(0.7), lebesgue(1)])
        assert nu.d == 2
        got = nu.log2_mass(DyadicCube(2, (3, 1)))
        assert got == pytest.approx(math.log2(0.09 * 0.25))

    def test_level1_histogram(self):
        nu = ProductMeasure([_binary_cascade(0.7), lebesgue(1)])
        hist = nu.mass_histogram(1)
        assert [2.0**lv for lv, _ in hist] == pytest.approx([0.35, 0.15])
        assert [cnt for _, cnt in hist] == [2, 2]

    def test_moment_is_sum_of_factor_moments(self):
        nu = ProductMeasure([_binary_cascade(0.6), lebesgue(2)])
        hist = nu.mass_histogram(3)
        brute = math.log2(math.fsum(cnt * (2.0**lv) ** 2.0 for lv, cnt in hist))
        assert nu.log2_level_moment(3, 2.0) == pytest.approx(brute, abs=1e-8)

    def test_block_cantor_product_shape(self):
        nu = block_cantor_product()
        assert nu.d == 3
        assert nu.total_mass == pytest.approx(1.0)

    def test_empty_factor_list_rejected(self):
        with pytest.raises(ValueError):
            ProductMeasure([])


# == power-law densities =====================================================

class TestPowerLawDensity:
    def test_cell_masses_beta_one(self):
        nu = PowerLawDensity(1)  # density 2x
        for n, k in [(2, 0), (2, 3), (4, 7)]:
            want = (2 * k + 1) / 4.0**n
            assert nu.mass(DyadicCube(n, (k,))) == pytest.approx(want)
        assert nu.total_mass == pytest.approx(1.0)

    def test_histogram_level2(self):
        hist = PowerLawDensity(1).mass_histogram(2)
        masses = sorted(2.0**lv for lv, cnt in hist for _ in range(cnt))
        assert masses == pytest.approx([1 / 16, 3 / 16, 5 / 16, 7 / 16])

    def test_dirichlet_histogram_drops_end_cells(self):
        hist = PowerLawDensity(1).mass_histogram(2, mode="dirichlet")
        masses = sorted(2.0**lv for lv, cnt in hist for _ in range(cnt))
        assert masses == pytest.approx([3 / 16, 5 / 16])

    def test_max_cell_is_the_upper_end(self):
        nu = PowerLawDensity(1)
        assert nu.max_level_log2_mass(2) == pytest.approx(math.log2(7 / 16))

    def test_step_ratio_bound(self):
        assert PowerLawDensity(1).step_ratio_bound(3) == pytest.approx(0.75)
        assert PowerLawDensity(1).step_ratio_limsup() == pytest.approx(0.75)

    def test_exponent_must_exceed_minus_one(self):
        with pytest.raises(ValueError):
            PowerLawDensity(-1)


# == support geometry ========================================================

class TestSupportGeometry:
    def test_step_ratio_limsup_constants(self):
        assert lebesgue(2).step_ratio_limsup() == pytest.approx(0.25)
        assert sierpinski_tetraeder().step_ratio_limsup() == pytest.approx(0.36)

    def test_full_support_touches_boundary(self):
        assert not lebesgue(2).supports_open_cube()

    def test_steered_cascade_lives_in_open_square(self):
        sched = SequenceSchedule(
            head=((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 1.0)),
            tail=(0.25, 0.25, 0.25, 0.25),
        )
        assert CascadeMeasure(2, sched).supports_open_cube()

    def test_exact_weights_exposed_for_rational_models(self):
        s = lebesgue(3).schedule
        assert s.exact_weights(1) == (Fraction(1, 8),) * 8
        assert sierpinski_tetraeder().schedule.exact_weights(2)[0] == Fraction(9, 25)


def _all_level_masses(nu, n):
    """Brute-force all 2^{dn} cube masses (small n only)."""
    out = []
    for coords in product(range(2**n), repeat=nu.d):
        out.append(nu.mass(DyadicCube(n, coords)))
    return out


# == cross-check: histogram vs brute enumeration ============================

class TestHistogramOracle:
    @pytest.mark.parametrize("mode", ["neumann", "dirichlet"])
    def test_binary_cascade_level3(self, mode):
        nu = _binary_cascade(0.7)
        if mode == "dirichlet":
            masses = [
                nu.mass(DyadicCube(3, (k,)))
                for k in range(8)
                if DyadicCube(3, (k,)).is_interior
            ]
        else:
            masses = _all_level_masses(nu, 3)
        hist = nu.mass_histogram(3, mode=mode)
        brute = sorted(m for m in masses if m > 0)
        from_hist = sorted(2.0**lv for lv, cnt in hist for _ in range(cnt))
        assert from_hist == pytest.approx(brute)
