"""Coarse counting, optimized coarse dimensions, per-level zeros, tilting."""

import math

import pytest

from mfspec import (
    SetFunction,
    lebesgue,
    per_level_zeros,
    tilted_diagnostic,
    coarse_dimension,
    coarse_profile,
)
from mfspec.coarse import coarse_counts
from mfspec.registry import ahlfors_4of8, block_cantor_product, sierpinski_tetraeder


# == threshold counts ========================================================

class TestCoarseCounts:
    def test_corner_cascade_level1(self):
        # level-1 values are 0.72, 0.72, 0.4, 0.16; thresholds 2^-alpha
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        got = coarse_counts(J, 1, [0.3, 0.5, 1.4, 3.0])
        assert got == [0, 2, 3, 4]

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_uniform_vanishes_below_its_dimension(self, n):
        # plain nu on the square: 4^-n < 2^(-1.5 n), so nothing counts
        J = SetFunction.plain(lebesgue(2))
        assert coarse_counts(J, n, [1.5]) == [0]
        assert coarse_counts(J, n, [2.0]) == [4**n]

    def test_argument_validation(self):
        J = SetFunction.plain(lebesgue(1))
        with pytest.raises(ValueError):
            coarse_counts(J, 0, [1.0])
        with pytest.raises(ValueError):
            coarse_counts(J, 2, [0.0, 1.0])


# == tabulated profiles ======================================================

class TestCoarseProfile:
    def test_rows_match_single_counts(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        prof = coarse_profile(J, [1, 2, 3], alpha_grid=[0.5, 1.4, 3.0])
        assert prof.levels == (1, 2, 3)
        for i, n in enumerate(prof.levels):
            assert list(prof.counts[i]) == coarse_counts(J, n, prof.alpha_grid)

    def test_column_extraction(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        prof = coarse_profile(J, [1, 2], alpha_grid=[3.0])
        assert prof.column(0) == [4, 16]

    def test_default_grid_spans_the_dimension(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        prof = coarse_profile(J, [1, 2, 3, 4])
        assert min(prof.alpha_grid) == pytest.approx(1.0)  # 0.5 * dim
        assert max(prof.alpha_grid) == pytest.approx(6.0, abs=0.05)


# == optimized coarse dimensions =============================================

class TestCoarseDimension:
    def test_uniform_cube(self):
        # counts jump from 0 to 8^n exactly at alpha = 2: F = 3/2
        J = SetFunction.nu_spectral(lebesgue(3))
        prof = coarse_profile(J, range(1, 9))
        dim = coarse_dimension(prof, J)
        assert dim.f_upper == pytest.approx(1.5, abs=1e-4)
        assert dim.f_lower == pytest.approx(1.5, abs=1e-4)
        assert dim.alpha_star == pytest.approx(2.0, abs=0.02)
        assert not dim.at_grid_edge

    def test_four_corner_regular(self):
        J = SetFunction.nu_spectral(ahlfors_4of8())
        prof = coarse_profile(J, range(1, 9))
        dim = coarse_dimension(prof, J)
        assert dim.f_upper == pytest.approx(2.0, abs=1e-4)
        assert dim.f_lower == pytest.approx(2.0, abs=1e-4)

    def test_narrow_grid_is_flagged(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        prof = coarse_profile(J, range(1, 6), alpha_grid=[2.0, 2.2, 2.4])
        dim = coarse_dimension(prof)
        assert dim.at_grid_edge

    def test_needs_enough_levels(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        prof = coarse_profile(J, [1, 2, 3], alpha_grid=[2.0, 2.5])
        with pytest.raises(ValueError, match="at least 4 levels"):
            coarse_dimension(prof)


# == per-level zeros =========================================================

class TestPerLevelZeros:
    def test_block_product_boundary_values(self):
        # at block boundaries the split frequency is exactly 3/8 or 3/10,
        # making the zero (c + 2)/(c + 1) with c the frequency
        J = SetFunction.nu_spectral(block_cantor_product())
        zeros = {z.n: z for z in per_level_zeros(J, [40, 80, 160])}
        assert zeros[40].q_n == pytest.approx(19.0 / 11.0, abs=1e-8)
        assert zeros[80].q_n == pytest.approx(23.0 / 13.0, abs=1e-8)
        assert zeros[160].q_n == pytest.approx(19.0 / 11.0, abs=1e-8)
        assert all(z.balanced for z in zeros.values())

    def test_uniform_rows_are_level_free(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        zeros = per_level_zeros(J, [2, 5, 9])
        assert [z.q_n for z in zeros] == pytest.approx([1.5] * 3, abs=1e-8)
        assert all(z.balanced for z in zeros)


# == tilted concentration diagnostic =========================================

class TestTiltedDiagnostic:
    def test_corner_cascade_escape_decay(self):
        # window centered at the tau'(1) exponent of the corner cascade
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        c = 0.817125
        escapes = [
            tilted_diagnostic(J, n, 1.0, (c - 0.3, c + 0.3))
            for n in (4, 8, 12, 16, 20, 24)
        ]
        frozen = [
            4.345062e-01,
            1.929123e-01,
            9.352185e-02,
            4.697528e-02,
            3.871530e-02,
            2.185961e-02,
        ]
        assert escapes == pytest.approx(frozen, rel=1e-5)
        assert all(b < a for a, b in zip(escapes[2:], escapes[3:]))

    def test_everything_inside_a_wide_window(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        assert tilted_diagnostic(J, 6, 1.0, (0.01, 10.0)) == 0.0

    def test_argument_validation(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        with pytest.raises(ValueError, match="s < t"):
            tilted_diagnostic(J, 4, 1.0, (1.0, 1.0))
        with pytest.raises(ValueError, match="q must be >= 0"):
            tilted_diagnostic(J, 4, -1.0, (0.5, 1.0))
        with pytest.raises(ValueError, match="no support cubes"):
            tilted_diagnostic(J, 2, 1.0, (0.5, 1.0), mode="dirichlet")
