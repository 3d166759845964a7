"""Partition functions, their zeros, and derived dimension quantities."""

import math
from fractions import Fraction

import pytest
from scipy.optimize import brentq

from mfspec import (
    DimensionSummary,
    RefusalError,
    SetFunction,
    build_block_cascade,
    compute_curve,
    cusp_measure,
    dim_infty,
    dimension_bounds,
    kappa_estimate,
    lebesgue,
    q_zero,
    q_zero_parametrized_t,
    set_function_dim_infty,
    subdifferential_bound,
    tau_n,
)
from mfspec.registry import ahlfors_4of8, block_cantor_product, sierpinski_tetraeder

NEG_INF = float("-inf")
SIER_W = (0.36, 0.36, 0.2, 0.08)


def _sier_tau(q):
    """Closed form for the canonical set function on the corner cascade:
    the volume factor contributes +q, the moment is level-independent."""
    return q + math.log2(math.fsum(w**q for w in SIER_W))


# == tau_n closed forms ======================================================

class TestTauClosedForms:
    @pytest.mark.parametrize("n", [1, 4, 10])
    @pytest.mark.parametrize("q", [0.0, 1.0, 1.5, 2.5])
    def test_uniform_cube_canonical(self, n, q):
        # J(Q_n) = 2^(-2n) on all 8^n cubes: tau_n(q) = 3 - 2q exactly
        J = SetFunction.nu_spectral(lebesgue(3))
        assert tau_n(J, n, q) == pytest.approx(3.0 - 2.0 * q, abs=1e-12)

    @pytest.mark.parametrize("q", [0.0, 0.7, 2.0])
    def test_uniform_cube_plain(self, q):
        J = SetFunction.plain(lebesgue(3))
        assert tau_n(J, 5, q) == pytest.approx(3.0 * (1.0 - q), abs=1e-12)

    def test_uniform_cube_dirichlet(self):
        # interior family has (2^n - 2)^3 cubes, same J value
        J = SetFunction.nu_spectral(lebesgue(3))
        n, q = 4, 1.5
        want = (3.0 * math.log2(14.0) - 2.0 * n * q) / n
        assert tau_n(J, n, q, mode="dirichlet") == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 3, 8])
    @pytest.mark.parametrize("q", [0.0, 1.0, 2.4])
    def test_corner_cascade_is_level_free(self, n, q):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        assert tau_n(J, n, q) == pytest.approx(_sier_tau(q), abs=1e-10)

    def test_corner_cascade_box_count(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        assert tau_n(J, 10, 0.0) == pytest.approx(2.0, abs=1e-12)

    def test_empty_dirichlet_level(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        assert tau_n(J, 2, 1.0, mode="dirichlet") == NEG_INF

    def test_histogram_fallback_for_densities(self):
        nu = cusp_measure(1)
        J = SetFunction.plain(nu)
        assert tau_n(J, 2, 1.0) == pytest.approx(-0.5, abs=1e-9)  # log2(1/2)/2
        assert tau_n(J, 2, 0.0) == pytest.approx(math.log2(5.0) / 2.0, abs=1e-9)

    def test_argument_validation(self):
        J = SetFunction.plain(lebesgue(1))
        with pytest.raises(ValueError):
            tau_n(J, 0, 1.0)
        with pytest.raises(ValueError):
            tau_n(J, 2, -0.5)
        with pytest.raises(ValueError):
            tau_n(J, 2, 1.0, mode="mixed")


# == sampled curves ==========================================================

class TestCurves:
    def test_shape_and_rows(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        curve = compute_curve(J, (0.0, 1.0, 2.0), (2, 4))
        assert curve.values.shape == (2, 3)
        assert curve.finest() == 4
        assert list(curve.row(2)) == pytest.approx([3.0, 1.0, -1.0])

    def test_row_callable_is_fresh(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        curve = compute_curve(J, (0.0, 2.0), (3,))
        f = curve.row_callable(3)
        assert f(0.5) == pytest.approx(2.0)  # not on the sampled grid

    def test_grid_must_increase(self):
        J = SetFunction.plain(lebesgue(1))
        with pytest.raises(ValueError):
            compute_curve(J, (1.0, 1.0), (2,))


# == zeros ===================================================================

class TestQZero:
    def test_uniform_cube(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        assert q_zero(J, 10) == pytest.approx(1.5, abs=1e-9)
        assert q_zero(J, 30, mode="dirichlet") == pytest.approx(1.5, abs=1e-9)

    def test_four_corner_regular(self):
        # equal weights 1/4: tau(q) = 2 - q, zero at exactly 2
        J = SetFunction.nu_spectral(ahlfors_4of8())
        assert q_zero(J, 8) == pytest.approx(2.0, abs=1e-9)

    def test_corner_cascade_against_root_oracle(self):
        root = brentq(_sier_tau, 1.0, 4.0, xtol=1e-12)
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        assert q_zero(J, 8) == pytest.approx(root, abs=1e-8)
        assert root == pytest.approx(2.4781229266884788, abs=1e-10)

    def test_empty_family_has_no_zero(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        with pytest.raises(ValueError, match="no zero exists"):
            q_zero(J, 2, mode="dirichlet")

    def test_nondecreasing_row_rejected(self):
        # pass-through levels keep a full-mass cube, so max J = 1
        blk = build_block_cascade(Fraction(3, 8), Fraction(3, 10), 40)
        with pytest.raises(ValueError, match="not decreasing"):
            q_zero(SetFunction.plain(blk), 1)


# == infinity dimension ======================================================

class TestDimInfty:
    def test_uniform(self):
        assert dim_infty(lebesgue(1), (1, 8)) == pytest.approx(1.0)
        assert dim_infty(lebesgue(3), (2, 6)) == pytest.approx(3.0)

    def test_corner_cascade(self):
        got = dim_infty(sierpinski_tetraeder(), (1, 10))
        assert got == pytest.approx(-math.log2(0.36), abs=1e-12)
        assert got == pytest.approx(1.474, abs=1e-3)

    def test_cusp_corner_chain_is_exact(self):
        # corner masses are exactly 2^-n, every other class is smaller
        assert dim_infty(cusp_measure(1), (1, 6)) == pytest.approx(1.0, abs=1e-9)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            dim_infty(lebesgue(1), (0, 3))
        with pytest.raises(ValueError):
            dim_infty(lebesgue(1), (4, 3))

    def test_set_function_variant(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        assert set_function_dim_infty(J, (1, 5)) == pytest.approx(2.0)


# == dimension sandwich ======================================================

class TestDimensionBounds:
    def test_uniform_cube_pins_exactly(self):
        summary = DimensionSummary(dim_infty=3.0, minkowski=3.0, q_N=1.5, q_D=1.5)
        rec = dimension_bounds(summary, 3)
        assert rec.lower == pytest.approx(1.5)
        assert rec.upper == pytest.approx(1.5)
        assert rec.consistent

    def test_corner_cascade_window(self):
        di = -math.log2(0.36)
        summary = DimensionSummary(
            dim_infty=di, minkowski=2.0, q_N=2.4781229266884788, q_D=2.478
        )
        rec = dimension_bounds(summary, 3)
        assert rec.lower == pytest.approx(2.0)
        assert rec.upper == pytest.approx(di / (di - 1.0), abs=1e-12)
        assert rec.upper == pytest.approx(3.110, abs=1e-3)
        assert rec.consistent

    def test_subcritical_regime_refused(self):
        summary = DimensionSummary(dim_infty=0.9, minkowski=2.0, q_N=2.0, q_D=2.0)
        with pytest.raises(RefusalError, match="critical/subcritical"):
            dimension_bounds(summary, 3)


# == subdifferential bounds ==================================================

class TestSubdifferential:
    def test_linear_row(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        out = subdifferential_bound(lambda q: tau_n(J, 8, q), 1.5)
        assert out.a == pytest.approx(2.0, abs=1e-9)
        assert out.b == pytest.approx(2.0, abs=1e-9)
        assert out.tau_q == pytest.approx(0.0, abs=1e-12)
        assert out.bound == pytest.approx(1.5, abs=1e-9)

    def test_smooth_row_at_its_zero(self):
        J = SetFunction.nu_spectral(sierpinski_tetraeder())
        q_star = q_zero(J, 8)
        out = subdifferential_bound(lambda q: tau_n(J, 8, q), q_star)
        assert out.a <= out.b
        assert out.bound == pytest.approx(2.4780899661896223, abs=1e-6)

    def test_block_product_at_unit_exponent(self):
        # at level 3 one of three steps splits: tau(q) = 7/3 - (4/3) q
        J = SetFunction.nu_spectral(block_cantor_product())
        out = subdifferential_bound(lambda q: tau_n(J, 3, q), 1.0)
        assert out.a == pytest.approx(4.0 / 3.0, abs=1e-9)
        assert out.b == pytest.approx(4.0 / 3.0, abs=1e-9)
        assert out.bound == pytest.approx(7.0 / 4.0, abs=1e-9)

    def test_kink_spreads_the_interval(self):
        out = subdifferential_bound(lambda q: abs(q - 1.5), 1.5)
        assert out.a == pytest.approx(-1.0)
        assert out.b == pytest.approx(1.0)

    def test_nonconvex_rejected(self):
        with pytest.raises(ValueError, match="non-convex"):
            subdifferential_bound(lambda q: -abs(q - 1.5), 1.5)

    def test_unstable_quotient_rejected(self):
        f = lambda q: math.sqrt(max(q - 1.5, 0.0))
        with pytest.raises(ValueError, match="did not stabilize"):
            subdifferential_bound(f, 1.5)

    def test_q_near_zero_rejected(self):
        with pytest.raises(ValueError):
            subdifferential_bound(lambda q: -q, 5e-5)


# == summability exponent ====================================================

class TestKappa:
    def test_uniform_cube(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        est = kappa_estimate(J, (1.0, 2.0), level_budget=12)
        assert est.value == pytest.approx(1.5, abs=0.01)
        assert est.conclusive

    def test_vanishing_cusp_norm(self):
        J = SetFunction.density_norm(cusp_measure(2), r=1.5)
        est = kappa_estimate(J, (1.2, 1.8), level_budget=12)
        assert est.value == pytest.approx(1.5, abs=0.05)
        assert est.conclusive

    def test_budget_floor(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        with pytest.raises(ValueError, match=">= 10"):
            kappa_estimate(J, (1.0, 2.0), level_budget=8)

    def test_grid_must_bracket(self):
        J = SetFunction.nu_spectral(lebesgue(3))
        with pytest.raises(ValueError, match="bracket"):
            kappa_estimate(J, (0.5, 1.0), level_budget=10)


# == t-parametrized zeros ====================================================

class TestParametrizedZeros:
    def test_uniform_cube_closed_form(self):
        # a = -5/12: tau(q) = 3 - (7/4) q, zero at 12/7
        got = q_zero_parametrized_t(lebesgue(3), 2.5)
        assert got == pytest.approx(12.0 / 7.0, abs=1e-8)

    @pytest.mark.parametrize(
        "t,frozen",
        [
            (2.2, 3.0091960701701295),
            (2.1, 2.7136810520203114),
            (2.05, 2.589669400407142),
        ],
    )
    def test_corner_cascade_family(self, t, frozen):
        a = t * (2.0 / 3.0 - 1.0) / 2.0

        def row(q):
            return -a * 3.0 * q + math.log2(math.fsum(w**q for w in SIER_W))

        root = brentq(row, 1.0, 5.0, xtol=1e-12)
        got = q_zero_parametrized_t(sierpinski_tetraeder(), t)
        assert got == pytest.approx(root, abs=1e-8)
        assert got == pytest.approx(frozen, abs=1e-6)

    def test_canonical_limit(self):
        got = q_zero_parametrized_t(lebesgue(3), 2.000001)
        assert got == pytest.approx(1.5, abs=1e-3)

    def test_upper_range_refused(self):
        with pytest.raises(RefusalError, match="outside the admissible range"):
            q_zero_parametrized_t(sierpinski_tetraeder(), 3.0)

    def test_lower_range_refused(self):
        with pytest.raises(RefusalError, match="t > 2"):
            q_zero_parametrized_t(lebesgue(3), 2.0)
