import numpy as np
import pytest
from scipy.integrate import quad

from roughmass.errors import GridError
from roughmass.fields import Discretization, MetricField, Region, ScalarField
from roughmass.geometry import (
    distributional_pairing,
    lp_norm,
    negative_part,
    riemannian_volume,
    scalar_curvature,
    sobolev_distance,
    sup_distance,
)


def conformal_metric(disc, amp=1.0):
    """g = u^4 delta (n = 3) with u = 1 + amp exp(-r^2); exact curvature
    s = -8 u^-5 Lap u with Lap u = amp e^{-r^2}(4 r^2 - 6)."""
    r2 = disc.radius() ** 2
    u = 1.0 + amp * np.exp(-r2)
    g = MetricField.isotropic(disc, u**4)
    lap = amp * np.exp(-r2) * (4.0 * r2 - 6.0)
    s_exact = -8.0 * u ** (-5.0) * lap
    return g, s_exact


class TestScalarCurvature:
    def test_flat_cartesian_exact_zero(self):
        d = Discretization.cartesian(extent=1.0, spacing=0.125)
        s = scalar_curvature(MetricField.euclidean(d))
        assert np.abs(s.values).max() == 0.0

    def test_flat_radial_exact_zero(self):
        for n in (3, 5, 7):
            d = Discretization.radial(extent=5.0, spacing=0.1, n=n)
            s = scalar_curvature(MetricField.euclidean(d))
            assert np.abs(s.values).max() < 1e-12

    def test_conformal_oracle_second_order(self):
        errs = []
        for h in (0.2, 0.1):
            d = Discretization.cartesian(extent=1.6, spacing=h)
            g, s_exact = conformal_metric(d)
            s = scalar_curvature(g)
            errs.append(np.abs(s.values - s_exact)[s.meta["interior"]].max())
        assert np.log2(errs[0] / errs[1]) > 1.8

    def test_radial_conformal_oracle_across_dimensions(self):
        for n in (3, 5, 7):
            d = Discretization.radial(extent=8.0, spacing=0.01, n=n)
            r = d.axis_coords()
            u = 1.0 + np.exp(-(r**2))
            a_n = 4.0 * (n - 1) / (n - 2)
            g = MetricField.isotropic(d, u ** (4.0 / (n - 2)))
            s = scalar_curvature(g)
            lap = np.exp(-(r**2)) * (4 * r**2 - 2 * n)
            s_exact = -a_n * u ** (-(n + 2.0) / (n - 2.0)) * lap
            err = np.abs(s.values - s_exact)[s.meta["interior"]].max()
            assert err < 5e-3, f"n={n}: {err}"

    def test_round_sphere_value(self):
        # A = 1, B = (a sin(r/a)/r)^2 is the round sphere: s = n(n-1)/a^2
        a, n = 2.0, 4
        d = Discretization.radial(extent=3.0, spacing=0.01, n=n)
        r = d.axis_coords()
        B = (a * np.sin(r / a) / r) ** 2
        g = MetricField(d, np.stack([np.ones_like(r), B], axis=-1))
        s = scalar_curvature(g)
        assert np.abs(s.values[s.meta["interior"]] - n * (n - 1) / a**2).max() < 1e-4

    def test_schwarzschild_vacuum_under_refinement(self):
        maxs = []
        for h in (0.1, 0.05, 0.025):
            d = Discretization.radial(extent=20.0, spacing=h, n=3, r0=1.0)
            r = d.axis_coords()
            u = 1.0 + 1.0 / (2.0 * r)
            g = MetricField.isotropic(d, u**4)
            s = scalar_curvature(g)
            maxs.append(np.abs(s.values[s.meta["interior"]]).max())
        assert maxs[0] > maxs[1] > maxs[2]
        assert maxs[2] < maxs[0] / 10      # ~second order over 4x refinement
        assert maxs[2] < 1.5e-3

    def test_fourth_order_stencil_sharper(self):
        d = Discretization.radial(extent=8.0, spacing=0.02, n=3)
        r = d.axis_coords()
        u = 1.0 + np.exp(-(r**2))
        g = MetricField.isotropic(d, u**4)
        lap = np.exp(-(r**2)) * (4 * r**2 - 6)
        s_exact = -8.0 * u ** (-5.0) * lap
        e2 = np.abs(scalar_curvature(g, order=2).values - s_exact)[5:-5].max()
        e4 = np.abs(scalar_curvature(g, order=4).values - s_exact)[5:-5].max()
        assert e4 < e2 / 10


class TestLpNorm:
    def unit_volume_region(self, disc):
        # central cube of exactly 1/h^3 nodes: coordinate volume 1
        count = round(1.0 / disc.h**3)
        side = round(count ** (1 / 3))
        assert side**3 == count
        mask = np.zeros(disc.shape, dtype=bool)
        mid = disc.npts // 2
        half = side // 2
        sl = slice(mid - half, mid - half + side)
        mask[sl, sl, sl] = True
        return Region(disc, mask, "unit cube")

    def test_constant_fields(self):
        d = Discretization.cartesian(extent=2.0, spacing=0.125)
        g = MetricField.euclidean(d)
        reg = self.unit_volume_region(d)
        one = ScalarField.constant(d, 1.0)
        three = ScalarField.constant(d, 3.0)
        assert lp_norm(one, 6, g, reg) == pytest.approx(1.0, rel=1e-12)
        assert lp_norm(three, 1.5, g, reg) == pytest.approx(3.0, rel=1e-12)

    def test_infinity_norm(self):
        d = Discretization.radial(extent=5.0, spacing=0.1, n=3)
        g = MetricField.euclidean(d)
        u = ScalarField(d, -np.linspace(0, 2, d.npts))
        assert lp_norm(u, np.inf, g) == pytest.approx(2.0)

    def test_riemann_sum_error_first_order(self):
        # characteristic-like bump: exact integral from the closed form
        d1 = Discretization.cartesian(extent=1.0, spacing=0.1)
        d2 = Discretization.cartesian(extent=1.0, spacing=0.05)
        errs = []
        for d in (d1, d2):
            g = MetricField.euclidean(d)
            u = ScalarField(d, np.where(d.radius() <= 0.7, 1.0, 0.0))
            exact = (4.0 * np.pi / 3.0 * 0.7**3)
            errs.append(abs(lp_norm(u, 1.0, g) - exact))
        assert errs[1] < errs[0]
        assert errs[1] < 0.05 * (4 * np.pi / 3 * 0.7**3)

    def test_region_monotonicity(self):
        d = Discretization.cartesian(extent=1.0, spacing=0.125)
        g = MetricField.euclidean(d)
        rng = np.random.default_rng(3)
        u = ScalarField(d, rng.standard_normal(d.shape))
        small = Region.ball(d, 0.5)
        big = Region.ball(d, 0.9)
        assert lp_norm(u, 1.5, g, small) <= lp_norm(u, 1.5, g, big)

    def test_empty_region_error(self):
        d = Discretization.cartesian(extent=1.0, spacing=0.125)
        g = MetricField.euclidean(d)
        u = ScalarField.constant(d, 1.0)
        with pytest.raises(GridError):
            lp_norm(u, 2.0, g, Region(d, np.zeros(d.shape, bool)))


class TestVolume:
    def test_unit_cube(self):
        d = Discretization.cartesian(extent=2.0, spacing=0.125)
        g = MetricField.euclidean(d)
        reg = TestLpNorm().unit_volume_region(d)
        assert riemannian_volume(reg, g) == pytest.approx(1.0, rel=1e-12)

    def test_constant_conformal_factor(self):
        d = Discretization.cartesian(extent=2.0, spacing=0.125)
        g = MetricField.isotropic(d, np.full(d.shape, 4.0))  # sqrt(det) = 8
        reg = TestLpNorm().unit_volume_region(d)
        assert riemannian_volume(reg, g) == pytest.approx(8.0, rel=1e-12)

    def test_ball_volume_quadrature(self):
        d = Discretization.cartesian(extent=1.5, spacing=0.05)
        g = MetricField.euclidean(d)
        ball = Region.ball(d, 1.0)
        assert riemannian_volume(ball, g) == pytest.approx(4 * np.pi / 3, rel=0.01)

    def test_additive_over_disjoint_regions(self):
        d = Discretization.radial(extent=5.0, spacing=0.1, n=3)
        g = MetricField.isotropic(d, 1.0 + 0.1 * np.exp(-d.radius() ** 2))
        a = Region.ball(d, 2.0)
        b = Region.annulus(d, 2.5, 4.0)
        both = Region(d, a.mask | b.mask)
        assert riemannian_volume(a, g) + riemannian_volume(b, g) == pytest.approx(
            riemannian_volume(both, g), rel=1e-14)


class TestNegativePart:
    def test_trivials(self):
        d = Discretization.radial(extent=5.0, spacing=0.1, n=3)
        five = negative_part(ScalarField.constant(d, 5.0))
        assert np.all(five.values == 0.0) and not five.support.any()
        neg = negative_part(ScalarField.constant(d, -3.0))
        assert np.all(neg.values == 3.0) and neg.support.all()

    def test_pointwise_properties(self):
        d = Discretization.radial(extent=5.0, spacing=0.1, n=3)
        rng = np.random.default_rng(7)
        u = ScalarField(d, rng.standard_normal(d.shape))
        nu = negative_part(u)
        assert np.all(u.values + nu.values >= 0.0)
        again = negative_part(ScalarField(d, -nu.values))
        assert np.array_equal(again.values, nu.values)

    def test_support_marks_negative_nodes(self):
        d = Discretization.radial(extent=5.0, spacing=0.1, n=3)
        vals = np.zeros(d.shape)
        vals[5] = -2.0
        vals[9] = 1.0
        nu = negative_part(ScalarField(d, vals))
        assert nu.support[5] and not nu.support[9]


class TestPairing:
    def bump(self, disc, radius=0.8):
        r = disc.radius()
        vals = np.clip(1 - (r / radius) ** 2, 0, None) ** 5
        return ScalarField(disc, vals, support=vals > 0)

    def test_zero_field(self):
        d = Discretization.cartesian(extent=1.5, spacing=0.1)
        g = MetricField.euclidean(d)
        assert distributional_pairing(ScalarField.constant(d, 0.0),
                                      self.bump(d), g) == 0.0

    def test_constant_against_bump_oracle(self):
        # closed-form integral of the bump as the oracle
        d = Discretization.cartesian(extent=1.5, spacing=0.05)
        g = MetricField.euclidean(d)
        phi = self.bump(d, 0.8)
        exact = 4 * np.pi * quad(lambda s: (1 - (s / 0.8) ** 2) ** 5 * s * s,
                                 0, 0.8)[0]
        got = distributional_pairing(ScalarField.constant(d, 1.0), phi, g)
        assert got == pytest.approx(exact, rel=2e-3)

    def test_vacuum_curvature_pairs_to_zero(self):
        d = Discretization.radial(extent=20.0, spacing=0.05, n=3, r0=1.0)
        r = d.axis_coords()
        u = 1.0 + 1.0 / (2.0 * r)
        g = MetricField.isotropic(d, u**4)
        s = scalar_curvature(g)
        r_mid = 10.0
        vals = np.clip(1 - ((r - r_mid) / 3.0) ** 2, 0, None) ** 3
        phi = ScalarField(d, vals, support=vals > 0)
        assert abs(distributional_pairing(s, phi, g)) < 1e-2

    def test_boundary_support_rejected(self):
        d = Discretization.cartesian(extent=1.0, spacing=0.125)
        g = MetricField.euclidean(d)
        phi = ScalarField.constant(d, 1.0)   # support everywhere
        with pytest.raises(GridError):
            distributional_pairing(ScalarField.constant(d, 1.0), phi, g)

    def test_hoelder_inequality(self):
        # |<s, phi>| <= ||s||_{n/2} ||phi||_{n/(n-2)}
        d = Discretization.cartesian(extent=1.5, spacing=0.125)
        g, _ = conformal_metric(d, amp=0.3)
        rng = np.random.default_rng(11)
        for _ in range(5):
            s = ScalarField(d, rng.standard_normal(d.shape))
            phi_vals = np.where(d.radius() < 1.0,
                                rng.standard_normal(d.shape) ** 2, 0.0)
            phi = ScalarField(d, phi_vals, support=phi_vals > 0)
            lhs = abs(distributional_pairing(s, phi, g))
            rhs = lp_norm(s, 1.5, g) * lp_norm(phi, 3.0, g)
            assert lhs <= rhs * (1 + 1e-12)


class TestSobolevDistance:
    def test_identical_metrics(self):
        d = Discretization.cartesian(extent=1.0, spacing=0.125)
        g = MetricField.euclidean(d)
        assert sobolev_distance(g, g) == 0.0
        assert sup_distance(g, g) == 0.0

    def test_constant_shift_zeroth_order_only(self):
        # g2 = g1 + c*delta on a unit-volume region: W-norm = c sqrt(3)
        d = Discretization.cartesian(extent=2.0, spacing=0.125)
        g1 = MetricField.euclidean(d)
        c = 0.37
        g2 = MetricField.isotropic(d, np.full(d.shape, 1.0 + c))
        reg = TestLpNorm().unit_volume_region(d)
        got = sobolev_distance(g1, g2, region=reg)
        assert got == pytest.approx(c * np.sqrt(3.0), rel=1e-12)

    def test_radial_matches_cartesian_for_isotropic(self):
        # same isotropic deviation measured on both discretizations
        w = lambda r: 1.0 + 0.2 * np.exp(-(r**2))
        dc = Discretization.cartesian(extent=3.0, spacing=0.05)
        gc1 = MetricField.euclidean(dc)
        gc2 = MetricField.isotropic(dc, w(dc.radius()))
        ball_c = Region.ball(dc, 2.0)
        dr = Discretization.radial(extent=3.0, spacing=0.002, n=3)
        gr1 = MetricField.euclidean(dr)
        gr2 = MetricField.isotropic(dr, w(dr.radius()))
        ball_r = Region.ball(dr, 2.0)
        a = sobolev_distance(gc1, gc2, ball_c)
        b = sobolev_distance(gr1, gr2, ball_r)
        assert a == pytest.approx(b, rel=0.02)

    def test_mismatched_discretizations_error(self):
        d1 = Discretization.cartesian(extent=1.0, spacing=0.125)
        d2 = Discretization.cartesian(extent=1.0, spacing=0.0625)
        with pytest.raises(GridError):
            sobolev_distance(MetricField.euclidean(d1), MetricField.euclidean(d2))
