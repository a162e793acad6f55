import numpy as np
import pytest

from roughmass.errors import GridError
from roughmass.fields import Discretization, MetricField, Region
from roughmass.geometry import sobolev_distance, sup_distance
from roughmass.mollify import (
    MollifierSpec,
    convergence_table,
    equivalence_factor,
    hausdorff_node_distance,
    mollify,
    standard_bump,
)


def rough_cartesian(h=0.05, L=1.5, c=0.4, gamma=0.75, r_bump=0.8):
    d = Discretization.cartesian(extent=L, spacing=h)
    r = d.radius()
    eta = np.clip(1 - (r / r_bump) ** 2, 0, None) ** 3
    w = 1.0 + c * r**gamma * eta
    return d, MetricField.isotropic(d, w, r_K=r_bump), r_bump


def rough_radial(h=0.02, R=20.0, c=0.4, gamma=0.75, r_bump=1.5):
    d = Discretization.radial(extent=R, spacing=h, n=3)
    r = d.axis_coords()
    eta = np.clip(1 - (r / r_bump) ** 2, 0, None) ** 3
    w = 1.0 + c * r**gamma * eta
    return d, MetricField.isotropic(d, w, r_K=r_bump), r_bump


class TestKernel:
    def test_profile_properties(self):
        t = np.linspace(-2, 2, 401)
        vals = standard_bump(t)
        assert (vals >= 0).all()
        assert np.all(vals[np.abs(t) >= 1.0] == 0.0)

    def test_discrete_normalization(self):
        spec = MollifierSpec(eps=0.2)
        k1 = spec.kernel_1d(0.05)
        k3 = spec.kernel_3d(0.05)
        assert abs(k1.sum() - 1.0) < 1e-12
        assert abs(k3.sum() - 1.0) < 1e-12

    def test_under_resolved_eps_rejected(self):
        d, g, r_bump = rough_radial()
        with pytest.raises(GridError):
            mollify(g, MollifierSpec(eps=1.5 * d.h, charts=((0.0, r_bump),)))

    def test_chart_collar_must_fit(self):
        d, g, r_bump = rough_cartesian()
        with pytest.raises(GridError):
            mollify(g, MollifierSpec(eps=0.5, charts=(((0., 0., 0.), 1.2),)))


class TestMollify:
    def test_constant_metric_fixed_point(self):
        d = Discretization.cartesian(extent=1.5, spacing=0.05)
        g = MetricField.euclidean(d)
        sm = mollify(g, MollifierSpec(eps=0.15, charts=(((0., 0., 0.), 0.5),)))
        assert np.abs(sm.g_eps.comps - g.comps).max() < 5e-14
        assert sm.partition_defect < 1e-10

    def test_no_charts_is_identity(self):
        d, g, _ = rough_radial()
        sm = mollify(g, MollifierSpec(eps=0.2))
        assert np.array_equal(sm.g_eps.comps, g.comps)
        assert sm.K_eps.is_empty

    @pytest.mark.parametrize("builder", [rough_cartesian, rough_radial])
    def test_exterior_bit_exact(self, builder):
        d, g, r_bump = builder()
        center = (0., 0., 0.) if d.kind == "cartesian" else 0.0
        sm = mollify(g, MollifierSpec(eps=0.2, charts=((center, r_bump),)))
        outside = ~sm.K_eps.mask
        assert outside.any()
        assert np.array_equal(sm.g_eps.comps[outside], g.comps[outside])

    def test_smoothed_set_is_eps_neighborhood(self):
        d, g, r_bump = rough_radial()
        eps = 0.2
        sm = mollify(g, MollifierSpec(eps=eps, charts=((0.0, r_bump),)))
        r = d.axis_coords()
        inside = r[sm.K_eps.mask]
        margin = sm.K_eps.disc.h * MollifierSpec(eps=eps).stencil_margin
        assert inside.max() <= r_bump + eps + margin + d.h
        # and it covers the rough region
        assert np.all(sm.K_eps.mask[r <= r_bump])

    def test_smoothed_sets_shrink_to_rough_region(self):
        d, g, r_bump = rough_radial()
        rough = Region.ball(d, r_bump)
        dists = []
        for eps in (0.4, 0.2, 0.1):
            sm = mollify(g, MollifierSpec(eps=eps, charts=((0.0, r_bump),)))
            dists.append(hausdorff_node_distance(sm.K_eps, rough))
        assert dists[0] > dists[1] > dists[2]

    def test_distances_strictly_decreasing(self):
        d, g, r_bump = rough_radial()
        sups, w2s = [], []
        for eps in (0.4, 0.2, 0.1):
            sm = mollify(g, MollifierSpec(eps=eps, charts=((0.0, r_bump),)))
            sups.append(sup_distance(sm.g_eps, g))
            w2s.append(sobolev_distance(sm.g_eps, g))
        assert sups[0] > sups[1] > sups[2]
        assert w2s[0] > w2s[1] > w2s[2]

    def test_positive_definiteness_preserved(self):
        d, g, r_bump = rough_cartesian()
        sm = mollify(g, MollifierSpec(eps=0.2, charts=(((0., 0., 0.), r_bump),)))
        sm.g_eps.check_definite()


class TestEquivalenceFactor:
    def test_identity(self):
        d, g, _ = rough_radial()
        assert equivalence_factor(g, g) == pytest.approx(1.0)

    def test_scalar_scaling(self):
        d = Discretization.cartesian(extent=1.0, spacing=0.125)
        g = MetricField.euclidean(d)
        g4 = MetricField.isotropic(d, np.full(d.shape, 4.0))
        assert equivalence_factor(g, g4) == pytest.approx(4.0, rel=1e-12)

    def test_sandwich_at_node_level(self):
        # generalized eigenvalues of (g, g_eps) all inside [1/rho, rho]
        d, g, r_bump = rough_cartesian(h=0.1, L=1.5)
        sm = mollify(g, MollifierSpec(eps=0.25, charts=(((0., 0., 0.), r_bump),)))
        rho = equivalence_factor(g, sm.g_eps)
        L = np.linalg.cholesky(sm.g_eps.comps)
        X = np.linalg.solve(L, g.comps)
        Y = np.linalg.solve(L, np.swapaxes(X, -1, -2))
        lam = np.linalg.eigvalsh(Y)
        assert lam.min() >= 1.0 / rho - 1e-12
        assert lam.max() <= rho + 1e-12

    def test_rho_decreasing_toward_one(self):
        d, g, r_bump = rough_radial()
        rhos = [equivalence_factor(
            g, mollify(g, MollifierSpec(eps=e, charts=((0.0, r_bump),))).g_eps)
            for e in (0.4, 0.2, 0.1)]
        assert all(r >= 1.0 for r in rhos)
        assert rhos[0] * 1.05 >= rhos[1] * 1.05 >= rhos[2]
        assert rhos[-1] < 1.05


class TestConvergenceTable:
    def test_euclidean_all_zero_columns(self):
        d = Discretization.radial(extent=10.0, spacing=0.05, n=3)
        g = MetricField.euclidean(d)
        specs = [MollifierSpec(eps=e) for e in (0.4, 0.2)]
        table = convergence_table(g, specs)
        for row in table.rows:
            assert row["sup_dist"] == 0.0
            assert row["w2_dist"] == 0.0
            assert row["s_diff_n2"] == 0.0
            assert row["s_neg_n2"] == 0.0
            assert row["rho"] == pytest.approx(1.0)

    def test_negative_part_bound_for_nonneg_scenario(self):
        # ||(s_eps)_-|| <= ||s_eps - s|| row by row when s >= 0 pointwise
        from roughmass.scenarios import ScenarioSpec, make_scenario
        g, truth = make_scenario(ScenarioSpec(
            "conformal_bump", extent=12.0, spacing=0.02,
            params={"amplitude": 0.15}))
        specs = [MollifierSpec(eps=e, charts=truth.rough_charts)
                 for e in (0.2, 0.1, 0.05)]
        table = convergence_table(g, specs, assume_nonneg_curvature=True)
        assert table.smin0_checked and table.smin0_ok
        for row in table.rows:
            assert row["s_neg_n2"] <= row["s_diff_n2"]

    def test_curvature_distance_decreasing_for_rough(self):
        d, g, r_bump = rough_radial()
        specs = [MollifierSpec(eps=e, charts=((0.0, r_bump),))
                 for e in (0.4, 0.2, 0.1)]
        rough = Region.ball(d, r_bump)
        table = convergence_table(g, specs, rough_region=rough)
        vals = table.column("s_diff_n2")
        assert vals[0] > vals[1] > vals[2]
        assert all("hausdorff_K" in row for row in table.rows)

    def test_eps_must_decrease(self):
        d, g, r_bump = rough_radial()
        with pytest.raises(GridError):
            convergence_table(g, [MollifierSpec(eps=0.1), MollifierSpec(eps=0.2)])

    def test_csv_format(self, tmp_path):
        d = Discretization.radial(extent=10.0, spacing=0.05, n=3)
        g = MetricField.euclidean(d)
        table = convergence_table(g, [MollifierSpec(eps=0.4), MollifierSpec(eps=0.2)])
        path = tmp_path / "conv.csv"
        table.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "eps,sup_dist,w2_dist,s_diff_n2,s_neg_n2,rho"
        assert len(lines) == 3
