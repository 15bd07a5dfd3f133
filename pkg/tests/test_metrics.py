import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphon_fbsde import fbsde, metrics
from graphon_fbsde import graphon as G
from graphon_fbsde.errors import DomainError
from graphon_fbsde.market import EtaSpec, MarketModel, TimeGrid, XiSpec, sample_batch
from graphon_fbsde.metrics import LabelGroup

GRID = TimeGrid(1.0, 20)


def _traj(g=G.constant(), model=MarketModel(), M=2000, seed=0, y0=1.5):
    b = sample_batch(model, GRID, M, np.random.default_rng(seed))
    return fbsde.rollout(fbsde.constant_y0_controls(GRID, y0), g, model, GRID, b)


class TestUtility:
    def test_zero(self):
        assert metrics.equilibrium_utility(MarketModel(), G.constant(), 0.5, 0.0) == -1.0

    def test_constant_graphon(self):
        np.testing.assert_allclose(metrics.equilibrium_utility(MarketModel(), G.constant(), 0.5, 1.5),
                                   -np.exp(0.5), rtol=1e-15)

    def test_weak_block(self):
        np.testing.assert_allclose(metrics.equilibrium_utility(MarketModel(), G.two_block(2, 0.5), 0.8, -0.75),
                                   -0.7788007830714049, rtol=1e-14)

    def test_degenerate_label(self):
        model = MarketModel(eta=EtaSpec("linear", beta=1.0))
        with pytest.raises(DomainError):
            metrics.equilibrium_utility(model, G.constant(), 0.0, 0.0)

    def test_initial_wealth_terms(self):
        model = MarketModel(xi=XiSpec("constant", 1.0), rho=0.5)
        # xi - rho * E[xi] * deg = 1 - 0.5 = 0.5
        np.testing.assert_allclose(metrics.equilibrium_utility(model, G.constant(), 0.3, 0.0),
                                   -np.exp(-0.5 / 3), rtol=1e-14)

    @given(y=st.floats(-20, 20), dy=st.floats(1e-3, 5))
    def test_strictly_decreasing_and_negative(self, y, dy):
        m = MarketModel()
        a = metrics.equilibrium_utility(m, G.constant(), 0.5, y)
        b = metrics.equilibrium_utility(m, G.constant(), 0.5, y + dy)
        assert b < a < 0


class TestGroups:
    def test_two_block_halves(self):
        lo, hi = metrics.default_groups(G.two_block(2, 0.5))
        assert lo.contains(0.4999) and not lo.contains(0.5)
        assert hi.contains(0.5) and hi.contains(1.0)

    def test_min_max_inner_closed(self):
        inner, outer = metrics.default_groups(G.min_max())
        np.testing.assert_array_equal(inner.contains([0.25, 0.5, 0.75, 0.8]), [True, True, True, False])
        np.testing.assert_array_equal(outer.contains([0.1, 0.25, 0.9]), [True, False, True])

    def test_star(self):
        major, minor = metrics.default_groups(G.star(1.0, 0.2))
        assert major.contains(0.1) and minor.contains(0.2)


class TestWealthCurves:
    def test_initial_zero(self):
        wc = metrics.wealth_curves(_traj(M=50), G.constant(), [LabelGroup("all", ((0, 1),))])
        assert wc.groups["all"].mean_X[0] == 0.0
        assert wc.groups["all"].mean_benchmarked_X[0] == 0.0

    def test_expected_wealth_slope(self):
        wc = metrics.wealth_curves(_traj(M=4000), G.two_block(2, 0.5), metrics.default_groups(G.two_block(2, 0.5)))
        for c in wc.groups.values():
            # E[X_1] = eta * theta^2 * T = 3 for every label
            assert abs(c.mean_X[-1] - 3.0) < 4 * c.se_X[-1]
            assert np.all(c.se_X >= 0)

    def test_single_group_benchmark_zero(self):
        wc = metrics.wealth_curves(_traj(M=500), G.constant(), [LabelGroup("all", ((0, 1),))])
        np.testing.assert_allclose(wc.groups["all"].mean_benchmarked_X, 0.0, atol=1e-12)

    def test_empty_group_absent(self):
        wc = metrics.wealth_curves(_traj(M=20), G.constant(), [LabelGroup("none", ((2, 3),))])
        assert wc.absent == ["none"]
        assert not wc.groups

    def test_z_padded(self):
        wc = metrics.wealth_curves(_traj(M=20), G.constant(), [LabelGroup("all", ((0, 1),))])
        assert len(wc.groups["all"].mean_Z) == GRID.n_star + 1
        assert np.isnan(wc.groups["all"].mean_Z[-1])

    def test_csv(self, tmp_path):
        wc = metrics.wealth_curves(_traj(M=40), G.star(), metrics.default_groups(G.star()))
        path = tmp_path / "m.csv"
        metrics.write_metrics_csv(wc, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# schema: graphon_fbsde.metrics/v1"
        assert lines[1].startswith("group,t,mean_X")
        assert len(lines) == 2 + 2 * (GRID.n_star + 1)


class TestIndependence:
    def test_identical_groups(self):
        grp = LabelGroup("all", ((0, 1),))
        rep = metrics.index_independence_test(_traj(M=100), [grp, LabelGroup("again", ((0, 1),))])
        np.testing.assert_array_equal(rep.pairs[0].diff_X, 0.0)
        assert rep.passed

    def test_needs_two_groups(self):
        with pytest.raises(ValueError):
            metrics.index_independence_test(_traj(M=50), [LabelGroup("all", ((0, 1),))])

    def test_underpowered_warning(self):
        with pytest.warns(metrics.UnderpoweredTestWarning):
            metrics.index_independence_test(_traj(M=40), metrics.default_groups(G.star(1.0, 0.2)))

    def test_label_dependent_eta_flags(self):
        model = MarketModel(eta=EtaSpec("linear", beta=4.0))
        tr = _traj(G.constant(), model, M=4000)
        rep = metrics.index_independence_test(tr, metrics.default_groups(G.two_block(2, 0.5)))
        assert not rep.passed

    def test_constant_eta_passes(self):
        tr = _traj(G.star(1.0, 0.2), MarketModel(kind="markovian_bs"), M=4096, seed=3)
        rep = metrics.index_independence_test(tr, metrics.default_groups(G.star(1.0, 0.2)))
        assert rep.passed


class TestUtilitiesCsv:
    def test_schema(self, tmp_path):
        path = tmp_path / "u.csv"
        metrics.write_utilities_csv([0.25, 0.75], [1.5, -0.75], [-np.exp(0.5), -np.exp(-0.25)], path)
        lines = path.read_text().splitlines()
        assert lines[:2] == ["# schema: graphon_fbsde.utilities/v1", "label,Y0,utility"]
        assert len(lines) == 4


class TestStarTrend:
    def test_major_benchmarked_wealth_scales_with_alpha(self):
        # identical wealth laws: the major group benchmarks against measure 1 - alpha,
        # so its expected benchmarked wealth is alpha * E[X_T] = 3 * alpha
        model = MarketModel()
        b = sample_batch(model, GRID, 4000, np.random.default_rng(11))
        means = []
        for alpha in (0.5, 0.2, 0.1, 0.05):
            g = G.star(1.0, alpha)
            tr = fbsde.rollout(fbsde.constant_y0_controls(GRID, 0.0), g, model, GRID, b)
            c = metrics.wealth_curves(tr, g, metrics.default_groups(g)).groups["major"]
            # the in-batch benchmark adds noise shared by every major particle
            minor = tr.X[tr.labels >= alpha, -1]
            shared = minor.std(ddof=1) * np.sqrt(len(minor)) / tr.M
            tol = 4 * np.hypot(c.se_benchmarked_X[-1], shared) + 3.0 * abs(len(minor) / tr.M - (1 - alpha))
            assert abs(c.mean_benchmarked_X[-1] - 3.0 * alpha) < tol
            means.append(c.mean_benchmarked_X[-1])
        assert all(b < a for a, b in zip(means, means[1:]))
