import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphon_fbsde import graphon as G
from graphon_fbsde.errors import ConfigError, DomainError

KERNELS = {
    "G1": G.constant(),
    "G2": G.two_block(2.0, 0.5),
    "G3": G.star(1.0, 0.2),
    "G4": G.min_max(),
    "G5": G.power_law(-0.5),
}


class TestEvaluate:
    def test_constant(self):
        assert G.evaluate(KERNELS["G1"], 0.3, 0.9) == 1.0

    def test_min_max(self):
        np.testing.assert_allclose(G.evaluate(KERNELS["G4"], 0.3, 0.6), 0.12, atol=1e-15)

    def test_power_law(self):
        np.testing.assert_allclose(G.evaluate(KERNELS["G5"], 0.25, 1.0), 0.5, atol=1e-15)

    def test_power_law_zero_label(self):
        assert G.evaluate(KERNELS["G5"], 0.0, 0.7) == 0.0

    def test_star_within_group_zero(self):
        g = KERNELS["G3"]
        assert G.evaluate(g, 0.1, 0.1) == 0.0
        assert G.evaluate(g, 0.5, 0.9) == 0.0
        assert G.evaluate(g, 0.1, 0.9) == 1.0

    def test_two_block_boundary_half_open(self):
        g = KERNELS["G2"]
        assert G.evaluate(g, 0.4999, 0.1) == 2.0
        assert G.evaluate(g, 0.5, 0.5) == 0.5
        assert G.evaluate(g, 0.5, 0.4999) == 0.0

    def test_star_boundary_half_open(self):
        g = KERNELS["G3"]
        assert G.evaluate(g, 0.2, 0.1) == 1.0
        assert G.evaluate(g, 0.2, 0.3) == 0.0

    def test_domain_error(self):
        with pytest.raises(DomainError):
            G.evaluate(KERNELS["G1"], 1.2, 0.5)
        with pytest.raises(DomainError):
            G.evaluate(KERNELS["G4"], 0.5, -0.1)

    @pytest.mark.parametrize("name", list(KERNELS))
    def test_symmetry_and_range(self, name):
        rng = np.random.default_rng(0)
        u, v = rng.random(10_000), rng.random(10_000)
        g = KERNELS[name]
        a, b = G.evaluate(g, u, v), G.evaluate(g, v, u)
        np.testing.assert_array_equal(a, b)
        if name != "G2":  # a = 2 is outside [0,1] by construction
            assert np.all((a >= 0) & (a <= 1))

    @settings(max_examples=200, deadline=None)
    @given(u=st.floats(0, 1), v=st.floats(0, 1), name=st.sampled_from(sorted(KERNELS)))
    def test_symmetry_property(self, u, v, name):
        g = KERNELS[name]
        assert G.evaluate(g, u, v) == G.evaluate(g, v, u)


class TestConfig:
    def test_power_law_positive_gamma_rejected(self):
        with pytest.raises(ConfigError):
            G.power_law(0.5)

    def test_star_alpha_range(self):
        with pytest.raises(ConfigError):
            G.star(1.0, 1.0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            G.GraphonKernel("ring")

    def test_dict_round_trip(self):
        for g in KERNELS.values():
            assert G.GraphonKernel.from_dict(g.to_dict()) == g

    def test_from_dict_rejects_foreign_parameter(self):
        with pytest.raises(ConfigError) as info:
            G.GraphonKernel.from_dict({"kind": "constant", "alpha": 0.3})
        assert "graphon.alpha" in str(info.value)


class TestMeanFieldWeights:
    def test_constant_all_ones(self):
        np.testing.assert_array_equal(G.mean_field_weights(KERNELS["G1"], 0.4, np.linspace(0, 1, 7)),
                                      np.ones(7))

    def test_two_block(self):
        np.testing.assert_array_equal(G.mean_field_weights(KERNELS["G2"], 0.25, [0.1, 0.9]), [2.0, 0.0])

    def test_empty(self):
        assert G.mean_field_weights(KERNELS["G3"], 0.5, []).shape == (0,)


class TestSampleAdjacency:
    def test_constant_all_ones(self):
        A = G.sample_adjacency(KERNELS["G1"], 6, np.random.default_rng(0))
        np.testing.assert_array_equal(A, np.ones((6, 6)))

    def test_zero_kernel(self):
        A = G.sample_adjacency(G.constant(0.0), 5, np.random.default_rng(0))
        assert not A.any()

    def test_two_block_unit_weights(self):
        A = G.sample_adjacency(G.two_block(1.0, 1.0), 4, np.random.default_rng(0))
        expected = np.array([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]])
        np.testing.assert_array_equal(A, expected)

    def test_symmetric(self):
        A = G.sample_adjacency(KERNELS["G4"], 30, np.random.default_rng(3))
        np.testing.assert_array_equal(A, A.T)

    def test_edge_frequency(self):
        g = KERNELS["G5"]
        n, draws = 5, 10_000
        rng = np.random.default_rng(7)
        acc = np.zeros((n, n))
        for _ in range(draws):
            acc += G.sample_adjacency(g, n, rng)
        freq = acc / draws
        lab = G.adjacency_labels(n)
        p = G.kernel_matrix(g, lab)
        se = np.sqrt(p * (1 - p) / draws)
        assert np.all(np.abs(freq - p) <= 3 * se + 1e-12)
