import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from invnet.net_analysis import (
    BipartiteGraph,
    average_clustering,
    average_degree,
    average_path_length,
    build_graph,
    clustering_coefficient,
    clustering_projected,
    consecutive_distances,
    count_links,
    histogram,
    local_clustering,
    log_bins,
    max_degree,
    mean_shortest_path,
    network_metrics,
    powerlaw_tail_slope,
    project_onto_investors,
    random_baselines,
    rank_size,
    stationarity_distance,
)
from tests import oracles


def random_bipartite(rng, max_nodes=12):
    n_inv = int(rng.integers(1, max_nodes))
    n_ini = int(rng.integers(1, max_nodes - n_inv + 1))
    density = rng.uniform(0, 1)
    mask = rng.uniform(size=(n_inv, n_ini)) < density
    k, j = np.nonzero(mask)
    return BipartiteGraph(n_inv, n_ini, k, j)


class TestGraphBasics:
    def test_build_from_weights(self):
        w = np.array([[0.5, 0.0], [-1.0, 2.0], [0.0, 0.0]])
        g = build_graph(w)
        assert g.edges == {(0, 0), (1, 1)}
        assert count_links(g) == 2
        assert max_degree(g) == 1
        assert average_degree(g) == pytest.approx(4 / 5)

    def test_star(self):
        g = BipartiteGraph.from_edges(4, 1, [(0, 0), (1, 0), (2, 0), (3, 0)])
        assert max_degree(g) == 4
        assert average_path_length(g) == pytest.approx((4 * 1 + 6 * 2) / 10)
        assert clustering_coefficient(g) == 0.0
        assert clustering_projected(project_onto_investors(g)) == 1.0

    def test_empty_graph(self):
        g = build_graph(np.zeros((3, 2)))
        m = network_metrics(g)
        assert m.links == 0 and m.max_degree == 0 and m.average_degree == 0
        assert m.avg_path_length is None and m.l_rand is None
        assert m.clustering == 0 and m.clustering_projected == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            BipartiteGraph(2, 2, [0, 0], [1, 1])
        with pytest.raises(ValueError):
            BipartiteGraph(2, 2, [2], [0])
        with pytest.raises(ValueError):
            build_graph(np.array([[np.nan]]))

    def test_disconnected_pairs_excluded(self):
        g = BipartiteGraph.from_edges(2, 2, [(0, 0), (1, 1)])
        assert average_path_length(g) == 1.0

    def test_triangle_clustering(self):
        tri = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=bool)
        assert average_clustering(tri) == 1.0
        assert average_clustering(sp.csr_matrix(tri)) == 1.0
        np.testing.assert_array_equal(local_clustering(tri), [1.0, 1.0, 1.0])

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1))
    def test_degree_sum_and_zero_clustering(self, seed):
        g = random_bipartite(np.random.default_rng(seed), max_nodes=40)
        assert int(g.degrees().sum()) == 2 * count_links(g)
        assert clustering_coefficient(g) == 0.0


class TestOracleEquivalence:
    def test_bipartite_graphs(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            g = random_bipartite(rng)
            edges = sorted(g.edges)
            adj = oracles.bipartite_adjacency(g.investor_count, g.initiator_count, edges)
            expected_l = oracles.mean_path_length(adj) if edges else None
            assert average_path_length(g) == expected_l
            assert clustering_coefficient(g) == oracles.average_clustering(adj)
            proj = oracles.projection_adjacency(g.investor_count, edges)
            assert project_onto_investors(g).tolist() == proj
            assert clustering_projected(project_onto_investors(g)) == oracles.average_clustering(proj)

    def test_general_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            upper = np.triu(rng.uniform(size=(n, n)) < rng.uniform(), k=1)
            adj = upper | upper.T
            expected = oracles.average_clustering(adj.tolist())
            assert average_clustering(adj) == expected
            assert average_clustering(sp.csr_matrix(adj)) == expected
            assert mean_shortest_path(sp.csr_matrix(adj)) == oracles.mean_path_length(adj.tolist())


class TestRandomBaselines:
    @pytest.mark.parametrize(
        "n, k, l_rand, c_rand",
        [
            (2000, 3.9944, 5.488, 0.0019972),
            (3000, 8.2146, 3.8018, 0.0027382),
            (10000, 26.86, 2.7989, 0.002686),
        ],
    )
    def test_published_rows(self, n, k, l_rand, c_rand):
        lr, cr = random_baselines(n, k)
        assert lr == pytest.approx(l_rand, rel=5e-4)
        assert cr == pytest.approx(c_rand, rel=5e-4)

    def test_sparse_row_has_no_path_length(self):
        lr, cr = random_baselines(1000, 0.9694)
        assert lr is None
        assert cr == pytest.approx(0.0009694, rel=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            random_baselines(0, 2.0)


class TestTailFit:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_recovers_exponent(self, alpha):
        ranks = np.arange(1, 1001, dtype=float)
        fit = powerlaw_tail_slope(3.0 * ranks ** (-alpha), tail_fraction=0.1)
        assert abs(fit.slope + alpha) <= 1e-9
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-9)
        assert fit.points_used == 100
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_order_does_not_matter(self):
        v = np.random.default_rng(0).pareto(1.5, size=500) + 1
        a = powerlaw_tail_slope(v)
        b = powerlaw_tail_slope(v[::-1])
        assert a.slope == b.slope

    def test_constant_values(self):
        fit = powerlaw_tail_slope(np.full(50, 2.0))
        assert fit.slope == 0.0 and fit.r_squared == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            powerlaw_tail_slope([1.0, 0.0, 2.0], tail_fraction=1.0)
        with pytest.raises(ValueError):
            powerlaw_tail_slope(np.ones(10), tail_fraction=0.1)
        with pytest.raises(ValueError):
            powerlaw_tail_slope(np.ones(10), tail_fraction=0.0)

    def test_rank_size(self):
        ranks, sizes = rank_size([3.0, 1.0, 5.0])
        assert ranks.tolist() == [1, 2, 3]
        assert sizes.tolist() == [5.0, 3.0, 1.0]


class TestHistograms:
    def test_log_bins(self):
        edges = log_bins([1.0, 10.0, 100.0], n_bins=2)
        np.testing.assert_allclose(edges, [1.0, 10.0, 100.0])
        with pytest.raises(ValueError):
            log_bins([0.0, 1.0])

    def test_identical_samples(self):
        v = np.random.default_rng(1).lognormal(size=300)
        edges = log_bins(v)
        assert stationarity_distance(histogram(v, edges), histogram(v, edges)) == 0.0

    def test_disjoint_samples(self):
        edges = log_bins([1.0, 100.0], n_bins=2)
        h1 = histogram([1.5, 2.0], edges)
        h2 = histogram([50.0, 60.0], edges)
        assert stationarity_distance(h1, h2) == 2.0

    def test_mismatched_edges(self):
        with pytest.raises(ValueError):
            stationarity_distance(histogram([1, 2], [1, 2, 3]), histogram([1, 2], [1, 2, 4]))

    def test_consecutive(self):
        d = consecutive_distances([[1.0, 2.0], [1.0, 2.0], [50.0, 60.0]], n_bins=4)
        assert d[0] == 0.0 and d[1] == 2.0

    @given(
        st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=50),
        st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=50),
    )
    def test_distance_bounds(self, a, b):
        d = consecutive_distances([a, b], n_bins=10)[0]
        assert 0.0 <= d <= 2.0 + 1e-12
