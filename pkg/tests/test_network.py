"""Network tests; distances are cross-checked against an independent
Floyd-Warshall oracle."""
import numpy as np
import pytest

from zfo.errors import AssumptionViolation, ConfigurationError
from zfo.network import (
    BernoulliDrops,
    CommGraph,
    NoDelay,
    check_compatibility,
    network_stats,
    shortest_path_lengths,
)


def _floyd_warshall(n, edges):
    inf = 10**9
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for i, j in edges:
        d[i][j] = d[j][i] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return np.array(d)


# ---------------------------------------------------------------------------
# graphs and distances


def test_path_graph_distances():
    g = CommGraph.path(3)
    want = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    np.testing.assert_array_equal(shortest_path_lengths(g), want)


@pytest.mark.parametrize("seed", range(5))
def test_distances_match_floyd_warshall(seed):
    g = CommGraph.random_connected(12, seed=seed)
    np.testing.assert_array_equal(
        shortest_path_lengths(g), _floyd_warshall(g.n, g.edges)
    )


def test_disconnected_graph_raises():
    g = CommGraph(4, [(0, 1), (2, 3)])
    with pytest.raises(AssumptionViolation, match="disconnected"):
        shortest_path_lengths(g)


def test_ring_diameter():
    stats = network_stats(CommGraph.ring(6))
    assert stats.diameter == 3
    assert stats.staleness_bound == 3


@pytest.mark.parametrize("n", [3, 8, 20])
def test_random_connected_graph_degrees_and_determinism(n):
    g1 = CommGraph.random_connected(n, seed=7)
    g2 = CommGraph.random_connected(n, seed=7)
    assert g1.edges == g2.edges
    degrees = [g1.degree(i) for i in range(n)]
    assert min(degrees) >= 2
    assert max(degrees) <= 4
    shortest_path_lengths(g1)  # connected: must not raise


# ---------------------------------------------------------------------------
# delay statistics


def test_stats_path3_frozen_values():
    # Ordered-pair squared distances on the 3-path sum to 12.
    stats = network_stats(CommGraph.path(3), delta=0)
    assert stats.b_bar == pytest.approx(np.sqrt(12.0 / 9.0), rel=1e-15)
    assert stats.b_frak == pytest.approx(stats.b_bar, rel=1e-12)  # unit dims
    assert stats.staleness_bound == 2
    assert stats.b_max == 2


def test_stats_path3_dimension_weighted():
    # dims (3, 1, 2): weighted sum = 3*5 + 1*2 + 2*5 = 27, n*d = 18.
    stats = network_stats(CommGraph.path(3), delta=0, dims=[3, 1, 2])
    assert stats.b_frak == pytest.approx(np.sqrt(27.0 / 18.0), rel=1e-15)
    assert stats.b_bar == pytest.approx(np.sqrt(12.0 / 9.0), rel=1e-15)


def test_stats_include_extra_delay():
    # Single edge with delta = 1: (0+1)^2 * 2 + (1+1)^2 * 2 = 10 over n^2 = 4.
    stats = network_stats(CommGraph.complete(2), delta=1)
    assert stats.b_bar == pytest.approx(np.sqrt(10.0) / 2.0, rel=1e-15)
    assert stats.staleness_bound == 2
    assert stats.delta == 1


def test_equal_dims_collapse_weighted_stat():
    g = CommGraph.random_connected(9, seed=3)
    stats = network_stats(g, delta=2, dims=np.full(9, 4.0))
    assert stats.b_frak == pytest.approx(stats.b_bar, rel=1e-12)


def test_negative_delta_rejected():
    with pytest.raises(ConfigurationError):
        network_stats(CommGraph.path(2), delta=-1)


# ---------------------------------------------------------------------------
# edge-list parsing


def test_edge_list_round_trip():
    g = CommGraph.from_edge_list_text("1 2\n2 3\n# comment\n\n3 4\n")
    assert g.n == 4
    assert g.edges == [(0, 1), (1, 2), (2, 3)]


def test_edge_list_rejects_zero_index():
    with pytest.raises(ConfigurationError, match="1-indexed"):
        CommGraph.from_edge_list_text("0 1\n")


def test_edge_list_rejects_malformed_line():
    with pytest.raises(ConfigurationError, match="line 2"):
        CommGraph.from_edge_list_text("1 2\n1 2 3\n")


def test_self_loop_rejected():
    with pytest.raises(ConfigurationError, match="self-loop"):
        CommGraph(3, [(0, 0)])


# ---------------------------------------------------------------------------
# drop models


def test_no_delay_never_drops():
    assert NoDelay().drop_mask(np.random.default_rng(0), (10,)) is None


def test_bernoulli_drop_rate_matches_probability():
    model = BernoulliDrops(p=0.3, declared_delta=5)
    mask = model.drop_mask(np.random.default_rng(12), (20_000,))
    rate = float(mask.mean())
    sigma = np.sqrt(0.3 * 0.7 / 20_000)
    assert abs(rate - 0.3) < 4 * sigma


def test_bernoulli_zero_probability_is_no_drop():
    assert BernoulliDrops(p=0.0, declared_delta=2).drop_mask(
        np.random.default_rng(0), (5,)
    ) is None


def test_bernoulli_rejects_bad_probability():
    with pytest.raises(ConfigurationError):
        BernoulliDrops(p=1.0, declared_delta=0)


# ---------------------------------------------------------------------------
# dependence compatibility


def test_star_with_private_center_is_incompatible():
    # Leaves depend on each other but the relaying center tracks only
    # itself, so leaf columns cannot cross it.
    g = CommGraph(3, [(0, 1), (1, 2)])
    affected = [{0, 2}, {1}, {2}]
    report = check_compatibility(g, affected)
    assert not report.compatible
    assert (1, 2, 0) in report.witnesses


def test_path_with_tracking_center_is_compatible():
    g = CommGraph(3, [(0, 1), (1, 2)])
    affected = [{0}, {0, 1, 2}, {2}]
    report = check_compatibility(g, affected)
    assert report.compatible
    assert report.witnesses == []


def test_full_dependence_always_compatible():
    g = CommGraph.random_connected(10, seed=5)
    affected = [set(range(10)) for _ in range(10)]
    assert check_compatibility(g, affected).compatible


def test_chained_groups_on_ordered_path_compatible():
    # Three groups of two agents on a path, each group overlapping the
    # next: shortest paths only cross agents tracking the column.
    g = CommGraph.path(6)
    groups = [0, 0, 1, 1, 2, 2]
    affected = []
    for i in range(6):
        gi = groups[i]
        affected.append({j for j in range(6) if abs(groups[j] - gi) <= 1})
    assert check_compatibility(g, affected).compatible


def test_affected_must_contain_self():
    g = CommGraph.path(2)
    with pytest.raises(ConfigurationError):
        check_compatibility(g, [{1}, {1}])
