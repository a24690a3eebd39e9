"""
onbuy Graph Kernel Tests
========================

Tests for the union-find forest, the purchased-graph bookkeeping, the
offline matching, Hamilton and clique searches and the structure validators.
"""

import numpy as np
import pytest

from onbuy.graph_kernel import (
    DisjointSet,
    PurchasedGraph,
    decompose_functional,
    find_clique,
    find_hamilton_cycle,
    has_augmenting_path,
    layered_search,
    max_bipartite_matching,
    trace_path,
    validate,
)


def petersen():
    """Adjacency sets of the Petersen graph, which has no Hamilton cycle."""
    edges = [(i, (i + 1) % 5) for i in range(5)]
    edges += [(i, i + 5) for i in range(5)]
    edges += [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    adj = [set() for _ in range(10)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


class TestDisjointSet:
    """Test suite for the union-find forest."""

    def test_union_and_find(self):
        """Test merging, counting and component sizes."""
        ds = DisjointSet(6)
        assert ds.union(0, 1)
        assert ds.union(2, 3)
        assert ds.union(1, 3)
        assert not ds.union(0, 2)
        assert ds.connected(0, 3)
        assert not ds.connected(0, 4)
        assert ds.count == 3
        assert ds.component_size(2) == 4

    def test_labels(self):
        """Test that labels agree with find."""
        ds = DisjointSet(5)
        ds.union(4, 3)
        ds.union(3, 2)
        labels = ds.labels()
        assert labels[2] == labels[3] == labels[4]
        assert labels[0] != labels[1]


class TestPurchasedGraph:
    """Test suite for the incremental purchased graph."""

    def test_add_edges(self):
        """Test adjacency, components and the running cost."""
        graph = PurchasedGraph(4)
        graph.add_edge(0, 1, 0.1).add_edge(1, 2, 0.2)
        assert graph.same_component(0, 2)
        assert not graph.same_component(0, 3)
        assert graph.has_edge(1, 0)
        assert graph.degree(1) == 2
        assert graph.component_count == 2
        assert graph.total_cost == pytest.approx(0.3)
        assert graph.edge_list() == [(0, 1), (1, 2)]

    def test_directed(self):
        """Test that arcs are one-way."""
        graph = PurchasedGraph(3, directed=True)
        graph.add_edge(0, 1, 0.5)
        assert graph.has_edge(0, 1)
        assert not graph.has_edge(1, 0)
        assert graph.in_adj[1] == {0}

    def test_compensated_sum(self):
        """Test that many tiny costs do not drift."""
        graph = PurchasedGraph(2)
        graph.add_edge(0, 1, 1.0)
        for _ in range(10000):
            graph.add_edge(0, 1, 1e-17)
        # a naive running sum stays at exactly 1.0
        assert abs(graph.total_cost - (1.0 + 1e-13)) < 1e-15

    def test_self_loop(self):
        """Test that self-loops are rejected."""
        with pytest.raises(ValueError, match="Self-loop"):
            PurchasedGraph(3).add_edge(1, 1, 0.5)


class TestBipartiteMatching:
    """Test suite for Hopcroft-Karp matching."""

    def test_perfect(self):
        """Test a graph whose perfect matching needs an augmenting path."""
        adj = [[0, 1], [0], [1, 2]]
        matching = max_bipartite_matching(adj, 3)
        assert matching.perfect
        assert validate(
            "perfect-matching", matching.pairs(), 3, bipartite=True
        )
        assert not has_augmenting_path(adj, matching)

    def test_deficient(self):
        """Test a graph with no perfect matching."""
        adj = [[0], [0], [2]]
        matching = max_bipartite_matching(adj, 3)
        assert matching.size == 2
        assert not matching.perfect
        assert not has_augmenting_path(adj, matching)

    def test_matrix_input(self):
        """Test boolean-matrix adjacency."""
        mat = np.eye(4, dtype=bool)[::-1]
        matching = max_bipartite_matching(mat, 4)
        assert matching.pairs() == [(0, 3), (1, 2), (2, 1), (3, 0)]

    def test_random_graphs_are_maximum(self):
        """Test maximality on random sparse graphs."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            mat = rng.random((12, 12)) < 0.2
            matching = max_bipartite_matching(mat, 12)
            assert not has_augmenting_path(mat, matching)


class TestHamiltonSearch:
    """Test suite for the backtracking Hamilton-cycle search."""

    def test_complete_graph(self):
        """Test that K_6 has a Hamilton cycle."""
        adj = [set(range(6)) - {v} for v in range(6)]
        result = find_hamilton_cycle(adj, 6)
        assert result.found
        cycle = result.cycle
        edges = list(zip(cycle, cycle[1:] + cycle[:1]))
        assert validate("hamilton-cycle", edges, 6)

    def test_petersen(self):
        """Test that the Petersen graph is proven non-Hamiltonian."""
        result = find_hamilton_cycle(petersen(), 10)
        assert not result.found
        assert result.status == "absent"

    def test_directed_cycle(self):
        """Test a directed triangle and a digraph with no arc into vertex 0."""
        result = find_hamilton_cycle([{1}, {2}, {0}], 3, directed=True)
        assert result.found
        absent = find_hamilton_cycle([{1}, {2}, {1}], 3, directed=True)
        assert absent.status == "absent"

    def test_low_degree_pruning(self):
        """Test that a pendant vertex rules out a cycle at once."""
        adj = [{1}, {0, 2, 3}, {1, 3}, {1, 2}]
        result = find_hamilton_cycle(adj, 4)
        assert result.status == "absent"
        assert result.nodes == 0


class TestFunctionalDigraph:
    """Test suite for mapping-digraph decomposition."""

    def test_cycle_tree_and_root(self):
        """Test a 3-cycle with a tree vertex and a separate root."""
        fd = decompose_functional([1, 2, 0, 0, -1])
        assert fd.component_count == 2
        assert fd.cycle_vertex_count == 3
        assert fd.tree_vertex_count == 2
        assert fd.roots == [4]
        assert sorted(fd.cycles[0]) == [0, 1, 2]
        assert fd.tree_edges() == [(3, 0)]
        assert fd.component[3] == fd.component[0]

    def test_fixed_point(self):
        """Test that f(v) = v is rejected."""
        with pytest.raises(ValueError, match="f\\(v\\) != v"):
            decompose_functional([0, 0])


class TestValidate:
    """Test suite for the structure validators."""

    @pytest.mark.parametrize(
        ("kind", "edges", "n", "params", "expected"),
        [
            ("spanning-tree", [(0, 1), (1, 2), (2, 3)], 4, {}, True),
            ("spanning-tree", [(0, 1), (1, 2), (0, 2)], 4, {}, False),
            ("arborescence", [(1, 0), (2, 0), (3, 1)], 4, {"root": 0}, True),
            ("arborescence", [(1, 0), (2, 0), (3, 1)], 4, {"root": 1}, False),
            ("arborescence", [(0, 1), (1, 0), (2, 0)], 4, {}, False),
            ("perfect-matching", [(0, 1), (2, 3)], 4, {}, True),
            ("perfect-matching", [(0, 1), (1, 2)], 4, {}, False),
            ("perfect-matching", [(0, 1), (1, 0)], 2, {"bipartite": True}, True),
            ("hamilton-cycle", [(0, 1), (1, 2), (2, 3), (3, 0)], 4, {}, True),
            (
                "hamilton-cycle",
                [(0, 1), (1, 0), (2, 3), (3, 2)],
                4,
                {"directed": True},
                False,
            ),
            ("hamilton-cycle", [(0, 2), (2, 1), (1, 0)], 3, {"directed": True}, True),
            ("triangle", [(0, 1), (1, 2), (0, 2)], 5, {}, True),
            ("triangle", [(0, 1), (1, 2), (2, 3)], 5, {}, False),
            (
                "clique",
                [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
                6,
                {"r": 4},
                True,
            ),
            ("path", [(0, 2), (2, 4)], 5, {}, True),
            ("path", [(0, 2), (3, 4)], 5, {}, False),
            ("paths-len2", [(0, 1), (1, 2)], 5, {"ell": 1}, True),
            ("paths-len2", [(0, 1), (1, 2)], 5, {"ell": 2}, False),
            ("paths-len2", [(0, 1), (1, 2), (1, 3)], 5, {"ell": 3}, True),
        ],
    )
    def test_structures(self, kind, edges, n, params, expected):
        """Test accepted and rejected instances of every kind."""
        assert validate(kind, edges, n, **params) is expected

    def test_duplicates_rejected(self):
        """Test that repeated edges never validate."""
        assert not validate("path", [(0, 1), (0, 1)], 2)

    def test_unknown_kind(self):
        """Test that unknown kinds raise."""
        with pytest.raises(ValueError, match="Unknown structure kind"):
            validate("star", [(0, 1)], 2)


class TestSearches:
    """Test suite for the availability-graph searches."""

    def test_layered_search_prefers_free_edges(self):
        """Test that preferred edges are used before paid ones."""
        available = np.ones((4, 4), dtype=bool)
        np.fill_diagonal(available, False)
        preferred = np.zeros((4, 4), dtype=bool)
        for u, v in [(0, 1), (1, 2)]:
            preferred[u, v] = preferred[v, u] = True
        parent = layered_search(available, preferred, [0], stop_at=3)
        assert trace_path(parent, 2) == [0, 1, 2]
        assert len(trace_path(parent, 3)) == 2

    def test_unreachable(self):
        """Test that unreached vertices give an empty path."""
        available = np.zeros((3, 3), dtype=bool)
        parent = layered_search(available, None, [0])
        assert parent.tolist() == [-1, -2, -2]
        assert trace_path(parent, 2) == []

    def test_find_clique(self):
        """Test finding a K_4 planted in a sparse graph."""
        available = np.zeros((8, 8), dtype=bool)
        for u in (2, 4, 5, 7):
            for v in (2, 4, 5, 7):
                available[u, v] = u != v
        available[0, 1] = available[1, 0] = True
        clique, exhausted = find_clique(available, 4)
        assert exhausted
        assert sorted(clique) == [2, 4, 5, 7]

    def test_no_triangle_in_bipartite(self):
        """Test that a complete bipartite graph has no triangle."""
        available = np.zeros((6, 6), dtype=bool)
        available[:3, 3:] = True
        available[3:, :3] = True
        clique, exhausted = find_clique(available, 3)
        assert clique is None
        assert exhausted


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
