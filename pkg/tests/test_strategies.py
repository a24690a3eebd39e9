"""
onbuy Strategy Tests
====================

Tests for the purchase engine helpers, the targets, the AOM adversaries,
the structure registry and end-to-end strategy runs.
"""

import math

import numpy as np
import pytest

from onbuy.graph_kernel import validate
from onbuy.purchase_core import StrategyOutcome, compute_ck
from onbuy.stream import (
    ABSTRACT,
    BIPARTITE,
    DIRECTED,
    UNDIRECTED,
    InvalidArgumentError,
    OrderModel,
    PurchaserOrderSession,
    RngHandle,
    aom_session,
    make_universe,
    rom_session,
)
from onbuy.strategies import (
    STRUCTURES,
    CompleteGraphMatchingStrategy,
    EndpointsLastAdversary,
    HamiltonStrategy,
    PathsLen2Strategy,
    ShortestPathStrategy,
    SpanningTreeStrategy,
    TriangleStrategy,
    VertexSweepAdversary,
    adversary_shortest_path,
    adversary_triangle,
    check_order,
    evaluate_buytree_cost,
    get_structure,
    giant_fraction,
    make_adversary,
    must_take_guard,
    open_session,
    purchased_graph,
    run_structure,
    threshold_table,
    validate_outcome,
)
from onbuy.strategies.base import grouped_rank, phase_of, split_points, window_cuts
from onbuy.strategies.clique import recursion_fits, star_sizes
from onbuy.strategies.path import layer_caps, modelled_cost
from onbuy.strategies.targets import SpanningTreeTarget
from onbuy.strategies.tree import solve_giant_x
from onbuy.strategies.triangle import wedge_plan


def run_case(structure, n, order, params=None, seed=0):
    """Run one structure end to end; returns (outcome, valid)."""
    params = params or {}
    session = open_session(structure, n, OrderModel.parse(order), RngHandle(seed, 1))
    outcome = run_structure(structure, n, session, params)
    return outcome, validate_outcome(structure, n, outcome, params)


class TestEngineHelpers:
    """Test suite for block and phase helpers."""

    def test_grouped_rank(self):
        """Test ranks among earlier items with the same key."""
        ranks = grouped_rank(np.array([3, 1, 3, 3, 1]))
        assert ranks.tolist() == [0, 0, 1, 2, 1]
        assert grouped_rank(np.array([])).size == 0

    def test_split_points(self):
        """Test equal classes with the remainder in the last one."""
        assert split_points(10, 3) == (3, 6, 10)
        assert window_cuts(5, 15, 2) == (10, 15)

    def test_phase_of(self):
        """Test class lookup for 1-based positions."""
        phases = phase_of((3, 6, 10), np.array([1, 3, 4, 6, 7, 10]))
        assert phases.tolist() == [0, 0, 1, 1, 2, 2]

    def test_threshold_table_cached(self):
        """Test that tables are shared and cover the request."""
        table = threshold_table(2, 100)
        assert table is threshold_table(2, 100)
        assert table.n_max >= 100
        assert table.k_max == 2


class TestTargets:
    """Test suite for witness-backed targets and the must-take guard."""

    def test_spanning_tree_guard(self):
        """Test that only the last possible tree edges must be taken."""
        universe = make_universe(UNDIRECTED, 3)
        target = SpanningTreeTarget(universe)
        witness = set(target.witness_items().tolist())
        spare = ({0, 1, 2} - witness).pop()
        assert not must_take_guard(target, spare)
        assert not target.available[spare]
        for item in sorted(witness):
            assert must_take_guard(target, item)
            assert target.available[item]

    def test_witness_repair(self):
        """Test that rejecting a witness edge moves the witness."""
        universe = make_universe(UNDIRECTED, 4)
        target = SpanningTreeTarget(universe)
        item = int(target.witness_items()[0])
        assert not must_take_guard(target, item)
        assert not target.in_witness[item]
        u, v = universe.decode(target.witness_items())
        assert validate("spanning-tree", list(zip(u.tolist(), v.tolist())), 4)

    def test_completion(self):
        """Test that buying a spanning tree completes the target."""
        universe = make_universe(UNDIRECTED, 3)
        target = SpanningTreeTarget(universe)
        assert not target.accept(universe.encode(0, 1))
        assert target.accept(universe.encode(1, 2))
        assert sorted(target.structure()) == [(0, 1), (1, 2)]


class TestAdversaries:
    """Test suite for the AOM adversaries."""

    def test_endpoints_last(self):
        """Test that edges at vertices 0 and n-1 come after all others."""
        universe = make_universe(UNDIRECTED, 6)
        session = aom_session(universe, EndpointsLastAdversary(), RngHandle(3))
        first, _, _ = session.next_block(4096)
        session.record(first, np.zeros(first.size, dtype=bool))
        u, v = universe.decode(first)
        assert first.size == 6
        assert np.all((u >= 1) & (v <= 4))

        second, _, _ = session.next_block(4096)
        session.record(second, np.zeros(second.size, dtype=bool))
        u, v = universe.decode(second)
        assert second.size == 9
        assert np.all((u == 0) | (v == 5))
        assert session.exhausted

    def test_endpoints_last_fixed_order(self):
        """Test that the presented order is id order for every seed."""
        universe = make_universe(UNDIRECTED, 6)
        orders = []
        for seed in (0, 3, 17):
            session = aom_session(universe, EndpointsLastAdversary(), RngHandle(seed))
            order = []
            while not session.exhausted:
                ids, _, _ = session.next_block(4096)
                session.record(ids, np.zeros(ids.size, dtype=bool))
                order.extend(ids.tolist())
            orders.append(order)
        assert orders[0] == orders[1] == orders[2]
        inner, outer = orders[0][:6], orders[0][6:]
        assert inner == sorted(inner)
        assert outer == sorted(outer)

    def test_vertex_sweep(self):
        """Test star, then the edges inside the bought neighbourhood."""
        universe = make_universe(UNDIRECTED, 5)
        session = aom_session(universe, VertexSweepAdversary(), RngHandle(0))
        star, _, _ = session.next_block(4096)
        assert star.tolist() == universe.encode([0, 0, 0, 0], [1, 2, 3, 4]).tolist()
        session.record(star, [True, True, False, False])

        inside, _, _ = session.next_block(4096)
        assert inside.tolist() == [int(universe.encode(1, 2))]
        session.record(inside, [False])

        nxt, _, _ = session.next_block(4096)
        assert nxt.tolist() == universe.encode([1, 1], [3, 4]).tolist()

    def test_vertex_sweep_presents_everything(self):
        """Test that the sweep never stops before the stream ends."""
        universe = make_universe(UNDIRECTED, 7)
        session = aom_session(universe, VertexSweepAdversary(), RngHandle(1))
        seen = 0
        while not session.exhausted:
            ids, costs, _ = session.next_block(4096)
            session.record(ids, costs < 0.5)
            seen += ids.size
        assert seen == universe.size

    def test_factories(self):
        """Test adversary construction and argument checks."""
        assert isinstance(adversary_shortest_path(5), EndpointsLastAdversary)
        assert isinstance(adversary_triangle(5), VertexSweepAdversary)
        assert make_adversary("identity").name == "identity"
        with pytest.raises(InvalidArgumentError, match="n must be >= 2"):
            adversary_shortest_path(1)
        with pytest.raises(InvalidArgumentError, match="n must be >= 3"):
            adversary_triangle(2)
        with pytest.raises(InvalidArgumentError, match="Unknown adversary"):
            make_adversary("chaos")
        assert adversary_triangle.__doc__
        assert adversary_shortest_path.__doc__


class TestRegistry:
    """Test suite for the structure registry."""

    def test_known_structures(self):
        """Test that every structure is registered."""
        assert sorted(STRUCTURES) == [
            "arborescence",
            "bipartite-pm",
            "clique",
            "hamilton",
            "hamilton-directed",
            "k-purchase",
            "path",
            "paths-len2",
            "pm",
            "spanning-tree",
            "triangle",
        ]
        assert get_structure("path").rom_only
        assert not get_structure("hamilton").rom_only

    def test_unknown_structure(self):
        """Test lookup errors."""
        with pytest.raises(InvalidArgumentError, match="Unknown structure"):
            get_structure("steiner-tree")

    @pytest.mark.parametrize(
        ("structure", "order"),
        [
            ("path", "rom"),
            ("path", "pom"),
            ("path", "aom:endpoints-last"),
            ("triangle", "aom:vertex-sweep"),
            ("hamilton", "aom:identity"),
            ("k-purchase", "aom:identity"),
            ("bipartite-pm", "aom:identity"),
        ],
    )
    def test_allowed_orders(self, structure, order):
        """Test supported structure/order pairs."""
        assert check_order(structure, OrderModel.parse(order)).name == structure

    @pytest.mark.parametrize(
        ("structure", "order", "message"),
        [
            ("path", "aom:vertex-sweep", "rom or pom only"),
            ("arborescence", "aom:identity", "rom or pom only"),
            ("clique", "aom:identity", "rom or pom only"),
            ("k-purchase", "aom:endpoints-last", "does not serve"),
            ("hamilton", "aom:chaos", "Unknown adversary"),
        ],
    )
    def test_rejected_orders(self, structure, order, message):
        """Test unsupported pairs."""
        with pytest.raises(InvalidArgumentError, match=message):
            check_order(structure, OrderModel.parse(order))

    def test_open_session(self):
        """Test that sessions match the structure universe and order."""
        session = open_session("k-purchase", 12, OrderModel.parse("pom"), RngHandle(0))
        assert isinstance(session, PurchaserOrderSession)
        assert session.universe.kind == ABSTRACT
        assert session.universe.size == 12

    def test_k_purchase_params(self):
        """Test k-purchase parameter checks."""
        session = open_session("k-purchase", 5, OrderModel.parse("rom"), RngHandle(0))
        with pytest.raises(InvalidArgumentError, match="k must lie"):
            run_structure("k-purchase", 5, session, {"k": 6})
        with pytest.raises(InvalidArgumentError, match="Unknown parameters"):
            run_structure("k-purchase", 5, session, {"q": 1})

    def test_validate_k_purchase(self):
        """Test that k-purchase outcomes need k distinct items."""
        outcome = StrategyOutcome(purchased=[(1, 0.1), (4, 0.2), (2, 0.05)])
        assert validate_outcome("k-purchase", 10, outcome, {"k": 3})
        assert not validate_outcome("k-purchase", 10, outcome, {"k": 2})

    def test_validate_needs_bought_edges(self):
        """Test that a claimed structure must be covered by purchased edges."""
        universe = make_universe(UNDIRECTED, 4)
        path = [(0, 1), (1, 2), (2, 3)]
        ids = [int(universe.encode(u, v)) for u, v in path]

        partial = StrategyOutcome(purchased=[(ids[0], 0.1)], structure=list(path))
        assert not validate_outcome("spanning-tree", 4, partial)

        full = StrategyOutcome(
            purchased=[(i, 0.1) for i in ids], structure=list(path)
        )
        assert validate_outcome("spanning-tree", 4, full)

    def test_purchased_graph(self):
        """Test the graph of purchases of a real spanning-tree run."""
        outcome, valid = run_case("spanning-tree", 40, "rom", seed=5)
        graph = purchased_graph("spanning-tree", 40, outcome)
        assert valid
        assert len(graph.edges) == len(outcome.purchased)
        assert graph.component_count == 1
        assert graph.same_component(0, 39)
        assert graph.total_cost == pytest.approx(outcome.total_cost)
        for u, v in outcome.structure:
            assert graph.has_edge(v, u)

    def test_purchased_graph_bipartite(self):
        """Test that the two sides of K_n,n stay apart."""
        universe = make_universe(BIPARTITE, 3)
        outcome = StrategyOutcome(purchased=[(int(universe.encode(1, 1)), 0.3)])
        graph = purchased_graph("bipartite-pm", 3, outcome)
        assert graph.n == 6
        assert graph.has_edge(1, 4)
        assert not graph.has_edge(1, 1)
        assert not graph.same_component(1, 2)
        with pytest.raises(InvalidArgumentError, match="abstract items"):
            purchased_graph("k-purchase", 3, outcome)

    def test_validate_directed_arcs(self):
        """Test that arcs are matched with their direction."""
        universe = make_universe(DIRECTED, 3)
        cycle = [(0, 1), (1, 2), (2, 0)]
        forward = [int(universe.encode(u, v)) for u, v in cycle]
        backward = [int(universe.encode(v, u)) for u, v in cycle]

        bought = StrategyOutcome(
            purchased=[(i, 0.2) for i in forward], structure=list(cycle)
        )
        assert validate_outcome("hamilton-directed", 3, bought)
        reversed_only = StrategyOutcome(
            purchased=[(i, 0.2) for i in backward], structure=list(cycle)
        )
        assert not validate_outcome("hamilton-directed", 3, reversed_only)


class TestStrategyParameters:
    """Test suite for strategy argument checks."""

    def test_unknown_parameter(self):
        """Test that unknown overrides are rejected."""
        with pytest.raises(InvalidArgumentError, match="Unknown parameters"):
            SpanningTreeStrategy(10, gamma=2.0)

    def test_tree_parameters(self):
        """Test the alpha range and the alpha*beta > 1 condition."""
        with pytest.raises(InvalidArgumentError, match="alpha must lie"):
            SpanningTreeStrategy(10, alpha=1.5)
        with pytest.raises(InvalidArgumentError, match="alpha \\* beta"):
            SpanningTreeStrategy(10, alpha=0.5, beta=1.5)

    def test_minimum_size(self):
        """Test per-strategy minimum sizes."""
        with pytest.raises(InvalidArgumentError, match="needs n >= 10"):
            TriangleStrategy(5)

    def test_paths_len2_bound(self):
        """Test that ell is capped at max(1, n/10)."""
        with pytest.raises(InvalidArgumentError, match="ell must be <="):
            PathsLen2Strategy(50, ell=20)

    def test_odd_matching(self):
        """Test that K_n perfect matchings need even n."""
        with pytest.raises(InvalidArgumentError, match="n must be even"):
            CompleteGraphMatchingStrategy(7)

    def test_hamilton_choices(self):
        """Test that the k-out parameter must be positive."""
        with pytest.raises(InvalidArgumentError, match="m must be >= 1"):
            HamiltonStrategy(10, m=0)

    def test_path_literal_plan(self):
        """Test p = n^(-1+alpha/layers) and caps over q = p/(3 layers)."""
        strategy = ShortestPathStrategy(1000, plan="literal")
        layers = strategy.layers
        assert strategy.p == pytest.approx(1000 ** (-1.0 + (2.0 / 3.0) / layers))
        assert strategy.caps == layer_caps(
            1000, strategy.p, layers, strategy.eps, spread=3.0 * layers
        )
        assert ShortestPathStrategy(1000).plan == "model"
        with pytest.raises(InvalidArgumentError, match="plan must be one of"):
            ShortestPathStrategy(1000, plan="greedy")

    def test_path_literal_run(self):
        """Test that the literal plan still delivers a valid path."""
        outcome, valid = run_case("path", 60, "rom", {"plan": "literal"}, seed=4)
        assert valid
        assert outcome.success
        assert outcome.extras["p"] == pytest.approx(60 ** (-1.0 + (2.0 / 3.0) / 2))

    def test_universe_mismatch(self):
        """Test that a strategy refuses a session of the wrong size."""
        session = rom_session(make_universe(UNDIRECTED, 12), RngHandle(0))
        with pytest.raises(InvalidArgumentError, match="universe with n=10"):
            SpanningTreeStrategy(10).run(session)


class TestAnalytics:
    """Test suite for the closed-form helpers of the strategies."""

    def test_giant_root(self):
        """Test x e^-x = gamma e^-gamma at gamma = 2.415."""
        x = solve_giant_x(2.415)
        assert x == pytest.approx(0.2877, abs=1e-3)
        assert x * math.exp(-x) == pytest.approx(2.415 * math.exp(-2.415))

    def test_giant_fraction(self):
        """Test the giant share below and above the threshold."""
        assert giant_fraction(0.5) == 0.0
        assert 0.0 < giant_fraction(2.415) < 1.0

    def test_buytree_cost(self):
        """Test the analytic two-step cost at the default parameters."""
        value = evaluate_buytree_cost(0.69, 3.5)
        assert 1.2020569 < value < 2.31

    def test_buytree_needs_giant(self):
        """Test that alpha*beta must exceed 1."""
        with pytest.raises(InvalidArgumentError, match="gamma must be > 1"):
            evaluate_buytree_cost(0.5, 1.5)

    def test_wedge_plan(self):
        """Test the default wedge count and red matching size."""
        ell, k = wedge_plan(2000)
        assert ell == round(0.75 ** (3.0 / 7.0) * 2000 ** (4.0 / 7.0))
        assert 1 <= k <= 1000
        assert wedge_plan(2000, ell=5, k=7) == (5, 7)

    def test_clique_recursion_floor(self):
        """Test when the K_4 star recursion has room."""
        assert not recursion_fits(30, 4)
        assert recursion_fits(200, 4)
        assert len(star_sizes(200, 5)) == 2


class TestStrategyRuns:
    """Test suite for end-to-end runs through the registry."""

    @pytest.mark.parametrize(
        ("structure", "n", "order", "params"),
        [
            ("k-purchase", 50, "rom", {"k": 3}),
            ("k-purchase", 50, "aom:identity", {"k": 2}),
            ("path", 40, "rom", {}),
            ("path", 40, "pom", {}),
            ("path", 30, "aom:endpoints-last", {}),
            ("paths-len2", 60, "rom", {}),
            ("triangle", 30, "rom", {}),
            ("triangle", 30, "aom:vertex-sweep", {}),
            ("clique", 30, "rom", {"r": 4}),
            ("clique", 20, "rom", {"r": 3}),
            ("spanning-tree", 50, "rom", {}),
            ("spanning-tree", 20, "aom:identity", {}),
            ("arborescence", 30, "pom", {}),
            ("bipartite-pm", 16, "aom:identity", {}),
            ("pm", 16, "rom", {}),
            ("hamilton", 20, "rom", {}),
            ("hamilton-directed", 16, "rom", {}),
        ],
    )
    def test_valid_structure(self, structure, n, order, params):
        """Test that every run delivers a valid structure."""
        outcome, valid = run_case(structure, n, order, params)
        assert outcome.success
        assert valid
        assert outcome.total_cost == pytest.approx(
            math.fsum(c for _, c in outcome.purchased)
        )

    def test_reproducible(self):
        """Test that equal seeds give equal purchases."""
        first, _ = run_case("triangle", 40, "rom", seed=9)
        second, _ = run_case("triangle", 40, "rom", seed=9)
        assert first.purchased == second.purchased

    def test_triangle_extras(self):
        """Test the wedge bookkeeping attached to triangle outcomes."""
        outcome, _ = run_case("triangle", 60, "rom", seed=2)
        ell, k = wedge_plan(60)
        assert outcome.extras["ell"] == ell
        assert outcome.extras["k"] == k
        assert outcome.extras["closed"] in (0.0, 1.0)

    def test_unknown_strategy_parameter(self):
        """Test that overrides reach the strategy checks."""
        with pytest.raises(InvalidArgumentError, match="Unknown parameters"):
            run_case("hamilton", 12, "rom", {"alpha": 0.5})

    @pytest.mark.slow
    def test_spanning_tree_cost(self):
        """Test that the two-step cost stays near its analytic limit."""
        costs = [
            run_case("spanning-tree", 300, "rom", seed=s)[0].total_cost
            for s in range(20)
        ]
        assert np.mean(costs) < 3.0

    @pytest.mark.slow
    def test_path_cost(self):
        """Test that the path cost follows its plan and falls with n."""

        def mean_cost(n):
            return np.mean(
                [run_case("path", n, "rom", seed=s)[0].total_cost for s in range(20)]
            )

        strategy = ShortestPathStrategy(400)
        planned = modelled_cost(400, strategy.p, strategy.layers, strategy.eps)
        large = mean_cost(400)
        assert large < 2.0 * planned
        assert large < mean_cost(100)

    @pytest.mark.slow
    def test_triangle_cost(self):
        """Test the triangle cost against wedge plus closing cost."""
        n = 300
        ell, _ = wedge_plan(n)
        costs = [run_case("triangle", n, "rom", seed=s)[0].total_cost for s in range(20)]
        assert np.mean(costs) < 3.0 * (6.0 * (ell / n) ** (4.0 / 3.0) + 6.0 / ell)
        assert np.mean(costs) * n ** (4.0 / 7.0) < 40.0

    @pytest.mark.slow
    def test_hamilton_cost(self):
        """Test that the 10-out Hamilton cost sits around 2 m^2 = 200."""
        m = HamiltonStrategy.defaults["m"]
        costs = []
        for s in range(4):
            outcome, valid = run_case("hamilton", 100, "rom", seed=s)
            assert valid
            costs.append(outcome.total_cost)
        assert np.mean(costs) > compute_ck(2).c_k(2)
        assert 0.6 * 2 * m * m <= np.mean(costs) <= 1.2 * 2 * m * m


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
