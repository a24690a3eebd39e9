"""
Purchasing strategies, their targets and the AOM adversaries.
"""

from .adversaries import (
    ADVERSARIES,
    EndpointsLastAdversary,
    IdentityAdversary,
    VertexSweepAdversary,
    adversary_shortest_path,
    adversary_triangle,
    make_adversary,
)
from .arborescence import ArborescenceStrategy, buy_arborescence_rom
from .base import PurchaseRun, Strategy, threshold_table
from .clique import CliqueStrategy, buy_clique_rom
from .hamilton import (
    DirectedHamiltonStrategy,
    HamiltonStrategy,
    buy_hamilton,
    buy_hamilton_directed,
)
from .matching import (
    BipartiteMatchingStrategy,
    CompleteGraphMatchingStrategy,
    buy_bipartite_pm,
    buy_pm_complete,
)
from .path import ShortestPathStrategy, buy_shortest_path_rom
from .registry import (
    STRUCTURES,
    StructureInfo,
    check_order,
    get_structure,
    open_session,
    purchased_graph,
    run_structure,
    validate_outcome,
)
from .targets import must_take_guard
from .tree import (
    SpanningTreeStrategy,
    TourTreeStrategy,
    buy_spanning_tree,
    evaluate_buytree_cost,
    giant_fraction,
)
from .triangle import (
    PathsLen2Strategy,
    TriangleStrategy,
    buy_paths_len2_rom,
    buy_triangle_rom,
)

__all__ = [
    "ADVERSARIES",
    "STRUCTURES",
    "ArborescenceStrategy",
    "BipartiteMatchingStrategy",
    "CliqueStrategy",
    "CompleteGraphMatchingStrategy",
    "DirectedHamiltonStrategy",
    "EndpointsLastAdversary",
    "HamiltonStrategy",
    "IdentityAdversary",
    "PathsLen2Strategy",
    "PurchaseRun",
    "ShortestPathStrategy",
    "SpanningTreeStrategy",
    "Strategy",
    "StructureInfo",
    "TourTreeStrategy",
    "TriangleStrategy",
    "VertexSweepAdversary",
    "adversary_shortest_path",
    "adversary_triangle",
    "buy_arborescence_rom",
    "buy_bipartite_pm",
    "buy_clique_rom",
    "buy_hamilton",
    "buy_hamilton_directed",
    "buy_paths_len2_rom",
    "buy_pm_complete",
    "buy_shortest_path_rom",
    "buy_spanning_tree",
    "buy_triangle_rom",
    "check_order",
    "evaluate_buytree_cost",
    "get_structure",
    "giant_fraction",
    "make_adversary",
    "must_take_guard",
    "open_session",
    "purchased_graph",
    "run_structure",
    "threshold_table",
    "validate_outcome",
]
