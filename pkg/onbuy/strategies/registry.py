"""
Structure registry: universes, allowed order models, runners and validators.
"""

from dataclasses import dataclass, field
import logging
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from ..graph_kernel import PurchasedGraph, validate
from ..purchase_core import StrategyOutcome, run_k_purchase
from ..stream import (
    ABSTRACT,
    BIPARTITE,
    DIRECTED,
    UNDIRECTED,
    InspectionSession,
    InvalidArgumentError,
    OrderModel,
    RngHandle,
    aom_session,
    make_universe,
    pom_session,
    rom_session,
)
from .adversaries import ADVERSARIES, make_adversary
from .arborescence import buy_arborescence_rom
from .base import threshold_table
from .clique import buy_clique_rom
from .hamilton import buy_hamilton, buy_hamilton_directed
from .matching import buy_bipartite_pm, buy_pm_complete
from .path import buy_shortest_path_rom
from .tree import buy_spanning_tree
from .triangle import buy_paths_len2_rom, buy_triangle_rom

logger = logging.getLogger("onbuy.Registry")

ANY_ADVERSARY = "*"

Runner = Callable[[int, InspectionSession, Dict[str, Any]], StrategyOutcome]


def _k_purchase(n: int, session: InspectionSession, params: Dict[str, Any]) -> StrategyOutcome:
    unknown = sorted(set(params) - {"k"})
    if unknown:
        raise InvalidArgumentError(
            f"Unknown parameters for k-purchase: {unknown}; known: ['k']"
        )
    k = int(params.get("k", 1))
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must lie in [1, {n}], got {k}")
    return run_k_purchase(session, k, threshold_table(k, n))


def _paths_len2(n, session, params):
    rest = dict(params)
    return buy_paths_len2_rom(n, rest.pop("ell", None), session, **rest)


def _clique(n, session, params):
    rest = dict(params)
    return buy_clique_rom(n, int(rest.pop("r", 4)), session, **rest)


def _plain(runner: Callable[..., StrategyOutcome]) -> Runner:
    def run(n, session, params):
        return runner(n, session, **params)

    return run


@dataclass(frozen=True)
class StructureInfo:
    """
    One purchasable structure.

    ``adversaries`` lists the AOM adversaries the structure accepts:
    ``("*",)`` for any registered one, an empty tuple for none.
    """

    name: str
    universe_kind: str
    runner: Runner
    adversaries: Tuple[str, ...] = (ANY_ADVERSARY,)
    validate_kind: Optional[str] = None
    validate_params: Dict[str, Any] = field(default_factory=dict)

    @property
    def rom_only(self) -> bool:
        return ANY_ADVERSARY not in self.adversaries


STRUCTURES: Dict[str, StructureInfo] = {
    info.name: info
    for info in (
        StructureInfo("k-purchase", ABSTRACT, _k_purchase),
        StructureInfo(
            "path",
            UNDIRECTED,
            _plain(buy_shortest_path_rom),
            ("endpoints-last",),
            "path",
        ),
        StructureInfo("paths-len2", UNDIRECTED, _paths_len2, (), "paths-len2"),
        StructureInfo(
            "triangle",
            UNDIRECTED,
            _plain(buy_triangle_rom),
            ("vertex-sweep",),
            "triangle",
        ),
        StructureInfo("clique", UNDIRECTED, _clique, (), "clique"),
        StructureInfo(
            "spanning-tree",
            UNDIRECTED,
            _plain(buy_spanning_tree),
            validate_kind="spanning-tree",
        ),
        StructureInfo(
            "arborescence",
            DIRECTED,
            _plain(buy_arborescence_rom),
            (),
            "arborescence",
        ),
        StructureInfo(
            "bipartite-pm",
            BIPARTITE,
            _plain(buy_bipartite_pm),
            validate_kind="perfect-matching",
            validate_params={"bipartite": True},
        ),
        StructureInfo(
            "pm", UNDIRECTED, _plain(buy_pm_complete), validate_kind="perfect-matching"
        ),
        StructureInfo(
            "hamilton", UNDIRECTED, _plain(buy_hamilton), validate_kind="hamilton-cycle"
        ),
        StructureInfo(
            "hamilton-directed",
            DIRECTED,
            _plain(buy_hamilton_directed),
            validate_kind="hamilton-cycle",
            validate_params={"directed": True},
        ),
    )
}


def get_structure(name: str) -> StructureInfo:
    if name not in STRUCTURES:
        logger.error(f"Unknown structure {name!r}")
        raise InvalidArgumentError(
            f"Unknown structure {name!r}; choose from {sorted(STRUCTURES)}"
        )
    return STRUCTURES[name]


def check_order(structure: str, order: OrderModel) -> StructureInfo:
    """
    Reject structure/order pairs that are not supported.

    Random-order strategies run under ROM and POM (self-randomized) and only
    against the adversary written to attack them.

    Raises:
        InvalidArgumentError: On an unknown structure or adversary, or an
            incompatible pairing
    """
    info = get_structure(structure)
    if order.variant != "aom":
        return info
    if order.adversary not in ADVERSARIES:
        logger.error(f"Unknown adversary {order.adversary!r}")
        raise InvalidArgumentError(
            f"Unknown adversary {order.adversary!r}; choose from {sorted(ADVERSARIES)}"
        )
    if info.universe_kind not in ADVERSARIES[order.adversary].kinds:
        logger.error(f"Adversary {order.adversary} cannot order {info.universe_kind}")
        raise InvalidArgumentError(
            f"Adversary {order.adversary!r} does not serve {info.universe_kind}"
        )
    if info.rom_only and order.adversary not in info.adversaries:
        allowed = ", ".join(f"aom:{a}" for a in info.adversaries) or "no adversary"
        logger.error(f"{structure} is a random-order strategy; {order} is not allowed")
        raise InvalidArgumentError(
            f"{structure} runs under rom or pom only (and {allowed}); got {order}"
        )
    return info


def open_session(
    structure: str, n: int, order: OrderModel, rng: RngHandle
) -> InspectionSession:
    """Build the universe of ``structure`` and a session of the given order model."""
    info = check_order(structure, order)
    universe = make_universe(info.universe_kind, n)
    if order.variant == "rom":
        return rom_session(universe, rng)
    if order.variant == "pom":
        return pom_session(universe, rng)
    return aom_session(universe, make_adversary(order.adversary), rng)


def run_structure(
    structure: str, n: int, session: InspectionSession, params: Optional[Dict[str, Any]] = None
) -> StrategyOutcome:
    """Run the registered strategy of ``structure`` on an open session."""
    info = get_structure(structure)
    return info.runner(n, session, dict(params or {}))


def validate_outcome(
    structure: str, n: int, outcome: StrategyOutcome, params: Optional[Dict[str, Any]] = None
) -> bool:
    """True iff ``outcome`` bought every edge it claims and they form ``structure``."""
    info = get_structure(structure)
    params = params or {}
    if info.validate_kind is None:
        k = int(params.get("k", 1))
        return len(set(outcome.items)) == len(outcome.items) == k
    if not _structure_bought(info, n, outcome):
        return False
    extra = dict(info.validate_params)
    if structure == "paths-len2":
        extra["ell"] = int(outcome.extras["ell"])
    elif structure == "clique":
        r = int(params.get("r", 4))
        if r == 3:
            return validate("triangle", outcome.structure, n)
        extra["r"] = r
    return validate(info.validate_kind, outcome.structure, n, **extra)


def purchased_graph(structure: str, n: int, outcome: StrategyOutcome) -> PurchasedGraph:
    """
    Graph of the edges bought in ``outcome``.

    Arcs keep their direction. Bipartite edges (u, v) become (u, n + v) on
    2n vertices so the two sides stay apart.

    Raises:
        InvalidArgumentError: If the structure lives on abstract items
    """
    info = get_structure(structure)
    if info.universe_kind == ABSTRACT:
        logger.error(f"{structure} purchases abstract items, not edges")
        raise InvalidArgumentError(f"{structure} purchases abstract items, not edges")
    universe = make_universe(info.universe_kind, n)
    bipartite = info.universe_kind == BIPARTITE
    directed = info.universe_kind == DIRECTED
    graph = PurchasedGraph(2 * n if bipartite else n, directed=directed)
    if not outcome.purchased:
        return graph
    us, vs = universe.decode(np.asarray(outcome.items, dtype=np.int64))
    if bipartite:
        vs = vs + n
    for u, v, (_, cost) in zip(us.tolist(), vs.tolist(), outcome.purchased):
        graph.add_edge(u, v, cost)
    return graph


def _structure_bought(info: StructureInfo, n: int, outcome: StrategyOutcome) -> bool:
    """True iff every edge of ``outcome.structure`` is among the purchased items."""
    if not outcome.structure:
        return True
    graph = purchased_graph(info.name, n, outcome)
    offset = n if info.universe_kind == BIPARTITE else 0
    missing = [
        (u, v) for u, v in outcome.structure if not graph.has_edge(u, v + offset)
    ]
    if missing:
        logger.debug(f"{info.name}: {len(missing)} claimed edges were never bought")
        return False
    return True
