"""
Spanning arborescence of the complete digraph in the random order model.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from ..graph_kernel import DisjointSet, decompose_functional
from ..purchase_core import StrategyOutcome
from ..stream import DIRECTED, InspectionSession, InvalidArgumentError, ItemUniverse
from .base import Strategy, grouped_rank, threshold_table
from .targets import ArborescenceTarget, Target

logger = logging.getLogger("onbuy.ArborescenceStrategy")


class ArborescenceStrategy(Strategy):
    """
    Random mapping first, then merge its trees.

    Red phase (first ``(1-eps)`` share of the stream): every vertex runs a
    1-purchase over its red out-arcs, using the expected number of its
    out-arcs left in the red phase. The choices form a mapping f; one arc
    per cycle of f (the most expensive) is deleted, which leaves a forest of
    in-trees. Blue phase: an arc (x, y) is bought when x is a current root,
    y lies in another tree and the cost is at most ``merge_threshold`` or
    below the 1-purchase threshold over x's remaining arcs into other trees.

    Parameters:
        eps (Optional[float]): Blue share of the stream; default ``1/ln n``
        merge_threshold (Optional[float]): Blue cost cap; default ``n^(-3/4)``

    Workflow:
        1. Red: per-vertex 1-purchase builds the mapping f
        2. Blue start: ``decompose_functional`` splits f into cycles and trees
        3. Blue: roots merge into other trees until one tree is left
    """

    name = "arborescence"
    universe_kind = DIRECTED
    defaults = {"eps": None, "merge_threshold": None}
    min_n = 3

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        eps = self.params["eps"]
        self.eps = float(eps) if eps is not None else 1.0 / math.log(n)
        merge = self.params["merge_threshold"]
        self.merge_threshold = float(merge) if merge is not None else n ** -0.75
        if not 0.0 < self.eps < 1.0:
            logger.error(f"eps must lie in (0, 1), got {self.eps}")
            raise InvalidArgumentError(f"eps must lie in (0, 1), got {self.eps}")

    def make_target(self, universe: ItemUniverse) -> Target:
        return ArborescenceTarget(universe)

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        n = self.n
        self.red_end = int(math.floor((1.0 - self.eps) * self.total))
        self.out_left = np.full(n, n - 1, dtype=np.int64)
        self.f = np.full(n, -1, dtype=np.int64)
        self.red_cost = np.zeros(n)
        self.table = threshold_table(1, n)
        self.trees: Optional[DisjointSet] = None
        self.deleted: List[Tuple[int, int]] = []
        self.components = 0
        self._block = None

    def boundaries(self):
        return (self.red_end, self.total)

    # red phase

    def _red_prefilter(self, ids, costs, positions, start):
        if not start:
            tails, _ = self.universe.decode(ids)
            m = self.out_left[tails] - grouped_rank(tails)
            expected = m * (self.red_end - positions + 1) / (self.total - positions + 1)
            m_est = np.maximum(np.rint(expected).astype(np.int64), 1)
            self._block = (tails, costs < self.table.thresholds(1, m_est))
        tails, cheap = self._block
        return cheap & (self.f[tails] < 0)

    # blue phase

    def _start_blue(self) -> None:
        mapping = decompose_functional(self.f)
        for cycle in mapping.cycles:
            costs = self.red_cost[cycle]
            v = int(cycle[int(np.argmax(costs))])
            self.deleted.append((v, int(self.f[v])))
            self.f[v] = -1
        self.trees = DisjointSet(self.n)
        for v in np.flatnonzero(self.f >= 0).tolist():
            self.trees.union(v, int(self.f[v]))
        self.components = mapping.component_count
        self.label = self.trees.labels()
        logger.debug(
            f"Blue phase: {len(mapping.cycles)} cycles broken, "
            f"{self.components} trees to merge"
        )

    def _blue_prefilter(self, ids, costs, positions, start):
        if self.trees is None:
            self._start_blue()
        tails, heads = self.universe.decode(ids)
        return (self.f[tails] < 0) & (self.label[tails] != self.label[heads])

    def prefilter(self, ids, costs, positions, start):
        if positions[0] <= self.red_end:
            return self._red_prefilter(ids, costs, positions, start)
        return self._blue_prefilter(ids, costs, positions, start)

    def end_block(self) -> None:
        if self._block is not None:
            self.out_left -= np.bincount(self._block[0], minlength=self.n)
            self._block = None

    def decide(self, j, item, cost, position):
        if position <= self.red_end:
            return True
        x, _ = self.universe.decode(item)
        arcs = self.universe.incident(int(x), "out")
        _, heads = self.universe.decode(arcs)
        other = self.label[heads] != self.label[int(x)]
        m = max(1, self.remaining(arcs[other]))
        return cost <= max(self.merge_threshold, self.table.threshold(1, m))

    def on_accept(self, j, item, cost, position):
        tail, head = (int(t) for t in self.universe.decode(item))
        self.f[tail] = head
        if position <= self.red_end:
            self.red_cost[tail] = cost
            return
        self.trees.union(tail, head)
        self.label = self.trees.labels()

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras.update(
            {
                "components": float(self.components),
                "deleted_arcs": float(len(self.deleted)),
                "unmapped": float(np.count_nonzero(self.f < 0)),
            }
        )


def buy_arborescence_rom(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return ArborescenceStrategy(n, **params).run(session)
