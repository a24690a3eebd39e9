"""
Perfect matchings from random 3-out bipartite graphs.
"""

import logging

import numpy as np

from ..purchase_core import StrategyOutcome
from ..stream import (
    BIPARTITE,
    UNDIRECTED,
    InspectionSession,
    InvalidArgumentError,
    ItemUniverse,
)
from .base import Strategy, grouped_rank, threshold_table
from .targets import BipartiteMatchingTarget, Target

logger = logging.getLogger("onbuy.MatchingStrategy")


class BipartiteMatchingStrategy(Strategy):
    """
    Perfect matching between U and V, valid under any inspection order.

    Every edge gets a private fair coin. Red edges belong to their U
    endpoint and blue edges to their V endpoint; each vertex runs a
    ``choices``-purchase over its own edges. The coins are drawn up front, so
    the number of a vertex's edges still to come is known exactly and its
    last edges are forced. The union of the choices is a random 3-out
    bipartite graph, which has a perfect matching w.h.p.; otherwise the
    witness finishes the job.

    Parameters:
        choices (int): Purchases per vertex (default 3)
    """

    name = "bipartite-pm"
    universe_kind = BIPARTITE
    defaults = {"choices": 3}
    min_n = 1
    crossing = False

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        self.choices = int(self.params["choices"])
        if self.choices < 1:
            logger.error(f"choices must be >= 1, got {self.choices}")
            raise InvalidArgumentError(f"choices must be >= 1, got {self.choices}")

    def make_target(self, universe: ItemUniverse) -> Target:
        return BipartiteMatchingTarget(universe, crossing=self.crossing)

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        side = target.side
        self.side = side
        self.red = rng.random(self.total) < 0.5
        u, v, ok = target.coords(np.arange(self.total))
        self.key = np.where(self.red, u, side + v)
        self.key[~ok] = -1
        self.usable = ok
        self.left = np.bincount(self.key[ok], minlength=2 * side)
        self.need = np.minimum(self.choices, self.left)
        self.table = threshold_table(self.choices, max(side, 2))
        self._block = None

    def prefilter(self, ids, costs, positions, start):
        if not start:
            usable = self.usable[ids]
            key = np.where(usable, self.key[ids], 0)
            rank = np.zeros(ids.size, dtype=np.int64)
            rank[usable] = grouped_rank(key[usable])
            self._block = (key, usable, np.maximum(self.left[key] - rank, 1))
        key, usable, m = self._block
        thr = self.table.thresholds(self.need[key], m)
        return usable & (costs < thr)

    def end_block(self) -> None:
        if self._block is not None:
            key, usable, _ = self._block
            self.left -= np.bincount(key[usable], minlength=2 * self.side)
            self._block = None

    def decide(self, j, item, cost, position):
        return True

    def on_accept(self, j, item, cost, position):
        self.need[self.key[item]] -= 1
        if not self.need.any() and not self.target.complete:
            logger.info("All choices made without a perfect matching, using the witness")
            self.wants_fallback = True

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras["open_choices"] = float(self.need.sum())


class CompleteGraphMatchingStrategy(BipartiteMatchingStrategy):
    """
    Perfect matching of K_n (n even) through the bipartition
    [0, n/2) x [n/2, n); edges inside either half are never bought.
    """

    name = "pm"
    universe_kind = UNDIRECTED
    min_n = 2
    crossing = True

    def __init__(self, n: int, **params):
        if n % 2:
            logger.error(f"Perfect matching of K_n needs even n, got {n}")
            raise InvalidArgumentError(f"n must be even, got {n}")
        super().__init__(n, **params)


def buy_bipartite_pm(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return BipartiteMatchingStrategy(n, **params).run(session)


def buy_pm_complete(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return CompleteGraphMatchingStrategy(n, **params).run(session)
