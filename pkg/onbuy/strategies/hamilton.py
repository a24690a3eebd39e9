"""
Hamilton cycles through random k-out graphs.

Every inspected cost is split into m latent values whose minimum is the
cost. Latent value j of an edge competes in slot j of both endpoints; each
(vertex, slot) pair runs a 1-purchase with thresholds for the latent law,
so the purchases form a random m-out graph, which is Hamiltonian w.h.p.
"""

import logging

import numpy as np

from ..purchase_core import StrategyOutcome
from ..stream import (
    DIRECTED,
    InspectionSession,
    InvalidArgumentError,
    ItemUniverse,
    decompose_min_of_m_batch,
)
from .base import Strategy, grouped_rank, threshold_table
from .targets import HamiltonTarget, Target

logger = logging.getLogger("onbuy.HamiltonStrategy")


def latent_values(costs: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Min-of-m decomposition with a random cyclic rotation per item."""
    z = decompose_min_of_m_batch(costs, m, rng)
    shift = rng.integers(0, m, size=costs.size)
    cols = (np.arange(m)[None, :] + shift[:, None]) % m
    return np.take_along_axis(z, cols, axis=1)


def endpoint_ranks(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """
    Rank of every item among earlier items of the block sharing a key.

    ``first`` and ``second`` are the two keys of each item; the result has
    shape (size, 2).
    """
    keys = np.stack((first, second), axis=1).ravel()
    return grouped_rank(keys).reshape(-1, 2)


class HamiltonStrategy(Strategy):
    """
    Undirected Hamilton cycle from a random m-out graph.

    Each vertex has m slots. An inspected edge (u, v) with latent values
    z_0..z_(m-1) fills every open slot j of u (and of v) whose 1-purchase
    accepts z_j given the exact number of edges at that vertex still to come.
    The target is armed once every slot is filled; if the bought graph holds
    no tour the strategy hands over to the witness.

    Parameters:
        m (int): Slots per vertex and latent values per edge (default 10)
    """

    name = "hamilton"
    defaults = {"m": 10}
    min_n = 3

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        self.m = int(self.params["m"])
        if self.m < 1:
            logger.error(f"m must be >= 1, got {self.m}")
            raise InvalidArgumentError(f"m must be >= 1, got {self.m}")

    def make_target(self, universe: ItemUniverse) -> Target:
        target = HamiltonTarget(universe)
        target.armed = False
        return target

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        n = self.n
        self.left = np.full(n, n - 1, dtype=np.int64)
        self.open = np.ones((n, self.m), dtype=bool)
        self.table = threshold_table(1, n, density=float(self.m))
        self._block = None

    def prefilter(self, ids, costs, positions, start):
        if not start:
            u, v = self.universe.decode(ids)
            z = latent_values(costs, self.m, self.rng)
            rank = endpoint_ranks(u, v)
            thr_u = self.table.thresholds(1, self.left[u] - rank[:, 0])
            thr_v = self.table.thresholds(1, self.left[v] - rank[:, 1])
            self._block = (u, v, z < thr_u[:, None], z < thr_v[:, None])
        u, v, low_u, low_v = self._block
        self._hit_u = low_u & self.open[u]
        self._hit_v = low_v & self.open[v]
        return self._hit_u.any(axis=1) | self._hit_v.any(axis=1)

    def end_block(self) -> None:
        if self._block is not None:
            u, v = self._block[0], self._block[1]
            self.left -= np.bincount(u, minlength=self.n) + np.bincount(v, minlength=self.n)
            self._block = None

    def decide(self, j, item, cost, position):
        return True

    def on_accept(self, j, item, cost, position):
        u, v = int(self._block[0][j]), int(self._block[1][j])
        self.open[u, self._hit_u[j]] = False
        self.open[v, self._hit_v[j]] = False
        if not self.target.armed and not self.open.any():
            logger.debug("All slots filled, arming the target")
            if not self.target.arm():
                logger.info("m-out graph holds no tour within budget, using the witness")
                self.wants_fallback = True

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras["open_slots"] = float(np.count_nonzero(self.open))
        outcome.extras["distinct_edges"] = float(len(outcome.purchased))


class DirectedHamiltonStrategy(Strategy):
    """
    Directed Hamilton cycle from a random 2-in, 2-out digraph.

    Each arc (u, v) is split into m = 4 latent values. The minimum of the
    first half competes in u's out-choice 2-purchase, the minimum of the
    second half in v's in-choice 2-purchase; both use thresholds for the
    latent law of a minimum of m/2 latent values.

    Parameters:
        m (int): Latent values per arc, even (default 4)
        choices (int): Out- and in-choices per vertex (default 2)
    """

    name = "hamilton-directed"
    universe_kind = DIRECTED
    defaults = {"m": 4, "choices": 2}
    min_n = 3

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        self.m = int(self.params["m"])
        self.choices = int(self.params["choices"])
        if self.m < 2 or self.m % 2:
            logger.error(f"m must be an even number >= 2, got {self.m}")
            raise InvalidArgumentError(f"m must be even and >= 2, got {self.m}")
        if not 1 <= self.choices <= n - 1:
            raise InvalidArgumentError(f"choices must lie in [1, n-1], got {self.choices}")

    def make_target(self, universe: ItemUniverse) -> Target:
        target = HamiltonTarget(universe)
        target.armed = False
        return target

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        n = self.n
        self.out_left = np.full(n, n - 1, dtype=np.int64)
        self.in_left = np.full(n, n - 1, dtype=np.int64)
        self.need_out = np.full(n, self.choices, dtype=np.int64)
        self.need_in = np.full(n, self.choices, dtype=np.int64)
        self.table = threshold_table(self.choices, n, density=self.m / 2.0)
        self._block = None

    def prefilter(self, ids, costs, positions, start):
        if not start:
            u, v = self.universe.decode(ids)
            z = latent_values(costs, self.m, self.rng)
            half = self.m // 2
            rank = endpoint_ranks(u, v + self.n)
            self._block = (
                u,
                v,
                z[:, :half].min(axis=1),
                z[:, half:].min(axis=1),
                self.out_left[u] - rank[:, 0],
                self.in_left[v] - rank[:, 1],
            )
        u, v, z_out, z_in, m_out, m_in = self._block
        self._hit_out = z_out < self.table.thresholds(self.need_out[u], m_out)
        self._hit_in = z_in < self.table.thresholds(self.need_in[v], m_in)
        return self._hit_out | self._hit_in

    def end_block(self) -> None:
        if self._block is not None:
            u, v = self._block[0], self._block[1]
            self.out_left -= np.bincount(u, minlength=self.n)
            self.in_left -= np.bincount(v, minlength=self.n)
            self._block = None

    def decide(self, j, item, cost, position):
        return True

    def on_accept(self, j, item, cost, position):
        u, v = int(self._block[0][j]), int(self._block[1][j])
        if self._hit_out[j]:
            self.need_out[u] -= 1
        if self._hit_in[j]:
            self.need_in[v] -= 1
        if not self.target.armed and not self.need_out.any() and not self.need_in.any():
            logger.debug("All choices made, arming the target")
            if not self.target.arm():
                logger.info("2-in 2-out digraph holds no tour within budget, using the witness")
                self.wants_fallback = True

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras["open_choices"] = float(self.need_out.sum() + self.need_in.sum())


def buy_hamilton(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return HamiltonStrategy(n, **params).run(session)


def buy_hamilton_directed(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return DirectedHamiltonStrategy(n, **params).run(session)
