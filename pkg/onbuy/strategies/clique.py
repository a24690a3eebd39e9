"""
r-cliques in the random order model by star recursion.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..purchase_core import StrategyOutcome, clique_exponents
from ..stream import InspectionSession, InvalidArgumentError, ItemUniverse
from .base import Strategy, phase_of, threshold_table, window_cuts
from .targets import CliqueTarget, Target
from .triangle import TriangleBuilder, TriangleStrategy, wedge_plan

logger = logging.getLogger("onbuy.CliqueStrategy")


def star_sizes(n: int, r: int) -> List[int]:
    """
    Star size at every recursion level, outermost first.

    A K_r on n vertices uses a star of ``n^(1/(d_r+2))`` leaves and recurses
    for a K_(r-1) inside them; the last entry is the vertex count handed to
    the triangle level.
    """
    exponents = clique_exponents(max(r, 3))
    sizes = []
    size = n
    for level in range(r, 3, -1):
        size = int(round(size ** (1.0 / (exponents[level] + 2.0))))
        sizes.append(size)
    return sizes


def recursion_fits(n: int, r: int) -> bool:
    """True if every star holds at least ``3(r-1)`` leaves and fits its host."""
    host = n
    for level, size in zip(range(r, 3, -1), star_sizes(n, r)):
        if size < 3 * (level - 1) or size > host - 1:
            return False
        host = size
    return True


class CliqueBuilder:
    """
    Star at a hub, then a K_(r-1) among the star's leaves.

    The window (start, end] is halved. Local vertex 0 is the hub; its edges
    are bought by an ``ell``-purchase whose remaining count is the expected
    number of hub edges left in the red half (exact once in the blue half).
    When the star is full, the blue edges among its leaves form a random
    half of a complete graph and feed a child builder with doubled
    thresholds.
    """

    def __init__(
        self,
        universe: ItemUniverse,
        vertices: Sequence[int],
        window: Tuple[int, int],
        r: int,
        scale: float,
        remaining: Callable[[np.ndarray], int],
    ):
        self.universe = universe
        self.vertices = np.asarray(vertices, dtype=np.int64)
        n = self.vertices.size
        self.r = r
        self.scale = scale
        self.remaining = remaining
        self.window = window
        self.cuts = window_cuts(window[0], window[1], 2)
        self.ell = star_sizes(n, r)[0]
        self.hub_items = universe.encode(
            np.full(n - 1, self.vertices[0]), self.vertices[1:]
        )
        self.table = threshold_table(self.ell, n)
        self.leaves: List[int] = []
        self.child_of = np.full(n, -1, dtype=np.int64)
        self.child: Optional[Union["CliqueBuilder", TriangleBuilder]] = None

    @property
    def done(self) -> bool:
        return self.child is not None and self.child.done

    def _spawn(self) -> None:
        leaves = np.array(self.leaves, dtype=np.int64)
        self.child_of[leaves] = np.arange(leaves.size)
        window = (self.cuts[0], self.window[1])
        vertices = self.vertices[leaves]
        if self.r - 1 == 3:
            ell, k = wedge_plan(leaves.size)
            self.child = TriangleBuilder(
                self.universe, vertices, window, ell, k, 2.0 * self.scale, self.remaining
            )
        else:
            self.child = CliqueBuilder(
                self.universe, vertices, window, self.r - 1, 2.0 * self.scale, self.remaining
            )
        logger.debug(f"K_{self.r}: star of {leaves.size} leaves complete, recursing")

    def _local_child(self, u: int, v: int) -> Tuple[int, int]:
        return int(self.child_of[u]), int(self.child_of[v])

    def wants(self, u: int, v: int, cost: float, position: int) -> bool:
        if self.child is not None:
            cu, cv = self._local_child(u, v)
            return cu >= 0 and cv >= 0 and self.child.wants(cu, cv, cost, position)
        if u != 0 and v != 0:
            return False
        need = self.ell - len(self.leaves)
        left = self.remaining(self.hub_items)
        if int(phase_of(self.cuts, position)) == 0:
            red_end, end = self.cuts[0], self.window[1]
            expected = left * (red_end - position + 1) / (end - position + 1)
            # never forced inside the red half
            m = max(need + 1, int(math.ceil(expected)))
        else:
            m = left
        return cost < self.table.threshold(need, m)

    def take(self, u: int, v: int, position: int) -> None:
        if self.child is not None:
            cu, cv = self._local_child(u, v)
            self.child.take(cu, cv, position)
            return
        self.leaves.append(v if u == 0 else u)
        if len(self.leaves) == self.ell:
            self._spawn()

    def star_vertices(self) -> np.ndarray:
        """Global ids of the leaves at every level so far, outermost first."""
        own = self.vertices[np.array(self.leaves, dtype=np.int64)] if self.leaves else []
        if isinstance(self.child, CliqueBuilder):
            return np.concatenate((own, self.child.star_vertices()))
        return np.asarray(own, dtype=np.int64)


class CliqueStrategy(Strategy):
    """
    Buy an r-clique (r >= 4) by buying stars recursively.

    The hub of level r is vertex 0. Level r-1 runs on the star's leaves over
    the blue half of level r's window, down to a triangle level. When some
    star would hold fewer than ``3(r-1)`` leaves the strategy gives up at
    once and the witness completes any clique.

    Parameters:
        r (int): Clique size (default 4)
    """

    name = "clique"
    defaults = {"r": 4}

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        self.r = int(self.params["r"])
        if self.r < 4 or self.r > n:
            logger.error(f"Clique size r={self.r} needs 4 <= r <= n={n}")
            raise InvalidArgumentError(f"r must lie in [4, n], got {self.r}")
        self.fits = recursion_fits(n, self.r)
        if not self.fits:
            logger.warning(
                f"K_{self.r} recursion floor reached for n={n} "
                f"(stars {star_sizes(n, self.r)}); witness completion only"
            )

    def make_target(self, universe: ItemUniverse) -> Target:
        return CliqueTarget(universe, self.r)

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        self.builder = CliqueBuilder(
            universe, np.arange(self.n), (0, self.total), self.r, 1.0, self.remaining
        )
        self.in_star = np.zeros(self.n, dtype=bool)
        self.wants_fallback = not self.fits

    def prefilter(self, ids, costs, positions, start):
        if not self.fits:
            return np.zeros(ids.size, dtype=bool)
        u, v = self.universe.decode(ids)
        if self.builder.child is None:
            return u == 0
        return self.in_star[u] & self.in_star[v]

    def decide(self, j, item, cost, position):
        u, v = self.universe.decode(item)
        return self.builder.wants(int(u), int(v), cost, position)

    def on_accept(self, j, item, cost, position):
        u, v = self.universe.decode(item)
        self.builder.take(int(u), int(v), position)
        if self.builder.child is not None:
            self.in_star[self.builder.star_vertices()] = True

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras.update(
            {
                "r": float(self.r),
                "star": float(len(self.builder.leaves)),
                "recursed": float(self.builder.child is not None),
            }
        )


def buy_clique_rom(n: int, r: int, session: InspectionSession, **params) -> StrategyOutcome:
    if r == 3:
        return TriangleStrategy(n, **params).run(session)
    return CliqueStrategy(n, r=r, **params).run(session)
