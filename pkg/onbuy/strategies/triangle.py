"""
Paths of length two and triangles in the random order model.

Both strategies share ``TriangleBuilder``: red edges (first third of the
window) form a matching, blue edges (second third) extend red edges into
wedges with distinct endpoint pairs, green edges (last third) close one of
the wedges into a triangle.
"""

import logging
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..purchase_core import StrategyOutcome
from ..stream import InspectionSession, InvalidArgumentError, ItemUniverse
from .base import Strategy, phase_of, threshold_table, window_cuts
from .targets import CliqueTarget, Target, WedgeTarget

logger = logging.getLogger("onbuy.TriangleStrategy")

RED, BLUE, GREEN = 0, 1, 2


def wedge_plan(n: int, ell: Optional[int] = None, k: Optional[int] = None) -> Tuple[int, int]:
    """
    Wedge count ``ell`` and red matching size ``k`` for n vertices.

    ``ell = (3/4)^(3/7) n^(4/7)`` balances the wedge cost ``6 (ell/n)^(4/3)``
    against the closing cost ``6/ell``; ``k = (ell^2 n / 5)^(1/3)``.
    """
    if ell is None:
        ell = max(1, int(round((0.75 ** (3.0 / 7.0)) * n ** (4.0 / 7.0))))
    if k is None:
        k = int(math.ceil((ell * ell * n / 5.0) ** (1.0 / 3.0)))
    return int(ell), int(max(1, min(k, n // 2)))


class TriangleBuilder:
    """
    Red/blue/green wedge construction on a vertex subset.

    Vertices are local indices into ``vertices`` (global vertex ids). The
    window (start, end] of stream positions is cut into thirds. ``scale``
    multiplies the red and blue cost thresholds; recursive callers run the
    builder on a random half of the edges and pass ``scale=2``.

    Parameters:
        universe (ItemUniverse): Undirected universe the items belong to
        vertices (np.ndarray): Global id of every local vertex
        window (Tuple[int, int]): Stream positions (start, end] used
        ell (int): Number of wedges to build
        k (int): Size of the red matching
        scale (float): Threshold multiplier for the red and blue phases
        remaining (Callable): Counts uninspected items among global ids
        red_threshold (Optional[float]): Override of ``scale * 10k/n^2``
        blue_threshold (Optional[float]): Override of ``scale * 2 ell/(k n)``
    """

    def __init__(
        self,
        universe: ItemUniverse,
        vertices: Sequence[int],
        window: Tuple[int, int],
        ell: int,
        k: int,
        scale: float,
        remaining: Callable[[np.ndarray], int],
        red_threshold: Optional[float] = None,
        blue_threshold: Optional[float] = None,
    ):
        self.universe = universe
        self.vertices = np.asarray(vertices, dtype=np.int64)
        n = self.vertices.size
        self.n = n
        self.ell = int(ell)
        self.k = int(k)
        self.cuts = window_cuts(window[0], window[1], 3)
        self.red_threshold = min(
            1.0, red_threshold if red_threshold is not None else scale * 10.0 * k / (n * n)
        )
        self.blue_threshold = min(
            1.0,
            blue_threshold if blue_threshold is not None else scale * 2.0 * ell / (k * n),
        )
        self.remaining = remaining
        self.mate = np.full(n, -1, dtype=np.int64)
        self.red_count = 0
        self.wedges: Dict[Tuple[int, int], int] = {}
        self.triangle: Optional[Tuple[int, int, int]] = None
        self._closing: Optional[np.ndarray] = None
        self.table = threshold_table(1, max(2, self.ell + 1))

    def phase(self, position) -> int:
        return int(phase_of(self.cuts, position))

    @property
    def done(self) -> bool:
        return self.triangle is not None

    def _wedge(self, u: int, v: int) -> Optional[Tuple[Tuple[int, int], int]]:
        for centre, tip in ((u, v), (v, u)):
            a = int(self.mate[centre])
            if a >= 0 and a != tip:
                pair = (min(a, tip), max(a, tip))
                if pair not in self.wedges:
                    return pair, centre
        return None

    def closing_items(self) -> np.ndarray:
        """Global item ids of the edges that would close a wedge."""
        if self._closing is None:
            if self.wedges:
                pairs = np.array(list(self.wedges), dtype=np.int64)
                self._closing = self.universe.encode(
                    self.vertices[pairs[:, 0]], self.vertices[pairs[:, 1]]
                )
            else:
                self._closing = np.empty(0, dtype=np.int64)
        return self._closing

    def wants(self, u: int, v: int, cost: float, position: int) -> bool:
        if self.done:
            return False
        phase = self.phase(position)
        if phase == RED:
            return (
                self.red_count < self.k
                and cost <= self.red_threshold
                and self.mate[u] < 0
                and self.mate[v] < 0
            )
        if phase == BLUE:
            return (
                len(self.wedges) < self.ell
                and cost <= self.blue_threshold
                and self._wedge(u, v) is not None
            )
        if (min(u, v), max(u, v)) not in self.wedges:
            return False
        m = max(1, self.remaining(self.closing_items()))
        return cost < self.table.threshold(1, m)

    def take(self, u: int, v: int, position: int) -> None:
        phase = self.phase(position)
        if phase == RED:
            self.mate[u] = v
            self.mate[v] = u
            self.red_count += 1
        elif phase == BLUE:
            pair, centre = self._wedge(u, v)
            self.wedges[pair] = centre
            self._closing = None
        else:
            a, c = min(u, v), max(u, v)
            self.triangle = (a, self.wedges[(a, c)], c)
            logger.debug(f"Triangle closed on local vertices {self.triangle}")


class _WedgeStrategy(Strategy):
    """Shared plumbing: one ``TriangleBuilder`` over all n vertices and the whole stream."""

    defaults = {"ell": None, "k": None, "red_threshold": None, "blue_threshold": None}

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        self.ell, self.k = wedge_plan(n, self.params["ell"], self.params["k"])
        if self.ell < 1:
            logger.error(f"ell must be >= 1, got {self.ell}")
            raise InvalidArgumentError(f"ell must be >= 1, got {self.ell}")

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        self.builder = TriangleBuilder(
            universe,
            np.arange(self.n),
            (0, self.total),
            self.ell,
            self.k,
            1.0,
            self.remaining,
            self.params["red_threshold"],
            self.params["blue_threshold"],
        )
        logger.debug(
            f"{self.name}: ell={self.ell}, k={self.k}, "
            f"red<={self.builder.red_threshold:.3g}, blue<={self.builder.blue_threshold:.3g}"
        )

    def boundaries(self):
        return self.builder.cuts

    def prefilter(self, ids, costs, positions, start):
        phase = self.builder.phase(int(positions[0]))
        if phase == RED:
            return costs <= self.builder.red_threshold
        if phase == BLUE:
            return costs <= self.builder.blue_threshold
        return np.isin(ids, self.builder.closing_items())

    def decide(self, j, item, cost, position):
        u, v = self.universe.decode(item)
        return self.builder.wants(int(u), int(v), cost, position)

    def on_accept(self, j, item, cost, position):
        u, v = self.universe.decode(item)
        self.builder.take(int(u), int(v), position)

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras.update(
            {
                "ell": float(self.ell),
                "k": float(self.k),
                "red_edges": float(self.builder.red_count),
                "wedges": float(len(self.builder.wedges)),
            }
        )


class PathsLen2Strategy(_WedgeStrategy):
    """
    Buy ``ell`` paths of length two with pairwise distinct endpoint pairs.

    Runs the red and blue phases of ``TriangleBuilder``; the green third is
    left to the witness, which only buys there if the blue phase fell short.

    Parameters:
        ell (int): Number of paths, at most ``max(1, n/10)``; default
            ``min(n/10, n^(4/7))``
        k (Optional[int]): Red matching size; default ``(ell^2 n/5)^(1/3)``
        red_threshold (Optional[float]): Red cost cap; default ``10k/n^2``
        blue_threshold (Optional[float]): Blue cost cap; default ``2 ell/(k n)``
    """

    name = "paths-len2"
    min_n = 3

    def __init__(self, n: int, **params):
        if params.get("ell") is None:
            params["ell"] = max(1, min(n // 10, int(round(n ** (4.0 / 7.0)))))
        super().__init__(n, **params)
        if self.ell > max(1, n // 10):
            logger.error(f"ell={self.ell} exceeds max(1, n/10) for n={n}")
            raise InvalidArgumentError(f"ell must be <= max(1, n/10), got {self.ell}")

    def make_target(self, universe: ItemUniverse) -> Target:
        return WedgeTarget(universe, self.ell)

    def prefilter(self, ids, costs, positions, start):
        if self.builder.phase(int(positions[0])) == GREEN:
            return np.zeros(ids.size, dtype=bool)
        return super().prefilter(ids, costs, positions, start)


class TriangleStrategy(_WedgeStrategy):
    """
    Buy a triangle: ``ell`` wedges, then the cheapest-looking closing edge.

    The closing edge is chosen by the 1-purchase rule over the green edges
    that close one of the wedges, with the exact number of those edges still
    to come.

    Parameters:
        ell (Optional[int]): Wedge count; default ``(3/4)^(3/7) n^(4/7)``
        k (Optional[int]): Red matching size; default ``(ell^2 n/5)^(1/3)``
        red_threshold (Optional[float]): Red cost cap; default ``10k/n^2``
        blue_threshold (Optional[float]): Blue cost cap; default ``2 ell/(k n)``

    Example Usage:
        outcome = TriangleStrategy(2000).run(rom_session(universe, RngHandle(7)))
    """

    name = "triangle"
    min_n = 10

    def make_target(self, universe: ItemUniverse) -> Target:
        return CliqueTarget(universe, 3)

    def finish(self, outcome: StrategyOutcome) -> None:
        super().finish(outcome)
        outcome.extras["closed"] = float(self.builder.done)


def buy_paths_len2_rom(n: int, ell: int, session: InspectionSession, **params) -> StrategyOutcome:
    return PathsLen2Strategy(n, ell=ell, **params).run(session)


def buy_triangle_rom(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return TriangleStrategy(n, **params).run(session)
