"""
Cheap path between the first and the last vertex.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from ..purchase_core import StrategyOutcome
from ..stream import InspectionSession, InvalidArgumentError, ItemUniverse
from .base import Strategy, phase_of, split_points, threshold_table
from .targets import PathTarget, Target

logger = logging.getLogger("onbuy.PathStrategy")

PLANS = ("model", "literal")


def layer_caps(
    n: int, p: float, layers: int, eps: float, spread: float = 3.0
) -> List[int]:
    """Per-layer vertex caps ``max(1, floor(((1-eps) n p / spread)^l))``, l = 1..layers."""
    base = (1.0 - eps) * n * p / spread
    caps = []
    for ell in range(1, layers + 1):
        caps.append(int(max(1, min(n, math.floor(base**ell)))))
    return caps


def modelled_cost(n: int, p: float, layers: int, eps: float) -> float:
    """Two trees of t edges costing p/2 each plus a 1-purchase over t*t/3 edges."""
    t = 1 + sum(layer_caps(n, p, layers, eps))
    t = min(t, n // 2)
    return t * p + 6.0 / (t * t)


def plan_threshold(n: int, layers: int, eps: float, grid: int = 400) -> float:
    """Tree threshold p minimizing ``modelled_cost`` over a log grid on [n^-1.5, 1]."""
    ps = np.logspace(-1.5 * math.log10(n), 0.0, grid)
    values = [modelled_cost(n, p, layers, eps) for p in ps]
    return float(ps[int(np.argmin(values))])


class ShortestPathStrategy(Strategy):
    """
    Buy a path from vertex 0 to vertex n-1 in the random order model.

    The stream is cut into thirds by position. In the first third a tree T
    grows from vertex 0: an edge of cost at most p that hangs a new vertex
    below a vertex of depth < layers is bought while that layer is under
    its cap. The second third grows the mirror tree T' from n-1 the same
    way, and any cheap edge between T' and T closes the path at once. In
    the last third the closing edge is chosen by the optimal 1-purchase rule
    over the exactly counted uninspected edges between T and T'.

    Parameters:
        alpha (float): Exponent controlling the layer-cap slack (default 2/3)
        layers (Optional[int]): Tree depth; default ``max(2, ceil(ln ln n))``
        eps (Optional[float]): Cap slack; default ``n^(-alpha/(3 layers))``
        p (Optional[float]): Tree edge threshold; planned when omitted
        plan (str): "model" picks p by minimizing ``modelled_cost`` with caps
            over n p/3; "literal" uses p = n^(-1+alpha/layers) with caps over
            n q, q = p/(3 layers) (default "model")

    Example Usage:
        strategy = ShortestPathStrategy(1000)
        outcome = strategy.run(rom_session(make_universe(UNDIRECTED, 1000), rng))
    """

    name = "path"
    defaults = {"alpha": 2.0 / 3.0, "layers": None, "eps": None, "p": None, "plan": "model"}

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        alpha = float(self.params["alpha"])
        if not 0.0 < alpha < 1.0:
            logger.error(f"alpha must lie in (0, 1), got {alpha}")
            raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
        loglog = math.log(math.log(n)) if n > 2 else 0.0
        self.layers = int(self.params["layers"] or max(2, math.ceil(loglog)))
        if self.layers < 1:
            raise InvalidArgumentError("layers must be >= 1")
        eps = self.params["eps"]
        self.eps = float(eps) if eps is not None else n ** (-alpha / (3.0 * self.layers))
        self.plan = str(self.params["plan"])
        if self.plan not in PLANS:
            logger.error(f"Unknown path plan {self.plan!r}")
            raise InvalidArgumentError(f"plan must be one of {PLANS}, got {self.plan!r}")
        literal = self.plan == "literal"
        p = self.params["p"]
        if p is not None:
            self.p = float(p)
        elif literal:
            self.p = n ** (-1.0 + alpha / self.layers)
        else:
            self.p = plan_threshold(n, self.layers, self.eps)
        if not 0.0 < self.p <= 1.0:
            raise InvalidArgumentError(f"p must lie in (0, 1], got {self.p}")
        spread = 3.0 * self.layers if literal else 3.0
        self.caps = layer_caps(n, self.p, self.layers, self.eps, spread)
        logger.debug(
            f"Path plan n={n} ({self.plan}): layers={self.layers}, eps={self.eps:.4f}, "
            f"p={self.p:.5f}, caps={self.caps}"
        )

    def make_target(self, universe: ItemUniverse) -> Target:
        return PathTarget(universe)

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        n = self.n
        self.cuts = split_points(self.total, 3)
        self.depth = (np.full(n, -1, dtype=np.int64), np.full(n, -1, dtype=np.int64))
        self.parent = (np.full(n, -1, dtype=np.int64), np.full(n, -1, dtype=np.int64))
        self.depth[0][0] = 0
        self.depth[1][n - 1] = 0
        self.filled = (
            np.zeros(self.layers + 1, dtype=np.int64),
            np.zeros(self.layers + 1, dtype=np.int64),
        )
        self.closing: Optional[np.ndarray] = None
        self.closing_left = 0
        self._cand = np.empty(0, dtype=bool)
        self._hits: Optional[np.ndarray] = None
        self.joined = False

    def boundaries(self):
        return self.cuts

    def _phase(self, position: int) -> int:
        return int(phase_of(self.cuts, position))

    def _start_closing(self) -> None:
        t_side = np.flatnonzero(self.depth[0] >= 0)
        s_side = np.flatnonzero(self.depth[1] >= 0)
        uu, vv = np.meshgrid(t_side, s_side, indexing="ij")
        keep = uu.ravel() != vv.ravel()
        items = self.universe.encode(uu.ravel()[keep], vv.ravel()[keep])
        items = items[self.target.available[items] & ~self.target.bought[items]]
        self.closing = np.zeros(self.total, dtype=bool)
        self.closing[items] = True
        self.closing_left = int(items.size)
        self.table = threshold_table(1, max(1, self.closing_left))
        logger.debug(
            f"Closing phase: |T|={t_side.size}, |T'|={s_side.size}, "
            f"{self.closing_left} closing edges left"
        )

    def prefilter(self, ids, costs, positions, start):
        if start:
            return self._cand
        phase = self._phase(int(positions[0]))
        if phase < 2:
            self._cand = costs <= self.p
            self._hits = None
            return self._cand
        if self.closing is None:
            self._start_closing()
        hit = self.closing[ids]
        m = self.closing_left - (np.cumsum(hit) - 1)
        cand = np.zeros(ids.size, dtype=bool)
        if hit.any():
            thr = self.table.thresholds(1, np.maximum(m[hit], 1))
            cand[hit] = costs[hit] < thr
        self._cand, self._hits = cand, hit
        return cand

    def end_block(self) -> None:
        if self._hits is not None:
            self.closing_left -= int(self._hits.sum())

    def _grow(self, side: int, u: int, v: int) -> Optional[Tuple[int, int]]:
        """(anchor, new vertex) if edge (u, v) may extend tree ``side``."""
        depth = self.depth[side]
        for a, b in ((u, v), (v, u)):
            if depth[a] >= 0 and depth[b] < 0 and depth[a] < self.layers:
                layer = int(depth[a]) + 1
                if self.filled[side][layer] < self.caps[layer - 1]:
                    return a, b
        return None

    def decide(self, j, item, cost, position):
        if self.joined:
            return False
        u, v = (int(x) for x in self.universe.decode(item))
        phase = self._phase(position)
        in_t = self.depth[0]
        in_s = self.depth[1]
        if phase == 2:
            return True
        if (in_t[u] >= 0 and in_s[v] >= 0) or (in_t[v] >= 0 and in_s[u] >= 0):
            return True
        return self._grow(phase, u, v) is not None

    def on_accept(self, j, item, cost, position):
        u, v = (int(x) for x in self.universe.decode(item))
        in_t, in_s = self.depth
        if (in_t[u] >= 0 and in_s[v] >= 0) or (in_t[v] >= 0 and in_s[u] >= 0):
            self.joined = True
            return
        side = self._phase(position)
        a, b = self._grow(side, u, v)
        self.depth[side][b] = self.depth[side][a] + 1
        self.parent[side][b] = a
        self.filled[side][self.depth[side][b]] += 1

    def finish(self, outcome: StrategyOutcome) -> None:
        outcome.extras.update(
            {
                "p": self.p,
                "layers": float(self.layers),
                "tree_size": float(np.count_nonzero(self.depth[0] >= 0)),
                "mirror_size": float(np.count_nonzero(self.depth[1] >= 0)),
            }
        )


def buy_shortest_path_rom(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    return ShortestPathStrategy(n, **params).run(session)
