"""
Spanning trees: the two-step random order strategy, its analytic cost and
the adversarial-order route through a Hamilton tour.
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy import optimize, special

from ..graph_kernel import DisjointSet
from ..purchase_core import StrategyOutcome
from ..stream import InspectionSession, InvalidArgumentError, ItemUniverse
from .base import Strategy, grouped_rank, threshold_table
from .hamilton import HamiltonStrategy
from .targets import SpanningTreeTarget, Target

logger = logging.getLogger("onbuy.SpanningTreeStrategy")

SERIES_TAIL = 1e-12


def solve_giant_x(gamma: float) -> float:
    """
    Root x in (0, 1) of ``x e^-x = gamma e^-gamma`` for gamma > 1.

    Found by bisection to 1e-12 and cross-checked against the principal
    Lambert W branch, ``x = -W0(-gamma e^-gamma)``.
    """
    if not gamma > 1.0:
        logger.error(f"Giant component equation needs gamma > 1, got {gamma}")
        raise InvalidArgumentError(f"gamma must be > 1, got {gamma}")
    rhs = gamma * math.exp(-gamma)
    x = optimize.bisect(lambda t: t * math.exp(-t) - rhs, 0.0, 1.0, xtol=1e-12)
    closed = float(-special.lambertw(-rhs, 0).real)
    if abs(x - closed) > 1e-9:
        logger.warning(f"Bisection x={x:.12f} disagrees with Lambert W {closed:.12f}")
    return float(x)


def giant_fraction(gamma: float) -> float:
    """Fraction ``1 - x/gamma`` of vertices in the giant component of G(n, gamma/n)."""
    if gamma <= 1.0:
        return 0.0
    return 1.0 - solve_giant_x(gamma) / gamma


def evaluate_buytree_cost(alpha: float, beta: float) -> float:
    """
    Limit expected cost of ``SpanningTreeStrategy(alpha, beta)``.

    The first step contributes ``(beta/2)(1 - x/gamma + x^2/(2 gamma))``.
    Every small tree component of size k then pays one 1-purchase over the
    remaining ``(1-alpha)`` share of its edges to the giant, which sums to
    ``2/((1-alpha)(1-x/gamma)) * sum_k k^(k-3)/k! gamma^(k-1) e^(-gamma k)``.

    Args:
        alpha: Share of the stream used by the first step, in (0, 1)
        beta: First-step threshold is beta/n

    Returns:
        The analytic value; the series is summed until its tail is below 1e-12

    Raises:
        InvalidArgumentError: If alpha is outside (0, 1) or alpha*beta <= 1
    """
    if not 0.0 < alpha < 1.0:
        logger.error(f"alpha must lie in (0, 1), got {alpha}")
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    gamma = alpha * beta
    x = solve_giant_x(gamma)
    survive = 1.0 - x / gamma
    first = 0.5 * beta * (survive + x * x / (2.0 * gamma))

    log_gamma = math.log(gamma)
    series = 0.0
    k = 1
    prev = None
    while True:
        term = math.exp(
            (k - 3) * math.log(k) - special.gammaln(k + 1) + (k - 1) * log_gamma - gamma * k
        )
        series += term
        if prev is not None and term < prev:
            ratio = term / prev
            if term * ratio / (1.0 - ratio) < SERIES_TAIL:
                break
        prev = term
        k += 1
    second = 2.0 / ((1.0 - alpha) * survive) * series
    logger.debug(f"BUYTREE alpha={alpha}, beta={beta}: x={x:.6f}, P1={first:.6f}, P2={second:.6f}")
    return first + second


class SpanningTreeStrategy(Strategy):
    """
    Two-step spanning tree strategy for the random order model.

    Step 1 covers the first ``alpha`` share of the stream and buys every edge
    of cost at most ``beta/n`` that closes no cycle. Step 2 fixes the largest
    component as the giant; every other component runs its own 1-purchase
    over its remaining edges to the giant, with the exact count of those
    edges still to come, so the last one is always taken.

    Parameters:
        alpha (float): Step 1 share of the stream, in (0, 1) (default 0.69)
        beta (float): Step 1 threshold factor; alpha*beta must exceed 1
            (default 3.5)

    Example Usage:
        strategy = SpanningTreeStrategy(2000)
        outcome = strategy.run(rom_session(make_universe(UNDIRECTED, 2000), rng))
        evaluate_buytree_cost(0.69, 3.5)   # analytic limit of outcome.total_cost
    """

    name = "spanning-tree"
    defaults = {"alpha": 0.69, "beta": 3.5}

    def __init__(self, n: int, **params):
        super().__init__(n, **params)
        self.alpha = float(self.params["alpha"])
        self.beta = float(self.params["beta"])
        if not 0.0 < self.alpha < 1.0:
            logger.error(f"alpha must lie in (0, 1), got {self.alpha}")
            raise InvalidArgumentError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.alpha * self.beta > 1.0:
            logger.error(f"alpha*beta must exceed 1, got {self.alpha * self.beta}")
            raise InvalidArgumentError("alpha * beta must be > 1")

    def make_target(self, universe: ItemUniverse) -> Target:
        return SpanningTreeTarget(universe)

    def begin(self, universe, target, rng) -> None:
        super().begin(universe, target, rng)
        self.step_end = int(math.floor(self.alpha * self.total))
        self.threshold = self.beta / self.n
        self.forest = DisjointSet(self.n)
        self.label: Optional[np.ndarray] = None
        self._block: Optional[tuple] = None

    def boundaries(self):
        return (self.step_end, self.total)

    def _start_step2(self) -> None:
        labels = self.forest.labels()
        sizes = np.bincount(labels, minlength=self.n)
        self.giant = int(np.argmax(sizes))
        self.label = labels
        rest = np.flatnonzero(self.target.available & ~self.target.bought)
        u, v = self.universe.decode(rest)
        comp, crossing = self._crossing(u, v)
        self.left = np.bincount(comp[crossing], minlength=self.n)
        self.joined = np.zeros(self.n, dtype=bool)
        self.joined[self.giant] = True
        self.joined[sizes == 0] = True
        small = np.count_nonzero(~self.joined)
        self.table = threshold_table(1, max(2, int(self.left.max(initial=1))))
        logger.info(
            f"Step 2: giant holds {sizes[self.giant]}/{self.n} vertices, "
            f"{small} components to connect"
        )

    def _crossing(self, u: np.ndarray, v: np.ndarray):
        lu, lv = self.label[u], self.label[v]
        in_u, in_v = lu == self.giant, lv == self.giant
        return np.where(in_u, lv, lu), in_u ^ in_v

    def prefilter(self, ids, costs, positions, start):
        if positions[0] <= self.step_end:
            return costs <= self.threshold
        if self.label is None:
            self._start_step2()
        if not start:
            u, v = self.universe.decode(ids)
            comp, crossing = self._crossing(u, v)
            rank = np.zeros(ids.size, dtype=np.int64)
            rank[crossing] = grouped_rank(comp[crossing])
            m = np.maximum(self.left[comp] - rank, 1)
            thr = np.full(ids.size, -np.inf)
            thr[crossing] = self.table.thresholds(1, m[crossing])
            self._block = (comp, crossing, costs < thr)
        comp, crossing, cheap = self._block
        return crossing & cheap & ~self.joined[comp]

    def end_block(self) -> None:
        if self._block is not None:
            comp, crossing, _ = self._block
            self.left -= np.bincount(comp[crossing], minlength=self.n)
            self._block = None

    def decide(self, j, item, cost, position):
        u, v = (int(x) for x in self.universe.decode(item))
        if position <= self.step_end:
            return not self.forest.connected(u, v)
        return True

    def on_accept(self, j, item, cost, position):
        u, v = (int(x) for x in self.universe.decode(item))
        if position <= self.step_end:
            self.forest.union(u, v)
            return
        lu = self.label[u]
        self.joined[self.label[v] if lu == self.giant else lu] = True

    def finish(self, outcome: StrategyOutcome) -> None:
        if self.label is not None:
            outcome.extras["giant"] = float(np.count_nonzero(self.label == self.giant))
            outcome.extras["components"] = float(np.unique(self.label).size)


class TourTreeStrategy(HamiltonStrategy):
    """
    Spanning tree for adversarial orders: buy a Hamilton tour and drop its
    most expensive edge from the delivered structure.
    """

    name = "spanning-tree"

    def finish(self, outcome: StrategyOutcome) -> None:
        super().finish(outcome)
        if not outcome.structure:
            return
        paid = dict(outcome.purchased)
        items = self.universe.encode(*np.array(outcome.structure).T)
        drop = int(np.argmax([paid.get(int(i), 0.0) for i in items]))
        outcome.structure = outcome.structure[:drop] + outcome.structure[drop + 1 :]


def buy_spanning_tree(n: int, session: InspectionSession, **params) -> StrategyOutcome:
    if session.model == "aom":
        return TourTreeStrategy(n, **params).run(session)
    return SpanningTreeStrategy(n, **params).run(session)
