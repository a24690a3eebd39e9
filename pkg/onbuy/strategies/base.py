"""
Strategy base class and the block-driven purchase engine.
"""

from functools import lru_cache
import logging
import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..purchase_core import RhoTable, StrategyOutcome, compute_rho, compute_rho_density
from ..stream import (
    PURPOSE_STRATEGY,
    InspectionSession,
    InvalidArgumentError,
    ItemUniverse,
    PurchaserOrderSession,
    UNDIRECTED,
)
from .targets import Target, must_take_guard

logger = logging.getLogger("onbuy.PurchaseRun")

DEFAULT_BLOCK = 4096


def grouped_rank(keys: np.ndarray) -> np.ndarray:
    """0-based rank of every element among the earlier elements with the same key."""
    keys = np.asarray(keys)
    if keys.size == 0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.concatenate(([True], sorted_keys[1:] != sorted_keys[:-1]))
    idx = np.arange(keys.size)
    first = np.maximum.accumulate(np.where(starts, idx, 0))
    rank = np.empty(keys.size, dtype=np.int64)
    rank[order] = idx - first
    return rank


@lru_cache(maxsize=32)
def _table(k: int, size: int, density: float) -> RhoTable:
    if density == 1.0:
        return compute_rho(k, size)
    return compute_rho_density(k, size, density)


def threshold_table(k: int, n_max: int, density: float = 1.0) -> RhoTable:
    """Cached table covering (k, n_max); sizes are rounded up to a power of two."""
    size = 1 << max(4, int(max(n_max, k)).bit_length())
    return _table(int(k), size, float(density))


class Strategy:
    """
    Base class for purchasing strategies.

    A strategy sees the stream block by block. ``prefilter`` marks the items
    it might want (a superset is fine), ``decide`` makes the final call for
    one candidate and ``on_accept`` updates its state. Everything else is
    rejected through the target, which keeps the structure reachable.

    Parameters:
        n (int): Vertex count of the graph universe
        **params: Overrides of ``defaults``; unknown keys are an error

    Workflow:
        1. ``make_target`` builds the witness-backed target
        2. ``begin`` receives the universe, the target and a private RNG
        3. ``PurchaseRun`` feeds blocks until the target is complete
        4. ``finish`` attaches strategy extras to the outcome
    """

    name = "strategy"
    universe_kind = UNDIRECTED
    defaults: Dict[str, Any] = {}
    min_n = 2

    def __init__(self, n: int, **params):
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            logger.error(f"{self.name}: unknown parameters {unknown}")
            raise InvalidArgumentError(
                f"Unknown parameters for {self.name}: {unknown}; "
                f"known: {sorted(self.defaults)}"
            )
        if n < self.min_n:
            logger.error(f"{self.name}: n={n} below minimum {self.min_n}")
            raise InvalidArgumentError(f"{self.name} needs n >= {self.min_n}, got {n}")
        self.n = int(n)
        self.params = {**self.defaults, **params}
        self.wants_fallback = False
        self.rng: Optional[np.random.Generator] = None

    def make_target(self, universe: ItemUniverse) -> Target:
        raise NotImplementedError

    def begin(self, universe: ItemUniverse, target: Target, rng: np.random.Generator) -> None:
        self.universe = universe
        self.target = target
        self.rng = rng
        self.total = universe.size

    def block_limit(self, inspected: int) -> int:
        """Largest block that stays inside the current phase."""
        bounds = [b - inspected for b in self.boundaries() if b > inspected]
        return min(bounds) if bounds else DEFAULT_BLOCK

    def boundaries(self) -> Tuple[int, ...]:
        return ()

    def prefilter(self, ids, costs, positions, start: int) -> np.ndarray:
        return np.zeros(ids.size, dtype=bool)

    def decide(self, j: int, item: int, cost: float, position: int) -> bool:
        return False

    def on_accept(self, j: int, item: int, cost: float, position: int) -> None:
        pass

    def end_block(self) -> None:
        pass

    def finish(self, outcome: StrategyOutcome) -> None:
        pass

    def remaining(self, items: np.ndarray) -> int:
        """Count of ``items`` not yet inspected or bought (the current item counts)."""
        return int(np.count_nonzero(self.target.available[items] & ~self.target.bought[items]))

    def run(self, session: InspectionSession, block_size: int = DEFAULT_BLOCK) -> StrategyOutcome:
        universe = session.universe
        if universe.kind != self.universe_kind or universe.n != self.n:
            logger.error(f"{self.name} expects {self.universe_kind}({self.n}), got {universe}")
            raise InvalidArgumentError(
                f"{self.name} needs a {self.universe_kind} universe with n={self.n}"
            )
        target = self.make_target(universe)
        self.begin(universe, target, session.rng.generator(PURPOSE_STRATEGY))
        outcome = PurchaseRun(self, session, target, block_size).execute()
        self.finish(outcome)
        return outcome


class PurchaseRun:
    """
    Drive one strategy over one session.

    Non-candidates are rejected in bulk up to the next event: a candidate
    or a witness item. A witness item the strategy does not buy goes through
    ``must_take_guard``; when it fires the item is bought, the run switches
    to fallback mode and from then on only must-take items are bought.
    """

    def __init__(
        self,
        strategy: Strategy,
        session: InspectionSession,
        target: Target,
        block_size: int = DEFAULT_BLOCK,
    ):
        self.strategy = strategy
        self.session = session
        self.target = target
        self.block_size = block_size
        self.fallback = False

    def _enter_fallback(self, reason: str, position: int) -> None:
        if self.fallback:
            return
        self.fallback = True
        logger.warning(
            f"{self.strategy.name}: fallback at position {position} ({reason})"
        )
        self.target.arm()

    def _process(self, ids, costs, positions, outcome: StrategyOutcome) -> np.ndarray:
        strategy, target = self.strategy, self.target
        size = ids.size
        accepted = np.zeros(size, dtype=bool)
        cand = (
            strategy.prefilter(ids, costs, positions, 0)
            if not self.fallback
            else np.zeros(size, dtype=bool)
        )
        hits = target.in_witness[ids]
        version = target.version
        i = 0
        while i < size and not target.complete:
            if target.version != version:
                hits = target.in_witness[ids]
                version = target.version
            events = np.flatnonzero(cand[i:] | hits[i:])
            j = i + int(events[0]) if events.size else size
            if j > i:
                target.reject(ids[i:j])
            if j == size:
                outcome.inspections = int(positions[-1])
                break
            item, cost, pos = int(ids[j]), float(costs[j]), int(positions[j])
            outcome.inspections = pos
            take = bool(cand[j]) and not self.fallback and strategy.decide(j, item, cost, pos)
            if take:
                accepted[j] = True
                outcome.purchased.append((item, cost))
                target.accept(item)
                strategy.on_accept(j, item, cost, pos)
                if strategy.wants_fallback:
                    self._enter_fallback("strategy gave up", pos)
                if self.fallback:
                    cand[:] = False
                else:
                    cand = strategy.prefilter(ids, costs, positions, j + 1)
            elif must_take_guard(target, item):
                accepted[j] = True
                outcome.purchased.append((item, cost))
                self._enter_fallback(f"item {item} is needed", pos)
                target.accept(item)
                cand[:] = False
            elif strategy.wants_fallback and not self.fallback:
                self._enter_fallback("strategy gave up", pos)
                cand[:] = False
            i = j + 1
        return accepted

    def execute(self) -> StrategyOutcome:
        session, target = self.session, self.target
        if isinstance(session, PurchaserOrderSession) and not session.has_plan:
            session.plan(self.strategy.rng.permutation(session.universe.size))
        outcome = StrategyOutcome()
        logger.debug(f"{self.strategy.name}: run started on {session.universe}")
        while not target.complete and not session.exhausted:
            limit = min(self.block_size, self.strategy.block_limit(session.position))
            ids, costs, positions = session.next_block(limit)
            if ids.size == 0:
                break
            accepted = self._process(ids, costs, positions, outcome)
            session.record(ids, accepted)
            self.strategy.end_block()
        if not target.complete:
            target.finalize()
        session.stop()
        outcome.total_cost = math.fsum(cost for _, cost in outcome.purchased)
        outcome.success = bool(target.complete)
        outcome.fallback_used = self.fallback
        outcome.structure = target.structure()
        if not outcome.success:
            logger.error(f"{self.strategy.name}: stream ended without a complete structure")
        return outcome


def split_points(total: int, parts: int) -> Tuple[int, ...]:
    """Last position of each of ``parts`` equal classes; the final class absorbs rounding."""
    return tuple((total * i) // parts for i in range(1, parts)) + (total,)


def window_cuts(start: int, end: int, parts: int) -> Tuple[int, ...]:
    """``split_points`` over the positions (start, end]."""
    return tuple(start + c for c in split_points(end - start, parts))


def phase_of(cuts: Sequence[int], position) -> np.ndarray:
    """Index of the class holding each 1-based position."""
    return np.searchsorted(np.asarray(cuts), position, side="left")


__all__ = [
    "DEFAULT_BLOCK",
    "PurchaseRun",
    "Strategy",
    "StrategyOutcome",
    "grouped_rank",
    "phase_of",
    "split_points",
    "threshold_table",
    "window_cuts",
]
