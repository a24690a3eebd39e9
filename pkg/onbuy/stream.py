"""
Item universes and inspection sessions.

Every purchasable item carries an independent uniform [0, 1] cost that is
revealed only when the item is inspected. Sessions drive the inspection
order under the purchaser-ordered (POM), randomly-ordered (ROM) and
adversarially-ordered (AOM) models.
"""

from dataclasses import dataclass
import logging
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger("onbuy.Stream")

ABSTRACT = "abstract-items"
UNDIRECTED = "undirected-edges"
DIRECTED = "directed-arcs"
BIPARTITE = "bipartite-edges"
UNIVERSE_KINDS = (ABSTRACT, UNDIRECTED, DIRECTED, BIPARTITE)

# Substream purposes keyed under one (seed, stream-id) pair
PURPOSE_ORDER = 0
PURPOSE_COST = 1
PURPOSE_STRATEGY = 2
PURPOSE_ADVERSARY = 3

_UINT64_MAX = 2**64 - 1


class InvalidArgumentError(ValueError):
    """Raised when an operation receives arguments outside its domain."""


class ProtocolViolationError(RuntimeError):
    """Raised when a session is driven against its inspection protocol."""


class ItemUniverse:
    """
    The set of purchasable items and its id <-> edge mapping.

    Vertices are 0-based. Undirected edge (u, v), u < v, has id
    ``u*n - u*(u+1)/2 + (v-u-1)``; arc (tail, head) has id
    ``tail*(n-1) + head'`` where ``head'`` skips the tail; bipartite edge
    (u, v) with u in U and v in V has id ``u*n + v``.

    Parameters:
        kind (str): One of ``UNIVERSE_KINDS``
        n (int): Vertex count (graph kinds) or item count (abstract)
    """

    def __init__(self, kind: str, n: int):
        if kind not in UNIVERSE_KINDS:
            raise InvalidArgumentError(
                f"Unknown universe kind {kind!r}; choose from {UNIVERSE_KINDS}"
            )
        self.kind = kind
        self.n = int(n)
        if kind == ABSTRACT:
            self.size = self.n
        elif kind == UNDIRECTED:
            self.size = self.n * (self.n - 1) // 2
        elif kind == DIRECTED:
            self.size = self.n * (self.n - 1)
        else:
            self.size = self.n * self.n
        if kind == UNDIRECTED:
            # first id of every row u
            lengths = np.arange(self.n - 1, -1, -1, dtype=np.int64)
            self._row_start = np.concatenate(([0], np.cumsum(lengths)[:-1]))

    @property
    def is_graph(self) -> bool:
        return self.kind != ABSTRACT

    def __repr__(self) -> str:
        return f"ItemUniverse(kind={self.kind!r}, n={self.n}, size={self.size})"

    def encode(self, u, v) -> np.ndarray:
        """Map endpoint arrays to item ids (vectorized)."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        n = self.n
        if self.kind == UNDIRECTED:
            lo = np.minimum(u, v)
            hi = np.maximum(u, v)
            return lo * n - lo * (lo + 1) // 2 + (hi - lo - 1)
        if self.kind == DIRECTED:
            return u * (n - 1) + np.where(v < u, v, v - 1)
        if self.kind == BIPARTITE:
            return u * n + v
        raise InvalidArgumentError("Abstract items have no endpoints")

    def decode(self, ids) -> Tuple[np.ndarray, np.ndarray]:
        """Map item ids to endpoint arrays (vectorized)."""
        ids = np.asarray(ids, dtype=np.int64)
        n = self.n
        if self.kind == UNDIRECTED:
            u = np.searchsorted(self._row_start, ids, side="right") - 1
            v = ids - self._row_start[u] + u + 1
            return u, v
        if self.kind == DIRECTED:
            tail, r = np.divmod(ids, n - 1)
            return tail, r + (r >= tail)
        if self.kind == BIPARTITE:
            return np.divmod(ids, n)
        raise InvalidArgumentError("Abstract items have no endpoints")

    def incident(self, vertex: int, side: str = "any") -> np.ndarray:
        """
        Item ids touching ``vertex``.

        ``side`` selects "out"/"in" arcs for digraphs and "u"/"v" for the
        bipartite universe; "any" returns every incident item.
        """
        n = self.n
        others = np.arange(n, dtype=np.int64)
        if self.kind == UNDIRECTED:
            others = others[others != vertex]
            return self.encode(np.full_like(others, vertex), others)
        if self.kind == DIRECTED:
            others = others[others != vertex]
            out_ids = self.encode(np.full_like(others, vertex), others)
            in_ids = self.encode(others, np.full_like(others, vertex))
            if side == "out":
                return out_ids
            if side == "in":
                return in_ids
            return np.concatenate((out_ids, in_ids))
        if self.kind == BIPARTITE:
            if side == "v":
                return self.encode(others, np.full_like(others, vertex))
            return self.encode(np.full_like(others, vertex), others)
        raise InvalidArgumentError("Abstract items have no incidence")


def make_universe(kind: str, size: int) -> ItemUniverse:
    """
    Build an item universe.

    Args:
        kind: One of ``UNIVERSE_KINDS``
        size: n for graph kinds (n >= 2), N for abstract items (N >= 1)

    Raises:
        InvalidArgumentError: If the size is below the minimum
    """
    minimum = 1 if kind == ABSTRACT else 2
    if int(size) < minimum:
        logger.error(f"Universe {kind} needs size >= {minimum}, got {size}")
        raise InvalidArgumentError(
            f"Universe {kind} needs size >= {minimum}, got {size}"
        )
    universe = ItemUniverse(kind, int(size))
    logger.debug(f"Created {universe}")
    return universe


@dataclass(frozen=True)
class InspectionEvent:
    item: int
    cost: float
    position: int  # 1-based


@dataclass(frozen=True)
class OrderModel:
    """
    Inspection order model: ``pom``, ``rom`` or ``aom`` with an adversary id.

    Example Usage:
        OrderModel.parse("rom")
        OrderModel.parse("aom:vertex-sweep")
    """

    variant: str
    adversary: Optional[str] = None

    def __post_init__(self):
        if self.variant not in ("pom", "rom", "aom"):
            raise InvalidArgumentError(f"Unknown order model {self.variant!r}")
        if self.variant == "aom" and not self.adversary:
            raise InvalidArgumentError("AOM requires an adversary identifier")
        if self.variant != "aom" and self.adversary:
            raise InvalidArgumentError(f"{self.variant} takes no adversary")

    @classmethod
    def parse(cls, text: str) -> "OrderModel":
        variant, _, adversary = text.strip().lower().partition(":")
        return cls(variant, adversary or None)

    def __str__(self) -> str:
        return f"aom:{self.adversary}" if self.variant == "aom" else self.variant


@dataclass(frozen=True)
class RngHandle:
    """
    Deterministic random source keyed on (seed, stream-id).

    Each purpose (order, cost, strategy, adversary) gets an independent
    Philox substream, so identical handles reproduce identical sessions and
    distinct stream ids never share state.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for label, value in (("seed", self.seed), ("stream_id", self.stream_id)):
            if not 0 <= int(value) <= _UINT64_MAX:
                raise InvalidArgumentError(f"{label} must be a 64-bit unsigned int")

    def generator(self, purpose: int) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.seed), spawn_key=(int(self.stream_id), int(purpose))
        )
        return np.random.Generator(np.random.Philox(seq))


class InspectionSession:
    """
    Common session state: inspection mask, position counter and cost source.

    Subclasses decide which items come next. Blocks are served through
    ``next_block(limit)``; the purchaser reports its decisions for every
    served block with ``record`` before asking for the next one.
    """

    model = "fixed"

    def __init__(self, universe: ItemUniverse, rng: RngHandle):
        self.universe = universe
        self.rng = rng
        self.position = 0
        self.inspected = np.zeros(universe.size, dtype=bool)
        self._costs = rng.generator(PURPOSE_COST)
        self._stopped = False
        self._pending_record = False

    @property
    def remaining(self) -> int:
        return self.universe.size - self.position

    @property
    def exhausted(self) -> bool:
        return self._stopped or self.position >= self.universe.size

    def stop(self) -> None:
        """Terminate the session early; no further items are served."""
        self._stopped = True

    def _serve(self, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if ids.size and (self.inspected[ids].any() or np.unique(ids).size != ids.size):
            logger.error("Attempted to present an already-inspected item")
            raise ProtocolViolationError("Item presented more than once")
        self.inspected[ids] = True
        costs = self._costs.random(ids.size)
        positions = np.arange(self.position + 1, self.position + 1 + ids.size)
        self.position += ids.size
        self._pending_record = ids.size > 0
        return ids, costs, positions

    def _next_ids(self, limit: int) -> np.ndarray:
        raise NotImplementedError

    def next_block(self, limit: int = 4096):
        """
        Serve the next items.

        Returns:
            (ids, costs, positions) arrays; empty arrays once exhausted
        """
        if self._pending_record:
            raise ProtocolViolationError("Previous block was not recorded")
        if self.exhausted:
            empty = np.empty(0, dtype=np.int64)
            return empty, np.empty(0), empty
        ids = np.asarray(self._next_ids(max(1, int(limit))), dtype=np.int64)
        return self._serve(ids)

    def record(self, ids: Sequence[int], accepted: Sequence[bool]) -> None:
        """Report accept/reject decisions for the last served block."""
        self._pending_record = False

    def __iter__(self) -> Iterator[InspectionEvent]:
        while not self.exhausted:
            ids, costs, positions = self.next_block(1024)
            self.record(ids, np.zeros(ids.size, dtype=bool))
            for item, cost, pos in zip(ids, costs, positions):
                yield InspectionEvent(int(item), float(cost), int(pos))


class RandomOrderSession(InspectionSession):
    """
    ROM session: a uniformly random permutation of all items.

    The permutation is drawn up front from the order substream; costs are
    drawn lazily, block by block, as items are inspected.
    """

    model = "rom"

    def __init__(self, universe: ItemUniverse, rng: RngHandle):
        super().__init__(universe, rng)
        self._order = rng.generator(PURPOSE_ORDER).permutation(universe.size)

    def _next_ids(self, limit: int) -> np.ndarray:
        return self._order[self.position : self.position + limit]


class PurchaserOrderSession(InspectionSession):
    """
    POM session: the purchaser names each item to inspect.

    ``inspect(item)`` is the interactive interface. ``plan(order)`` installs
    a purchaser-chosen order that ``next_block`` then follows, which is how
    order-oblivious strategies run in POM by self-randomizing.
    """

    model = "pom"

    def __init__(self, universe: ItemUniverse, rng: RngHandle):
        super().__init__(universe, rng)
        self._plan: Optional[np.ndarray] = None
        self._plan_pos = 0

    def inspect(self, item: int) -> float:
        item = int(item)
        if not 0 <= item < self.universe.size:
            raise InvalidArgumentError(f"Item {item} outside universe")
        if self.inspected[item]:
            logger.error(f"Item {item} requested twice")
            raise ProtocolViolationError(f"Item {item} was already inspected")
        self._pending_record = False
        _, costs, _ = self._serve(np.array([item], dtype=np.int64))
        self._pending_record = False
        return float(costs[0])

    @property
    def has_plan(self) -> bool:
        return self._plan is not None

    def plan(self, order: np.ndarray) -> None:
        self._plan = np.asarray(order, dtype=np.int64)
        self._plan_pos = 0

    def _next_ids(self, limit: int) -> np.ndarray:
        if self._plan is None:
            raise ProtocolViolationError("POM block access needs plan(order) first")
        # skip planned items that were inspected interactively
        chunk: List[np.ndarray] = []
        taken = 0
        while taken < limit and self._plan_pos < self._plan.size:
            part = self._plan[self._plan_pos : self._plan_pos + (limit - taken)]
            self._plan_pos += part.size
            part = part[~self.inspected[part]]
            chunk.append(part)
            taken += part.size
        return np.concatenate(chunk) if chunk else np.empty(0, dtype=np.int64)


class AdversaryView:
    """What an adversary may see: presented items and purchase decisions."""

    def __init__(self, universe: ItemUniverse):
        self.universe = universe
        self.presented: List[int] = []
        self.accepted: Dict[int, bool] = {}
        self.inspected = np.zeros(universe.size, dtype=bool)


class Adversary:
    """
    Base class for AOM adversaries.

    ``next_group(view)`` returns the next items to present. Items in one
    group are presented without consulting decisions made inside the group;
    the view is refreshed between groups. An empty group ends the session.
    """

    name = "adversary"
    kinds: Tuple[str, ...] = ()

    def reset(self, universe: ItemUniverse, rng: np.random.Generator) -> None:
        self.universe = universe
        self.rng = rng

    def next_group(self, view: AdversaryView) -> np.ndarray:
        raise NotImplementedError


class AdversaryOrderSession(InspectionSession):
    """AOM session: an adaptive adversary picks the order from history only."""

    model = "aom"

    def __init__(self, universe: ItemUniverse, adversary: Adversary, rng: RngHandle):
        super().__init__(universe, rng)
        if universe.kind not in adversary.kinds:
            logger.error(f"Adversary {adversary.name} does not serve {universe.kind}")
            raise InvalidArgumentError(
                f"Adversary {adversary.name!r} is not registered for {universe.kind}"
            )
        self.adversary = adversary
        self.view = AdversaryView(universe)
        adversary.reset(universe, rng.generator(PURPOSE_ADVERSARY))
        self._group = np.empty(0, dtype=np.int64)

    def _next_ids(self, limit: int) -> np.ndarray:
        if self._group.size == 0:
            group = np.asarray(self.adversary.next_group(self.view), dtype=np.int64)
            if group.size == 0:
                logger.error("Adversary ended early with items still unpresented")
                raise ProtocolViolationError("Adversary stopped before presenting all items")
            if self.inspected[group].any():
                logger.error(f"Adversary {self.adversary.name} re-presented an item")
                raise ProtocolViolationError("Adversary presented an inspected item")
            self._group = group
        ids, self._group = self._group[:limit], self._group[limit:]
        return ids

    def record(self, ids: Sequence[int], accepted: Sequence[bool]) -> None:
        super().record(ids, accepted)
        ids = np.asarray(ids, dtype=np.int64)
        self.view.inspected[ids] = True
        self.view.presented.extend(int(i) for i in ids)
        for item, flag in zip(ids, accepted):
            self.view.accepted[int(item)] = bool(flag)


def rom_session(universe: ItemUniverse, rng: RngHandle) -> RandomOrderSession:
    return RandomOrderSession(universe, rng)


def pom_session(universe: ItemUniverse, rng: RngHandle) -> PurchaserOrderSession:
    return PurchaserOrderSession(universe, rng)


def aom_session(
    universe: ItemUniverse, adversary: Adversary, rng: RngHandle
) -> AdversaryOrderSession:
    return AdversaryOrderSession(universe, adversary, rng)


def latent_survival(x, m: float) -> np.ndarray:
    """Survival function ``(1-x)^(1/m)`` of one latent min-of-m component."""
    return np.power(1.0 - np.asarray(x, dtype=float), 1.0 / m)


def decompose_min_of_m(cost: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """
    Split a uniform cost into m latent values whose minimum is the cost.

    Index 0 holds the cost itself; the other m-1 values are independent
    draws from the latent law conditioned on being at least ``cost``. The
    latent law has survival ``(1-x)^(1/m)``, so the minimum of m iid copies
    is uniform on [0, 1].

    Raises:
        InvalidArgumentError: If cost is outside [0, 1] or m < 1
    """
    return decompose_min_of_m_batch(np.array([cost], dtype=float), m, rng)[0]


def decompose_min_of_m_batch(
    costs: np.ndarray, m: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized ``decompose_min_of_m``; returns shape (len(costs), m)."""
    costs = np.asarray(costs, dtype=float)
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    if costs.size and (costs.min() < 0.0 or costs.max() > 1.0):
        raise InvalidArgumentError("Costs must lie in [0, 1]")
    out = np.empty((costs.size, m))
    out[:, 0] = costs
    if m > 1:
        # invert S(z) = U * S(cost)
        u = rng.random((costs.size, m - 1))
        out[:, 1:] = 1.0 - np.power(u, m) * (1.0 - costs)[:, None]
        np.maximum(out[:, 1:], costs[:, None], out=out[:, 1:])
    return out
