"""
Adversaries for the adversarially ordered model.

An adversary only sees which items were presented and which of them were
bought; it never sees a cost.
"""

import logging
from typing import Optional

import numpy as np

from ..stream import (
    UNDIRECTED,
    UNIVERSE_KINDS,
    Adversary,
    AdversaryView,
    InvalidArgumentError,
)

logger = logging.getLogger("onbuy.Adversary")

_EMPTY = np.empty(0, dtype=np.int64)


class IdentityAdversary(Adversary):
    """Presents every item in id order, as one group."""

    name = "identity"
    kinds = UNIVERSE_KINDS

    def next_group(self, view: AdversaryView) -> np.ndarray:
        return np.flatnonzero(~view.inspected)


class EndpointsLastAdversary(Adversary):
    """
    Hold back the edges at the two path endpoints.

    Every edge inside ``[1, n-2]`` comes first and the edges meeting vertex
    0 or vertex n-1 come last, each group in id order, so a path strategy
    has to build both of its trees before it sees a single edge it can
    attach them with. The order ignores the session RNG.
    """

    name = "endpoints-last"
    kinds = (UNDIRECTED,)

    def reset(self, universe, rng) -> None:
        super().reset(universe, rng)
        u, v = universe.decode(np.arange(universe.size))
        last = universe.n - 1
        outer = (u == 0) | (v == 0) | (u == last) | (v == last)
        self._groups = [
            np.flatnonzero(~outer),
            np.flatnonzero(outer),
        ]

    def next_group(self, view: AdversaryView) -> np.ndarray:
        while self._groups:
            group = self._groups.pop(0)
            group = group[~view.inspected[group]]
            if group.size:
                return group
        return _EMPTY


class VertexSweepAdversary(Adversary):
    """
    Sweep the vertices, starving triangles of closing edges.

    For v = 0, 1, ...: present the unseen edges at v, then the unseen edges
    inside the set A of v's neighbours the purchaser just bought an edge to.
    Any triangle through v needs an edge inside A, and those are shown only
    after every edge at v has been decided.
    """

    name = "vertex-sweep"
    kinds = (UNDIRECTED,)

    def reset(self, universe, rng) -> None:
        super().reset(universe, rng)
        self._vertex = 0
        self._star: Optional[np.ndarray] = None

    def _inside(self, v: int, view: AdversaryView) -> np.ndarray:
        star = self._star
        bought = np.fromiter(
            (view.accepted.get(int(i), False) for i in star), dtype=bool, count=star.size
        )
        if np.count_nonzero(bought) < 2:
            return _EMPTY
        a, b = self.universe.decode(star[bought])
        nbrs = np.where(a == v, b, a)
        rows, cols = np.triu_indices(nbrs.size, k=1)
        items = self.universe.encode(nbrs[rows], nbrs[cols])
        logger.debug(f"vertex-sweep: {nbrs.size} bought neighbours of {v}")
        return items[~view.inspected[items]]

    def next_group(self, view: AdversaryView) -> np.ndarray:
        while self._vertex < self.universe.n:
            v = self._vertex
            if self._star is None:
                star = self.universe.incident(v)
                self._star = star[~view.inspected[star]]
                if self._star.size:
                    return self._star
                continue
            inside = self._inside(v, view)
            self._star = None
            self._vertex += 1
            if inside.size:
                return inside
        return _EMPTY


ADVERSARIES = {
    cls.name: cls
    for cls in (IdentityAdversary, EndpointsLastAdversary, VertexSweepAdversary)
}


def adversary_shortest_path(n: int) -> EndpointsLastAdversary:
    """Adversary that holds back the edges at vertices 0 and n-1."""
    if n < 2:
        raise InvalidArgumentError(f"n must be >= 2, got {n}")
    return EndpointsLastAdversary()


def adversary_triangle(n: int) -> VertexSweepAdversary:
    """Adversary that shows each vertex star before any edge closing a triangle on it."""
    if n < 3:
        raise InvalidArgumentError(f"n must be >= 3, got {n}")
    return VertexSweepAdversary()


def make_adversary(name: str) -> Adversary:
    """Instantiate a registered adversary by name."""
    if name not in ADVERSARIES:
        logger.error(f"Unknown adversary {name!r}")
        raise InvalidArgumentError(
            f"Unknown adversary {name!r}; choose from {sorted(ADVERSARIES)}"
        )
    return ADVERSARIES[name]()
