"""
Target structures and the must-take guard.

A target tracks which items are still available (uninspected or bought)
and keeps a witness: one instance of the structure made only of available
items. Rejecting an item outside the witness can never make the structure
unreachable. Rejecting a witness item triggers a repair; when no repair
exists the item must be taken.
"""

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..graph_kernel import (
    DisjointSet,
    Matching,
    find_clique,
    find_hamilton_cycle,
    layered_search,
    max_bipartite_matching,
    trace_path,
)
from ..stream import BIPARTITE, DIRECTED, InvalidArgumentError, ItemUniverse

logger = logging.getLogger("onbuy.Target")

CLIQUE_SEARCH_BUDGET = 20000
HAMILTON_REPAIR_BUDGET = 200000
HAMILTON_COMPLETION_BUDGET = 100000


class Target:
    """
    Base target: availability, purchases and the witness.

    Subclasses implement ``_repair`` (install a new witness avoiding the
    item just made unavailable) and may implement ``_check_complete`` for
    completion tests cheaper than waiting for the witness to be bought.
    """

    structure_kind = ""

    def __init__(self, universe: ItemUniverse):
        self.universe = universe
        size = universe.size
        self.available = np.ones(size, dtype=bool)
        self.bought = np.zeros(size, dtype=bool)
        self.bought_items: List[int] = []
        self.in_witness = np.zeros(size, dtype=bool)
        self.version = 0
        self.complete = False
        self.armed = True
        self._open_witness = 0

    # witness bookkeeping

    def _witness_clear(self) -> None:
        self.in_witness[np.flatnonzero(self.in_witness)] = False
        self._open_witness = 0
        self.version += 1

    def _witness_add(self, items) -> None:
        items = np.unique(np.asarray(items, dtype=np.int64))
        items = items[~self.in_witness[items]]
        self.in_witness[items] = True
        self._open_witness += int(np.count_nonzero(~self.bought[items]))
        self.version += 1

    def _witness_remove(self, items) -> None:
        items = np.unique(np.asarray(items, dtype=np.int64))
        items = items[self.in_witness[items]]
        self.in_witness[items] = False
        self._open_witness -= int(np.count_nonzero(~self.bought[items]))
        self.version += 1

    def set_witness(self, items) -> None:
        self._witness_clear()
        self._witness_add(items)

    def witness_items(self) -> np.ndarray:
        return np.flatnonzero(self.in_witness)

    # item lifecycle

    def reject(self, ids) -> None:
        """Mark items that are not in the witness as rejected."""
        ids = np.asarray(ids, dtype=np.int64)
        self.available[ids] = False
        self._on_reject(ids)

    def accept(self, item: int) -> bool:
        """Record a purchase; returns whether the target is now complete."""
        item = int(item)
        self.bought[item] = True
        self.bought_items.append(item)
        if self.in_witness[item]:
            self._open_witness -= 1
        self._on_accept(item)
        if self.armed and not self.complete:
            self.complete = self._check_complete(item) or self._open_witness == 0
        return self.complete

    def find_replacement(self, item: int) -> bool:
        """
        Try to reject a witness item.

        The item becomes unavailable and a new witness is searched for. On
        failure the item is restored and False is returned.
        """
        item = int(item)
        self.available[item] = False
        self._on_reject(np.array([item], dtype=np.int64))
        if self._repair(item):
            if self.in_witness[item]:
                self._witness_remove([item])
            return True
        self.available[item] = True
        self._on_restore(item)
        return False

    def arm(self) -> bool:
        """Enable completion checks and run one immediately."""
        if not self.armed:
            self.armed = True
            if not self.complete and self.bought_items:
                self.complete = (
                    self._open_witness == 0
                    or self._check_complete(self.bought_items[-1])
                )
        return self.complete

    def finalize(self) -> None:
        """End-of-stream check: a fully bought witness is the structure."""
        if not self.complete and self._open_witness == 0 and self.in_witness.any():
            self.complete = True

    def structure(self) -> List[Tuple[int, int]]:
        items = self.witness_items()
        if items.size == 0:
            return []
        u, v = self.universe.decode(items)
        return list(zip(u.tolist(), v.tolist()))

    # hooks

    def _on_reject(self, ids: np.ndarray) -> None:
        pass

    def _on_restore(self, item: int) -> None:
        pass

    def _on_accept(self, item: int) -> None:
        pass

    def _check_complete(self, item: int) -> bool:
        return False

    def _repair(self, item: int) -> bool:
        raise NotImplementedError


def must_take_guard(target: Target, item: int) -> bool:
    """
    True iff rejecting ``item`` would leave the target unreachable.

    When the answer is False the rejection has been committed (and the
    witness repaired if needed).
    """
    item = int(item)
    if not target.in_witness[item]:
        target.reject(np.array([item], dtype=np.int64))
        return False
    return not target.find_replacement(item)


class GraphTarget(Target):
    """
    Target over a graph universe with dense availability matrices.

    ``avail[x, y]`` and ``bought[x, y]`` are symmetric for undirected
    universes; bipartite universes index rows by U and columns by V.
    """

    def __init__(self, universe: ItemUniverse):
        super().__init__(universe)
        n = self.side
        self.symmetric = universe.kind not in (DIRECTED, BIPARTITE)
        self.avail_adj = np.ones((n, n), dtype=bool)
        if universe.kind != BIPARTITE:
            np.fill_diagonal(self.avail_adj, False)
        self.bought_adj = np.zeros((n, n), dtype=bool)

    @property
    def side(self) -> int:
        return self.universe.n

    def coords(self, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Matrix coordinates of items and a mask of items the target uses."""
        u, v = self.universe.decode(ids)
        return u, v, np.ones(u.shape, dtype=bool)

    def item_of(self, rows, cols) -> np.ndarray:
        return self.universe.encode(rows, cols)

    def _set_adj(self, mat: np.ndarray, ids: np.ndarray, value: bool) -> None:
        u, v, ok = self.coords(ids)
        u, v = u[ok], v[ok]
        mat[u, v] = value
        if self.symmetric:
            mat[v, u] = value

    def _on_reject(self, ids: np.ndarray) -> None:
        self._set_adj(self.avail_adj, ids, False)

    def _on_restore(self, item: int) -> None:
        self._set_adj(self.avail_adj, np.array([item]), True)

    def _on_accept(self, item: int) -> None:
        self._set_adj(self.bought_adj, np.array([item]), True)

    def _edges_to_items(self, edges: Sequence[Tuple[int, int]]) -> np.ndarray:
        if not edges:
            return np.empty(0, dtype=np.int64)
        rows, cols = zip(*edges)
        return self.item_of(np.array(rows), np.array(cols))


class PathTarget(GraphTarget):
    """A path between vertices ``s`` and ``t``."""

    structure_kind = "path"

    def __init__(self, universe: ItemUniverse, s: int = 0, t: Optional[int] = None):
        super().__init__(universe)
        self.s = s
        self.t = universe.n - 1 if t is None else t
        self.components = DisjointSet(universe.n)
        self._repair(-1)

    def _path_items(self, parent: np.ndarray) -> np.ndarray:
        walk = trace_path(parent, self.t)
        return self._edges_to_items(list(zip(walk[:-1], walk[1:])))

    def _repair(self, item: int) -> bool:
        parent = layered_search(self.avail_adj, self.bought_adj, [self.s], stop_at=self.t)
        if parent[self.t] == -2:
            return False
        self.set_witness(self._path_items(parent))
        return True

    def _on_accept(self, item: int) -> None:
        super()._on_accept(item)
        u, v = self.universe.decode(item)
        self.components.union(int(u), int(v))

    def _check_complete(self, item: int) -> bool:
        if not self.components.connected(self.s, self.t):
            return False
        parent = layered_search(self.bought_adj, None, [self.s], stop_at=self.t)
        self.set_witness(self._path_items(parent))
        return True


class SpanningTreeTarget(GraphTarget):
    """
    A spanning tree.

    The witness is a tree kept as adjacency sets. Removing one of its edges
    splits it in two; the repair scans the smaller side for any available
    crossing edge, bought edges first.
    """

    structure_kind = "spanning-tree"

    def __init__(self, universe: ItemUniverse):
        super().__init__(universe)
        n = universe.n
        self.components = DisjointSet(n)
        self._tree: List[Set[int]] = [set() for _ in range(n)]
        for v in range(1, n):
            self._tree[0].add(v)
            self._tree[v].add(0)
        self.set_witness(self.item_of(np.zeros(n - 1, dtype=np.int64), np.arange(1, n)))

    def _smaller_side(self, u: int, v: int) -> np.ndarray:
        # grow both sides in lockstep and keep the one that closes first
        sides = ([u], [v])
        seen = ({u}, {v})
        heads = [0, 0]
        while True:
            for i in (0, 1):
                if heads[i] == len(sides[i]):
                    return np.array(sides[i], dtype=np.int64)
                x = sides[i][heads[i]]
                heads[i] += 1
                for y in self._tree[x]:
                    if y not in seen[i]:
                        seen[i].add(y)
                        sides[i].append(y)

    def _repair(self, item: int) -> bool:
        u, v = (int(x) for x in self.universe.decode(item))
        self._tree[u].discard(v)
        self._tree[v].discard(u)
        side = self._smaller_side(u, v)
        outside = np.ones(self.universe.n, dtype=bool)
        outside[side] = False
        for mat in (self.bought_adj, self.avail_adj):
            block = mat[np.ix_(side, np.flatnonzero(outside))]
            if block.any():
                i, j = np.unravel_index(int(np.argmax(block)), block.shape)
                a, b = int(side[i]), int(np.flatnonzero(outside)[j])
                self._tree[a].add(b)
                self._tree[b].add(a)
                self._witness_remove([item])
                self._witness_add(self.item_of(np.array([a]), np.array([b])))
                return True
        self._tree[u].add(v)
        self._tree[v].add(u)
        return False

    def _on_accept(self, item: int) -> None:
        super()._on_accept(item)
        u, v = self.universe.decode(item)
        self.components.union(int(u), int(v))

    def _check_complete(self, item: int) -> bool:
        if self.components.count != 1:
            return False
        forest = DisjointSet(self.universe.n)
        tree = []
        u, v = self.universe.decode(np.array(self.bought_items))
        for item_id, a, b in zip(self.bought_items, u.tolist(), v.tolist()):
            if forest.union(a, b):
                tree.append(item_id)
        self.set_witness(tree)
        return True


class ArborescenceTarget(GraphTarget):
    """
    A spanning arborescence of a digraph (every arc points toward the root).

    The witness is a parent array. A rejected witness arc (u, parent[u])
    is first repaired locally by re-hanging u on any vertex outside its own
    subtree; otherwise the root is moved into the unique sink strong
    component of the available digraph and the in-tree is rebuilt.
    """

    structure_kind = "arborescence"

    def __init__(self, universe: ItemUniverse):
        super().__init__(universe)
        n = universe.n
        self.components = DisjointSet(n)
        self._parent = np.zeros(n, dtype=np.int64)
        self._parent[0] = -1
        self._install_parent(self._parent)

    def _install_parent(self, parent: np.ndarray) -> None:
        self._parent = parent
        self._children: List[Set[int]] = [set() for _ in range(self.universe.n)]
        tails = np.flatnonzero(parent >= 0)
        for v in tails.tolist():
            self._children[int(parent[v])].add(v)
        self.set_witness(self.item_of(tails, parent[tails]))

    def _subtree(self, u: int) -> np.ndarray:
        out = [u]
        head = 0
        while head < len(out):
            out.extend(self._children[out[head]])
            head += 1
        return np.array(out, dtype=np.int64)

    def _sink_root(self, mat: np.ndarray) -> Optional[int]:
        graph = csr_matrix(mat)
        _, labels = connected_components(graph, directed=True, connection="strong")
        rows, cols = graph.nonzero()
        leaving = np.unique(labels[rows[labels[rows] != labels[cols]]])
        sinks = np.setdiff1d(np.unique(labels), leaving)
        if sinks.size != 1:
            return None
        return int(np.flatnonzero(labels == sinks[0])[0])

    def _in_tree(self, mat: np.ndarray, preferred: Optional[np.ndarray]) -> Optional[np.ndarray]:
        root = self._sink_root(mat)
        if root is None:
            return None
        parent = layered_search(
            mat.T, None if preferred is None else preferred.T, [root]
        )
        if np.any(parent == -2):
            return None
        return parent

    def _repair(self, item: int) -> bool:
        u, w = (int(x) for x in self.universe.decode(item))
        if self._parent[u] == w:
            sub = self._subtree(u)
            outside = np.ones(self.universe.n, dtype=bool)
            outside[sub] = False
            for mat in (self.bought_adj, self.avail_adj):
                heads = np.flatnonzero(mat[u] & outside)
                if heads.size:
                    h = int(heads[0])
                    self._children[w].discard(u)
                    self._children[h].add(u)
                    self._parent[u] = h
                    self._witness_remove([item])
                    self._witness_add(self.item_of(np.array([u]), np.array([h])))
                    return True
        parent = self._in_tree(self.avail_adj, self.bought_adj)
        if parent is None:
            return False
        logger.debug(f"Arborescence witness rebuilt at root {int(np.flatnonzero(parent == -1)[0])}")
        self._install_parent(parent)
        return True

    def _on_accept(self, item: int) -> None:
        super()._on_accept(item)
        u, v = self.universe.decode(item)
        self.components.union(int(u), int(v))

    def _check_complete(self, item: int) -> bool:
        if self.components.count != 1:
            return False
        parent = self._in_tree(self.bought_adj, None)
        if parent is None:
            return False
        self._install_parent(parent)
        return True


class CliqueTarget(GraphTarget):
    """An r-clique (r = 3 is the triangle)."""

    def __init__(self, universe: ItemUniverse, r: int = 3):
        super().__init__(universe)
        if not 3 <= r <= universe.n:
            raise InvalidArgumentError(f"Clique size r={r} must lie in [3, n]")
        self.r = r
        self.structure_kind = "triangle" if r == 3 else "clique"
        self._vertices = list(range(r))
        self._install(self._vertices)

    def _install(self, vertices: Sequence[int]) -> None:
        self._vertices = [int(v) for v in vertices]
        iu, ju = np.triu_indices(len(self._vertices), k=1)
        vs = np.array(self._vertices)
        self.set_witness(self.item_of(vs[iu], vs[ju]))

    def _repair(self, item: int) -> bool:
        found, _ = find_clique(
            self.avail_adj, self.r, preferred=self.bought_adj, budget=CLIQUE_SEARCH_BUDGET
        )
        if found is None:
            return False
        self._install(found)
        return True

    def _check_complete(self, item: int) -> bool:
        u, v = (int(x) for x in self.universe.decode(item))
        common = np.flatnonzero(self.bought_adj[u] & self.bought_adj[v])
        if common.size < self.r - 2:
            return False
        if self.r == 3:
            self._install([u, v, int(common[0])])
            return True
        sub = self.bought_adj[np.ix_(common, common)]
        found, _ = find_clique(sub, self.r - 2, budget=CLIQUE_SEARCH_BUDGET)
        if found is None:
            return False
        self._install([u, v] + [int(common[i]) for i in found])
        return True


class WedgeTarget(GraphTarget):
    """
    ``ell`` paths of length two with pairwise distinct endpoint pairs.

    The witness is a star whose centre has enough available edges; once no
    star suffices the witness widens to every available edge and each hit
    recounts the distinct endpoint pairs of the available graph exactly.
    """

    structure_kind = "paths-len2"

    def __init__(self, universe: ItemUniverse, ell: int):
        super().__init__(universe)
        if ell < 1:
            raise InvalidArgumentError(f"ell must be >= 1, got {ell}")
        self.ell = int(ell)
        self.exact_mode = False
        self._pairs: Dict[Tuple[int, int], int] = {}
        if not self._repair(-1):
            raise InvalidArgumentError(f"K_{universe.n} has fewer than {ell} wedges")

    def _star(self) -> bool:
        deg = self.avail_adj.sum(axis=1) * (self.universe.n + 1)
        centre = int(np.argmax(deg + self.bought_adj.sum(axis=1)))
        leaves = np.flatnonzero(self.avail_adj[centre])
        need = int(np.ceil((1.0 + np.sqrt(1.0 + 8.0 * self.ell)) / 2.0))
        if leaves.size < need:
            return False
        preferred = self.bought_adj[centre, leaves]
        leaves = np.concatenate((leaves[preferred], leaves[~preferred]))[:need]
        self.set_witness(self.item_of(np.full(need, centre), leaves))
        return True

    def _distinct_pairs(self) -> int:
        adj = csr_matrix(self.avail_adj.astype(np.int32))
        two = (adj @ adj).tocoo()
        return int(np.count_nonzero(two.row < two.col))

    def _repair(self, item: int) -> bool:
        if self._star():
            self.exact_mode = False
            return True
        if self._distinct_pairs() < self.ell:
            return False
        if not self.exact_mode:
            logger.debug("Wedge witness switched to exact pair counting")
        self.exact_mode = True
        self.set_witness(np.flatnonzero(self.available))
        return True

    def _check_complete(self, item: int) -> bool:
        u, v = (int(x) for x in self.universe.decode(item))
        for centre, tip in ((u, v), (v, u)):
            for w in np.flatnonzero(self.bought_adj[centre]).tolist():
                if w != tip:
                    self._pairs.setdefault((min(w, tip), max(w, tip)), centre)
        if len(self._pairs) < self.ell:
            return False
        edges = set()
        for (a, b), c in list(self._pairs.items())[: self.ell]:
            edges.add((min(a, c), max(a, c)))
            edges.add((min(b, c), max(b, c)))
        self.set_witness(self._edges_to_items(sorted(edges)))
        return True


class BipartiteMatchingTarget(GraphTarget):
    """
    A perfect matching between two sides of size ``side``.

    On the bipartite universe rows are U and columns V. On the complete
    graph (``crossing=True``) only edges between [0, m) and [m, 2m) count
    and are mapped to (a, b - m).
    """

    structure_kind = "perfect-matching"

    def __init__(self, universe: ItemUniverse, crossing: bool = False):
        self.crossing = crossing
        if crossing and universe.n % 2:
            raise InvalidArgumentError(f"Perfect matching needs even n, got {universe.n}")
        super().__init__(universe)
        self.symmetric = False
        m = self.side
        self.avail_adj[:] = True
        self.bought_lists: List[List[int]] = [[] for _ in range(m)]
        self.deg_u = np.zeros(m, dtype=np.int64)
        self.deg_v = np.zeros(m, dtype=np.int64)
        self._bought_matching = Matching(
            mate_u=np.full(m, -1, dtype=np.int64), mate_v=np.full(m, -1, dtype=np.int64)
        )
        self.mate_u = np.arange(m, dtype=np.int64)
        self.mate_v = np.arange(m, dtype=np.int64)
        self._install()

    @property
    def side(self) -> int:
        return self.universe.n // 2 if self.crossing else self.universe.n

    def coords(self, ids):
        u, v = self.universe.decode(ids)
        if not self.crossing:
            return u, v, np.ones(u.shape, dtype=bool)
        m = self.side
        ok = (u < m) & (v >= m)
        return np.where(ok, u, 0), np.where(ok, v - m, 0), ok

    def item_of(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.crossing:
            return self.universe.encode(rows, cols + self.side)
        return self.universe.encode(rows, cols)

    def _install(self) -> None:
        m = self.side
        self.set_witness(self.item_of(np.arange(m), self.mate_u))

    def _augment(self, root: int, adj: np.ndarray) -> bool:
        m = self.side
        seen_v = np.zeros(m, dtype=bool)
        parent_v = np.full(m, -1, dtype=np.int64)
        frontier = np.array([root], dtype=np.int64)
        while frontier.size:
            reach = adj[frontier] & ~seen_v
            cols = np.flatnonzero(reach.any(axis=0))
            if cols.size == 0:
                return False
            parent_v[cols] = frontier[np.argmax(reach[:, cols], axis=0)]
            seen_v[cols] = True
            free = cols[self.mate_v[cols] < 0]
            if free.size:
                v = int(free[0])
                while True:
                    u = int(parent_v[v])
                    nxt = int(self.mate_u[u])
                    self.mate_u[u] = v
                    self.mate_v[v] = u
                    if u == root:
                        return True
                    v = nxt
            frontier = self.mate_v[cols]
        return False

    def _repair(self, item: int) -> bool:
        u, v, ok = self.coords(np.array([item]))
        if not ok[0]:
            return True
        u, v = int(u[0]), int(v[0])
        if self.mate_u[u] != v:
            return True
        self.mate_u[u] = -1
        self.mate_v[v] = -1
        for adj in (self.bought_adj, self.avail_adj):
            if self._augment(u, adj):
                self._install()
                return True
        self.mate_u[u] = v
        self.mate_v[v] = u
        return False

    def _on_accept(self, item: int) -> None:
        super()._on_accept(item)
        u, v, ok = self.coords(np.array([item]))
        if ok[0]:
            u, v = int(u[0]), int(v[0])
            self.bought_lists[u].append(v)
            self.deg_u[u] += 1
            self.deg_v[v] += 1

    def _check_complete(self, item: int) -> bool:
        if self.deg_u.min() == 0 or self.deg_v.min() == 0:
            return False
        matching = max_bipartite_matching(
            self.bought_lists, self.side, initial=self._bought_matching
        )
        self._bought_matching = matching
        if not matching.perfect:
            return False
        self.mate_u = matching.mate_u.copy()
        self.mate_v = matching.mate_v.copy()
        self._install()
        return True


class HamiltonTarget(GraphTarget):
    """
    A Hamilton cycle (directed when the universe is directed).

    Completion is only certified while ``armed``; k-out strategies arm the
    target once every planned choice has been made.
    """

    def __init__(self, universe: ItemUniverse):
        super().__init__(universe)
        self.directed = universe.kind == DIRECTED
        self.structure_kind = "hamilton-cycle"
        n = universe.n
        self._tour = list(range(n))
        self._install(self._tour)

    def _install(self, tour: Sequence[int]) -> None:
        self._tour = [int(v) for v in tour]
        tails = np.array(self._tour)
        heads = np.roll(tails, -1)
        self.set_witness(self.item_of(tails, heads))

    def _prefer(self) -> List[Set[int]]:
        return [set(np.flatnonzero(row).tolist()) for row in self.bought_adj]

    def _repair(self, item: int) -> bool:
        result = find_hamilton_cycle(
            self.avail_adj,
            self.universe.n,
            budget=HAMILTON_REPAIR_BUDGET,
            directed=self.directed,
            prefer=self._prefer(),
        )
        if not result.found:
            logger.debug(f"Hamilton witness repair failed ({result.status})")
            return False
        self._install(result.cycle)
        return True

    def _check_complete(self, item: int) -> bool:
        result = find_hamilton_cycle(
            self.bought_adj,
            self.universe.n,
            budget=HAMILTON_COMPLETION_BUDGET,
            directed=self.directed,
        )
        if not result.found:
            return False
        self._install(result.cycle)
        return True

    def structure(self) -> List[Tuple[int, int]]:
        if self.directed:
            return list(zip(self._tour, self._tour[1:] + self._tour[:1]))
        return super().structure()
