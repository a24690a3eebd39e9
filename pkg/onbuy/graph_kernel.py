"""
Graph bookkeeping and offline combinatorial subroutines.

Everything here is single-session state: strategies own their instances.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger("onbuy.GraphKernel")

DEFAULT_HAMILTON_BUDGET = 10**7
EXHAUSTIVE_LIMIT = 12


class DisjointSet:
    """Union by size with path compression over vertices 0..n-1."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return int(root)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def labels(self) -> np.ndarray:
        """Root label of every vertex (vectorized full compression)."""
        parent = self.parent
        while True:
            grand = parent[parent]
            if np.array_equal(grand, parent):
                return parent.copy()
            parent[:] = grand

    def component_size(self, x: int) -> int:
        return int(self.size[self.find(x)])


class PurchasedGraph:
    """
    Incremental graph (or digraph) of accepted edges.

    Components are tracked with a disjoint-set forest; for digraphs these
    are the weak components.
    """

    def __init__(self, n: int, directed: bool = False):
        self.n = n
        self.directed = directed
        self.edges: List[Tuple[int, int, float]] = []
        self.out_adj: List[Set[int]] = [set() for _ in range(n)]
        self.in_adj: List[Set[int]] = self.out_adj if not directed else [set() for _ in range(n)]
        self.components = DisjointSet(n)
        self._total = 0.0
        self._comp = 0.0  # Neumaier compensation

    def add_edge(self, u: int, v: int, cost: float) -> "PurchasedGraph":
        if u == v:
            raise ValueError(f"Self-loop ({u}, {v}) is not an edge")
        self.edges.append((u, v, cost))
        self.out_adj[u].add(v)
        self.in_adj[v].add(u)
        self.components.union(u, v)
        t = self._total + cost
        if abs(self._total) >= abs(cost):
            self._comp += (self._total - t) + cost
        else:
            self._comp += (cost - t) + self._total
        self._total = t
        return self

    @property
    def total_cost(self) -> float:
        return self._total + self._comp

    def same_component(self, u: int, v: int) -> bool:
        return self.components.connected(u, v)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.out_adj[u]

    def neighbors(self, u: int) -> Set[int]:
        return self.out_adj[u]

    def degree(self, u: int) -> int:
        return len(self.out_adj[u])

    @property
    def component_count(self) -> int:
        return self.components.count

    def edge_list(self) -> List[Tuple[int, int]]:
        return [(u, v) for u, v, _ in self.edges]

    def adjacency(self) -> List[Set[int]]:
        return self.out_adj


def add_edge(graph: PurchasedGraph, u: int, v: int, cost: float) -> PurchasedGraph:
    return graph.add_edge(u, v, cost)


def same_component(graph: PurchasedGraph, u: int, v: int) -> bool:
    return graph.same_component(u, v)


# ---------------------------------------------------------------------------
# Bipartite matching
# ---------------------------------------------------------------------------


@dataclass
class Matching:
    """Maximum matching between U = 0..n-1 and V = 0..n-1."""

    mate_u: np.ndarray
    mate_v: np.ndarray

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.mate_u >= 0))

    @property
    def perfect(self) -> bool:
        return self.size == self.mate_u.size

    def pairs(self) -> List[Tuple[int, int]]:
        return [(int(u), int(v)) for u, v in enumerate(self.mate_u) if v >= 0]


def _as_lists(adj) -> List[List[int]]:
    if isinstance(adj, np.ndarray) and adj.ndim == 2:
        return [list(np.flatnonzero(row)) for row in adj]
    return [list(nbrs) for nbrs in adj]


def max_bipartite_matching(
    adj, n: int, initial: Optional[Matching] = None
) -> Matching:
    """
    Maximum-cardinality matching by Hopcroft-Karp layered augmentation.

    Args:
        adj: For every u in U the iterable of its neighbours in V, or an
            n x n boolean matrix
        n: Side size
        initial: Optional matching to warm-start from (must be valid in adj)
    """
    lists = _as_lists(adj)
    mate_u = np.full(n, -1, dtype=np.int64) if initial is None else initial.mate_u.copy()
    mate_v = np.full(n, -1, dtype=np.int64) if initial is None else initial.mate_v.copy()
    inf = n + 1
    dist = np.zeros(n, dtype=np.int64)

    def bfs() -> bool:
        queue = [u for u in range(n) if mate_u[u] < 0]
        dist[:] = inf
        dist[queue] = 0
        found = False
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for v in lists[u]:
                w = mate_v[v]
                if w < 0:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(root: int) -> bool:
        # iterative DFS along the BFS layering
        stack = [(root, iter(lists[root]))]
        trail: List[Tuple[int, int]] = []
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                w = mate_v[v]
                if w < 0:
                    trail.append((u, v))
                    for uu, vv in trail:
                        mate_u[uu] = vv
                        mate_v[vv] = uu
                    return True
                if dist[w] == dist[u] + 1:
                    trail.append((u, v))
                    stack.append((w, iter(lists[w])))
                    advanced = True
                    break
            if not advanced:
                dist[u] = inf
                stack.pop()
                if trail:
                    trail.pop()
        return False

    while bfs():
        for u in range(n):
            if mate_u[u] < 0:
                dfs(u)
    return Matching(mate_u=mate_u, mate_v=mate_v)


def has_augmenting_path(adj, matching: Matching) -> bool:
    """Independent alternating BFS used to certify maximality."""
    lists = _as_lists(adj)
    n = matching.mate_u.size
    seen_v = np.zeros(n, dtype=bool)
    frontier = [u for u in range(n) if matching.mate_u[u] < 0]
    seen_u = np.zeros(n, dtype=bool)
    seen_u[frontier] = True
    while frontier:
        nxt = []
        for u in frontier:
            for v in lists[u]:
                if seen_v[v] or matching.mate_u[u] == v:
                    continue
                seen_v[v] = True
                w = matching.mate_v[v]
                if w < 0:
                    return True
                if not seen_u[w]:
                    seen_u[w] = True
                    nxt.append(int(w))
        frontier = nxt
    return False


# ---------------------------------------------------------------------------
# Hamilton cycles
# ---------------------------------------------------------------------------


@dataclass
class HamiltonResult:
    cycle: Optional[List[int]]
    status: str  # "found", "absent" or "cutoff"
    nodes: int = 0

    @property
    def found(self) -> bool:
        return self.cycle is not None


def _adjacency_sets(adj, n: int, directed: bool) -> Tuple[List[Set[int]], List[Set[int]]]:
    if isinstance(adj, np.ndarray) and adj.ndim == 2:
        out_sets = [set(map(int, np.flatnonzero(row))) for row in adj]
    else:
        out_sets = [set(map(int, nbrs)) for nbrs in adj]
    for v in range(n):
        out_sets[v].discard(v)
    if not directed:
        for u in range(n):
            for v in list(out_sets[u]):
                out_sets[v].add(u)
        return out_sets, out_sets
    in_sets: List[Set[int]] = [set() for _ in range(n)]
    for u in range(n):
        for v in out_sets[u]:
            in_sets[v].add(u)
    return out_sets, in_sets


def _strongly_connected(out_sets: List[Set[int]], n: int, directed: bool) -> bool:
    rows = [u for u in range(n) for _ in out_sets[u]]
    cols = [v for u in range(n) for v in out_sets[u]]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(
        graph, directed=directed, connection="strong" if directed else "weak"
    )
    return count == 1


def find_hamilton_cycle(
    adj,
    n: int,
    budget: int = DEFAULT_HAMILTON_BUDGET,
    directed: bool = False,
    prefer: Optional[Sequence[Set[int]]] = None,
) -> HamiltonResult:
    """
    Backtracking Hamilton-cycle search.

    Extensions are tried preferred-edges first, then by ascending number of
    still usable neighbours. A vertex left with fewer than two usable
    neighbours (one in and one out for digraphs) prunes the branch. Graphs
    with n <= 12 are searched exhaustively regardless of ``budget``.

    Args:
        adj: Neighbour (out-neighbour) iterables per vertex or a boolean matrix
        n: Vertex count
        budget: Maximum number of search nodes
        directed: Treat ``adj`` as a digraph
        prefer: Optional per-vertex sets of edges to try first

    Returns:
        HamiltonResult with status "found", "absent" (proven) or "cutoff"
    """
    if n < 3 and not (directed and n == 2):
        return HamiltonResult(None, "absent")
    out_sets, in_sets = _adjacency_sets(adj, n, directed)
    out_deg = np.array([len(s) for s in out_sets])
    in_deg = np.array([len(s) for s in in_sets])
    need = 1 if directed else 2
    if out_deg.min() < need or in_deg.min() < need:
        return HamiltonResult(None, "absent")
    if not _strongly_connected(out_sets, n, directed):
        return HamiltonResult(None, "absent")
    if n <= EXHAUSTIVE_LIMIT:
        budget = math.inf

    start = int(np.argmin(out_deg + in_deg))
    on_path = np.zeros(n, dtype=bool)
    on_path[start] = True
    # usable in/out capacity of unvisited vertices
    cap_out = out_deg.astype(np.int64).copy()
    cap_in = in_deg.astype(np.int64).copy()
    path = [start]
    prefer_sets = prefer if prefer is not None else None

    def ordered(v: int) -> List[int]:
        cands = [w for w in out_sets[v] if not on_path[w]]
        if prefer_sets is not None:
            pv = prefer_sets[v]
            return sorted(cands, key=lambda w: (w not in pv, cap_out[w] + cap_in[w], w))
        return sorted(cands, key=lambda w: (cap_out[w] + cap_in[w], w))

    def advance(v: int, x: int) -> Tuple[bool, List[Tuple[np.ndarray, int]]]:
        """Move the path end from v to x; returns (feasible, undo log)."""
        undo: List[Tuple[np.ndarray, int]] = []
        ok = True
        if directed:
            # v is no longer the end, so arcs v->w cannot be used
            for w in out_sets[v]:
                if not on_path[w] and w != x:
                    cap_in[w] -= 1
                    undo.append((cap_in, w))
                    if cap_in[w] < 1:
                        ok = False
            # x leaves the unvisited pool, so arcs w->x cannot be used
            for w in in_sets[x]:
                if not on_path[w] and w != x:
                    cap_out[w] -= 1
                    undo.append((cap_out, w))
                    if cap_out[w] < 1:
                        ok = False
        elif v != start:
            for w in out_sets[v]:
                if not on_path[w] and w != x:
                    cap_out[w] -= 1
                    undo.append((cap_out, w))
                    if cap_out[w] < 2:
                        ok = False
        return ok, undo

    nodes = 0
    stack: List[Tuple[int, List[int], int, List[Tuple[np.ndarray, int]]]] = []
    # frame: (vertex, candidates, next index, undo log for entering vertex)
    stack.append((start, ordered(start), 0, []))
    while stack:
        v, cands, idx, _ = stack[-1]
        if len(path) == n:
            if start in out_sets[v]:
                return HamiltonResult(list(path), "found", nodes)
        if idx >= len(cands) or len(path) == n:
            _, _, _, undo = stack.pop()
            for arr, w in undo:
                arr[w] += 1
            on_path[v] = False
            path.pop()
            if not path:
                break
            continue
        stack[-1] = (v, cands, idx + 1, stack[-1][3])
        x = cands[idx]
        if on_path[x]:
            continue
        nodes += 1
        if nodes > budget:
            logger.debug(f"Hamilton search cut off after {nodes} nodes")
            return HamiltonResult(None, "cutoff", nodes)
        ok, undo = advance(v, x)
        if not ok:
            for arr, w in undo:
                arr[w] += 1
            continue
        on_path[x] = True
        path.append(x)
        stack.append((x, ordered(x), 0, undo))
    return HamiltonResult(None, "absent", nodes)


# ---------------------------------------------------------------------------
# Functional digraphs
# ---------------------------------------------------------------------------


@dataclass
class FunctionalDigraph:
    """
    Decomposition of a (partial) mapping digraph ``v -> f(v)``.

    Vertices with ``f(v) < 0`` are roots. Every other vertex drains into
    either a cycle or a root; ``component`` labels the drain.
    """

    n: int
    f: np.ndarray
    cycles: List[List[int]] = field(default_factory=list)
    roots: List[int] = field(default_factory=list)
    component: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    on_cycle: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))

    @property
    def component_count(self) -> int:
        return len(self.cycles) + len(self.roots)

    @property
    def cycle_vertex_count(self) -> int:
        return int(self.on_cycle.sum())

    @property
    def tree_vertex_count(self) -> int:
        return self.n - self.cycle_vertex_count

    def tree_edges(self) -> List[Tuple[int, int]]:
        return [
            (v, int(self.f[v]))
            for v in range(self.n)
            if self.f[v] >= 0 and not self.on_cycle[v]
        ]


def decompose_functional(f: Sequence[int]) -> FunctionalDigraph:
    """
    Find the cycles and in-trees of a mapping digraph.

    Args:
        f: ``f[v]`` is the image of v; negative entries mark unmapped roots

    Raises:
        ValueError: On a fixed point ``f[v] == v`` or an out-of-range image
    """
    f = np.asarray(f, dtype=np.int64)
    n = f.size
    if np.any(f == np.arange(n)) or np.any(f >= n):
        raise ValueError("Mapping must have f(v) != v and images in range")
    state = np.zeros(n, dtype=np.int8)  # 0 new, 1 on current walk, 2 done
    component = np.full(n, -1, dtype=np.int64)
    on_cycle = np.zeros(n, dtype=bool)
    result = FunctionalDigraph(n=n, f=f)
    for s in range(n):
        if state[s]:
            continue
        walk = []
        v = s
        while v >= 0 and state[v] == 0:
            state[v] = 1
            walk.append(v)
            v = int(f[v])
        if v < 0:
            label = len(result.cycles) + len(result.roots)
            result.roots.append(walk[-1])
        elif state[v] == 1:
            label = len(result.cycles) + len(result.roots)
            cycle = walk[walk.index(v) :]
            result.cycles.append(cycle)
            on_cycle[cycle] = True
        else:
            label = int(component[v])
        for w in walk:
            state[w] = 2
            component[w] = label
    result.component = component
    result.on_cycle = on_cycle
    return result


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------


def _degrees(edges: Sequence[Tuple[int, int]], n: int) -> np.ndarray:
    deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return deg


def _connected(edges: Sequence[Tuple[int, int]], vertices: Iterable[int], n: int) -> bool:
    ds = DisjointSet(n)
    for u, v in edges:
        ds.union(u, v)
    vertices = list(vertices)
    return all(ds.connected(vertices[0], w) for w in vertices[1:]) if vertices else True


def validate(kind: str, edges: Sequence[Tuple[int, int]], n: int, **params) -> bool:
    """
    Check that ``edges`` is exactly the claimed structure.

    Shape only: whether the edges were bought is checked by
    ``onbuy.strategies.validate_outcome``.

    Kinds and parameters:
        spanning-tree; arborescence (root=None for "any root");
        perfect-matching (bipartite=False); hamilton-cycle (directed=False);
        triangle; clique (r); path (s=0, t=n-1); paths-len2 (ell).
    """
    edges = [(int(u), int(v)) for u, v in edges]
    if len(set(edges)) != len(edges):
        return False
    if any(u == v for u, v in edges):
        return False
    if kind == "spanning-tree":
        return len(edges) == n - 1 and _connected(edges, range(n), n)
    if kind == "arborescence":
        out = np.zeros(n, dtype=np.int64)
        parent = np.full(n, -1, dtype=np.int64)
        for u, v in edges:
            out[u] += 1
            parent[u] = v
        if len(edges) != n - 1 or out.max(initial=0) > 1:
            return False
        roots = np.flatnonzero(out == 0)
        root = params.get("root")
        if roots.size != 1 or (root is not None and roots[0] != root):
            return False
        fd = decompose_functional(parent)
        return not fd.cycles
    if kind == "perfect-matching":
        if params.get("bipartite", False):
            us = {u for u, _ in edges}
            vs = {v for _, v in edges}
            return len(edges) == n and len(us) == n and len(vs) == n
        deg = _degrees(edges, n)
        return n % 2 == 0 and len(edges) == n // 2 and bool(np.all(deg == 1))
    if kind == "hamilton-cycle":
        if len(edges) != n:
            return False
        if params.get("directed", False):
            succ = {}
            for u, v in edges:
                if u in succ:
                    return False
                succ[u] = v
            if len(set(succ.values())) != n:
                return False
            v, steps = 0, 0
            while True:
                v = succ.get(v, -1)
                steps += 1
                if v < 0 or v == 0:
                    break
            return v == 0 and steps == n
        deg = _degrees(edges, n)
        return bool(np.all(deg == 2)) and _connected(edges, range(n), n)
    if kind in ("triangle", "clique"):
        r = 3 if kind == "triangle" else int(params["r"])
        verts = {w for e in edges for w in e}
        return len(verts) == r and len(edges) == r * (r - 1) // 2
    if kind == "path":
        s = params.get("s", 0)
        t = params.get("t", n - 1)
        if not edges:
            return False
        deg = _degrees(edges, n)
        verts = np.flatnonzero(deg)
        ends = set(np.flatnonzero(deg == 1).tolist())
        return (
            ends == {s, t}
            and bool(np.all(deg[verts] <= 2))
            and len(edges) == verts.size - 1
            and _connected(edges, verts, n)
        )
    if kind == "paths-len2":
        ell = int(params["ell"])
        adj: Dict[int, Set[int]] = {}
        for u, v in edges:
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        pairs = set()
        for c, nbrs in adj.items():
            ordered = sorted(nbrs)
            for i, a in enumerate(ordered):
                for b in ordered[i + 1 :]:
                    pairs.add((a, b))
        return len(pairs) >= ell
    raise ValueError(f"Unknown structure kind {kind!r}")


# ---------------------------------------------------------------------------
# Searches over the availability graph
# ---------------------------------------------------------------------------


def _expand(mat: np.ndarray, frontier: np.ndarray, visited: np.ndarray, parent: np.ndarray) -> np.ndarray:
    if frontier.size == 0:
        return frontier
    block = mat[frontier]
    new = block.any(axis=0) & ~visited
    idx = np.flatnonzero(new)
    if idx.size:
        parent[idx] = frontier[np.argmax(block[:, idx], axis=0)]
        visited[idx] = True
    return idx


def layered_search(
    available: np.ndarray,
    preferred: Optional[np.ndarray],
    sources: Sequence[int],
    stop_at: Optional[int] = None,
) -> np.ndarray:
    """
    Breadth-first forest minimizing the number of non-preferred edges.

    ``available[x, y]`` allows stepping from x to y and ``preferred`` is a
    sub-relation of free steps (None for a plain BFS). Returns ``parent``
    with -1 for the sources and -2 for unreached vertices.
    """
    n = available.shape[0]
    parent = np.full(n, -2, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    level = np.asarray(sources, dtype=np.int64)
    parent[level] = -1
    visited[level] = True
    while level.size:
        grow = level if preferred is not None else level[:0]
        while grow.size:
            grow = _expand(preferred, grow, visited, parent)
            level = np.concatenate((level, grow))
        if stop_at is not None and visited[stop_at]:
            break
        level = _expand(available, level, visited, parent)
    return parent


def trace_path(parent: np.ndarray, target: int) -> List[int]:
    """Vertices from a source to ``target`` following ``parent``."""
    if parent[target] == -2:
        return []
    path = [int(target)]
    while parent[path[-1]] >= 0:
        path.append(int(parent[path[-1]]))
    return path[::-1]


def find_clique(
    available: np.ndarray,
    r: int,
    preferred: Optional[np.ndarray] = None,
    budget: int = 20000,
    seeds: Optional[Sequence[int]] = None,
) -> Tuple[Optional[List[int]], bool]:
    """
    Search for an r-clique in a boolean adjacency matrix.

    Vertices with many preferred edges are tried first. Returns
    ``(vertices or None, exhausted)``; ``exhausted`` is False when the node
    budget ran out before the search space was covered.
    """
    n = available.shape[0]
    deg = available.sum(axis=1)
    score = deg.astype(float)
    if preferred is not None:
        score = score + n * preferred.sum(axis=1)
    order = np.argsort(-score, kind="stable")
    if seeds is not None:
        order = np.concatenate((np.asarray(seeds, dtype=np.int64), order))
    nodes = 0
    tried = np.zeros(n, dtype=bool)

    def extend(clique: List[int], cand: np.ndarray) -> Optional[List[int]]:
        nonlocal nodes
        if len(clique) == r:
            return clique
        if cand.size < r - len(clique):
            return None
        if preferred is not None:
            pref = preferred[clique[-1], cand]
            cand = np.concatenate((cand[pref], cand[~pref]))
        for i, w in enumerate(cand):
            nodes += 1
            if nodes > budget:
                return None
            rest = cand[i + 1 :]
            rest = rest[available[w, rest]]
            found = extend(clique + [int(w)], rest)
            if found is not None or nodes > budget:
                return found
        return None

    for v in order:
        if tried[v] or deg[v] < r - 1:
            continue
        tried[v] = True
        cand = np.flatnonzero(available[v] & ~tried)
        found = extend([int(v)], cand)
        if found is not None:
            return found, True
        if nodes > budget:
            return None, False
    return None, True
