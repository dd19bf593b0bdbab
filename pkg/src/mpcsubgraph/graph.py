"""Undirected/directed graph containers, generators and degeneracy machinery."""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Malformed edge-list input; ``line`` is 1-based."""

    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    ``edges`` holds each edge once as ``(u, v)`` with ``u < v``, sorted.
    """

    n: int
    edges: tuple
    adj: tuple = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        es = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            es.add((u, v) if u < v else (v, u))
        edges_t = tuple(sorted(es))
        nb: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges_t:
            nb[u].append(v)
            nb[v].append(u)
        return cls(n, edges_t, tuple(tuple(sorted(x)) for x in nb))

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adj]

    def neighbors(self, v: int) -> tuple:
        return self.adj[v]

    def adj_sets(self) -> list[set]:
        return [set(a) for a in self.adj]

    def has_edge(self, u: int, v: int) -> bool:
        a = self.adj[u]
        i = bisect.bisect_left(a, v)
        return i < len(a) and a[i] == v


@dataclass(frozen=True)
class DirectedGraph:
    """Acyclic orientation: every edge points from earlier to later in ``ordering``."""

    n: int
    out: tuple
    ordering: tuple

    @property
    def m(self) -> int:
        return sum(len(o) for o in self.out)

    def out_degree(self, v: int) -> int:
        return len(self.out[v])

    def max_out_degree(self) -> int:
        return max((len(o) for o in self.out), default=0)

    def arcs(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.out[u]]


def load_edge_list(path: str | Path) -> Graph:
    """Read ``n m`` then one ``u v`` pair per line (0-indexed, whitespace separated).

    Duplicate edges collapse; self-loops and out-of-range ids are rejected.
    Blank lines and ``#`` comments are skipped.
    """
    lines = Path(path).read_text().splitlines()
    header = None
    edges = []
    for ln, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise GraphFormatError(f"expected two integers, got {raw!r}", ln)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer token in {raw!r}", ln) from None
        if header is None:
            if a < 0 or b < 0:
                raise GraphFormatError("negative header value", ln)
            header = (a, b)
            continue
        n = header[0]
        if not (0 <= a < n and 0 <= b < n):
            raise GraphFormatError(f"vertex id out of range [0, {n})", ln)
        if a == b:
            raise GraphFormatError(f"self-loop at vertex {a}", ln)
        edges.append((a, b))
    if header is None:
        raise GraphFormatError("missing header line 'n m'")
    return Graph.from_edges(header[0], edges)


def write_edge_list(g: Graph, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def gen_random_graph(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p), deterministic for a given seed."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()))


def _random_tree(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random labelled spanning tree via a Pruefer sequence."""
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2).tolist()
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def gen_bounded_arboricity(n: int, a: int, seed: int) -> Graph:
    """Union of ``a`` uniform random spanning trees; arboricity at most ``a``."""
    if a < 1:
        raise ValueError(f"a must be >= 1, got {a}")
    rng = np.random.default_rng(seed)
    edges = []
    for _ in range(a):
        edges.extend(_random_tree(n, rng))
    return Graph.from_edges(n, edges)


def gen_local_forests(n: int, a: int, window: int, seed: int) -> Graph:
    """Union of ``a`` random forests whose parents lie within ``window`` positions.

    Each vertex ``v > 0`` draws distinct parents from ``[v - window, v)``, one
    per forest.  The arboricity stays at most ``a`` while nearby vertices
    overlap heavily, so small cliques are plentiful (``window == a`` gives
    the a-th power of a path).
    """
    if a < 1 or window < 1:
        raise ValueError(f"need a >= 1 and window >= 1, got a={a}, window={window}")
    rng = np.random.default_rng(seed)
    edges = []
    for v in range(1, n):
        lo = max(0, v - window)
        ps = rng.permutation(np.arange(lo, v))[:a]
        edges.extend((int(u), v) for u in ps)
    return Graph.from_edges(n, edges)


def degeneracy_ordering(g: Graph) -> tuple[list[int], int]:
    """Min-degree peeling order (ties to the smallest id) and the degeneracy."""
    deg = g.degrees()
    removed = [False] * g.n
    heap = [(d, v) for v, d in enumerate(deg)]
    heapq.heapify(heap)
    order = []
    kappa = 0
    while heap:
        d, v = heapq.heappop(heap)
        if removed[v] or d != deg[v]:
            continue
        removed[v] = True
        order.append(v)
        kappa = max(kappa, d)
        for w in g.adj[v]:
            if not removed[w]:
                deg[w] -= 1
                heapq.heappush(heap, (deg[w], w))
    return order, kappa


def orient_by_ordering(g: Graph, ordering: Sequence[int]) -> DirectedGraph:
    """Direct every edge from its earlier to its later endpoint in ``ordering``."""
    ordering = list(ordering)
    if sorted(ordering) != list(range(g.n)):
        raise ValueError("ordering is not a permutation of the vertex set")
    rank = [0] * g.n
    for i, v in enumerate(ordering):
        rank[v] = i
    out: list[list[int]] = [[] for _ in range(g.n)]
    for u, v in g.edges:
        if rank[u] < rank[v]:
            out[u].append(v)
        else:
            out[v].append(u)
    return DirectedGraph(g.n, tuple(tuple(sorted(o)) for o in out), tuple(ordering))


def degeneracy(g: Graph) -> int:
    return degeneracy_ordering(g)[1]


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])
