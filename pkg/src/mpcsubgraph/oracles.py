"""Brute-force single-machine counters used as ground truth."""

from __future__ import annotations

from itertools import permutations

from .graph import Graph
from .patterns import SubgraphPattern


def oracle_count_triangles(g: Graph) -> int:
    adj = g.adj_sets()
    t = 0
    for u, v in g.edges:
        a, b = adj[u], adj[v]
        if len(a) > len(b):
            a, b = b, a
        t += sum(1 for w in a if w > v and w in b)
    return t


def oracle_list_triangles(g: Graph) -> list[tuple[int, int, int]]:
    adj = g.adj_sets()
    out = []
    for u, v in g.edges:
        for w in adj[u] & adj[v]:
            if w > v:
                out.append((u, v, w))
    return sorted(out)


def oracle_count_cliques(g: Graph, k: int) -> int:
    """Number of k-vertex complete subgraphs, 2 <= k <= 6."""
    if not 2 <= k <= 6:
        raise ValueError(f"k must lie in [2, 6], got {k}")
    fwd = [set(w for w in g.adj[v] if w > v) for v in range(g.n)]

    def grow(cand: set, depth: int) -> int:
        if depth == k:
            return 1
        if depth == k - 1:
            return len(cand)
        return sum(grow(cand & fwd[w], depth + 1) for w in cand)

    return sum(grow(fwd[v], 1) for v in range(g.n))


def _esu(adj: list[set], n: int, k: int):
    """Yield every connected vertex set of size k once (Wernicke's ESU)."""
    if k == 1:
        for v in range(n):
            yield (v,)
        return

    def extend(sub: list, sub_set: set, nbhd: set, ext: set, v: int):
        if len(sub) == k:
            yield tuple(sub)
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            new_ext = set(ext)
            for u in adj[w]:
                if u > v and u not in sub_set and u not in nbhd:
                    new_ext.add(u)
            sub.append(w)
            sub_set.add(w)
            yield from extend(sub, sub_set, nbhd | adj[w], new_ext, v)
            sub.pop()
            sub_set.discard(w)

    for v in range(n):
        yield from extend([v], {v}, set(adj[v]) | {v}, {u for u in adj[v] if u > v}, v)


class _SpanningCounter:
    """Copies of each pattern spanning a k-vertex host, cached per adjacency mask."""

    def __init__(self, patterns: list[SubgraphPattern], k: int):
        self.patterns = patterns
        self.k = k
        self.pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
        self.cache: dict[int, tuple] = {}

    def counts(self, mask: int) -> tuple:
        hit = self.cache.get(mask)
        if hit is not None:
            return hit
        host = {p for b, p in enumerate(self.pairs) if mask >> b & 1}
        res = []
        for h in self.patterns:
            emb = 0
            for perm in permutations(range(self.k)):
                if all((min(perm[u], perm[v]), max(perm[u], perm[v])) in host for u, v in h.edges):
                    emb += 1
            res.append(emb // h.automorphisms)
        out = tuple(res)
        self.cache[mask] = out
        return out


def oracle_count_subgraphs(g: Graph, patterns: list[SubgraphPattern]) -> dict[str, int]:
    """Non-induced copy counts for several patterns with one enumeration per k.

    Every copy of H lives on a connected k-subset X of G and is a spanning
    copy of H in G[X]; the count for X only depends on the induced adjacency.
    """
    adj = g.adj_sets()
    out: dict[str, int] = {}
    byk: dict[int, list[SubgraphPattern]] = {}
    for h in patterns:
        if not h.is_connected():
            raise ValueError(f"pattern {h.name!r} is disconnected")
        byk.setdefault(h.k, []).append(h)
    for k, hs in byk.items():
        sc = _SpanningCounter(hs, k)
        tot = [0] * len(hs)
        pairs = sc.pairs
        for sub in _esu(adj, g.n, k):
            mask = 0
            for b, (i, j) in enumerate(pairs):
                if sub[j] in adj[sub[i]]:
                    mask |= 1 << b
            for t, c in enumerate(sc.counts(mask)):
                tot[t] += c
        for h, c in zip(hs, tot):
            out[h.name] = c
    return out


def oracle_count_subgraph(g: Graph, h: SubgraphPattern) -> int:
    """Unlabelled, not necessarily induced copies of ``h`` in ``g``."""
    return oracle_count_subgraphs(g, [h])[h.name]
