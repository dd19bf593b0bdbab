"""Catalog of the 30 connected graphs on at most five vertices."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations
from pathlib import Path


@dataclass(frozen=True)
class SubgraphPattern:
    """A connected pattern graph on ``k <= 5`` vertices labelled ``0..k-1``."""

    name: str
    k: int
    edges: tuple

    def __post_init__(self):
        if not 1 <= self.k <= 5:
            raise ValueError(f"patterns need 1 <= k <= 5, got k={self.k}")
        norm = tuple(sorted({(min(u, v), max(u, v)) for u, v in self.edges}))
        for u, v in norm:
            if u == v or not (0 <= u < self.k and 0 <= v < self.k):
                raise ValueError(f"bad pattern edge ({u}, {v})")
        object.__setattr__(self, "edges", norm)
        if not self.is_connected():
            raise ValueError(f"pattern {self.name!r} is disconnected")

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for a, b in self.edges:
                for x, y in ((a, b), (b, a)):
                    if x == u and y not in seen:
                        seen.add(y)
                        stack.append(y)
        return len(seen) == self.k

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @cached_property
    def automorphisms(self) -> int:
        """Number of vertex permutations preserving the edge set."""
        es = self.edge_set
        cnt = 0
        for p in permutations(range(self.k)):
            if all((min(p[u], p[v]), max(p[u], p[v])) in es for u, v in self.edges):
                cnt += 1
        return cnt

    def degrees(self) -> list[int]:
        d = [0] * self.k
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def star_leaves(self) -> int | None:
        """Leaf count if the pattern is a star ``K_{1,l}`` (an edge is ``K_{1,1}``)."""
        if self.k < 2 or len(self.edges) != self.k - 1:
            return None
        d = self.degrees()
        if max(d) == self.k - 1:
            return self.k - 1
        return None

    def is_clique(self) -> bool:
        return len(self.edges) == self.k * (self.k - 1) // 2


_CATALOG_EDGES = {
    "edge": (2, [(0, 1)]),
    "P3": (3, [(0, 1), (1, 2)]),
    "K3": (3, [(0, 1), (1, 2), (0, 2)]),
    "P4": (4, [(0, 1), (1, 2), (2, 3)]),
    "K1_3": (4, [(0, 1), (0, 2), (0, 3)]),
    "C4": (4, [(0, 1), (1, 2), (2, 3), (3, 0)]),
    "paw": (4, [(0, 1), (1, 2), (0, 2), (2, 3)]),
    "diamond": (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]),
    "K4": (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
    "P5": (5, [(0, 1), (1, 2), (2, 3), (3, 4)]),
    "K1_4": (5, [(0, 1), (0, 2), (0, 3), (0, 4)]),
    "fork": (5, [(0, 1), (1, 2), (1, 3), (3, 4)]),
    "C5": (5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]),
    "bull": (5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4)]),
    "cricket": (5, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4)]),
    "banner": (5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]),
    "tadpole": (5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]),
    "K2_3": (5, [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]),
    "house": (5, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)]),
    "bowtie": (5, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4)]),
    "kite": (5, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 4)]),
    "dart": (5, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (0, 4)]),
    "K4_pendant": (5, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4)]),
    "gem": (5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4)]),
    "book3": (5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]),
    "housex": (5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3)]),
    "W4": (5, [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1), (4, 2), (4, 3)]),
    "K5_minus_P3": (5, [(0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]),
    "K5_minus_e": (5, [(i, j) for i in range(5) for j in range(i + 1, 5) if (i, j) != (0, 1)]),
    "K5": (5, [(i, j) for i in range(5) for j in range(i + 1, 5)]),
}

ALIASES = {
    "K2": "edge",
    "K1_1": "edge",
    "K1_2": "P3",
    "C3": "K3",
    "triangle": "K3",
    "claw": "K1_3",
    "square": "C4",
    "chair": "fork",
    "butterfly": "bowtie",
}

CATALOG: dict[str, SubgraphPattern] = {
    name: SubgraphPattern(name, k, tuple(es)) for name, (k, es) in _CATALOG_EDGES.items()
}


def get_pattern(name: str) -> SubgraphPattern:
    key = ALIASES.get(name, name)
    if key not in CATALOG:
        raise KeyError(f"unknown pattern {name!r}; known: {', '.join(sorted(CATALOG))}")
    return CATALOG[key]


def pattern_from_edges(edges, name: str = "custom") -> SubgraphPattern:
    """Build a pattern from an edge list over arbitrary hashable labels."""
    labels = sorted({x for e in edges for x in e})
    idx = {x: i for i, x in enumerate(labels)}
    return SubgraphPattern(name, len(labels), tuple((idx[u], idx[v]) for u, v in edges))


def load_pattern_file(path: str | Path) -> SubgraphPattern:
    """Pattern file: same format as a graph edge list (``k e`` header, then pairs)."""
    rows = []
    for raw in Path(path).read_text().splitlines():
        t = raw.split("#", 1)[0].split()
        if t:
            rows.append((int(t[0]), int(t[1])))
    if not rows:
        raise ValueError(f"empty pattern file {path}")
    k, _ = rows[0]
    return SubgraphPattern(Path(path).stem, k, tuple(rows[1:]))
