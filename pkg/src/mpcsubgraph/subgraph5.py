"""Exact counts of connected patterns on at most five vertices.

The input is oriented along a degeneracy ordering, so every out-degree is at
most the degeneracy.  Each acyclic orientation class of the pattern is
counted on its own: the copies of its largest directed rooted tree are
listed by growing them one vertex at a time, and every copy is then
extended to the whole pattern with a constant number of lookups into the
out-list table and the HM maps:

* ``HM1``: the arcs ``((u, v), 1)``;
* ``HM2``: ``(S, r)`` with ``r = #{u : S <= N+(u)}`` for ``1 <= |S| <= 4``;
* ``HM3``: ``((S1, S2), l)`` with ``l`` the number of arcs ``(u, v)`` with
  ``S1 <= N+(u)`` and ``S2 <= N+(v)``, for ``1 <= |S1 u S2| <= 3`` (a side
  may be empty).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from types import SimpleNamespace
from typing import Callable, Optional

from .exact import default_space, tally
from .graph import DirectedGraph, Graph, degeneracy_ordering, orient_by_ordering
from .mpc.primitives import (
    Batch,
    DistributedList,
    align_groups,
    block_cap,
    distribute_input,
    drop_held,
    flat_map,
    lookup,
    make_room,
    mpc_sort,
    segment_annotate,
)
from .mpc.runtime import Cluster, MpcConfig, RunMetrics, words
from .patterns import SubgraphPattern

# symbolic charge for the sequential degeneracy orientation
ORIENTATION_ROUNDS = 1


# ---------------------------------------------------------------------------
# pattern side: orientations and rooted trees
# ---------------------------------------------------------------------------

def _topological(k: int, arcs) -> Optional[tuple]:
    indeg = [0] * k
    out: list[list[int]] = [[] for _ in range(k)]
    for a, b in arcs:
        out[a].append(b)
        indeg[b] += 1
    ready = [v for v in range(k) if indeg[v] == 0]
    order = []
    while ready:
        v = min(ready)
        ready.remove(v)
        order.append(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return tuple(order) if len(order) == k else None


@dataclass(frozen=True)
class DirectedPattern:
    """An acyclic orientation of a pattern, with a topological order."""

    k: int
    arcs: tuple
    order: tuple

    @property
    def arc_set(self) -> frozenset:
        return frozenset(self.arcs)

    def out(self, v: int) -> list[int]:
        return [b for a, b in self.arcs if a == v]

    def automorphisms(self) -> int:
        arcs = self.arc_set
        return sum(1 for p in permutations(range(self.k))
                   if all((p[a], p[b]) in arcs for a, b in self.arcs))


def _canon(arcs, perms) -> tuple:
    return min(tuple(sorted((p[a], p[b]) for a, b in arcs)) for p in perms)


def acyclic_orientations(h: SubgraphPattern) -> list[DirectedPattern]:
    """One representative per automorphism class of acyclic orientations."""
    es = h.edge_set
    perms = [p for p in permutations(range(h.k))
             if all((min(p[u], p[v]), max(p[u], p[v])) in es for u, v in h.edges)]
    seen = {}
    for flips in product((False, True), repeat=len(h.edges)):
        arcs = tuple(sorted((v, u) if f else (u, v) for (u, v), f in zip(h.edges, flips)))
        order = _topological(h.k, arcs)
        if order is None:
            continue
        c = _canon(arcs, perms)
        if c not in seen:
            seen[c] = DirectedPattern(h.k, c, _topological(h.k, c))
    return [seen[c] for c in sorted(seen)]


@dataclass(frozen=True)
class DRTS:
    """A directed rooted out-tree inside a directed pattern.

    ``order`` lists the tree vertices in BFS order from the root;
    ``parent[i]`` is the position of the parent of ``order[i]`` (``-1`` for
    the root).  ``complement`` holds the pattern arcs outside the tree.
    """

    order: tuple
    parent: tuple
    complement: tuple

    @property
    def root(self) -> int:
        return self.order[0]

    @property
    def size(self) -> int:
        return len(self.order)


def _bfs(root: int, par: dict) -> tuple[tuple, tuple]:
    kids: dict = {}
    for v, p in par.items():
        kids.setdefault(p, []).append(v)
    order = [root]
    pos = {root: 0}
    parent = [-1]
    i = 0
    while i < len(order):
        for c in sorted(kids.get(order[i], ())):
            pos[c] = len(order)
            order.append(c)
            parent.append(i)
        i += 1
    return tuple(order), tuple(parent)


def largest_drts(hdir: DirectedPattern) -> DRTS:
    """Maximum out-tree by brute force; ties go to the smallest BFS sequence."""
    arcs = hdir.arc_set
    ins = {v: [a for a, b in hdir.arcs if b == v] for v in range(hdir.k)}
    best = None
    for root in range(hdir.k):
        others = [v for v in range(hdir.k) if v != root]
        for r in range(len(others), -1, -1):
            for sub in combinations(others, r):
                inside = set(sub) | {root}
                choices = [[p for p in ins[v] if p in inside] for v in sub]
                if any(not c for c in choices):
                    continue
                # acyclic: any choice of in-tree parents is a tree on ``inside``
                for ps in product(*choices):
                    order, parent = _bfs(root, dict(zip(sub, ps)))
                    cand = (-len(order), order, parent)
                    if best is None or cand < best:
                        best = cand
    _, order, parent = best
    tree = {(order[parent[i]], order[i]) for i in range(1, len(order))}
    comp = tuple(sorted(a for a in arcs if a not in tree))
    return DRTS(order, parent, comp)


@dataclass(frozen=True)
class ExtensionPlan:
    """How to extend a tree copy to the whole pattern.

    ``internal`` are position pairs ``(x, y)`` whose images must form an
    arc; ``rest`` gives, per vertex outside the tree, the positions it points
    to; ``link`` is set when the first outside vertex points to the second.
    """

    internal: tuple
    rest: tuple
    link: bool


def extension_plan(hdir: DirectedPattern, t: DRTS) -> ExtensionPlan:
    pos = {v: i for i, v in enumerate(t.order)}
    outside = [v for v in range(hdir.k) if v not in pos]
    internal = []
    rest = {v: [] for v in outside}
    link = None
    for a, b in t.complement:
        if a in pos and b in pos:
            internal.append((pos[a], pos[b]))
        elif a in pos:
            raise ValueError(f"tree is not maximal: arc {a}->{b} leaves it")
        elif b in pos:
            rest[a].append(pos[b])
        else:
            link = (a, b)
    if len(outside) > 2:
        raise ValueError(f"{len(outside)} vertices outside the tree; stars are counted directly")
    if link is not None and outside[0] != link[0]:
        outside.reverse()
    return ExtensionPlan(tuple(sorted(internal)),
                         tuple(tuple(sorted(rest[v])) for v in outside), link is not None)


def _key(s) -> tuple:
    return tuple(sorted(s))


def _extensions(plan: ExtensionPlan, tau: tuple, outs: list, out_of: Callable,
                hm2: Callable, hm3: Callable) -> int:
    """Extensions of one tree copy ``tau`` (``outs[x]`` is ``N+(tau[x])`` as a set)."""
    for x, y in plan.internal:
        if tau[y] not in outs[x]:
            return 0
    if not plan.rest:
        return 1

    def free(s):
        # vertices outside tau whose out-list covers s
        return hm2(_key(s)) - sum(1 for o in outs if s <= o)

    sets = [frozenset(tau[x] for x in r) for r in plan.rest]
    if len(sets) == 1:
        return free(sets[0])
    s1, s2 = sets
    if not plan.link:
        return free(s1) * free(s2) - free(s1 | s2)
    # arcs (u, v) outside tau with s1 <= N+(u), s2 <= N+(v)
    total = hm3((_key(s1), _key(s2)))
    into = sum(hm2(_key(s1 | {w})) for w, o in zip(tau, outs) if s2 <= o)
    tauset = set(tau)
    out_from = both = 0
    for o in outs:
        if s1 <= o:
            for v in o:
                if s2 <= out_of(v):
                    out_from += 1
                    both += v in tauset
    return total - into - out_from + both


def count_extensions(tau: tuple, hdir: DirectedPattern, t: DRTS, hm: "LocalHMaps") -> int:
    """Copies of ``hdir`` whose restriction to the tree is ``tau`` (single machine)."""
    plan = extension_plan(hdir, t)
    out_of = lambda v: hm.out.get(v, frozenset())
    return _extensions(plan, tau, [out_of(v) for v in tau], out_of,
                       lambda s: hm.hm2.get(s, 0), lambda s: hm.hm3.get(s, 0))


# ---------------------------------------------------------------------------
# graph side: out-lists, HM maps, tree copies
# ---------------------------------------------------------------------------

def _subsets(xs, lo: int, hi: int):
    for r in range(lo, min(hi, len(xs)) + 1):
        yield from combinations(xs, r)


@dataclass
class LocalHMaps:
    """Driver-side dictionaries of the maps (tests and the single-machine path)."""

    out: dict
    hm1: dict
    hm2: dict
    hm3: dict


@dataclass
class HMaps:
    out: DistributedList
    hm1: DistributedList
    hm2: DistributedList
    hm3: DistributedList

    def local(self) -> LocalHMaps:
        return LocalHMaps(out={x: frozenset(L) for x, L in self.out.records()},
                          hm1=dict(self.hm1.records()),
                          hm2=dict(self.hm2.records()),
                          hm3=dict(self.hm3.records()))

    def release(self, cluster: Cluster) -> None:
        for dl in (self.out, self.hm1, self.hm2, self.hm3):
            cluster.release(dl.blocks)


def distribute_arcs(cluster: Cluster, gdir: DirectedGraph) -> DistributedList:
    """The arcs of ``gdir`` spread over the initial machines, direction kept."""
    return distribute_input(cluster, SimpleNamespace(n=gdir.n, edges=gdir.arcs()))


def build_out_table(cluster: Cluster, arcs: DistributedList) -> DistributedList:
    """``(x, N+(x))`` for every vertex with out-arcs, sorted by ``x``."""
    cp = flat_map(cluster, arcs, lambda st, mid: list(st), keep=True)
    srt = mpc_sort(cluster, cp)
    al = align_groups(cluster, srt, key=lambda r: r[0])
    if any(al.meta.get(b) for b in al.blocks):
        raise ValueError("an out-list does not fit on one machine; raise S")

    def f(st, mid):
        out = []
        i = 0
        while i < len(st):
            j = i
            while j < len(st) and st[j][0] == st[i][0]:
                j += 1
            out.append((st[i][0], tuple(r[1] for r in st[i:j])))
            i = j
        return Batch(out, sum(1 + len(L) for _, L in out))
    return flat_map(cluster, al, f)


def _aggregate(cluster: Cluster, keys: DistributedList) -> DistributedList:
    """Sort keys and keep ``(key, multiplicity)`` once per key."""
    srt = mpc_sort(cluster, keys)
    return segment_annotate(cluster, srt, emit=lambda r, t, b, p: (r, t) if b == 0 else None,
                            extra=1)


def build_hm_maps(cluster: Cluster, arcs: DistributedList, kappa: int,
                  out: Optional[DistributedList] = None) -> HMaps:
    """Out-lists plus HM1, HM2 and HM3 as sorted distributed tables.

    ``kappa`` bounds every out-degree.
    """
    if out is None:
        out = build_out_table(cluster, arcs)
    hm1 = flat_map(cluster, arcs, lambda st, mid: [((u, v), 1) for u, v in st], keep=True)
    hm2 = _aggregate(cluster, flat_map(cluster, out, lambda st, mid: [
        S for _, L in st for S in _subsets(L, 1, 4)], keep=True))
    # (v, S1) for every arc (u, v) and S1 <= N+(u), then S2 <= N+(v) at v
    firsts = flat_map(cluster, out, lambda st, mid: [
        (v, S1) for _, L in st for v in L for S1 in _subsets(L, 0, 3)], keep=True)
    firsts = make_room(cluster, firsts, lambda r: kappa + 2)
    ms = cluster.machines
    ans = lookup(cluster, {b: [r[0] for r in ms[b].store] for b in firsts.blocks if ms[b].store},
                 out, default=())

    def pairs(st, mid):
        res = []
        for (v, S1), L in zip(st, ans.get(mid, ())):
            s1 = set(S1)
            for S2 in _subsets(L, 0, 3):
                if 1 <= len(s1.union(S2)) <= 3:
                    res.append((S1, S2))
        return res
    hm3 = _aggregate(cluster, flat_map(cluster, firsts, pairs))
    return HMaps(out, hm1, hm2, hm3)


def enumerate_drt_copies(cluster: Cluster, arcs: DistributedList, t: DRTS,
                         out: DistributedList, kappa: int) -> DistributedList:
    """All injective images of the tree, as vertex tuples in BFS order.

    The first arc gives the copies of the two-vertex prefix; each further
    tree vertex is added by fetching the out-list of its parent's image and
    branching over it.
    """
    copies = flat_map(cluster, arcs, lambda st, mid: [tuple(r) for r in st], keep=True)
    ms = cluster.machines
    for i in range(2, t.size):
        p = t.parent[i]
        copies = make_room(cluster, copies, lambda c: kappa + 2)
        ans = lookup(cluster, {b: [c[p] for c in ms[b].store]
                               for b in copies.blocks if ms[b].store}, out, default=())

        def grow(st, mid, i=i):
            res = []
            for c, L in zip(st, ans.get(mid, ())):
                for v in L:
                    if v not in c:
                        res.append(c + (v,))
            return Batch(res, (i + 1) * len(res))
        copies = flat_map(cluster, copies, grow)
    return copies


def _count_class(cluster: Cluster, copies: DistributedList, plan: ExtensionPlan,
                 hm: HMaps, kappa: int) -> int:
    """Sum of extension counts over the copies (three lookup phases)."""
    ms = cluster.machines
    holders = lambda dl: [b for b in dl.blocks if ms[b].store]
    # phase 1: out-lists of the copy's vertices
    copies = make_room(cluster, copies, lambda c: len(c) * (kappa + 3))
    ans = lookup(cluster, {b: [v for c in ms[b].store for v in c] for b in holders(copies)},
                 hm.out, default=())

    def attach(st, mid):
        a = ans.get(mid, ())
        res = []
        j = 0
        for c in st:
            outs = tuple(a[j:j + len(c)])
            j += len(c)
            if all(c[y] in outs[x] for x, y in plan.internal):
                res.append((c, outs))
        return res
    cur = flat_map(cluster, copies, attach)
    if not plan.rest:
        (n,) = tally(cluster, cur, lambda st: (len(st),))
        cluster.release(cur.blocks)
        return n or 0

    # phase 2: a dry run names the remaining keys of every copy
    def needs(c, outs):
        hop, k2, k3 = [], [], []
        sets = [set(o) for o in outs]
        _extensions(plan, c, sets, lambda v: hop.append(v) or frozenset(),
                    lambda s: k2.append(s) or 0, lambda s: k3.append(s) or 0)
        return hop, k2, k3

    def need_words(r):
        hop, k2, k3 = needs(*r)
        return (len(hop) * (kappa + 3) + words(k2) + 2 * len(k2)
                + words(k3) + 2 * len(k3))
    cur = make_room(cluster, cur, need_words)
    plans = {}
    for b in cur.blocks:
        plans[b] = [needs(c, outs) for c, outs in ms[b].store]
    a_hop = lookup(cluster, {b: [v for h, _, _ in plans[b] for v in h] for b in cur.blocks
                             if any(p[0] for p in plans[b])}, hm.out, default=(), hold="hop")
    a2 = lookup(cluster, {b: [s for _, k, _ in plans[b] for s in k] for b in cur.blocks
                          if any(p[1] for p in plans[b])}, hm.hm2, default=0, hold="hm2")
    a3 = lookup(cluster, {b: [s for _, _, k in plans[b] for s in k] for b in cur.blocks
                          if any(p[2] for p in plans[b])}, hm.hm3, default=0, hold="hm3")

    def final(st, mid):
        ih = iter(a_hop.get(mid, ()))
        i2 = iter(a2.get(mid, ()))
        i3 = iter(a3.get(mid, ()))
        res = 0
        for (c, outs), (hop, k2, k3) in zip(st, plans[mid]):
            hv = {v: frozenset(next(ih)) for v in hop}
            v2 = {s: next(i2) for s in k2}
            v3 = {s: next(i3) for s in k3}
            res += _extensions(plan, c, [set(o) for o in outs], lambda v: hv[v],
                               lambda s: v2[s], lambda s: v3[s])
        return [res]
    sums = flat_map(cluster, cur, final)
    for name, a in (("hop", a_hop), ("hm2", a2), ("hm3", a3)):
        drop_held(cluster, name, a)
    (n,) = tally(cluster, sums, lambda st: (sum(st),))
    cluster.release(sums.blocks)
    return n


# ---------------------------------------------------------------------------
# stars and the driver
# ---------------------------------------------------------------------------

def _star_on(cluster: Cluster, arcs: DistributedList, leaves: int) -> int:
    both = flat_map(cluster, arcs, lambda st, mid: [x for u, v in st for x in (u, v)], keep=True)
    srt = mpc_sort(cluster, both)
    deg = segment_annotate(cluster, srt, emit=lambda r, t, b, p: t if b == 0 else None, extra=0)
    (s,) = tally(cluster, deg, lambda st: (sum(math.comb(d, leaves) for d in st),))
    cluster.release(deg.blocks)
    return s or 0


def _cluster_for(n: int, m: int, S: Optional[int], delta: float, seed: int) -> Cluster:
    S = S or default_space(n, delta)
    M = max(1, math.ceil(2 * m / block_cap(S)))
    return Cluster(MpcConfig(S=S, M=M, delta=delta, seed=seed))


def count_star(g: Graph, leaves: int, S: Optional[int] = None, delta: float = 0.5,
               seed: int = 0) -> int:
    """``sum_v C(d(v), leaves)``: copies of the star with ``leaves`` leaves (ordered when 1)."""
    if not 1 <= leaves <= 4:
        raise ValueError(f"leaves must lie in [1, 4], got {leaves}")
    cluster = _cluster_for(g.n, g.m, S, delta, seed)
    arcs = distribute_input(cluster, g)
    return _star_on(cluster, arcs, leaves)


@dataclass
class SubgraphResult:
    pattern: str
    count: int
    kappa: int
    S: int
    classes: list = field(default_factory=list)
    metrics: Optional[RunMetrics] = None
    hm_words: Optional[int] = None
    orientation_oracle_rounds: int = ORIENTATION_ROUNDS

    def to_dict(self) -> dict:
        return dict(pattern=self.pattern, count=self.count, kappa=self.kappa, S=self.S,
                    classes=list(self.classes),
                    metrics=self.metrics.to_dict() if self.metrics else None,
                    hm_words=self.hm_words,
                    orientation_oracle=dict(rounds=self.orientation_oracle_rounds,
                                            kappa=self.kappa))


class SubgraphCounter:
    """Orients ``g`` once and builds the HM maps lazily; counts any pattern after that."""

    def __init__(self, g: Graph, S: Optional[int] = None, delta: float = 0.5, seed: int = 0):
        self.g = g
        order, self.kappa = degeneracy_ordering(g)
        self.gdir = orient_by_ordering(g, order)
        self.cluster = _cluster_for(g.n, g.m, S, delta, seed)
        self.arcs = distribute_arcs(self.cluster, self.gdir)
        self.hm: Optional[HMaps] = None
        self.hm_words: Optional[int] = None

    def maps(self) -> HMaps:
        if self.hm is None:
            before = self.cluster.metrics.total_words
            self.hm = build_hm_maps(self.cluster, self.arcs, self.kappa)
            self.hm_words = self.cluster.metrics.total_words
            self.hm_build_words = self.hm_words - before
        return self.hm

    def count(self, h: SubgraphPattern) -> SubgraphResult:
        cl = self.cluster
        res = SubgraphResult(pattern=h.name, count=0, kappa=self.kappa, S=cl.S)
        if h.k == 1:
            res.count = self.g.n
        elif h.star_leaves() is not None:
            l = h.star_leaves()
            s = _star_on(cl, self.arcs, l)
            res.count = s // 2 if l == 1 else s
            res.classes.append(dict(star=l, sum=s))
        else:
            hm = self.maps()
            total = Fraction(0)
            for hdir in acyclic_orientations(h):
                t = largest_drts(hdir)
                plan = extension_plan(hdir, t)
                copies = enumerate_drt_copies(cl, self.arcs, t, hm.out, self.kappa)
                n_copies = len(copies)
                emb = _count_class(cl, copies, plan, hm, self.kappa)
                aut = hdir.automorphisms()
                total += Fraction(emb, aut)
                res.classes.append(dict(arcs=[list(a) for a in hdir.arcs], tree=list(t.order),
                                        copies=n_copies, embeddings=emb, automorphisms=aut))
            if total.denominator != 1:
                raise AssertionError(f"{h.name}: class sum {total} is not integral")
            res.count = int(total)
        res.metrics = cl.snapshot()
        res.hm_words = self.hm_words
        return res


def count_subgraph_leq5(g: Graph, h: SubgraphPattern, S: Optional[int] = None,
                        delta: float = 0.5, seed: int = 0) -> SubgraphResult:
    """Number of (not necessarily induced) copies of ``h`` in ``g``."""
    if h.k > 5:
        raise ValueError(f"patterns need k <= 5, got {h.k}")
    return SubgraphCounter(g, S, delta, seed).count(h)
