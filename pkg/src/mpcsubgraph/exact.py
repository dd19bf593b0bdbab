"""Exact triangle counting by doubly-exponential degree peeling.

Every iteration ``i`` keeps the surviving vertex set ``Q_i`` as a distributed
list of arcs of ``G[Q_i]``.  Vertices of ``Q_i``-degree at most ``gamma_i``
(the set ``A_i``) are processed and removed.  Three consumers share the loop:

* :func:`count_triangles_exact` ships neighbour lists of ``A_i`` to their
  neighbours and counts duplicates after a global sort;
* :func:`enumerate_triangles` turns pairs of ``A_i``-neighbours into edge
  queries and deduplicates the triangles it finds;
* :func:`count_cliques_query` does the same with a degree cap of
  ``sqrt(S)/4`` so that a whole neighbourhood sits on one machine.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import chain
from typing import Callable, Iterable, Optional

from .graph import Graph, degeneracy
from .mpc.primitives import (
    DistributedList,
    block_cap,
    distribute_input,
    flat_map,
    group_pairs,
    lookup,
    mpc_sort,
    segment_annotate,
    tree_sweep,
)
from .mpc.runtime import Cluster, MpcConfig, RunMetrics

MIN_SPACE = 1024


class PruningViolation(AssertionError):
    """A pruning bound failed: the arboricity bound handed to the algorithm is wrong."""


@dataclass
class PeelingState:
    i: int
    q: int
    a: int
    gamma: float
    m_i: int
    words: int = 0
    rounds: int = 0
    T: float = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["T"] = float(self.T)
        return d


@dataclass
class ExactResult:
    count: int
    alpha: int
    S: int
    iterations: list = field(default_factory=list)
    metrics: Optional[RunMetrics] = None
    find_triangles_total: Optional[int] = None
    triangles: Optional[list] = None
    capped: bool = False
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(count=self.count, alpha=self.alpha, S=self.S,
                    iterations=[s.to_dict() for s in self.iterations],
                    metrics=self.metrics.to_dict() if self.metrics else None,
                    find_triangles_total=self.find_triangles_total, capped=self.capped,
                    warnings=list(self.warnings), **self.extra)


# ---------------------------------------------------------------------------
# schedule and pruning bounds
# ---------------------------------------------------------------------------

def gamma(i: int, alpha: float) -> int:
    """``ceil(2^((3/2)^i) * 2 alpha)``; saturates once it exceeds any degree."""
    e = 1.5 ** i
    if e > 62:
        return 1 << 62
    return math.ceil(2.0 ** e * 2 * alpha)


def max_iterations(n: int) -> int:
    """``ceil(log_{3/2} log2 n) + 1`` (at least one iteration)."""
    if n <= 2:
        return 1
    return math.ceil(math.log(math.log2(n), 1.5)) + 1


def vertex_bound(n: int, i: int) -> float:
    return n / 2.0 ** (2 * (1.5 ** i - 1))


def edge_bound(m: int, i: int) -> float:
    return m / 2.0 ** (2 * (1.5 ** (i - 1) - 1))


def check_pruning(n: int, m: int, st: PeelingState) -> None:
    if st.q > vertex_bound(n, st.i) + 1e-9:
        raise PruningViolation(
            f"iteration {st.i}: |Q_i|={st.q} > {vertex_bound(n, st.i):.3f}")
    if st.m_i > edge_bound(m, st.i) + 1e-9:
        raise PruningViolation(
            f"iteration {st.i}: m_i={st.m_i} > {edge_bound(m, st.i):.3f}")
    if st.i + 1 > max_iterations(n):
        raise PruningViolation(f"iteration {st.i} exceeds the bound {max_iterations(n)}")


def default_space(n: int, delta: float = 0.5) -> int:
    return max(MIN_SPACE, math.ceil(max(2, n) ** delta))


def default_alpha(g: Graph) -> int:
    return max(1, degeneracy(g))


# ---------------------------------------------------------------------------
# local reference versions of the per-vertex procedures
# ---------------------------------------------------------------------------

def find_triangles(w: int, lists: Iterable[Iterable[int]], own: Iterable[int]) -> int:
    """Duplicates between ``w``'s own neighbours and the lists it received."""
    own = list(own)
    cnt = Counter(chain(own, *lists))
    return sum(cnt[v] - 1 for v in own)


def find_triangles_exact(w: int, lists: Iterable[Iterable[int]], own: Iterable[int],
                         degree: dict, gamma_i: float) -> Fraction:
    """Duplicate count at ``w`` weighted by the high/low class of ``v`` and ``w``."""
    own = list(own)
    cnt = Counter(chain(own, *lists))
    hw = degree[w] > gamma_i
    t = Fraction(0)
    for v in own:
        hv = degree[v] > gamma_i
        r = cnt[v] - 1
        if hv and hw:
            t += Fraction(r, 2)
        elif hv or hw:
            t += Fraction(r, 4)
        else:
            t += Fraction(r, 6)
    return t


# ---------------------------------------------------------------------------
# distributed helpers
# ---------------------------------------------------------------------------

def make_cluster(g: Graph, S: Optional[int] = None, delta: float = 0.5,
                 seed: int = 0) -> tuple[Cluster, DistributedList]:
    """A cluster whose initial machines hold the edge list in working-size blocks."""
    S = S or default_space(g.n, delta)
    cap = block_cap(S)
    M = max(1, math.ceil(2 * g.m / cap))
    cluster = Cluster(MpcConfig(S=S, M=M, delta=delta, seed=seed))
    dl = distribute_input(cluster, g)
    return cluster, dl


def tally(cluster: Cluster, dl: DistributedList, fn: Callable[[list], tuple]) -> tuple:
    """Element-wise sum of ``fn(block)`` over all blocks (one convergecast)."""
    ms = cluster.machines
    vals = {b: tuple(fn(ms[b].store)) for b in dl.blocks}
    if not vals:
        return ()
    width = len(next(iter(vals.values())))
    r = tree_sweep(cluster, [dl.blocks], vals,
                   lambda a, b: tuple(x + y for x, y in zip(a, b)), width, mode="reduce")
    return r[dl.blocks[0]]


def concat(cluster: Cluster, *lists: DistributedList) -> DistributedList:
    return DistributedList(cluster, [b for dl in lists for b in dl.blocks])


def to_arcs(cluster: Cluster, edges: DistributedList) -> DistributedList:
    return flat_map(cluster, edges, lambda st, mid: [a for u, v in st for a in ((u, v), (v, u))])


def annotate_degrees(cluster: Cluster, arcs: DistributedList,
                     threshold: float) -> tuple[DistributedList, int, int]:
    """Sort arcs and label each with both endpoint degrees.

    The arc set is symmetric, so ``d(v)`` is the run length of ``v`` when the
    arcs are sorted by target: two sort passes replace any table lookup.
    Each arc comes out as its reverse, which is in the set as well, so the
    result stays sorted by its first vertex.  Returns ``(arcs as (u, v, d(u), d(v)), #arcs, #vertices above threshold)``.
    """
    srt = mpc_sort(cluster, arcs)
    # (v, u, d(u)) so that the second sort groups by target
    seg = segment_annotate(cluster, srt, key=lambda r: r[0],
                           emit=lambda r, t, b, p: (r[1], r[0], t), extra=1)
    srt = mpc_sort(cluster, seg)
    ann = segment_annotate(cluster, srt, key=lambda r: r[0],
                           emit=lambda r, t, b, p: (r[0], r[1], t, r[2], "" if b else "f"),
                           extra=1)
    n_arcs, n_high = tally(cluster, ann, lambda st: (
        len(st), sum(1 for t in st if t[4] and t[2] > threshold)))

    def f(m):
        m.set_store([t[:4] for t in m.store], m.store_words)
    cluster.local(f, ann.blocks)
    return DistributedList(cluster, ann.blocks, "arc"), n_arcs, n_high


def _keep(cluster: Cluster, dl: DistributedList, fn) -> DistributedList:
    """A transformed copy that leaves ``dl`` in place."""
    return flat_map(cluster, dl, fn, keep=True)


def _data_words(cluster: Cluster) -> int:
    return sum(m.store_words for m in cluster.machines)


class _Peeler:
    """Shared bookkeeping of the peeling loop."""

    def __init__(self, cluster: Cluster, n: int, m: int, alpha: float, check: bool = True):
        self.cluster = cluster
        self.n = n
        self.m = m
        self.alpha = alpha
        self.check = check
        self.states: list[PeelingState] = []

    def open(self, i: int, q: int, thr: float, m_i: int) -> PeelingState:
        st = PeelingState(i=i, q=q, a=0, gamma=thr, m_i=m_i,
                          rounds=self.cluster.metrics.rounds)
        return st

    def close(self, st: PeelingState, q_next: int, T) -> None:
        st.a = st.q - q_next
        st.rounds = self.cluster.metrics.rounds - st.rounds
        st.words = _data_words(self.cluster)
        st.T = T
        self.states.append(st)
        if self.check:
            check_pruning(self.n, self.m, st)


# ---------------------------------------------------------------------------
# exact triangle counting
# ---------------------------------------------------------------------------

# class tags of an own record (w, x): constant-size headers, free in the word model
_CLASS = {(True, True): "hh", (True, False): "hl", (False, True): "lh", (False, False): "ll"}
# weights in twelfths: 1/2 if both high, 1/4 if one is, 1/6 if both low
_WEIGHT12 = {"hh": 6, "hl": 3, "lh": 3, "ll": 2}


def count_triangles_exact(g: Graph, alpha: Optional[int] = None, S: Optional[int] = None,
                          delta: float = 0.5, seed: int = 0,
                          cluster: Optional[Cluster] = None,
                          edges: Optional[DistributedList] = None) -> ExactResult:
    """Exact triangle count in ``O(m alpha)`` total space.

    Low vertices ship their ``Q_i``-neighbour list to every ``Q_i``-neighbour
    (a record ``(w, x, "L")`` per list entry); each arc ``(w, x)`` of
    ``G[Q_i]`` becomes an own record ``(w, x, class)`` tagged with the
    high/low classes of ``w`` and ``x``.  After
    one global sort the multiplicity ``R`` of every own record gives the
    duplicates of ``x`` at ``w``, weighted by 1/2, 1/4 or 1/6.
    """
    alpha = default_alpha(g) if alpha is None else alpha
    if cluster is None:
        cluster, edges = make_cluster(g, S, delta, seed)
    n, m = g.n, g.m
    pe = _Peeler(cluster, n, m, alpha)
    arcs = to_arcs(cluster, edges)
    q = n
    units = 0          # twelfths of a triangle
    approx = 0
    i = 0
    while q > 0:
        thr = gamma(i, alpha)
        if not arcs.blocks or len(arcs) == 0:
            st = pe.open(i, q, thr, 0)
            pe.close(st, 0, Fraction(units, 12))
            cluster.release(arcs.blocks)
            q = 0
            break
        ann, n_arcs, q_next = annotate_degrees(cluster, arcs, thr)
        st = pe.open(i, q, thr, n_arcs // 2)
        own = flat_map(cluster, ann, lambda s, mid, thr=thr: [
            (r[0], r[1], _CLASS[r[2] > thr, r[3] > thr]) for r in s])
        low = _keep(cluster, own, lambda s, mid: [(r[0], r[1]) for r in s if r[2][0] == "l"])
        nxt = _keep(cluster, own, lambda s, mid: [(r[0], r[1]) for r in s if r[2] == "hh"])

        def emit(A, B, same):
            if same:
                return [(a[1], b[1], "L") for x, a in enumerate(A)
                        for y, b in enumerate(B) if x != y]
            return [(a[1], b[1], "L") for a in A for b in B]
        lists = group_pairs(cluster, low, lambda r: r[0], emit)
        allrec = mpc_sort(cluster, concat(cluster, own, lists))
        # keep (own record, multiplicity) only where lists duplicate it
        dup = segment_annotate(cluster, allrec, key=lambda r: (r[0], r[1]),
                               emit=lambda r, R, b, p: (r, R) if R > 1 and r[2] != "L" else None,
                               extra=1)

        def part(stt):
            u12 = ap = 0
            for r, R in stt:
                u12 += (R - 1) * _WEIGHT12[r[2]]
                ap += R - 1
            return u12, ap
        du, da = tally(cluster, dup, part)
        units += du
        approx += da
        cluster.release(dup.blocks)
        pe.close(st, q_next, Fraction(units, 12))
        arcs = nxt
        q = q_next
        i += 1
    if q > 0:
        raise PruningViolation(f"{q} vertices left after the last iteration")
    res = ExactResult(count=0, alpha=alpha, S=cluster.S, iterations=pe.states,
                      metrics=cluster.snapshot(), find_triangles_total=approx)
    if units % 12:
        res.warnings.append(f"weighted duplicate total {Fraction(units, 12)} is not integral")
        res.metrics.success = False
        res.count = units / 12
    else:
        res.count = units // 12
    return res


# ---------------------------------------------------------------------------
# triangle enumeration
# ---------------------------------------------------------------------------

def _dedup(cluster: Cluster, dl: DistributedList) -> DistributedList:
    """Sort and keep the first copy of every record."""
    srt = mpc_sort(cluster, dl)
    return segment_annotate(cluster, srt, emit=lambda r, t, b, p: r if b == 0 else None, extra=0)


def _filter_queries(cluster: Cluster, qdl: DistributedList, key: Callable,
                    table: DistributedList, keep: Callable) -> DistributedList:
    """Edge-existence queries: keep ``keep(r)`` for records whose ``key(r)`` is in ``table``."""
    ms = cluster.machines
    holders = [b for b in qdl.blocks if ms[b].store]
    ans = lookup(cluster, {b: [key(r) for r in ms[b].store] for b in holders}, table,
                 default=False, entry=lambda r: (r, True))

    def f(m):
        a = ans.get(m.id)
        if a is None:
            m.set_store([])
        else:
            m.set_store([keep(r) for r, ok in zip(m.store, a) if ok])
    cluster.local(f, qdl.blocks)
    return qdl


def enumerate_triangles_incident(cluster: Cluster, ann: DistributedList, thr: float,
                                 low: Optional[DistributedList] = None) -> DistributedList:
    """Triangles of the current graph touching a vertex of degree ``<= thr``.

    ``ann`` holds sorted annotated arcs ``(u, v, d(u), d(v))`` and stays in
    place.  The groups of low arcs are paired up (large groups are split and
    duplicated by :func:`group_pairs`), every pair ``x < y`` of neighbours of a
    low ``v`` asks whether ``(x, y)`` is an edge, and the found triples are
    sorted and deduplicated.
    """
    if low is None:
        low = _keep(cluster, ann, lambda s, mid: [r for r in s if r[2] <= thr])
    table = _keep(cluster, ann, lambda s, mid: [(r[0], r[1]) for r in s if r[0] < r[1]])

    def emit(A, B, same):
        return [((a[1], b[1]), a[0]) for a in A for b in B if a[1] < b[1]]
    qs = group_pairs(cluster, low, lambda r: r[0], emit)
    found = _filter_queries(cluster, qs, lambda r: r[0],
                            table, lambda r: tuple(sorted((r[1], r[0][0], r[0][1]))))
    cluster.release(table.blocks)
    return _dedup(cluster, found)


def _enumerate_on(cluster: Cluster, edges: DistributedList, n: int, m: int,
                  alpha: float) -> tuple[DistributedList, list]:
    pe = _Peeler(cluster, n, m, alpha)
    arcs = to_arcs(cluster, edges)
    q = n
    out: list[int] = []
    i = 0
    total = 0
    while q > 0:
        thr = gamma(i, alpha)
        if len(arcs) == 0:
            st = pe.open(i, q, thr, 0)
            pe.close(st, 0, total)
            cluster.release(arcs.blocks)
            q = 0
            break
        ann, n_arcs, q_next = annotate_degrees(cluster, arcs, thr)
        st = pe.open(i, q, thr, n_arcs // 2)
        nxt = _keep(cluster, ann, lambda s, mid, thr=thr: [(r[0], r[1]) for r in s
                                                           if r[2] > thr and r[3] > thr])
        tri = enumerate_triangles_incident(cluster, ann, thr)
        cluster.release(ann.blocks)
        total += len(tri)
        out.extend(tri.blocks)
        pe.close(st, q_next, total)
        arcs = nxt
        q = q_next
        i += 1
    if q > 0:
        raise PruningViolation(f"{q} vertices left after the last iteration")
    return DistributedList(cluster, out, "triangle"), pe.states


def enumerate_triangles(g: Graph, alpha: Optional[int] = None, S: Optional[int] = None,
                        delta: float = 0.5, seed: int = 0) -> ExactResult:
    """Every triangle exactly once, as sorted vertex triples."""
    alpha = default_alpha(g) if alpha is None else alpha
    cluster, edges = make_cluster(g, S, delta, seed)
    tri, states = _enumerate_on(cluster, edges, g.n, g.m, alpha)
    triangles = sorted(tri.records())
    return ExactResult(count=len(triangles), alpha=alpha, S=cluster.S, iterations=states,
                       metrics=cluster.snapshot(), triangles=triangles)


# ---------------------------------------------------------------------------
# query-based variant
# ---------------------------------------------------------------------------

def query_cap(S: int) -> int:
    """Largest degree whose neighbourhood (and its pair queries) is handled on one machine."""
    return max(1, math.isqrt(S) // 4)


def query_space(g: Graph, delta: float = 0.5) -> int:
    """Smallest ``S`` (at least the default) whose neighbourhood cap covers every degree."""
    top = max(g.degrees(), default=0)
    return max(default_space(g.n, delta), 16 * top * top)


def count_cliques_query(g: Graph, alpha: Optional[int] = None, S: Optional[int] = None,
                        delta: float = 0.5, seed: int = 0) -> ExactResult:
    """Triangle count where every low vertex queries all pairs of its neighbours.

    A low vertex ``v`` (degree at most ``min(sqrt(S)/4, gamma_i)``) gathers
    its neighbourhood on one machine and checks each neighbour pair.  A
    triangle with ``t`` low vertices is seen ``t`` times and weighted ``1/t``.
    """
    alpha = default_alpha(g) if alpha is None else alpha
    cluster, edges = make_cluster(g, S, delta, seed)
    cap_q = query_cap(cluster.S)
    warnings = []
    if 2 * alpha > cap_q:
        warnings.append(f"arboricity bound {alpha} too large for S={cluster.S}: "
                        f"needs 2*alpha <= sqrt(S)/4")
    n, m = g.n, g.m
    pe = _Peeler(cluster, n, m, alpha, check=False)
    arcs = to_arcs(cluster, edges)
    q = n
    sixths = 0
    i = 0
    capped = False
    while q > 0:
        thr = min(cap_q, gamma(i, alpha))
        if len(arcs) == 0:
            st = pe.open(i, q, thr, 0)
            pe.close(st, 0, Fraction(sixths, 6))
            cluster.release(arcs.blocks)
            q = 0
            break
        ann, n_arcs, q_next = annotate_degrees(cluster, arcs, thr)
        st = pe.open(i, q, thr, n_arcs // 2)
        while q_next == q and thr < gamma(i, alpha):
            # stalled under the cap: widen towards gamma_i
            warnings.append(f"iteration {i}: no vertex of degree <= {thr}; threshold raised")
            thr = min(gamma(i, alpha), 2 * thr)
            arcs = flat_map(cluster, ann, lambda s, mid: [(r[0], r[1]) for r in s])
            ann, n_arcs, q_next = annotate_degrees(cluster, arcs, thr)
        st.gamma = thr
        # the cap only matters when it keeps some vertex out of this round
        capped = capped or (thr < gamma(i, alpha) and q_next > 0)
        nxt = _keep(cluster, ann, lambda s, mid, thr=thr: [(r[0], r[1]) for r in s
                                                           if r[2] > thr and r[3] > thr])
        table = _keep(cluster, ann, lambda s, mid: [(r[0], r[1]) for r in s if r[0] < r[1]])
        nb = flat_map(cluster, ann, lambda s, mid, thr=thr: [
            (r[0], r[1], r[3] > thr) for r in s if r[2] <= thr])

        def pairs(A, B, same):
            # every unordered neighbour pair once, weighted 6/t in sixths
            return [((a[1], b[1]), 6 // (1 + (not a[2]) + (not b[2])))
                    for a in A for b in B if a[1] < b[1]]
        qs = group_pairs(cluster, nb, lambda r: r[0], pairs)
        hit = _filter_queries(cluster, qs, lambda r: r[0], table, lambda r: r[1])
        (add,) = tally(cluster, hit, lambda stt: (sum(stt),))
        sixths += add
        cluster.release(hit.blocks)
        cluster.release(table.blocks)
        pe.close(st, q_next, Fraction(sixths, 6))
        if not capped:
            check_pruning(n, m, st)
        elif st.q - st.a > 2 * alpha * st.q / thr + 1e-9:
            raise PruningViolation(f"iteration {i}: |Q_(i+1)|={st.q - st.a} > 2 alpha |Q_i| / {thr}")
        arcs = nxt
        q = q_next
        i += 1
    if sixths % 6:
        warnings.append(f"weighted total {Fraction(sixths, 6)} is not integral")
    res = ExactResult(count=sixths // 6 if sixths % 6 == 0 else sixths / 6, alpha=alpha,
                      S=cluster.S, iterations=pe.states, metrics=cluster.snapshot(),
                      capped=capped, warnings=warnings)
    if sixths % 6:
        res.metrics.success = False
    return res
