"""Exact k-clique counting through a tower of clique graphs.

Level 1 is the input graph.  Every (j+1)-clique ``Q`` found at level ``j``
spawns one clique vertex per ``Q - {v}`` joined to ``v``; level ``j+1`` holds
those joins plus the original edges.  A triangle of level ``j`` that uses a
clique vertex ``c`` and two original vertices ``a, b`` names the
(j+2)-clique ``K(c) + {a, b}``, and every such clique shows up
``C(j+2, 2)`` times (once per pair it could drop).  So the k-cliques are the
mixed triangles of level ``k-2``.
"""

from __future__ import annotations

import math
from typing import Optional

from .exact import (
    ExactResult,
    _dedup,
    _enumerate_on,
    _keep,
    concat,
    default_alpha,
    make_cluster,
    tally,
)
from .graph import Graph, degeneracy
from .mpc.primitives import (
    DistributedList,
    flat_map,
    lookup,
    mpc_sort,
    prefix_counts,
    segment_annotate,
)
from .mpc.runtime import Cluster

MAX_K = 6


class ArboricityGrowth(AssertionError):
    """A clique graph came out denser than the level bound allows."""


def _level_kappa(cluster: Cluster, edges: DistributedList, n: int) -> int:
    # driver-side oracle: degeneracy of the level graph
    return max(1, degeneracy(Graph.from_edges(n, edges.records())))


def _cliques_at(cluster: Cluster, tri: DistributedList, table: Optional[DistributedList],
                n: int) -> DistributedList:
    """Turn the level's triangles into sorted clique tuples (with repeats)."""
    if table is None:
        return tri
    ms = cluster.machines
    mixed = flat_map(cluster, tri, lambda st, mid: [t for t in st if t[2] >= n])
    holders = [b for b in mixed.blocks if ms[b].store]
    ans = lookup(cluster, {b: [t[2] for t in ms[b].store] for b in holders}, table)

    def f(m):
        a = ans.get(m.id, ())
        m.set_store([tuple(sorted(K + t[:2])) for t, K in zip(m.store, a)])
    cluster.local(f, mixed.blocks)
    return mixed


def _next_level(cluster: Cluster, cliques: DistributedList, n: int
                ) -> tuple[DistributedList, DistributedList, int]:
    """Clique vertices and joins of the next level.

    Returns ``(joins (v, id), table (id, K), #clique vertices)``; ids are
    ``n + rank`` of ``K`` among the distinct subsets.
    """
    drops = flat_map(cluster, cliques, lambda st, mid: [
        (Q[:x] + Q[x + 1:], Q[x]) for Q in st for x in range(len(Q))])
    srt = mpc_sort(cluster, drops)
    ann = segment_annotate(cluster, srt, key=lambda r: r[0],
                           emit=lambda r, t, b, p: (r[0], r[1], "" if b else "f"), extra=0)
    pc = prefix_counts(cluster, ann, weight=lambda r: 1 if r[2] else 0)
    n_new = pc[ann.blocks[0]][1] if ann.blocks else 0

    def ids(st, mid):
        out = []
        rank = pc[mid][0] - 1
        for K, v, first in st:
            if first:
                rank += 1
            out.append((K, v, n + rank, first))
        return out
    ided = flat_map(cluster, ann, ids)
    table = _keep(cluster, ided, lambda st, mid: [(r[2], r[0]) for r in st if r[3]])
    joins = flat_map(cluster, ided, lambda st, mid: [(r[1], r[2]) for r in st])
    return joins, table, n_new


def count_k_cliques(g: Graph, k: int, alpha: Optional[int] = None, S: Optional[int] = None,
                    delta: float = 0.5, seed: int = 0) -> ExactResult:
    """Number of k-cliques of ``g`` for ``3 <= k <= 6``."""
    if not 3 <= k <= MAX_K:
        raise ValueError(f"k must lie in [3, {MAX_K}], got {k}")
    alpha = default_alpha(g) if alpha is None else alpha
    cluster, edges = make_cluster(g, S, delta, seed)
    n = g.n
    base = _keep(cluster, edges, lambda st, mid: list(st))
    level_edges = edges
    table = None
    n_level = n
    a_level = alpha
    bound = alpha
    levels = []
    states = []
    count = 0
    for j in range(1, k - 1):
        m_level = len(level_edges)
        tri, st = _enumerate_on(cluster, level_edges, n_level, m_level, a_level)
        states.extend(st)
        cl = _cliques_at(cluster, tri, table, n)
        n_mixed = len(cl)
        uniq = _dedup(cluster, cl)
        (n_cliques,) = tally(cluster, uniq, lambda stt: (len(stt),))
        reps = math.comb(j + 2, 2) if j > 1 else 1
        if n_mixed != reps * n_cliques:
            raise AssertionError(f"level {j}: {n_mixed} mixed triangles for "
                                 f"{n_cliques} distinct {j + 2}-cliques")
        levels.append(dict(level=j, vertices=n_level, edges=m_level, alpha=a_level,
                           triangles=n_mixed, cliques=n_cliques))
        if table is not None:
            cluster.release(table.blocks)
        if j == k - 2:
            count = n_cliques
            cluster.release(uniq.blocks)
            break
        joins, table, n_new = _next_level(cluster, uniq, n)
        copy = _keep(cluster, base, lambda stt, mid: list(stt))
        level_edges = concat(cluster, copy, joins)
        n_level = n + n_new
        bound = 3 * (j + 1) * bound
        a_level = _level_kappa(cluster, level_edges, n_level)
        if a_level > 2 * bound:
            raise ArboricityGrowth(f"level {j + 1}: degeneracy {a_level} > 2 * {bound}")
    cluster.release(base.blocks)
    res = ExactResult(count=count, alpha=alpha, S=cluster.S, iterations=states,
                      metrics=cluster.snapshot())
    res.extra["k"] = k
    res.extra["levels"] = levels
    return res
