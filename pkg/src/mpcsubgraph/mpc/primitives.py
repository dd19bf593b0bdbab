"""Bulk MPC building blocks on top of :mod:`mpcsubgraph.mpc.runtime`.

Every operation here moves data only through :meth:`Cluster.run_round`, so the
round and space counters in ``cluster.metrics`` reflect what the operation
would cost on a real machine pool.  The control flow (this module) decides
*which* machines talk to which; the records themselves are only touched
inside per-machine steps.

Blocks hold at most ``block_cap(S)`` words so that a machine can carry a block,
its inbox and a little control state at the same time.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Any, Callable, Iterable, Optional, Sequence

from .runtime import Batch, Cluster, Machine, block_words, words

Record = Any


def block_cap(S: int) -> int:
    return max(1, S // 3)


# ---------------------------------------------------------------------------
# distributed lists
# ---------------------------------------------------------------------------

@dataclass
class DistributedList:
    """Records spread over an ordered sequence of machines.

    ``blocks`` lists the machine ids in order; when ``sorted_by`` is set the
    concatenation of the blocks is globally sorted under that key.
    """

    cluster: Cluster
    blocks: list[int]
    sorted_by: Any = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, cluster: Cluster, records: Sequence[Record],
                     cap: Optional[int] = None) -> "DistributedList":
        """Place input records on fresh machines (the model's initial layout)."""
        cap = cap or block_cap(cluster.S)
        chunks = _chunk_by_words(list(records), cap)
        mids = cluster.allocate(len(chunks))
        for mid, (chunk, w) in zip(mids, chunks):
            cluster.set_store(mid, chunk, w)
        return cls(cluster, mids)

    def __len__(self) -> int:
        ms = self.cluster.machines
        return sum(len(ms[b].store) for b in self.blocks)

    @property
    def words(self) -> int:
        ms = self.cluster.machines
        return sum(ms[b].store_words for b in self.blocks)

    def records(self) -> list:
        """Concatenated contents, read by the driver for results and tests."""
        ms = self.cluster.machines
        out: list = []
        for b in self.blocks:
            out.extend(ms[b].store)
        return out

    def release(self) -> None:
        self.cluster.release(self.blocks)
        self.blocks = []


def _chunk_by_words(records: list, cap: int) -> list[tuple[list, int]]:
    if not records:
        return [([], 0)]
    out = []
    cur: list = []
    cw = 0
    for r in records:
        w = words(r)
        if cur and cw + w > cap:
            out.append((cur, cw))
            cur, cw = [], 0
        cur.append(r)
        cw += w
    out.append((cur, cw))
    return out


def _split_words(records: list, pieces: int) -> list[tuple[list, int]]:
    """Split into ``pieces`` consecutive runs of roughly equal word weight.

    Returns ``(run, words)`` pairs.
    """
    ws = list(accumulate(words(r) for r in records))
    total = ws[-1] if ws else 0
    if pieces <= 1:
        return [(records, total)]
    out = []
    start = 0
    for j in range(1, pieces + 1):
        bound = total * j / pieces
        end = bisect.bisect_right(ws, bound, lo=start) if j < pieces else len(records)
        w = (ws[end - 1] if end else 0) - (ws[start - 1] if start else 0)
        out.append((records[start:end], w))
        start = end
    return out


def distribute_input(cluster: Cluster, g) -> DistributedList:
    """Spread the edge list of ``g`` over the initial ``M`` machines.

    Edges are assigned contiguously in sorted order with block sizes that
    differ by at most one.  Every machine learns ``n`` and ``m``.
    """
    edges = sorted(g.edges)
    m = len(edges)
    M = cluster.cfg.M
    if 2 * m > M * cluster.S:
        raise ValueError(f"input of {2 * m} words exceeds total space M*S={M * cluster.S}")
    mids = cluster.allocate(M)
    base, extra = divmod(m, M)
    pos = 0
    for j, mid in enumerate(mids):
        size = base + (1 if j < extra else 0)
        cluster.set_store(mid, edges[pos:pos + size], 2 * size)
        pos += size
    cluster.globals.update(n=g.n, m=m)
    return DistributedList(cluster, mids, sorted_by="edge")


def spread(cluster: Cluster, dl: DistributedList, cap: Optional[int] = None) -> DistributedList:
    """Re-block a list so that no machine holds more than ``cap`` words (one round).

    Used after initial distribution when blocks are larger than the working
    block size.
    """
    cap = cap or block_cap(cluster.S)
    if all(cluster.machines[b].store_words <= cap for b in dl.blocks):
        return dl
    return rebalance(cluster, dl, cap)


# ---------------------------------------------------------------------------
# tree sweeps
# ---------------------------------------------------------------------------

def _levels(B: int, f: int) -> int:
    h, span = 0, 1
    while span < B:
        span *= f
        h += 1
    return h


def _fanin(S: int, width: int, B: int) -> int:
    width = max(1, width)
    f = max(2, (S // 4) // width)
    return f


def _fold(op, vals):
    acc = None
    for v in vals:
        acc = v if acc is None else (acc if v is None else op(acc, v))
    return acc


def tree_sweep(cluster: Cluster, groups: Sequence[Sequence[int]], leaf_vals: dict,
               op: Callable, width: int = 1, mode: str = "scan",
               root_fn: Optional[Callable] = None) -> dict:
    """Aggregate one value per machine up an f-ary tree, per group, in lockstep.

    ``mode="scan"`` returns ``{mid: (prefix, suffix)}`` with the exclusive
    prefix/suffix aggregates of each leaf within its group (``None`` is the
    identity).  ``mode="bcast"`` returns ``{mid: root_fn(total)}`` for every
    leaf.  ``mode="reduce"`` returns ``{first_mid: total}`` per group and skips
    the down-sweep.  Internal nodes are spread over the group's machines
    (internal node ``q`` in level order lives on machine ``q mod B``), so a
    machine stores the child values of O(1) nodes.
    """
    groups = [list(g) for g in groups if len(g) > 0]
    res: dict = {}
    live = [g for g in groups if len(g) > 1]
    for g in groups:
        if len(g) == 1:
            mid = g[0]
            if mode == "scan":
                res[mid] = (None, None)
            elif mode == "bcast":
                res[mid] = root_fn(leaf_vals.get(mid)) if root_fn else leaf_vals.get(mid)
            else:
                res[mid] = leaf_vals.get(mid)
    if not live:
        return res
    maxB = max(len(g) for g in live)
    f = _fanin(cluster.S, width + 4, maxB)
    heights = []
    host: dict = {}          # (gi, l, j) -> machine
    hosted: dict = {}        # (machine, l) -> [(gi, j)]
    for gi, g in enumerate(live):
        B = len(g)
        h = _levels(B, f)
        heights.append(h)
        for j, mid in enumerate(g):
            host[(gi, 0, j)] = mid
            hosted.setdefault((mid, 0), []).append((gi, j))
        q = 0
        for lv in range(1, h + 1):
            for j in range(-(-B // f ** lv)):
                mid = g[q % B]
                q += 1
                host[(gi, lv, j)] = mid
                hosted.setdefault((mid, lv), []).append((gi, j))
    H = max(heights)
    members = [mid for g in live for mid in g]
    ms = cluster.machines

    def kids_words(kids):
        return sum(words(v) for d in kids.values() for v in d.values())

    def absorb(m: Machine) -> None:
        box = m.take_inbox()
        if not box:
            return
        kids = m.get_aux("ts_kids", {})
        down = m.get_aux("ts_down", {})
        for msg in box:
            if msg[0] == "u":
                _, gi, lv, j, t, val = msg
                kids.setdefault((gi, lv, j), {})[t] = val
            else:
                _, gi, lv, j, a, b = msg
                down[(gi, lv, j)] = (a, b)
        m.put_aux("ts_kids", kids, kids_words(kids))
        m.put_aux("ts_down", down, sum(words(v) for v in down.values()))

    def children(gi, lv, j):
        B = len(live[gi])
        span = f ** (lv - 1)
        return [t for t in range(f) if (j * f + t) * span < B]

    for lv in range(H):
        def up(m: Machine, lv=lv):
            absorb(m)
            out = []
            for gi, j in hosted.get((m.id, lv), ()):
                if lv >= heights[gi]:
                    continue
                if lv == 0:
                    val = leaf_vals.get(m.id)
                else:
                    kids = m.get_aux("ts_kids")
                    d = kids[(gi, lv, j)]
                    val = _fold(op, [d[t] for t in sorted(d)])
                    if mode != "scan":
                        del kids[(gi, lv, j)]
                        m.put_aux("ts_kids", kids, kids_words(kids))
                out.append((host[(gi, lv + 1, j // f)], ("u", gi, lv + 1, j // f, j % f, val)))
            return out
        cluster.run_round(up, members)

    if mode == "reduce":
        for gi, g in enumerate(live):
            h = heights[gi]
            m = ms[host[(gi, h, 0)]]
            absorb(m)
            d = m.get_aux("ts_kids")[(gi, h, 0)]
            res[g[0]] = _fold(op, [d[t] for t in sorted(d)])
        for mid in members:
            ms[mid].pop_aux("ts_kids")
            ms[mid].pop_aux("ts_down")
        return res

    for lv in range(H, 0, -1):
        def down(m: Machine, lv=lv):
            absorb(m)
            out = []
            for gi, j in hosted.get((m.id, lv), ()):
                h = heights[gi]
                if lv > h:
                    continue
                order = children(gi, lv, j)
                kids = m.get_aux("ts_kids", {})
                if mode == "scan" or lv == h:
                    d = kids.pop((gi, lv, j))
                    m.put_aux("ts_kids", kids, kids_words(kids))
                    vals = [d[t] for t in order]
                if lv == h:
                    if mode == "scan":
                        pre = suf = None
                    else:
                        total = _fold(op, vals)
                        pre = root_fn(total) if root_fn else total
                else:
                    dd = m.get_aux("ts_down")
                    pre, suf = dd.pop((gi, lv, j))
                    m.put_aux("ts_down", dd, sum(words(v) for v in dd.values()))
                if mode == "scan":
                    sufs = [None] * len(vals)
                    acc = suf
                    for q in range(len(vals) - 1, -1, -1):
                        sufs[q] = acc
                        acc = _fold(op, [vals[q], acc])
                    acc = pre
                    for q, t in enumerate(order):
                        cj = j * f + t
                        out.append((host[(gi, lv - 1, cj)], ("d", gi, lv - 1, cj, acc, sufs[q])))
                        acc = _fold(op, [acc, vals[q]])
                else:
                    for t in order:
                        cj = j * f + t
                        out.append((host[(gi, lv - 1, cj)], ("d", gi, lv - 1, cj, pre, None)))
            return out
        cluster.run_round(down, members)

    for gi, g in enumerate(live):
        for idx, mid in enumerate(g):
            m = ms[mid]
            absorb(m)
            dd = m.get_aux("ts_down")
            pre, suf = dd.pop((gi, 0, idx))
            res[mid] = (pre, suf) if mode == "scan" else pre
    for mid in members:
        ms[mid].pop_aux("ts_kids")
        ms[mid].pop_aux("ts_down")
    return res


def prefix_counts(cluster: Cluster, dl: DistributedList,
                  weight: Optional[Callable] = None) -> dict:
    """Exclusive prefix of record counts (or weights) per block: ``{mid: (before, total)}``."""
    ms = cluster.machines
    vals = {}
    for b in dl.blocks:
        st = ms[b].store
        vals[b] = len(st) if weight is None else sum(map(weight, st))
    sc = tree_sweep(cluster, [dl.blocks], vals, lambda a, b: a + b, 1)
    out = {}
    for b in dl.blocks:
        pre, suf = sc[b]
        pre = pre or 0
        out[b] = (pre, pre + vals[b] + (suf or 0))
    return out


def global_sum(cluster: Cluster, dl: DistributedList, fn: Callable[[list], Any]) -> Any:
    """Sum ``fn(block)`` over all blocks by a convergecast to the first block."""
    vals = {b: fn(cluster.machines[b].store) for b in dl.blocks}
    if not dl.blocks:
        return 0
    r = tree_sweep(cluster, [dl.blocks], vals, lambda a, b: a + b, 1, mode="reduce")
    return r[dl.blocks[0]] or 0


# ---------------------------------------------------------------------------
# routing helpers
# ---------------------------------------------------------------------------

def rebalance(cluster: Cluster, dl: DistributedList, cap: Optional[int] = None,
              per: Optional[int] = None) -> DistributedList:
    """Route records into consecutive blocks by global position (order preserved)."""
    cap = cap or block_cap(cluster.S)
    ms = cluster.machines
    if per is None:
        wmax = max((max(map(words, ms[b].store), default=1) for b in dl.blocks), default=1)
        per = max(1, cap // max(1, wmax))
    pc = prefix_counts(cluster, dl)
    total = pc[dl.blocks[0]][1] if dl.blocks else 0
    nb = max(1, math.ceil(total / per))
    dest = _reuse(cluster, dl.blocks, nb)

    def step(m: Machine):
        st = m.store
        if not st:
            return None
        base = pc[m.id][0]
        m.set_store([], 0)
        out: dict = {}
        for i, r in enumerate(st):
            out.setdefault(dest[(base + i) // per], []).append(r)
        return [(d, Batch(rs)) for d, rs in out.items()]

    cluster.run_round(step, dl.blocks)
    _absorb_store(cluster, dest)
    _release_unused(cluster, dl.blocks, dest)
    return DistributedList(cluster, dest, dl.sorted_by)


def _reuse(cluster: Cluster, old: Sequence[int], k: int) -> list[int]:
    """Destination machines: recycle the (about to be emptied) old ones first."""
    ids = list(old[:k])
    if k > len(ids):
        ids += cluster.allocate(k - len(ids))
    return ids


def _release_unused(cluster: Cluster, old: Iterable[int], keep: Iterable[int]) -> None:
    keep = set(keep)
    cluster.release([b for b in old if b not in keep])


def _absorb_store(cluster: Cluster, mids: Iterable[int], keep: bool = False) -> None:
    """Local step: the delivered inbox becomes (or, with ``keep``, joins) the data block."""
    def f(m: Machine):
        w = m.inbox_words
        box = m.take_inbox()
        if keep:
            m.set_store(m.store + box, m.store_words + w)
        else:
            m.set_store(box, w)
    cluster.local(f, mids)


# ---------------------------------------------------------------------------
# sorting
# ---------------------------------------------------------------------------


def mpc_sort(cluster: Cluster, dl: DistributedList, key: Optional[Callable] = None,
             consume: bool = True) -> DistributedList:
    """Sample sort into a new sorted list.

    With a ``key`` the sort is stable: records travel as ``(global index,
    record)`` and ties are broken by the index.  Without a key records are
    compared whole, so equal records are interchangeable and travel bare.
    With ``consume=True`` the input machines are recycled as destinations;
    otherwise the input is left untouched.
    """
    ms = cluster.machines
    cap = block_cap(cluster.S)
    blocks = list(dl.blocks)
    tag = key or "record"
    if not blocks:
        return DistributedList(cluster, [], tag)
    stable = key is not None

    # single block: purely local
    if len(blocks) == 1 and consume:
        def f(m):
            m.store.sort(key=key)
        cluster.local(f, blocks)
        return DistributedList(cluster, blocks, tag)

    if stable:
        pc = prefix_counts(cluster, dl)

        def wrap(rs, mid, w):
            base = pc[mid][0]
            return Batch([(base + i, r) for i, r in enumerate(rs)], w + len(rs))

        def dkey(d):
            return key(d[1]), d[0]
    else:
        def wrap(rs, mid, w):
            return Batch(rs, w)
        dkey = None

    if consume:
        groups = [((), flat_map(cluster, dl, lambda st, mid: wrap(st, mid, ms[mid].store_words)).blocks
                   if stable else blocks)]
    else:
        # ship (decorated) copies to fresh machines (one round)
        dest = {}
        for b in blocks:
            st = ms[b].store
            w = ms[b].store_words + (len(st) if stable else 0)
            dest[b] = cluster.allocate(max(1, math.ceil(w / cap)) if st else 1)

        def step(m: Machine):
            d = wrap(m.store, m.id, m.store_words)
            parts = _split_words(d, len(dest[m.id]))
            return [(t, Batch(p, w)) for t, (p, w) in zip(dest[m.id], parts)]
        cluster.run_round(step, blocks)
        newb = [t for b in blocks for t in dest[b]]
        _absorb_store(cluster, newb)
        groups = [((), newb)]

    done: list[tuple[tuple, list[int]]] = []
    while groups:
        nxt = []
        small = []
        for path, g in groups:
            W = sum(ms[b].store_words for b in g)
            if len(g) == 1:
                done.append((path, g))
            elif W <= cap:
                small.append((path, g))
            else:
                nxt.append((path, g))
        if small:
            targets = {}

            def gather(m: Machine):
                st = m.store
                w = m.store_words
                m.set_store([], 0)
                return [(targets[m.id], Batch(st, w))] if st else None
            for _, g in small:
                for b in g[1:]:
                    targets[b] = g[0]
            cluster.run_round(gather, [b for _, g in small for b in g[1:]])
            _absorb_store(cluster, [g[0] for _, g in small], keep=True)
            for path, g in small:
                cluster.release(g[1:])
                done.append((path, [g[0]]))
        groups = _sample_split(cluster, nxt, cap, dkey) if nxt else []

    # bucket paths give the global order of the finished groups
    done.sort(key=lambda pg: pg[0])
    out_blocks = []
    for _, g in done:
        if ms[g[0]].store:
            out_blocks.append(g[0])
        else:
            cluster.release(g)

    def strip(m):
        st = m.store
        st.sort(key=dkey)
        if stable:
            m.set_store([d[1] for d in st], m.store_words - len(st))
    cluster.local(strip, out_blocks)
    if not out_blocks:
        out_blocks = cluster.allocate(1)
    return DistributedList(cluster, out_blocks, tag)


def _sample_split(cluster: Cluster, groups: list, cap: int,
                  dkey: Optional[Callable]) -> list:
    """One level of sample sort for every ``(path, machines)`` group in lockstep.

    Splitting compares ``(key, block position, index)`` so that equal keys
    can still be cut apart and every level makes progress.  Returns the
    bucket groups with extended paths; buckets that still exceed a block are
    split again by the caller.
    """
    ms = cluster.machines
    kf = dkey if dkey is not None else (lambda r: r)
    key_w = 1
    for _, g in groups:
        for b in g:
            st = ms[b].store
            if st:
                key_w = max(key_w, words(kf(st[0])), words(kf(st[-1])))
    key_w += 2
    lim = max(2, math.isqrt(max(1, (cluster.S // 8) // key_w)))
    nbs = []
    for _, g in groups:
        W = sum(ms[b].store_words for b in g)
        nbs.append(max(2, min(lim, math.ceil(2 * W / cap))))
    gid = {}
    bpos = {}
    for gi, (_, g) in enumerate(groups):
        for j, b in enumerate(g):
            gid[b] = gi
            bpos[b] = j

    # local sort + evenly spaced samples
    samples = {}
    wl = {}

    def f(m):
        st = m.store
        st.sort(key=dkey)
        wl[m.id] = [words(d) for d in st]
        k = min(len(st), lim)
        p = bpos[m.id]
        samples[m.id] = [(kf(st[i]), p, i) for i in ((j * len(st)) // k for j in range(k))] if k else []
    members = [b for _, g in groups for b in g]
    cluster.local(f, members)
    wmax = max([max(x, default=1) for x in wl.values()] + [1])
    per = max(1, cap // wmax)

    def merge(a, b):
        c = sorted(a + b)
        if len(c) > lim:
            c = [c[(i * len(c)) // lim] for i in range(lim)]
        return c

    spl_all = tree_sweep(cluster, [g for _, g in groups], samples, merge, lim * key_w, mode="bcast")
    splitters = {}
    for b, smp in spl_all.items():
        nb = nbs[gid[b]]
        smp = smp or []
        splitters[b] = sorted({smp[(i * len(smp)) // nb] for i in range(1, nb)}) if smp else []
    # bucket counts per block
    counts = {}
    cuts = {}
    for b in members:
        st = ms[b].store
        p = bpos[b]
        idx = range(len(st))
        pos = [bisect.bisect_left(idx, s, key=lambda i: (kf(st[i]), p, i)) for s in splitters[b]]
        c = [0] + pos + [len(st)]
        cuts[b] = c
        counts[b] = tuple(c[i + 1] - c[i] for i in range(len(c) - 1))
    vec_w = max(len(sp) + 1 for sp in splitters.values())
    sc = tree_sweep(cluster, [g for _, g in groups], counts,
                    lambda a, b: tuple(x + y for x, y in zip(a, b)), vec_w)

    # the allocator assigns machines to buckets from the group totals
    dest_of = {}
    new_groups = []
    for path, g in groups:
        b0 = g[0]
        pre, suf = sc[b0]
        tot = tuple(x + (suf[i] if suf else 0) + (pre[i] if pre else 0)
                    for i, x in enumerate(counts[b0]))
        if max(tot) == sum(tot) and len(g) > 1 and sum(tot) > 1:
            raise RuntimeError("sample sort made no progress")
        need = [math.ceil(t / per) for t in tot]
        pool = _reuse(cluster, g, sum(need))
        k = 0
        alloc = []
        for nm in need:
            alloc.append(pool[k:k + nm])
            k += nm
        for b in g:
            dest_of[b] = alloc
        for j, a in enumerate(alloc):
            if a:
                new_groups.append((path + (j,), a))

    def route(m: Machine):
        st = m.store
        if not st:
            return None
        pre, _ = sc[m.id]
        c = cuts[m.id]
        alloc = dest_of[m.id]
        w = wl.pop(m.id)
        m.set_store([], 0)
        out: dict = {}
        ow: dict = {}
        for bk in range(len(c) - 1):
            off = pre[bk] if pre else 0
            for i in range(c[bk], c[bk + 1]):
                d = alloc[bk][(off + i - c[bk]) // per]
                out.setdefault(d, []).append(st[i])
                ow[d] = ow.get(d, 0) + w[i]
        return [(d, Batch(rs, ow[d])) for d, rs in out.items()]

    cluster.run_round(route, members)
    used = [b for _, a in new_groups for b in a]
    _absorb_store(cluster, used)
    for _, g in groups:
        _release_unused(cluster, g, used)
    return new_groups


# ---------------------------------------------------------------------------
# interval-tree duplicate counting and relatives
# ---------------------------------------------------------------------------

def _seg_op(a, b):
    # summary: (count, first_key, first_val, last_key, last_val, uniform)
    n = a[0] + b[0]
    if a[5] and a[1] == b[1]:
        fk, fv = a[1], a[2] + b[2]
    else:
        fk, fv = a[1], a[2]
    if b[5] and b[3] == a[3]:
        lk, lv = b[3], a[4] + b[4]
    else:
        lk, lv = b[3], b[4]
    return (n, fk, fv, lk, lv, a[5] and b[5] and a[1] == b[1])


def _block_runs(keys: list, vals: list):
    """Per record (before-in-block within run, run total in block)."""
    n = len(keys)
    before = [0] * n
    runtot = [0] * n
    i = 0
    while i < n:
        j = i
        acc = 0
        while j < n and keys[j] == keys[i]:
            before[j] = acc
            acc += vals[j]
            j += 1
        for t in range(i, j):
            runtot[t] = acc
        i = j
    return before, runtot


def segment_annotate(cluster: Cluster, dl: DistributedList, key: Optional[Callable] = None,
                     value: Optional[Callable] = None, emit: Optional[Callable] = None,
                     extra: int = 3) -> DistributedList:
    """Interval-tree pass over a sorted list.

    Each record ``r`` becomes ``(r, total, before, pos)``: ``total`` is the sum
    of ``value`` over all records with the same key, ``before`` the sum over
    equal-key records preceding ``r`` and ``pos`` the global index.  With the
    default ``value`` of 1 this is each record's key multiplicity and rank.  Blocks exchange only boundary summaries
    ``(first key, its count, last key, its count)``.

    ``emit(r, total, before, pos)`` replaces the output record (``None``
    drops it); ``extra`` is then the words it adds on top of ``r``.
    """
    ms = cluster.machines
    kf = key if key is not None else (lambda r: r)
    vf = value if value is not None else (lambda r: 1)
    summ = {}
    local = {}
    kw = 1
    for b in dl.blocks:
        st = ms[b].store
        keys = [kf(r) for r in st]
        vals = [vf(r) for r in st]
        for i in range(1, len(keys)):
            if keys[i] < keys[i - 1]:
                raise ValueError(f"count_duplicates: input block {b} is not sorted")
        before, runtot = _block_runs(keys, vals)
        local[b] = (keys, vals, before, runtot)
        if keys:
            kw = max(kw, words(keys[0]), words(keys[-1]))
            uni = keys[0] == keys[-1]
            summ[b] = (len(st), keys[0], runtot[0], keys[-1], runtot[-1], uni)
        else:
            summ[b] = None
    # adjacent block boundary inversion
    prev = None
    for b in dl.blocks:
        k = local[b][0]
        if k:
            if prev is not None and k[0] < prev:
                raise ValueError("count_duplicates: blocks are not globally sorted")
            prev = k[-1]
    sc = tree_sweep(cluster, [dl.blocks], summ, _seg_op, 2 * kw + 4)

    def f(st, mid):
        keys, vals, before, runtot = local[mid]
        pre, suf = sc[mid]
        base = pre[0] if pre else 0
        out = []
        if emit is None:
            for i, r in enumerate(st):
                k = keys[i]
                left = pre[4] if (pre and pre[3] == k) else 0
                right = suf[2] if (suf and suf[1] == k) else 0
                out.append((r, left + runtot[i] + right, left + before[i], base + i))
            return Batch(out, ms[mid].store_words + 3 * len(out))
        w = 0
        for i, r in enumerate(st):
            k = keys[i]
            left = pre[4] if (pre and pre[3] == k) else 0
            right = suf[2] if (suf and suf[1] == k) else 0
            o = emit(r, left + runtot[i] + right, left + before[i], base + i)
            if o is not None:
                out.append(o)
                w += words(r) + extra
        return Batch(out, w)
    out = flat_map(cluster, dl, f)
    out.sorted_by = dl.sorted_by
    return out


def count_duplicates(cluster: Cluster, dl: DistributedList,
                     key: Optional[Callable] = None) -> DistributedList:
    """Annotate each record of a sorted list with its key's global multiplicity."""
    return segment_annotate(cluster, dl, key, emit=lambda r, t, b, p: (r, t), extra=1)


def predecessor_scan(cluster: Cluster, dl: DistributedList, mark: Callable[[Record], bool],
                     value: Optional[Callable] = None) -> DistributedList:
    """Each record becomes ``(r, pred)``.

    ``pred`` is ``value(q)`` for the nearest preceding record ``q`` with
    ``mark(q)`` true (default: ``q``'s global index); marked records and
    records with no marked predecessor get ``None``.
    """
    ms = cluster.machines
    pc = prefix_counts(cluster, dl)
    vf = value if value is not None else None
    last = {}
    for b in dl.blocks:
        base = pc[b][0]
        lv = None
        for i, r in enumerate(ms[b].store):
            if mark(r):
                lv = base + i if vf is None else vf(r)
        last[b] = lv
    width = max([words(v) for v in last.values()] + [1])
    sc = tree_sweep(cluster, [dl.blocks], last, lambda a, b: b if b is not None else a, width)

    def f(st, mid):
        pre, _ = sc[mid]
        base = pc[mid][0]
        cur = pre
        out = []
        for i, r in enumerate(st):
            if mark(r):
                out.append((r, None))
                cur = base + i if vf is None else vf(r)
            else:
                out.append((r, cur))
        return out
    out = flat_map(cluster, dl, f)
    out.sorted_by = dl.sorted_by
    return out


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

def lookup(cluster: Cluster, queries: dict, table: DistributedList,
           default: Any = None, entry: Optional[Callable] = None,
           hold: Optional[str] = None) -> dict:
    """Answer key queries against a ``(key, value)`` table.

    ``queries`` maps a holder machine to the list of keys it asks about.
    Holders and the table ship tagged copies to fresh machines (one round):
    table entries as ``(key, "0", value)`` and queries as
    ``(key, "1", holder, index)``.  After a sort, every query takes the value
    of its predecessor table entry when the keys match, and the answers are
    routed back (one round).  Returns ``{holder: [answer, ...]}``.
    ``entry`` maps a table record to its ``(key, value)`` pair, or to ``None``
    to leave the record out of the table.  Keys must be unique among entries.
    With ``hold`` the answers stay charged to each holder's scratch space
    under that name until :func:`drop_held` releases them.
    """
    ent = entry if entry is not None else (lambda r: r)
    ms = cluster.machines
    cap = block_cap(cluster.S)
    holders = [h for h, q in queries.items() if q]
    senders = list(dict.fromkeys(list(table.blocks) + holders))
    plan = {}
    for s in senders:
        recs = []
        if s in queries:
            recs.extend((k, "1", s, i) for i, k in enumerate(queries[s]))
        plan[s] = recs
    tset = set(table.blocks)
    outw = {}
    for s in senders:
        w = block_words(plan[s])
        if s in tset:
            w += sum(words(e) for e in map(ent, ms[s].store) if e is not None)
        outw[s] = w
    dests = {s: cluster.allocate(max(1, math.ceil(outw[s] / cap))) for s in senders}

    def ship(m: Machine):
        recs = []
        if m.id in tset:
            recs.extend((e[0], "0", e[1]) for e in map(ent, m.store) if e is not None)
        recs.extend(plan[m.id])
        if not recs:
            return None
        parts = _split_words(recs, len(dests[m.id]))
        return [(d, Batch(p, w)) for d, (p, w) in zip(dests[m.id], parts) if p]
    cluster.run_round(ship, senders)
    union_blocks = [d for s in senders for d in dests[s]]
    _absorb_store(cluster, union_blocks)
    union = DistributedList(cluster, union_blocks)
    srt = mpc_sort(cluster, union)
    ps = predecessor_scan(cluster, srt, lambda r: r[1] == "0", value=lambda r: (r[0], r[2]))

    def answer(m: Machine):
        out: dict = {}
        for r, pred in m.store:
            if r[1] == "1":
                val = pred[1] if (pred is not None and pred[0] == r[0]) else default
                out.setdefault(r[2], []).append(("a", r[3], val))
        m.set_store([], 0)
        return [(h, Batch(rs)) for h, rs in out.items()]
    cluster.run_round(answer, ps.blocks)
    cluster.release(ps.blocks)
    res = {}
    for h in holders:
        m = ms[h]
        box = m.take_inbox()
        ans = [default] * len(queries[h])
        for _, i, v in box:
            ans[i] = v
        res[h] = ans
        if hold is not None:
            m.put_aux(hold, None, words(ans))
            cluster._check(m)
    for h, q in queries.items():
        res.setdefault(h, [])
    return res


def drop_held(cluster: Cluster, name: str, mids: Iterable[int]) -> None:
    """Release answers kept by ``lookup(..., hold=name)``."""
    def f(m: Machine):
        m.pop_aux(name)
    cluster.local(f, mids)


def make_room(cluster: Cluster, dl: DistributedList, extra: Callable[[Record], int]
              ) -> DistributedList:
    """Re-block so that every block plus ``extra`` words per record fits the block cap.

    Called before a lookup whose answers (``extra(r)`` words for record
    ``r``) will land next to the records.
    """
    cap = block_cap(cluster.S)
    ms = cluster.machines
    wmax = 1
    tight = False
    for b in dl.blocks:
        st = ms[b].store
        ex = [extra(r) for r in st]
        if ms[b].store_words + sum(ex) > cap:
            tight = True
        for r, e in zip(st, ex):
            wmax = max(wmax, words(r) + e)
    if not tight:
        return dl
    if wmax > cap:
        raise ValueError(f"a record needs {wmax} words with its answers; block cap is {cap}")
    return rebalance(cluster, dl, cap, per=cap // wmax)


def answer_membership_queries(cluster: Cluster, Q: DistributedList,
                              C: DistributedList) -> list[bool]:
    """For every record of ``Q`` (in order) report whether it occurs in ``C``."""
    ms = cluster.machines
    ans = lookup(cluster, {b: list(ms[b].store) for b in Q.blocks}, C, default=False,
                 entry=lambda r: (r, True))
    out = []
    for b in Q.blocks:
        out.extend(ans.get(b, [False] * len(ms[b].store)))
    return out


# ---------------------------------------------------------------------------
# duplication, expansion, grouping
# ---------------------------------------------------------------------------

def duplicate_machines(cluster: Cluster, requests: Sequence[tuple[int, int]]) -> list[list[int]]:
    """Make ``x`` copies of each source machine's block, all requests in lockstep.

    Every holder forwards the block to ``b - 1`` new machines per round, with
    ``b = floor(S / w)``, so ``x`` copies take ``ceil(log_b x)`` rounds.  The
    first id of each returned list is the source itself.
    """
    ms = cluster.machines
    S = cluster.S
    state = []
    for src, x in requests:
        w = ms[src].store_words
        if 2 * w > S:
            raise ValueError(f"duplicate_machine: payload {w} words exceeds S/2")
        b = max(2, S // max(1, w))
        state.append([src, x, b, [src]])
    while True:
        active = [s for s in state if len(s[3]) < s[1]]
        if not active:
            break
        sends: dict = {}
        for s in active:
            src, x, b, holders = s
            new = []
            need = x - len(holders)
            for h in holders:
                k = min(b - 1, need - len(new))
                if k <= 0:
                    break
                tgt = cluster.allocate(k)
                sends[h] = tgt
                new.extend(tgt)
            s[3] = holders + new

        def step(m: Machine):
            tg = sends.get(m.id)
            if not tg:
                return None
            pay = Batch(m.store, m.store_words)
            return [(t, pay) for t in tg]
        cluster.run_round(step, list(sends))
        _absorb_store(cluster, [t for tg in sends.values() for t in tg])
    return [s[3] for s in state]


def duplicate_machine(cluster: Cluster, src: int, x: int) -> list[int]:
    return duplicate_machines(cluster, [(src, x)])[0]


def flat_map(cluster: Cluster, dl: DistributedList, fn: Callable[[list, int], list],
             keep: bool = False) -> DistributedList:
    """Local transformation ``fn(block, mid)`` whose output may outgrow a machine.

    When a block's output exceeds the block cap (or ``keep`` asks to leave
    the source intact) the block is duplicated and each copy keeps one slice
    of the output (see :func:`duplicate_machines`).
    """
    ms = cluster.machines
    cap = block_cap(cluster.S)
    outs = {}
    reqs = []
    for b in dl.blocks:
        out = fn(ms[b].store, b)
        w = out.w if type(out) is Batch else block_words(out)
        outs[b] = (out, w)
        x = max(1, math.ceil(w / cap)) if w else 1
        if keep:
            reqs.append((b, x + 1))
        elif x > 1:
            reqs.append((b, x))
    copies = dict(zip([r[0] for r in reqs], duplicate_machines(cluster, reqs))) if reqs else {}
    blocks = []
    setters = {}
    for b in dl.blocks:
        out, w = outs[b]
        if b in copies:
            cp = copies[b][1:] if keep else copies[b]
            parts = _split_words(out, len(cp))
            for c, p in zip(cp, parts):
                setters[c] = p
            blocks.extend(cp)
        else:
            setters[b] = (out, w)
            blocks.append(b)

    def f(m):
        out, w = setters[m.id]
        m.set_store(list(out) if type(out) is Batch else out, w)
    cluster.local(f, blocks)
    return DistributedList(cluster, blocks)


def align_groups(cluster: Cluster, dl: DistributedList, key: Callable) -> DistributedList:
    """Re-block a key-sorted list so that no machine mixes a large group with others.

    Groups of at most ``h = cap/2`` words are packed whole onto machines; a
    larger group is cut into pieces of about ``h`` words on machines of its
    own.  ``meta[mid]`` is ``None`` for packed blocks and ``(piece, pieces)``
    for pieces of a large group.
    """
    ms = cluster.machines
    cap = block_cap(cluster.S)
    h = max(1, cap // 2)
    ann = segment_annotate(cluster, dl, key, value=words)
    pc = prefix_counts(cluster, ann, weight=lambda t: words(t[0]))
    virt: dict = {}

    def target(t, wpos):
        r, z, before, _ = t
        head = wpos - before
        if z <= h:
            return ("s", head // h), None
        return ("b", head, before // h), before // h

    plans = {}
    names = set()
    for b in ann.blocks:
        wpos = pc[b][0]
        pl = []
        for t in ms[b].store:
            v, info = target(t, wpos)
            pl.append((v, info))
            names.add(v)
            wpos += words(t[0])
        plans[b] = pl
    order = sorted(names, key=lambda v: (v[1] * h, 0, 0) if v[0] == "s" else (v[1], 1, v[2]))
    mids = _reuse(cluster, ann.blocks, len(order))
    for v, mid in zip(order, mids):
        virt[v] = mid
    # pieces that actually received records (the last one may start below z)
    npieces: dict = {}
    for v in names:
        if v[0] == "b":
            npieces[v[1]] = max(npieces.get(v[1], 0), v[2] + 1)
    meta = {}
    for v in names:
        meta[virt[v]] = (v[2], npieces[v[1]]) if v[0] == "b" else None

    def step(m: Machine):
        st = m.store
        if not st:
            return None
        pl = plans[m.id]
        m.set_store([], 0)
        out: dict = {}
        for t, (v, _) in zip(st, pl):
            out.setdefault(virt[v], []).append(t[0])
        return [(d, Batch(rs)) for d, rs in out.items()]
    cluster.run_round(step, ann.blocks)
    _absorb_store(cluster, mids)
    _release_unused(cluster, ann.blocks, mids)
    return DistributedList(cluster, mids, dl.sorted_by, meta)


def group_pairs(cluster: Cluster, dl: DistributedList, key: Callable,
                emit: Callable[[list, list, bool], list]) -> DistributedList:
    """For every key group ``X`` of a sorted list, emit records from ``X x X``.

    ``emit(A, B, same)`` receives two runs of one group (``same`` when they
    are the same run, so the caller can skip identical positions) and returns
    output records.  Large groups are split into pieces; each piece is
    duplicated once per piece so that every ordered piece pair meets on one
    machine.  Oversized outputs are expanded with :func:`flat_map`.
    """
    ms = cluster.machines
    al = align_groups(cluster, dl, key)
    big = {b: al.meta[b] for b in al.blocks if al.meta.get(b)}
    # pieces of each big group in order
    grp: dict = {}
    for b in al.blocks:
        info = al.meta.get(b)
        if info:
            grp.setdefault(key(ms[b].store[0]), []).append(b)
    reqs = [(b, big[b][1]) for b in big if big[b][1] > 1]
    copies = dict(zip([r[0] for r in reqs], duplicate_machines(cluster, reqs))) if reqs else {}
    # copy (p, q) of piece p receives piece q from copy (q, p)
    route = {}
    pair_of = {}
    for kk, pieces in grp.items():
        c = len(pieces)
        for p, bp in enumerate(pieces):
            cps = copies.get(bp, [bp])
            for q in range(c):
                pair_of[cps[q]] = (p, q)
        for p, bp in enumerate(pieces):
            for q in range(c):
                if p != q:
                    src = copies[pieces[q]][p]
                    route.setdefault(src, []).append(copies[bp][q])
    if route:
        def step(m: Machine):
            return [(d, Batch(m.store, m.store_words)) for d in route[m.id]]
        cluster.run_round(step, list(route))
    work = []
    for b in al.blocks:
        if b in copies:
            work.extend(copies[b])
        else:
            work.append(b)
    split = {}

    def f(m: Machine):
        if m.id in pair_of:
            p, q = pair_of[m.id]
            if p != q:
                w = m.inbox_words
                box = m.take_inbox()
                split[m.id] = (len(m.store), False)
                m.set_store(m.store + box, m.store_words + w)
            else:
                split[m.id] = (len(m.store), True)
    cluster.local(f, work)

    def gen(st: list, mid: int) -> list:
        if mid in split:
            k, same = split[mid]
            if same:
                return list(emit(st, st, True))
            return list(emit(st[:k], st[k:], False))
        out = []
        i = 0
        n = len(st)
        while i < n:
            j = i
            kk = key(st[i])
            while j < n and key(st[j]) == kk:
                j += 1
            run = st[i:j]
            out.extend(emit(run, run, True))
            i = j
        return out

    res = flat_map(cluster, DistributedList(cluster, work), gen)
    return res
