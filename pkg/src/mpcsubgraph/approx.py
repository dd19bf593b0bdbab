"""Approximate triangle counting by hashed vertex sampling on every machine.

Machine ``i`` keeps the vertices ``V_i = {v : h(v, i) = 1}``.  Edge holders
route each edge ``(u, w)`` to every machine in ``Q_u & Q_w`` so that machine
``i`` ends up with the induced subgraph ``G[V_i]``; the scaled sum of the
local triangle counts is an unbiased estimate of ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import Graph
from .kwise import KWiseHash, default_k, new_hash
from .mpc.primitives import DistributedList, distribute_input, tree_sweep
from .mpc.runtime import Batch, Cluster, Machine, MpcConfig, RunMetrics

WARN_SPACE_EPS = "space-per-machine constraint violated: S < 15*sqrt(m*k)/epsilon"
WARN_SPACE_DENSITY = "space-per-machine constraint violated: S < 100*k*n^2/m"
WARN_TRIANGLES = "triangle-count precondition violated: T < 10*sqrt(m*k/S)"


@dataclass
class SamplingParams:
    n: int
    m: int
    S: int
    epsilon: float
    k: int
    p_hat: float
    M: int
    M_formula: int
    tau: float
    warnings: list = field(default_factory=list)

    @property
    def constraints_ok(self) -> bool:
        return not any(w.startswith("space") for w in self.warnings)

    def to_dict(self) -> dict:
        return dict(n=self.n, m=self.m, S=self.S, epsilon=self.epsilon, k=self.k,
                    p_hat=self.p_hat, M=self.M, M_formula=self.M_formula, tau=self.tau,
                    warnings=list(self.warnings))


def compute_sampling_params(n: int, m: int, S: int, epsilon: float,
                            M_actual: Optional[int] = None, k: Optional[int] = None,
                            T: Optional[float] = None,
                            p_hat: Optional[float] = None) -> SamplingParams:
    """Sampling probability, machine count and heavy threshold for given (n, m, S, eps).

    ``M_actual`` replaces the (usually enormous) formula value of ``M``;
    ``p_hat`` may be forced for experiments that study the estimator alone.
    Violated constraints are reported as warnings, never as errors.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    k = default_k(n) if k is None else k
    ph = 0.1 * math.sqrt(S / (m * k)) if p_hat is None else p_hat
    ph = min(1.0, ph)
    M_formula = math.ceil(2000 * m * k / (epsilon ** 2 * S))
    warnings = []
    if S < 15 * math.sqrt(m * k) / epsilon:
        warnings.append(WARN_SPACE_EPS)
    if S < 100 * k * n * n / m:
        warnings.append(WARN_SPACE_DENSITY)
    if T is not None and T < 10 * math.sqrt(m * k / S):
        warnings.append(WARN_TRIANGLES)
    M = M_formula if M_actual is None else int(M_actual)
    return SamplingParams(n, m, S, epsilon, k, ph, M, M_formula, k / ph if ph > 0 else math.inf,
                          warnings)


@dataclass
class TriangleEstimate:
    estimate: float
    per_machine: list
    R: int
    rejected: int
    total: int = 0
    flag: Optional[str] = None
    messages: int = 0
    metrics: Optional[RunMetrics] = None


def classify_light_heavy(g: Graph, tau: float) -> dict:
    """Split vertices at degree ``tau``; report the light/heavy edge masses."""
    deg = g.degrees()
    light = {v for v in range(g.n) if deg[v] < tau}
    heavy = set(range(g.n)) - light
    m_light = sum(1 for u, v in g.edges if u in light and v in light)
    return dict(light=light, heavy=heavy, m_light=m_light, m_heavy=g.m - m_light)


def _local_triangles(edges: list) -> int:
    adj: dict = {}
    for u, w in edges:
        adj.setdefault(u, set()).add(w)
        adj.setdefault(w, set()).add(u)
    t = 0
    for u, w in edges:
        a, b = adj[u], adj[w]
        if len(a) > len(b):
            a, b = b, a
        t += sum(1 for x in a if x in b)
    return t // 3


def prepare_cluster(g: Graph, params: SamplingParams, seed: int = 0) -> tuple[Cluster, DistributedList]:
    cluster = Cluster(MpcConfig(S=params.S, M=max(1, params.M), epsilon=params.epsilon, seed=seed))
    dl = distribute_input(cluster, g)
    return cluster, dl


def send_edges(cluster: Cluster, dl: DistributedList, h: KWiseHash,
               reject: bool = True) -> tuple[dict, set]:
    """One round: each edge holder ships ``(u, w)`` to every machine in ``Q_u & Q_w``.

    Returns ``({machine: received edges}, rejected machines)``.  A machine
    whose induced subgraph does not fit is rejected (its delivery is
    dropped) when ``reject`` is set; otherwise the overflow is fatal.
    """
    M = h.M
    payload = h.serialize()
    for mid in range(M):
        cluster.machines[mid].put_aux("hash", payload)
    n = cluster.globals["n"]
    bits = h.bits(np.arange(n))
    # every holder evaluates Q_u & Q_w for its own edges; the evaluation is
    # batched across holders here because it is a pure function of h
    ms = cluster.machines
    holders = [b for b in dl.blocks if ms[b].store]
    plan: dict = {}
    if holders:
        sizes = [len(ms[b].store) for b in holders]
        e = np.asarray([x for b in holders for x in ms[b].store], dtype=np.int64)
        owner = np.repeat(np.arange(len(holders)), sizes)
        rows, cols = np.nonzero(bits[e[:, 0]] & bits[e[:, 1]])
        for r, c in zip(rows.tolist(), cols.tolist()):
            plan.setdefault(holders[owner[r]], {}).setdefault(c, []).append(
                (int(e[r, 0]), int(e[r, 1])))

    def step(m: Machine):
        out = plan.get(m.id)
        if not out:
            return None
        return [(c, Batch(es, 2 * len(es))) for c, es in out.items()]

    dropped = cluster.run_round(step, dl.blocks, overflow="drop" if reject else "raise")
    got = {}
    for mid in range(M):
        m = cluster.machines[mid]
        got[mid] = m.take_inbox() if mid not in dropped else []
    return got, dropped


def approx_subroutine(cluster: Cluster, dl: DistributedList, g: Graph, params: SamplingParams,
                      seed, reject: bool = True) -> TriangleEstimate:
    """One run of the sampling estimator ``T_hat / (p_hat^3 R)``."""
    M = params.M
    h = new_hash(params.k, params.p_hat, g.n * M, seed, M=M)
    if h.words > cluster.S:
        raise ValueError(f"hash needs {h.words} words > S={cluster.S}")
    before = cluster.metrics.total_messages
    got, dropped = send_edges(cluster, dl, h, reject)
    per = [0] * M
    for mid, es in got.items():
        if mid not in dropped:
            per[mid] = _local_triangles(es)
    # convergecast of (sum T_i, R)
    vals = {mid: (per[mid], 0 if mid in dropped else 1) for mid in range(M)}
    red = tree_sweep(cluster, [list(range(M))], vals,
                     lambda a, b: (a[0] + b[0], a[1] + b[1]), 2, mode="reduce")
    total, R = red[0]
    for mid in range(M):
        cluster.machines[mid].pop_aux("hash")
    ph3 = params.p_hat ** 3
    msgs = cluster.metrics.total_messages - before
    if R == 0:
        return TriangleEstimate(0.0, per, 0, len(dropped), total, "all samples rejected", msgs)
    return TriangleEstimate(total / (ph3 * R), per, R, len(dropped), total, None, msgs)


def lower_median(values) -> float:
    vs = sorted(values)
    if not vs:
        raise ValueError("median of an empty list")
    return vs[(len(vs) - 1) // 2]


@dataclass
class ApproxResult:
    estimate: float
    trials: list
    rejected: list
    R: list
    params: SamplingParams
    metrics: RunMetrics
    messages_per_edge: float


def approx_main(g: Graph, params: SamplingParams, seed: int = 0, trials: Optional[int] = None,
                reject: bool = True) -> ApproxResult:
    """Median of ``I = 100 * ceil(log2 n)`` independent subroutine runs."""
    I = trials if trials is not None else 100 * max(1, math.ceil(math.log2(max(2, g.n))))
    cluster, dl = prepare_cluster(g, params, seed)
    seeds = np.random.SeedSequence(seed).spawn(I)
    ys, rej, Rs = [], [], []
    msgs = 0
    for ss in seeds:
        est = approx_subroutine(cluster, dl, g, params, ss, reject)
        ys.append(est.estimate)
        rej.append(est.rejected)
        Rs.append(est.R)
        msgs += est.messages
    return ApproxResult(lower_median(ys), ys, rej, Rs, params, cluster.snapshot(),
                        msgs / (I * max(1, g.m)))
