"""Seeded instance suites and the checks the acceptance harness and ``bench`` share."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .approx import SamplingParams, approx_main, approx_subroutine, compute_sampling_params, prepare_cluster
from .cliques import count_k_cliques
from .exact import count_cliques_query, query_space, count_triangles_exact, default_alpha, enumerate_triangles
from .kwise import new_hash
from .graph import Graph, gen_bounded_arboricity, gen_local_forests, gen_random_graph
from .oracles import oracle_count_cliques, oracle_count_subgraphs, oracle_count_triangles
from .patterns import CATALOG
from .subgraph5 import SubgraphCounter


@dataclass
class Instance:
    name: str
    g: Graph
    a: Optional[int] = None

    def describe(self) -> dict:
        return dict(name=self.name, n=self.g.n, m=self.g.m, a=self.a)


# ---------------------------------------------------------------------------
# instance suites
# ---------------------------------------------------------------------------

def exact_oracle_instances(seed: int = 9, n_arb: int = 50, n_er: int = 20) -> list[Instance]:
    """Bounded-arboricity graphs (a in 1, 2, 4, 8; n <= 2000) and ER graphs (n <= 500)."""
    rng = np.random.default_rng(seed)
    sizes = (250, 500, 1000, 2000)
    out = []
    for j in range(n_arb):
        a = (1, 2, 4, 8)[j % 4]
        n = sizes[(j // 4) % 4]
        s = int(rng.integers(1 << 31))
        out.append(Instance(f"arb-a{a}-n{n}-s{s}", gen_bounded_arboricity(n, a, s), a))
    for j in range(n_er):
        n = (100, 200, 300, 500)[j % 4]
        p = float(rng.uniform(2.0, 16.0)) / n
        s = int(rng.integers(1 << 31))
        out.append(Instance(f"er-n{n}-p{p:.4f}-s{s}", gen_random_graph(n, p, s)))
    return out


def clique_instances(seed: int = 11, count: int = 30) -> list[Instance]:
    """Clique-rich local forests and plain bounded-arboricity graphs (n <= 500, a <= 4)."""
    rng = np.random.default_rng(seed)
    out = []
    for j in range(count):
        a = (2, 3, 4)[j % 3]
        n = (100, 200, 300, 500)[(j // 3) % 4]
        s = int(rng.integers(1 << 31))
        if j % 2 == 0:
            w = a + int(rng.integers(0, 3))
            out.append(Instance(f"forest-a{a}-w{w}-n{n}-s{s}", gen_local_forests(n, a, w, s), a))
        else:
            out.append(Instance(f"arb-a{a}-n{n}-s{s}", gen_bounded_arboricity(n, a, s), a))
    return out


def subgraph_instances(seed: int = 13, count: int = 10) -> list[Instance]:
    """Mixed small instances for the full pattern catalog (n <= 300)."""
    rng = np.random.default_rng(seed)
    out = []
    for j in range(count):
        s = int(rng.integers(1 << 31))
        kind = j % 4
        if kind == 0:
            n = int(rng.integers(60, 151))
            a = 2 + j % 2
            out.append(Instance(f"arb-a{a}-n{n}-s{s}", gen_bounded_arboricity(n, a, s), a))
        elif kind == 1:
            n = int(rng.integers(30, 51))
            out.append(Instance(f"forest-a3-w4-n{n}-s{s}", gen_local_forests(n, 3, 4, s), 3))
        elif kind == 2:
            n = int(rng.integers(16, 26))
            out.append(Instance(f"er-n{n}-s{s}", gen_random_graph(n, 0.3, s)))
        else:
            n = int(rng.integers(150, 301))
            out.append(Instance(f"arb-a1-n{n}-s{s}", gen_bounded_arboricity(n, 1, s), 1))
    return out


def layered_hubs(n: int, sizes, picks, seed: int) -> Graph:
    """A random tree plus nested hub layers.

    Each layer is a random subset of the previous one and every member links
    to ``picks[j]`` random members of the previous layer, so hubs stay high
    for several peeling rounds while the degeneracy stays small.
    """
    rng = np.random.default_rng(seed)
    es = set(gen_bounded_arboricity(n, 1, seed).edges)
    prev = np.arange(n)
    for sz, d in zip(sizes, picks):
        layer = rng.choice(prev, size=sz, replace=False)
        for u in layer.tolist():
            for v in rng.choice(prev, size=d, replace=False).tolist():
                if u != v:
                    es.add((min(u, v), max(u, v)))
        prev = layer
    return Graph.from_edges(n, es)


def pruning_instances(seed: int = 21, count: int = 6) -> list[Instance]:
    """Hub-layered graphs whose peeling takes three iterations (n <= 2000)."""
    rng = np.random.default_rng(seed)
    out = []
    for j in range(count):
        n = (1000, 1500, 2000)[j % 3]
        n1 = int(rng.integers(n // 12, n // 8))
        n2 = int(rng.integers(8, 16))
        d1 = int(rng.integers(30, 41))
        d2 = int(rng.integers(40, 61))
        s = int(rng.integers(1 << 31))
        out.append(Instance(f"hubs-n{n}-{n1}x{d1}-{n2}x{d2}-s{s}",
                            layered_hubs(n, (n1, n2), (d1, d2), s)))
    return out


# ---------------------------------------------------------------------------
# exact suite
# ---------------------------------------------------------------------------

EXACT_ALGOS: dict[str, Callable] = {
    "triangles": count_triangles_exact,
    "enumerate": enumerate_triangles,
    "query-cliques": count_cliques_query,
}


@dataclass
class ExactRun:
    instance: dict
    algo: str
    count: int
    oracle: int
    alpha: int
    total_words: int
    peak_machine_words: int
    S: int
    rounds: int
    iterations: int
    find_triangles_total: Optional[int]
    seconds: float
    success: bool
    states: list = field(default_factory=list)
    capped: bool = False

    @property
    def ok(self) -> bool:
        return self.success and self.count == self.oracle


def run_exact_suite(instances: list[Instance], algos=tuple(EXACT_ALGOS),
                    progress: Optional[Callable[[str], None]] = None) -> list[ExactRun]:
    """Every algorithm on every instance; pruning bounds are asserted inside the runs."""
    runs = []
    for inst in instances:
        T = oracle_count_triangles(inst.g)
        for name in algos:
            t0 = time.perf_counter()
            # the query variant assumes sqrt(S) dominates the degrees it gathers
            S = query_space(inst.g) if name == "query-cliques" else None
            res = EXACT_ALGOS[name](inst.g, S=S)
            dt = time.perf_counter() - t0
            if name == "enumerate" and res.triangles is not None and len(res.triangles) != res.count:
                raise AssertionError(f"{inst.name}: list length {len(res.triangles)} != {res.count}")
            runs.append(ExactRun(inst.describe(), name, res.count, T, res.alpha,
                                 res.metrics.total_words, res.metrics.peak_machine_words,
                                 res.S, res.metrics.rounds, len(res.iterations),
                                 res.find_triangles_total, dt, res.metrics.success,
                                 [st.to_dict() for st in res.iterations], res.capped))
            if progress:
                progress(f"{inst.name} {name}: {res.count} (oracle {T}) {dt:.2f}s")
    return runs


def space_constants(runs: list[ExactRun]) -> dict:
    """Measured ``total_words / (m alpha)`` and ``total_words / (n alpha^2)`` maxima."""
    tri = [r.total_words / (max(1, r.instance["m"]) * r.alpha) for r in runs if r.algo == "triangles"]
    qry = [r.total_words / (max(1, r.instance["n"]) * r.alpha ** 2) for r in runs
           if r.algo == "query-cliques"]
    return dict(triangles_words_per_m_alpha=max(tri, default=0.0),
                query_words_per_n_alpha2=max(qry, default=0.0),
                peak_machine_fraction=max((r.peak_machine_words / r.S for r in runs), default=0.0))


def hm_space_sweep(alphas=(1, 2, 3, 4), sizes=(50, 100, 200, 400), seed: int = 17) -> list[dict]:
    """``build_hm_maps`` words against ``m alpha^3`` on growing instances of fixed ``a``."""
    rows = []
    for a in alphas:
        for n in sizes:
            g = gen_bounded_arboricity(n, a, seed + 1000 * a + n)
            sc = SubgraphCounter(g)
            sc.maps()
            al = default_alpha(g)
            rows.append(dict(a=a, n=n, m=g.m, alpha=al, kappa=sc.kappa,
                             words=sc.hm_build_words, S=sc.cluster.S,
                             peak_machine_words=sc.cluster.metrics.peak_machine_words,
                             c=sc.hm_build_words / (g.m * al ** 3)))
    return rows


# ---------------------------------------------------------------------------
# k-cliques and small patterns
# ---------------------------------------------------------------------------

def run_clique_suite(instances: list[Instance], ks=(4, 5),
                     progress: Optional[Callable[[str], None]] = None) -> list[dict]:
    rows = []
    for inst in instances:
        for k in ks:
            t0 = time.perf_counter()
            res = count_k_cliques(inst.g, k)
            want = oracle_count_cliques(inst.g, k)
            rows.append(dict(instance=inst.describe(), k=k, count=res.count, oracle=want,
                             peak_machine_words=res.metrics.peak_machine_words, S=res.S,
                             seconds=time.perf_counter() - t0))
            if progress:
                progress(f"{inst.name} k={k}: {res.count} (oracle {want})")
    return rows


def run_subgraph_suite(instances: list[Instance], patterns=None,
                       progress: Optional[Callable[[str], None]] = None) -> list[dict]:
    pats = list(CATALOG.values()) if patterns is None else list(patterns)
    rows = []
    for inst in instances:
        t0 = time.perf_counter()
        want = oracle_count_subgraphs(inst.g, pats)
        sc = SubgraphCounter(inst.g)
        for h in pats:
            res = sc.count(h)
            rows.append(dict(instance=inst.describe(), pattern=h.name, count=res.count,
                             oracle=want[h.name], peak_machine_words=res.metrics.peak_machine_words,
                             S=res.S))
        if progress:
            progress(f"{inst.name}: {len(pats)} patterns in {time.perf_counter() - t0:.1f}s")
    return rows


# ---------------------------------------------------------------------------
# estimator experiments
# ---------------------------------------------------------------------------

def unbiasedness_setup(seed: int = 7) -> tuple[Graph, SamplingParams]:
    """ER(60, 0.3) with a forced sampling rate and a handful of machines."""
    g = gen_random_graph(60, 0.3, seed)
    params = compute_sampling_params(g.n, g.m, 4096, 0.25, M_actual=16, p_hat=0.25)
    return g, params


def unbiasedness(trials: int = 10_000, seed: int = 7) -> dict:
    g, params = unbiasedness_setup(seed)
    T = oracle_count_triangles(g)
    cluster, dl = prepare_cluster(g, params, seed)
    root = np.random.SeedSequence(seed)
    ys = np.array([approx_subroutine(cluster, dl, g, params, ss, reject=False).estimate
                   for ss in root.spawn(trials)])
    se = float(ys.std(ddof=1) / math.sqrt(trials))
    return dict(T=T, mean=float(ys.mean()), se=se, z=(float(ys.mean()) - T) / se,
                trials=trials, peak_machine_words=cluster.metrics.peak_machine_words,
                S=cluster.S)


def concentration_setup(seed: int = 3) -> tuple[Graph, SamplingParams, int]:
    """A dense ER(40, 0.7) graph where both space constraints hold at S = 16384."""
    g = gen_random_graph(40, 0.7, seed)
    T = oracle_count_triangles(g)
    params = compute_sampling_params(g.n, g.m, 16384, 0.25, M_actual=64, T=T)
    return g, params, T


def concentration(runs: int = 50, seed: int = 3) -> dict:
    g, params, T = concentration_setup(seed)
    if params.warnings:
        raise AssertionError(f"constraints not met: {params.warnings}")
    if T < 1 / params.p_hat:
        raise AssertionError(f"T={T} < 1/p_hat={1 / params.p_hat:.2f}")
    ests, rej_frac, hash_words, peaks = [], [], [], []
    for r in range(runs):
        res = approx_main(g, params, seed=seed * 100_000 + r)
        ests.append(res.estimate)
        rej_frac.append(float(np.mean(res.rejected)) / params.M)
        hash_words.append(new_hash(params.k, params.p_hat, g.n * params.M, r, M=params.M).words)
        peaks.append(res.metrics.peak_machine_words)
    inside = [abs(e - T) < params.epsilon * T for e in ests]
    return dict(T=T, p_hat=params.p_hat, M=params.M, k=params.k, S=params.S,
                estimates=ests, fraction_inside=sum(inside) / runs,
                rejection_rate=float(np.mean(rej_frac)), hash_words=max(hash_words),
                peak_machine_words=max(peaks), params=params.to_dict())


def summarize(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    if not arr.size:
        return dict(count=0)
    return dict(count=int(arr.size), min=float(arr.min()), max=float(arr.max()),
                mean=float(arr.mean()))
