"""``mpcsubgraph`` command line: one JSON report on stdout, a short summary on stderr."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import experiments as ex
from .approx import approx_main, compute_sampling_params
from .cliques import MAX_K, count_k_cliques
from .exact import count_cliques_query, count_triangles_exact, default_alpha, enumerate_triangles
from .graph import GraphFormatError, load_edge_list
from .mpc.runtime import SpaceExceeded
from .oracles import oracle_count_cliques, oracle_count_subgraph, oracle_count_triangles
from .patterns import CATALOG, get_pattern, load_pattern_file
from .report import RunReport
from .subgraph5 import ORIENTATION_ROUNDS, count_subgraph_leq5

SEED_ENV = "MPCSUBGRAPH_SEED"


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _graph(args):
    if not args.graph:
        raise UsageError("--graph is required")
    return load_edge_list(args.graph)


def _input(g, args, seed: int, alpha=None) -> dict:
    return dict(graph=args.graph, n=g.n, m=g.m, alpha=alpha, seed=seed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_approx_triangles(args) -> list[RunReport]:
    g = _graph(args)
    seed = _seed(args)
    if g.m == 0:
        raise UsageError("the graph has no edges")
    T = oracle_count_triangles(g) if args.oracle else None
    S = args.space or 4096
    params = compute_sampling_params(g.n, g.m, S, args.epsilon, M_actual=args.machines or 64, T=T)
    res = approx_main(g, params, seed=seed, trials=args.trials)
    rejected = sum(res.rejected)
    diag = dict(trials=len(res.trials), R=res.R, rejected=res.rejected,
                rejection_rate=rejected / (len(res.trials) * params.M),
                messages_per_edge=res.messages_per_edge, params=params.to_dict())
    if T is not None:
        diag["relative_error"] = abs(res.estimate - T) / T if T else None
    return [RunReport("approx-triangles", _input(g, args, seed),
                      dict(S=S, M=params.M, epsilon=args.epsilon),
                      dict(estimate=res.estimate), T, res.metrics.to_dict(), diag,
                      list(params.warnings), res.metrics.success)]


def cmd_exact(args) -> list[RunReport]:
    g = _graph(args)
    seed = _seed(args)
    alpha = args.alpha or default_alpha(g)
    cfg = dict(S=args.space, delta=args.delta)
    if args.algo == "triangles":
        res = count_triangles_exact(g, alpha, args.space, args.delta, seed)
        oracle = oracle_count_triangles(g) if args.oracle else None
    elif args.algo == "enumerate":
        res = enumerate_triangles(g, alpha, args.space, args.delta, seed)
        oracle = oracle_count_triangles(g) if args.oracle else None
    elif args.algo == "query-cliques":
        res = count_cliques_query(g, alpha, args.space, args.delta, seed)
        oracle = oracle_count_triangles(g) if args.oracle else None
    elif args.algo == "kclique":
        if args.k is None or not 3 <= args.k <= MAX_K:
            raise UsageError(f"--k must lie in [3, {MAX_K}] for --algo kclique")
        res = count_k_cliques(g, args.k, alpha, args.space, args.delta, seed)
        oracle = oracle_count_cliques(g, args.k) if args.oracle else None
    else:
        raise UsageError(f"unknown --algo {args.algo!r}")
    cfg["S"] = res.S
    d = res.to_dict()
    diag = dict(pruning=d.pop("iterations"), find_triangles_total=d.pop("find_triangles_total"),
                capped=d.pop("capped"))
    for key in ("k", "levels"):
        if key in d:
            diag[key] = d.pop(key)
    diag["words_per_m_alpha"] = res.metrics.total_words / (max(1, g.m) * alpha)
    if args.algo == "query-cliques":
        diag["words_per_n_alpha2"] = res.metrics.total_words / (max(1, g.n) * alpha ** 2)
    ok = res.metrics.success and (oracle is None or oracle == res.count)
    return [RunReport(f"exact-{args.algo}", _input(g, args, seed, alpha), cfg,
                      dict(count=res.count), oracle, res.metrics.to_dict(), diag,
                      list(res.warnings), ok)]


def cmd_subgraph(args) -> list[RunReport]:
    g = _graph(args)
    seed = _seed(args)
    if args.pattern_file:
        h = load_pattern_file(args.pattern_file)
    elif args.pattern:
        try:
            h = get_pattern(args.pattern)
        except KeyError as e:
            raise UsageError(e.args[0]) from None
    else:
        raise UsageError("--pattern or --pattern-file is required")
    res = count_subgraph_leq5(g, h, args.space, args.delta, seed)
    oracle = oracle_count_subgraph(g, h) if args.oracle else None
    ok = res.metrics.success and (oracle is None or oracle == res.count)
    diag = dict(kappa=res.kappa, classes=res.classes, hm_words=res.hm_words,
                orientation_oracle=dict(rounds=ORIENTATION_ROUNDS))
    return [RunReport("subgraph", _input(g, args, seed, args.alpha),
                      dict(S=res.S, delta=args.delta), dict(pattern=h.name, count=res.count),
                      oracle, res.metrics.to_dict(), diag, [], ok)]


def _bench_exact(args, seed: int) -> list[RunReport]:
    trials = args.trials or 50
    insts = ex.exact_oracle_instances(seed, n_arb=trials, n_er=0)
    runs = ex.run_exact_suite(insts, progress=_note if args.verbose else None)
    out = []
    for inst in insts:
        mine = [r for r in runs if r.instance["name"] == inst.name]
        ok = all(r.ok for r in mine)
        ft = next(r.find_triangles_total for r in mine if r.algo == "triangles")
        T = mine[0].oracle
        ok = ok and T <= ft <= 6 * T
        out.append(RunReport(
            "bench-exact", inst.describe(), dict(S={r.algo: r.S for r in mine}),
            {r.algo: r.count for r in mine}, T,
            {r.algo: dict(total_words=r.total_words, rounds=r.rounds,
                          peak_machine_words=r.peak_machine_words) for r in mine},
            dict(find_triangles_total=ft, iterations={r.algo: r.states for r in mine},
                 seconds={r.algo: r.seconds for r in mine}), [], ok))
    summary = ex.space_constants(runs)
    summary["passed"] = sum(r.success for r in out)
    summary["instances"] = len(out)
    out.append(RunReport("bench-exact-oracle", dict(trials=trials, seed=seed), {}, summary,
                         success=all(r.success for r in out)))
    return out


def _bench_approx(args, seed: int) -> list[RunReport]:
    runs = args.trials or 50
    res = ex.concentration(runs=runs, seed=seed or 3)
    ok = res["fraction_inside"] >= 0.95 and res["rejection_rate"] <= 0.15
    return [RunReport("bench-approx-concentration", dict(runs=runs, seed=seed),
                      dict(S=res["S"], M=res["M"], epsilon=0.25),
                      dict(fraction_inside=res["fraction_inside"],
                           rejection_rate=res["rejection_rate"]),
                      res["T"], None, res, [], ok)]


def _bench_space(args, seed: int) -> list[RunReport]:
    insts = ex.exact_oracle_instances(seed, n_arb=args.trials or 16, n_er=0)
    runs = ex.run_exact_suite(insts, algos=("triangles", "query-cliques"))
    consts = ex.space_constants(runs)
    hm = ex.hm_space_sweep()
    stab = {}
    for a in sorted({r["a"] for r in hm}):
        cs = [r["c"] for r in hm if r["a"] == a]
        stab[a] = dict(min=min(cs), max=max(cs), ratio=max(cs) / min(cs))
    consts["hm_words_per_m_alpha3"] = max(r["c"] for r in hm)
    consts["hm_stability"] = stab
    ok = (consts["triangles_words_per_m_alpha"] <= 32
          and all(s["ratio"] <= 4 for s in stab.values())
          and all(r.success for r in runs))
    return [RunReport("bench-space-budgets", dict(seed=seed), {}, consts, None, None,
                      dict(hm_sweep=hm), [], ok)]


BENCH = {
    "exact-oracle": _bench_exact,
    "approx-concentration": _bench_approx,
    "space-budgets": _bench_space,
}


def cmd_bench(args) -> list[RunReport]:
    if args.suite not in BENCH:
        raise UsageError(f"unknown --suite {args.suite!r}; choose from {', '.join(BENCH)}")
    return BENCH[args.suite](args, _seed(args))


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="edge-list file: 'n m' header, then one 'u v' per line")
    p.add_argument("--space", type=int, help="words per machine (S)")
    p.add_argument("--machines", type=int, help="machine count override (M)")
    p.add_argument("--delta", type=float, default=0.5, help="S = n^delta when --space is absent")
    p.add_argument("--alpha", type=int, help="arboricity bound (default: degeneracy)")
    p.add_argument("--seed", type=int, help=f"random seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--oracle", action="store_true", help="also compute the brute-force answer")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpcsubgraph", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx-triangles", help="sampling estimate of the triangle count")
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--trials", type=int, help="subroutine runs (default 100 * ceil(log2 n))")
    p.set_defaults(fn=cmd_approx_triangles)

    p = sub.add_parser("exact", help="exact triangle or clique counts")
    _common(p)
    p.add_argument("--algo", default="triangles",
                   choices=("triangles", "enumerate", "query-cliques", "kclique"))
    p.add_argument("--k", type=int, help="clique size for --algo kclique")
    p.set_defaults(fn=cmd_exact)

    p = sub.add_parser("subgraph", help="copies of a connected pattern on at most 5 vertices")
    _common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pattern", help=f"catalog name ({', '.join(CATALOG)})")
    g.add_argument("--pattern-file", help="pattern edge list, same format as --graph")
    p.set_defaults(fn=cmd_subgraph)

    p = sub.add_parser("bench", help="seeded experiment suites")
    _common(p)
    p.add_argument("--suite", required=True, choices=tuple(BENCH))
    p.add_argument("--trials", type=int)
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for name in ("epsilon", "delta"):
        v = getattr(args, name, None)
        if v is not None and not 0 < v < 1:
            ap.error(f"--{name} must lie in (0, 1)")
    try:
        reports = args.fn(args)
    except UsageError as e:
        ap.error(str(e))
    except (OSError, GraphFormatError, ValueError) as e:
        print(f"mpcsubgraph: error: {e}", file=sys.stderr)
        return 2
    except SpaceExceeded as e:
        rep = RunReport(args.command, dict(graph=getattr(args, "graph", None)), {}, None,
                        warnings=[str(e)], success=False)
        reports = [rep]
    doc = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    for r in reports[-1:] if len(reports) > 1 else reports:
        _note(r.summary())
    return 0 if all(r.success for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
