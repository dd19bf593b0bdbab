import json

import pytest

from mpcsubgraph.cli import SEED_ENV, main
from mpcsubgraph.graph import complete_graph, gen_random_graph, write_edge_list
from mpcsubgraph.oracles import oracle_count_subgraph, oracle_count_triangles
from mpcsubgraph.patterns import get_pattern
from mpcsubgraph.report import RunReport


@pytest.fixture
def graph_file(tmp_path):
    g = gen_random_graph(40, 0.3, 1)
    p = tmp_path / "g.el"
    write_edge_list(g, p)
    return g, str(p)


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, (json.loads(out) if out.strip() else None), err


def test_exact_triangles(capsys, graph_file):
    g, path = graph_file
    rc, doc, err = run(capsys, "exact", "--graph", path, "--oracle")
    assert rc == 0
    assert doc["result"]["count"] == doc["oracle"] == oracle_count_triangles(g)
    assert doc["diagnostics"]["pruning"]
    assert doc["input"]["n"] == g.n and doc["success"]
    assert "exact-triangles" in err


def test_exact_kclique_and_query(capsys, tmp_path):
    p = tmp_path / "k6.el"
    write_edge_list(complete_graph(6), p)
    rc, doc, _ = run(capsys, "exact", "--algo", "kclique", "--k", "4", "--graph", str(p))
    assert rc == 0 and doc["result"]["count"] == 15
    rc, doc, _ = run(capsys, "exact", "--algo", "query-cliques", "--graph", str(p))
    assert rc == 0 and doc["result"]["count"] == 20
    assert "words_per_n_alpha2" in doc["diagnostics"]


def test_kclique_needs_k(capsys, graph_file):
    with pytest.raises(SystemExit) as e:
        main(["exact", "--algo", "kclique", "--graph", graph_file[1]])
    assert e.value.code == 2


def test_subgraph_pattern_and_file(capsys, graph_file, tmp_path):
    g, path = graph_file
    rc, doc, _ = run(capsys, "subgraph", "--pattern", "C4", "--graph", path, "--oracle")
    assert rc == 0 and doc["result"]["count"] == oracle_count_subgraph(g, get_pattern("C4"))
    pf = tmp_path / "paw.el"
    pf.write_text("4 4\n0 1\n1 2\n0 2\n2 3\n")
    rc, doc, _ = run(capsys, "subgraph", "--pattern-file", str(pf), "--graph", path)
    assert rc == 0 and doc["result"]["count"] == oracle_count_subgraph(g, get_pattern("paw"))


def test_unknown_pattern_lists_catalog(capsys, graph_file):
    with pytest.raises(SystemExit) as e:
        main(["subgraph", "--pattern", "nope", "--graph", graph_file[1]])
    assert e.value.code == 2
    assert "K5" in capsys.readouterr().err


def test_missing_graph_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["approx-triangles", "--space", "4096"])
    assert e.value.code == 2


def test_missing_file_exits_nonzero(capsys, tmp_path):
    assert main(["exact", "--graph", str(tmp_path / "absent.el")]) == 2


def test_bad_epsilon(capsys, graph_file):
    with pytest.raises(SystemExit):
        main(["approx-triangles", "--graph", graph_file[1], "--epsilon", "1.5"])


def test_approx_with_oracle(capsys, graph_file):
    g, path = graph_file
    rc, doc, _ = run(capsys, "approx-triangles", "--graph", path, "--space", "4096",
                     "--epsilon", "0.2", "--seed", "1", "--oracle", "--trials", "5",
                     "--machines", "8")
    assert doc["oracle"] == oracle_count_triangles(g)
    assert "relative_error" in doc["diagnostics"]
    assert doc["config"]["M"] == 8
    assert isinstance(doc["warnings"], list)
    assert rc == (0 if doc["success"] else 1)


def test_seed_env_fallback_is_deterministic(capsys, graph_file, monkeypatch):
    path = graph_file[1]
    monkeypatch.setenv(SEED_ENV, "5")
    argv = ["approx-triangles", "--graph", path, "--trials", "3", "--machines", "4"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a["input"]["seed"] == 5 and a == b


def test_space_overflow_is_failed_report(capsys, graph_file):
    rc, doc, _ = run(capsys, "exact", "--graph", graph_file[1], "--space", "40")
    assert rc != 0
    assert doc is None or not doc["success"]


def test_report_roundtrip():
    r = RunReport("x", dict(n=3), dict(S=10), dict(count=1), 1, dict(rounds=2),
                  dict(z={1, 2}), ["w"], True)
    d = json.loads(r.to_json())
    assert d["diagnostics"]["z"] == [1, 2]
    back = RunReport.from_dict(d)
    assert back.to_dict() == d
    assert "ok" in r.summary() and "warning: w" in r.summary()


def test_bench_exact_one_report_per_instance(capsys):
    rc, doc, err = run(capsys, "bench", "--suite", "exact-oracle", "--trials", "2", "--seed", "9")
    assert rc == 0 and len(doc) == 3
    assert set(doc[0]["result"]) == {"triangles", "enumerate", "query-cliques"}
    assert doc[-1]["result"]["instances"] == 2
    assert "bench-exact-oracle" in err
