import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpcsubgraph.graph import Graph, gen_random_graph
from mpcsubgraph.mpc.primitives import distribute_input
from mpcsubgraph.mpc.runtime import Batch, Cluster, MpcConfig, SpaceExceeded, new_cluster, words


def test_new_cluster():
    c = new_cluster(MpcConfig(S=100, M=4))
    assert len(c) == 4 and c.metrics.rounds == 0
    with pytest.raises(ValueError):
        MpcConfig(S=0, M=1)
    assert len(new_cluster(MpcConfig(S=10 ** 6, M=1))) == 1


@pytest.mark.parametrize("rec, w", [
    (3, 1), (2.5, 1), (True, 1), ("tag", 0), (None, 0),
    ((1, 2), 2), ((1, (2, 3), "x"), 3), ([(1, 2), (3, 4)], 4), (frozenset({1, 2, 3}), 3),
])
def test_word_model(rec, w):
    assert words(rec) == w


def test_batch_words():
    assert Batch([(1, 2), (3,)]).w == 3
    assert Batch([(1, 2)], 7).w == 7


def _graph(m):
    return Graph.from_edges(m + 1, [(0, v) for v in range(1, m + 1)])


def test_distribute_balanced():
    c = Cluster(MpcConfig(S=100, M=5))
    dl = distribute_input(c, _graph(10))
    assert [len(c.machines[b].store) for b in dl.blocks] == [2] * 5
    c = Cluster(MpcConfig(S=100, M=3))
    dl = distribute_input(c, _graph(10))
    assert [len(c.machines[b].store) for b in dl.blocks] == [4, 3, 3]
    assert dl.records() == sorted(_graph(10).edges)


def test_distribute_total_space():
    with pytest.raises(ValueError):
        distribute_input(Cluster(MpcConfig(S=1000, M=10)), _graph(10 ** 4))


def test_empty_round():
    c = Cluster(MpcConfig(S=10, M=3))
    c.run_round(lambda m: None)
    assert c.metrics.rounds == 1 and c.metrics.total_messages == 0


def test_outbox_overflow():
    c = Cluster(MpcConfig(S=10, M=2))
    with pytest.raises(SpaceExceeded) as ei:
        c.run_round(lambda m: [(1, Batch(list(range(11))))] if m.id == 0 else None)
    assert ei.value.where == "outbox"
    assert not c.metrics.success


def test_inbox_overflow_and_drop():
    c = Cluster(MpcConfig(S=10, M=3))
    step = lambda m: [(2, Batch([1] * 6))] if m.id < 2 else None
    with pytest.raises(SpaceExceeded):
        c.run_round(step)
    c = Cluster(MpcConfig(S=10, M=3))
    dropped = c.run_round(step, overflow="drop")
    assert dropped == {2} and c.machines[2].inbox == []


def test_convergecast_one_round():
    M = 9
    c = Cluster(MpcConfig(S=M - 1, M=M))
    c.run_round(lambda m: [(0, m.id)] if m.id else None)
    assert sorted(c.machines[0].inbox) == list(range(1, M))
    assert c.metrics.rounds == 1 and c.metrics.peak_machine_words == M - 1


def test_total_words_and_reuse():
    c = Cluster(MpcConfig(S=50, M=1))
    a, b = c.allocate(2)
    c.set_store(a, list(range(30)))
    c.set_store(b, list(range(10)))
    assert c.metrics.total_words == 40
    c.release([a, b])
    # the released machine with the larger peak is handed out first
    (x,) = c.allocate(1)
    assert x == a
    c.set_store(x, list(range(20)))
    assert c.metrics.total_words == 40


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30), st.integers(0, 10 ** 6))
def test_deterministic_metrics(dests, seed):
    def run():
        c = Cluster(MpcConfig(S=1000, M=6, seed=seed))
        c.run_round(lambda m: [(d, (m.id, d)) for d in dests])
        c.run_round(lambda m: [(0, len(m.take_inbox()))])
        return c.snapshot()
    assert run() == run()


def test_rounds_count_invocations():
    c = Cluster(MpcConfig(S=100, M=2))
    for _ in range(7):
        c.run_round(lambda m: [(1 - m.id, 1)])
    assert c.metrics.rounds == 7


def test_metrics_report():
    c = Cluster(MpcConfig(S=1024))
    distribute_input(c, gen_random_graph(20, 0.3, 1))
    d = c.snapshot().to_dict()
    assert {"rounds", "peak_machine_words", "total_words", "total_messages", "success"} <= set(d)
