import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcsubgraph.exact import (
    PruningViolation,
    check_pruning,
    count_cliques_query,
    count_triangles_exact,
    default_alpha,
    edge_bound,
    enumerate_triangles,
    find_triangles,
    find_triangles_exact,
    gamma,
    max_iterations,
    vertex_bound,
    PeelingState,
)
from mpcsubgraph.graph import (
    Graph,
    complete_graph,
    cycle_graph,
    gen_bounded_arboricity,
    gen_random_graph,
    star_graph,
)
from mpcsubgraph.oracles import oracle_count_triangles, oracle_list_triangles

ALGOS = [count_triangles_exact, enumerate_triangles, count_cliques_query]


def test_schedule():
    assert gamma(0, 1) == 4
    assert gamma(1, 1) == math.ceil(2 ** 1.5 * 2)
    assert gamma(2, 3) == math.ceil(2 ** 2.25 * 6)
    assert gamma(40, 1) == 1 << 62
    assert max_iterations(2) == 1
    assert max_iterations(2 ** 16) == math.ceil(math.log(16, 1.5)) + 1
    assert vertex_bound(100, 0) == 100 and vertex_bound(64, 1) == 32
    assert edge_bound(100, 1) == 100


def test_check_pruning_raises():
    check_pruning(100, 100, PeelingState(i=0, q=100, a=0, gamma=4, m_i=100))
    with pytest.raises(PruningViolation):
        check_pruning(64, 100, PeelingState(i=1, q=40, a=0, gamma=4, m_i=10))
    with pytest.raises(PruningViolation):
        check_pruning(64, 100, PeelingState(i=2, q=1, a=0, gamma=4, m_i=90))


def test_find_triangles_examples():
    # w=0 owns {1, 2, 3}; 1 sent {2, 3}, 2 sent {3}
    assert find_triangles(0, [[2, 3], [3]], [1, 2, 3]) == 3
    assert find_triangles(0, [], [1, 2]) == 0
    assert find_triangles(0, [[5, 6]], [1, 2]) == 0


def test_find_triangles_weights():
    deg = {0: 10, 1: 10, 2: 1, 3: 1}
    # duplicates of 1 (high) at high w weigh 1/2, of 2 (low) weigh 1/4
    got = find_triangles_exact(0, [[1], [2]], [1, 2], deg, 5)
    assert got == Fraction(1, 2) + Fraction(1, 4)
    assert find_triangles_exact(2, [[3]], [3], deg, 5) == Fraction(1, 6)


@pytest.mark.parametrize("algo", ALGOS)
@pytest.mark.parametrize("g,want", [
    (complete_graph(4), 4),
    (complete_graph(6), 20),
    (cycle_graph(7), 0),
    (star_graph(9), 0),
    (gen_bounded_arboricity(80, 1, 4), 0),
    (Graph.from_edges(5, []), 0),
])
def test_known_counts(algo, g, want):
    res = algo(g)
    assert res.count == want
    assert res.metrics.success


@pytest.mark.parametrize("algo", ALGOS)
@settings(max_examples=15, deadline=None)
@given(n=st.integers(5, 60), a=st.integers(1, 5), seed=st.integers(0, 10 ** 6))
def test_matches_oracle(algo, n, a, seed):
    g = gen_bounded_arboricity(n, a, seed)
    assert algo(g).count == oracle_count_triangles(g)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(5, 40), p=st.floats(0.05, 0.6), seed=st.integers(0, 10 ** 6))
def test_enumeration_is_exact_list(n, p, seed):
    g = gen_random_graph(n, p, seed)
    res = enumerate_triangles(g)
    assert res.triangles == sorted(oracle_list_triangles(g))


def test_pruning_bounds_hold():
    g = gen_bounded_arboricity(600, 4, 2)
    res = count_triangles_exact(g)
    n, m = g.n, g.m
    assert len(res.iterations) <= max_iterations(n)
    for st_ in res.iterations:
        assert st_.q <= vertex_bound(n, st_.i) + 1e-9
        assert st_.m_i <= edge_bound(m, st_.i) + 1e-9
    assert [s.q for s in res.iterations] == sorted((s.q for s in res.iterations), reverse=True)


def test_duplicates_bracket_the_count():
    g = gen_random_graph(80, 0.15, 6)
    res = count_triangles_exact(g)
    assert res.count <= res.find_triangles_total <= 6 * res.count


def test_underestimated_alpha_is_detected():
    g = complete_graph(40)
    with pytest.raises(PruningViolation):
        count_triangles_exact(g, alpha=1)


def test_space_and_peak_budget():
    g = gen_bounded_arboricity(1000, 2, 5)
    res = count_triangles_exact(g)
    assert res.metrics.peak_machine_words <= res.S
    assert res.metrics.total_words <= 32 * g.m * default_alpha(g)


def test_query_variant_handles_dense_pieces():
    g = gen_random_graph(50, 0.4, 8)
    res = count_cliques_query(g)
    assert res.count == oracle_count_triangles(g)


def test_deterministic_given_seed():
    g = gen_random_graph(60, 0.2, 1)
    a = count_triangles_exact(g, seed=4).to_dict()
    b = count_triangles_exact(g, seed=4).to_dict()
    assert a == b
