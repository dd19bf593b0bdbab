import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpcsubgraph.kwise import P31, P61, KWiseHash, default_k, eval_hash, membership_list, new_hash


def exhaustive_joint(p: int, k: int, keys) -> Counter:
    """Joint raw values on ``keys`` over every coefficient vector of a degree-(k-1) polynomial."""
    hist = Counter()
    for coeffs in itertools.product(range(p), repeat=k):
        h = KWiseHash(k, p, 0, coeffs, 1, p)
        hist[tuple(h.raw(x) for x in keys)] += 1
    return hist


@pytest.mark.parametrize("p, k", [(2, 2), (5, 2), (7, 3), (31, 3), (101, 2)])
def test_kwise_uniform_exhaustive(p, k):
    for j in range(1, k + 1):
        for keys in ([0, 1, 2][:j], [p - 1, 3 % p, 1][:j]):
            if len(set(keys)) < j:
                continue
            hist = exhaustive_joint(p, k, keys)
            assert len(hist) == p ** j
            assert set(hist.values()) == {p ** (k - j)}


def test_deterministic():
    a = new_hash(8, 0.3, 1000, 42)
    b = new_hash(8, 0.3, 1000, 42)
    assert a == b and a.coeffs == b.coeffs
    assert new_hash(8, 0.3, 1000, 43).coeffs != a.coeffs


def test_marginal_half():
    h = new_hash(6, 0.5, 10 ** 6, 1, M=10)
    bits = h.bits(np.arange(10 ** 4))
    n = bits.size
    assert abs(bits.mean() - 0.5) <= 4 * math.sqrt(0.25 / n)


def test_errors():
    with pytest.raises(ValueError):
        new_hash(12, 0.5, 5, 0, prime=11)
    with pytest.raises(ValueError):
        new_hash(1, 0.5, 5, 0)
    with pytest.raises(ValueError):
        new_hash(4, 0.5, P61 + 1, 0)
    h = new_hash(4, 0.5, 20, 0, M=4)
    with pytest.raises(ValueError):
        h.eval(5, 0)
    with pytest.raises(ValueError):
        h.eval(0, 4)


def test_extreme_rates():
    full = new_hash(6, 1.0, 500, 3, M=5)
    none = new_hash(6, 0.0, 500, 3, M=5)
    assert membership_list(full, 17) == list(range(5))
    assert membership_list(none, 17) == []


def test_prime_choice_and_size():
    assert new_hash(6, 0.1, 1000, 0).p == P31
    assert new_hash(6, 0.1, P31 + 5, 0).p == P61
    h = new_hash(36, 0.1, 1000, 0)
    assert h.words == 36 + 4 == len(h.serialize())
    assert abs(h.p_hat - 0.1) < 1 / h.p


@given(st.integers(2, 10), st.floats(0.01, 0.99), st.integers(0, 10 ** 6),
       st.integers(1, 12), st.integers(0, 39))
def test_eval_is_pure_and_vectorised(k, ph, seed, M, v):
    h = new_hash(k, ph, 40 * M, seed, M=M)
    row = h.bits(np.array([v]))[0]
    assert [eval_hash(h, v, i) for i in range(M)] == row.astype(int).tolist()
    assert [eval_hash(h, v, i) for i in range(M)] == [h.eval(v, i) for i in range(M)]
    assert membership_list(h, v) == [i for i in range(M) if h.eval(v, i)]


def test_p61_path_matches_scalar():
    h = new_hash(5, 0.4, P31 * 4, 9, M=4)
    assert h.p == P61
    keys = np.arange(50, dtype=np.int64)
    assert [int(x) for x in h.raw_many(keys)] == [h.raw(int(x)) for x in keys]


def test_membership_mean():
    M, ph = 50, 0.2
    sizes = [len(membership_list(new_hash(6, ph, 1000 * M, s, M=M), v))
             for s in range(40) for v in range(0, 1000, 50)]
    n = len(sizes)
    assert abs(np.mean(sizes) - ph * M) <= 4 * math.sqrt(M * ph * (1 - ph) / n)


def test_default_k():
    assert default_k(2 ** 16) == 96
    assert default_k(1) == 6
