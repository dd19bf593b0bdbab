"""k-wise independent sampling bits from a random polynomial over a prime field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

P31 = (1 << 31) - 1
P61 = (1 << 61) - 1


def default_k(n: int) -> int:
    """Independence used by the approximate counter: ``6 * ceil(log2 n)``."""
    return 6 * max(1, math.ceil(math.log2(max(2, n))))


@dataclass(frozen=True)
class KWiseHash:
    """``h(v, i) = 1`` iff ``poly(v * M + i) < t`` with ``deg(poly) = k - 1``.

    Any ``k`` distinct keys receive independent, uniform field values, so the
    sampling bits are k-wise independent with marginal ``t / p``.
    """

    k: int
    p: int
    t: int
    coeffs: tuple
    M: int
    domain: int

    @property
    def p_hat(self) -> float:
        return self.t / self.p

    def serialize(self) -> tuple:
        """The broadcast payload: ``(k, p, t, M, a_0, ..., a_{k-1})``."""
        return (self.k, self.p, self.t, self.M) + tuple(self.coeffs)

    @property
    def words(self) -> int:
        return len(self.serialize())

    def raw(self, key: int) -> int:
        acc = 0
        for a in reversed(self.coeffs):
            acc = (acc * key + a) % self.p
        return acc

    def key(self, v: int, i: int) -> int:
        if not (0 <= i < self.M):
            raise ValueError(f"machine id {i} outside [0, {self.M})")
        key = v * self.M + i
        if not (0 <= key < self.domain):
            raise ValueError(f"key ({v}, {i}) outside the hash domain")
        return key

    def eval(self, v: int, i: int) -> int:
        return 1 if self.raw(self.key(v, i)) < self.t else 0

    def raw_many(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        if self.p == P31 or self.p < (1 << 31):
            acc = np.zeros(keys.shape, dtype=np.int64)
            x = keys % self.p
            for a in reversed(self.coeffs):
                acc = (acc * x + a) % self.p
            return acc
        return np.array([self.raw(int(k)) for k in keys.ravel()], dtype=object).reshape(keys.shape)

    def bits(self, vertices: np.ndarray) -> np.ndarray:
        """Boolean matrix ``B[r, i] = h(vertices[r], i)`` over all machines."""
        vertices = np.asarray(vertices, dtype=np.int64)
        keys = vertices[:, None] * self.M + np.arange(self.M, dtype=np.int64)[None, :]
        if keys.size and int(keys.max()) >= self.domain:
            raise ValueError("vertex id outside the hash domain")
        return self.raw_many(keys) < self.t


def eval_hash(h: KWiseHash, v: int, i: int) -> int:
    return h.eval(v, i)


def new_hash(k: int, p_hat: float, domain_size: int, seed, M: int = 1,
             prime: int | None = None) -> KWiseHash:
    """Draw a hash with ``k`` seed-derived coefficients.

    The modulus is the Mersenne prime ``2^31 - 1`` when the key domain fits
    (fast vectorised evaluation), else ``2^61 - 1``; ``prime`` overrides it.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat must lie in [0, 1], got {p_hat}")
    if prime is None:
        if domain_size <= P31:
            prime = P31
        elif domain_size <= P61:
            prime = P61
        else:
            raise ValueError(f"key domain {domain_size} exceeds the 61-bit modulus")
    if domain_size > prime:
        raise ValueError(f"key domain {domain_size} exceeds the field size {prime}")
    if k > prime:
        raise ValueError(f"k={k} coefficients exceed the field size {prime}")
    rng = np.random.default_rng(seed)
    if prime <= P31:
        coeffs = tuple(int(x) for x in rng.integers(0, prime, size=k))
    else:
        coeffs = tuple(int(rng.integers(0, 1 << 62)) % prime for _ in range(k))
    t = min(prime, int(math.floor(p_hat * prime)))
    return KWiseHash(k, prime, t, coeffs, M, domain_size)


def membership_list(h: KWiseHash, v: int, M: int | None = None) -> list[int]:
    """Machines ``i`` with ``h(v, i) = 1``, ascending."""
    M = h.M if M is None else M
    if M != h.M:
        raise ValueError(f"hash was drawn for M={h.M}, asked for M={M}")
    row = h.bits(np.array([v]))[0]
    return np.flatnonzero(row).tolist()
