"""Non-crossing partitions and free cumulant calculus.

Partitions are enumerated by splitting on the block of the first point, the
Kreweras complement is computed as a permutation product, and the free
cumulants of a product of free variables are summed over NC(p) grouped by the
block-size types of ``pi`` and ``Kr(pi)``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "TooLarge", "NCPartition", "catalan", "enumerate_nc", "kreweras", "is_noncrossing",
    "cumulants_to_moments", "moments_to_cumulants", "product_cumulants",
    "mult_power_cumulants", "abel_identity",
]

MAX_P = 14


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class NCPartition:
    """Blocks of ``{1..p}`` as sorted tuples, sorted by smallest element."""

    blocks: tuple
    p: int

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        object.__setattr__(self, "blocks", blocks)
        flat = sorted(i for b in blocks for i in b)
        if flat != list(range(1, self.p + 1)):
            raise ValueError("blocks do not partition {1..p}")
        if not is_noncrossing(blocks):
            raise ValueError("partition is crossing")

    @classmethod
    def _trusted(cls, blocks, p):
        # skips validation; used for partitions produced by the enumerator
        obj = object.__new__(cls)
        object.__setattr__(obj, "blocks", tuple(sorted(blocks)))
        object.__setattr__(obj, "p", p)
        return obj

    def __len__(self):
        return len(self.blocks)

    def sizes(self) -> tuple:
        return tuple(sorted(len(b) for b in self.blocks))


def is_noncrossing(blocks: Sequence[Sequence[int]]) -> bool:
    """No ``i1 < i2 < i3 < i4`` with ``i1, i3`` in one block and ``i2, i4`` in another."""
    label = {}
    for k, b in enumerate(blocks):
        for i in b:
            label[i] = k
    for k, b in enumerate(blocks):
        # a block with points both between consecutive points of b and
        # outside them crosses b
        members = sorted(b)
        for x, y in zip(members, members[1:]):
            inside = {label[i] for i in range(x + 1, y)}
            for j in inside:
                if any(i < x or i > y for i in blocks[j]):
                    return False
    return True


def catalan(p: int) -> int:
    return math.comb(2 * p, p) // (p + 1)


@lru_cache(maxsize=None)
def _nc_blocks(n: int) -> tuple:
    """All NC partitions of ``{0..n-1}`` as tuples of blocks (tuples)."""
    if n == 0:
        return ((),)
    out = []
    # 0 is a singleton
    for rest in _nc_blocks(n - 1):
        out.append(((0,),) + tuple(tuple(i + 1 for i in b) for b in rest))
    # the next element of 0's block is m; [1, m) is independent, 0 joins m's block
    for m in range(1, n):
        for inner in _nc_blocks(m - 1):
            inner_s = tuple(tuple(i + 1 for i in b) for b in inner)
            for outer in _nc_blocks(n - m):
                outer_s = [tuple(i + m for i in b) for b in outer]
                # blocks are listed with the block of the first point in front
                head = (0,) + outer_s[0]
                out.append((head,) + inner_s + tuple(outer_s[1:]))
    return tuple(out)


def enumerate_nc(p: int) -> list[NCPartition]:
    """All non-crossing partitions of ``{1..p}``."""
    if p < 1:
        raise ValueError("p must be positive")
    if p > MAX_P:
        raise TooLarge(f"p = {p} exceeds the cap {MAX_P}")
    return [NCPartition._trusted(tuple(tuple(i + 1 for i in b) for b in blocks), p)
            for blocks in _nc_blocks(p)]


def _as_perm(blocks, p):
    """Blocks read as increasing cycles; returns sigma as a 0-based list."""
    sigma = list(range(p))
    for b in blocks:
        b = sorted(b)
        for x, y in zip(b, b[1:] + b[:1]):
            sigma[x - 1] = y - 1
    return sigma


def _cycles(perm):
    seen = [False] * len(perm)
    out = []
    for i in range(len(perm)):
        if not seen[i]:
            cyc, j = [], i
            while not seen[j]:
                seen[j] = True
                cyc.append(j + 1)
                j = perm[j]
            out.append(tuple(cyc))
    return out


def kreweras(pi: NCPartition) -> NCPartition:
    """Kreweras complement, ``Kr(pi) = pi^{-1} gamma`` with ``gamma = (1 2 ... p)``."""
    p = pi.p
    sigma = _as_perm(pi.blocks, p)
    inv = [0] * p
    for i, s in enumerate(sigma):
        inv[s] = i
    kr = [inv[(i + 1) % p] for i in range(p)]
    return NCPartition._trusted(tuple(_cycles(kr)), p)


@lru_cache(maxsize=None)
def _type_counts(p: int) -> tuple:
    """Counter of (sizes(pi), sizes(Kr(pi))) over NC(p)."""
    c = Counter()
    for pi in enumerate_nc(p):
        c[(pi.sizes(), kreweras(pi).sizes())] += 1
    return tuple(sorted(c.items()))


@lru_cache(maxsize=None)
def _size_counts(p: int) -> tuple:
    c = Counter(pi.sizes() for pi in enumerate_nc(p))
    return tuple(sorted(c.items()))


def _prod(kappa, sizes):
    out = 1
    for s in sizes:
        out = out * kappa[s - 1]
    return out


def cumulants_to_moments(kappa: Sequence) -> list:
    """``m_q = sum over NC(q) of prod kappa_|V|`` for ``q = 1..len(kappa)``.

    Works for floats or :class:`fractions.Fraction` entries.
    """
    kappa = list(kappa)
    p = len(kappa)
    if p > MAX_P:
        raise TooLarge(f"p = {p} exceeds the cap {MAX_P}")
    return [sum(n * _prod(kappa, sz) for sz, n in _size_counts(q)) for q in range(1, p + 1)]


def moments_to_cumulants(moments: Sequence) -> list:
    """Inverse of :func:`cumulants_to_moments`, solved order by order."""
    moments = list(moments)
    p = len(moments)
    if p > MAX_P:
        raise TooLarge(f"p = {p} exceeds the cap {MAX_P}")
    kappa: list = []
    for q in range(1, p + 1):
        # kappa_q appears only through the one-block partition
        rest = sum(n * _prod(kappa + [0], sz) for sz, n in _size_counts(q) if sz != (q,))
        kappa.append(moments[q - 1] - rest)
    return kappa


def product_cumulants(kappa_a: Sequence, kappa_b: Sequence, p: int):
    """``kappa_p(AB)`` for free ``A, B``: sum of ``kappa_pi(A) kappa_Kr(pi)(B)``."""
    if len(kappa_a) < p or len(kappa_b) < p:
        raise ValueError("cumulant vectors shorter than p")
    return sum(n * _prod(kappa_a, sa) * _prod(kappa_b, sb) for (sa, sb), n in _type_counts(p))


def mult_power_cumulants(mu, n: int, p: int) -> list:
    """Free cumulants ``kappa_1..kappa_p`` of ``mu^{boxtimes n}``.

    ``mu`` is a Measure or a sequence of moments ``m_1..m_p``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if p > 10:
        raise TooLarge("mult_power_cumulants supports p <= 10")
    if hasattr(mu, "moment"):
        moments = [mu.moment(q) for q in range(1, p + 1)]
        if not all(np.isfinite(moments)):
            from .measure import DivergentIntegral
            raise DivergentIntegral(f"moment of order <= {p} is infinite")
    else:
        moments = list(mu)[:p]
    ka = moments_to_cumulants(moments)
    kpi = list(ka)
    for _ in range(n - 1):
        kpi = [product_cumulants(ka, kpi, q) for q in range(1, p + 1)]
    return kpi


def abel_identity(p: int) -> tuple[Fraction, Fraction]:
    """Both sides of ``sum_r r^(r-1)/r! (p-r)^(p-r)/(p-r)! = (p-1) p^(p-1)/p!``."""
    if p < 2:
        raise ValueError("p must be at least 2")
    lhs = sum(Fraction(r ** (r - 1), math.factorial(r)) * Fraction((p - r) ** (p - r), math.factorial(p - r))
              for r in range(1, p))
    rhs = Fraction((p - 1) * p ** (p - 1), math.factorial(p))
    return lhs, rhs
