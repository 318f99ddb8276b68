from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, strategies as st

from freeperp.nc_comb import (TooLarge, abel_identity, catalan, cumulants_to_moments, enumerate_nc,
                              is_noncrossing, kreweras, moments_to_cumulants, mult_power_cumulants,
                              product_cumulants)


@pytest.mark.parametrize("p", range(1, 11))
def test_nc_count_is_catalan(p):
    parts = enumerate_nc(p)
    assert len(parts) == catalan(p) == comb(2 * p, p) // (p + 1)
    assert len({pi.blocks for pi in parts}) == len(parts)


def test_crossing_detected():
    assert not is_noncrossing([(1, 3), (2, 4)])
    assert is_noncrossing([(1, 4), (2, 3)])


def test_kreweras_small():
    pi = enumerate_nc(4)[3]
    assert pi.blocks == ((1,), (2, 3, 4))
    assert kreweras(pi).blocks == ((1, 4), (2,), (3,))


@pytest.mark.parametrize("p", range(1, 9))
def test_kreweras_block_count(p):
    for pi in enumerate_nc(p):
        kr = kreweras(pi)
        assert len(pi.blocks) + len(kr.blocks) == p + 1
        assert is_noncrossing(kr.blocks)


@pytest.mark.parametrize("p", range(1, 8))
def test_kreweras_square_is_rotation(p):
    # Kr^2 is conjugation by the full cycle, hence a bijection on NC(p)
    images = {kreweras(kreweras(pi)).blocks for pi in enumerate_nc(p)}
    assert len(images) == catalan(p)


def test_enumeration_guard():
    with pytest.raises(TooLarge):
        enumerate_nc(40)


@pytest.mark.parametrize("p", range(2, 21))
def test_abel_identity_exact(p):
    lhs, rhs = abel_identity(p)
    assert isinstance(lhs, Fraction) and lhs == rhs


def test_abel_p5_value():
    assert abel_identity(5) == (Fraction(125, 6), Fraction(125, 6))


@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=7), min_size=1, max_size=7))
def test_moment_cumulant_roundtrip(kappa):
    assert moments_to_cumulants(cumulants_to_moments(kappa)) == kappa


def test_semicircle_and_mp_moments():
    # kappa = (0, 1, 0, ...) gives Catalan numbers at even orders
    m = cumulants_to_moments([0, 1, 0, 0, 0, 0])
    assert m == [0, 1, 0, 2, 0, 5]
    # all free cumulants 1: MP(1)
    assert cumulants_to_moments([1] * 5) == [1, 2, 5, 14, 42]


def test_product_of_free_poissons():
    # MP(1) boxtimes MP(1) has Fuss-Catalan moments binom(3p, p)/(2p + 1)
    k = [product_cumulants([1] * 5, [1] * 5, q) for q in range(1, 6)]
    assert cumulants_to_moments(k) == [comb(3 * p, p) // (2 * p + 1) for p in range(1, 6)]


def test_power_cumulants_exact_from_moments():
    m = [Fraction(c) for c in (1, 2, 5, 14)]
    k = mult_power_cumulants(m, 3, 4)
    assert cumulants_to_moments(k) == [comb(4 * p, p) // (3 * p + 1) for p in range(1, 5)]


@given(st.integers(1, 6), st.integers(1, 5))
def test_fuss_catalan_powers(mp1, n, p):
    k = mult_power_cumulants(mp1, n, p)
    m = float(cumulants_to_moments(k)[p - 1])
    assert m == pytest.approx(comb((n + 1) * p, p) / (n * p + 1), rel=1e-10)
