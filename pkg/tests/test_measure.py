import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freeperp.measure import (AtomAtZero, InvalidParams, Measure, MeasureError,
                              builtin_law, empirical, free_gig_endpoints, levy_distance, mixture,
                              pushforward, stable_tail_law, symmetrize, tail_mass)

# direct quadrature of the fbp(2, 3) density (mpmath, 30 digits), frozen
FBP23_FRACTIONAL = {0.25: 0.90986811958047632626, 0.5: 0.8866527350556486587,
                    0.75: 0.91786078234901772276}
# MP(1) quantiles at (2k - 1)/8 from mpmath root finding on the closed-form cdf
MP1_QUANTILES = [0.0386778878065375045, 0.357707283861371506, 1.05918773212983815,
                 2.39252750879458367]


def fbp_density(a, b, x):
    s, r = math.sqrt(a * b), math.sqrt(a + b - 1)
    lo, hi = ((s - r) / (b - 1)) ** 2, ((s + r) / (b - 1)) ** 2
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = (b - 1) * np.sqrt((hi - xi) * (xi - lo)) / (2 * np.pi * xi * (1 + xi))
    return out


LAWS = [("marchenko_pastur", (1.0,)), ("marchenko_pastur", (0.4,)), ("free_beta_prime", (2, 3)),
        ("free_beta_prime", (2, 1)), ("inverse_mp", ()), ("free_gig", (-1.0,)), ("semicircle", ()),
        ("bernoulli", (0.3,))]


@pytest.mark.parametrize("name,args", LAWS)
def test_builtins_validate(name, args):
    mu = builtin_law(name, *args)
    assert mu.validate() == []
    assert mu.mass() == pytest.approx(1.0, abs=1e-9)


def test_mp_moments_are_catalan(mp1):
    assert [mp1.moment(p) for p in range(1, 6)] == pytest.approx([1, 2, 5, 14, 42], rel=1e-10)


def test_mp_atom_below_one():
    mu = builtin_law("marchenko_pastur", 0.4)
    assert mu.atom_mass_at(0.0) == pytest.approx(0.6)
    assert mu.moment(1) == pytest.approx(0.4)


def test_mp_quantiles(mp1):
    q = mp1.quantile(np.array([0.125, 0.375, 0.625, 0.875]))
    assert q == pytest.approx(MP1_QUANTILES, rel=1e-9)


def test_fbp_density_matches_formula(fbp23):
    x = np.linspace(0.06, 4.9, 40)
    assert fbp23.density(x) == pytest.approx(fbp_density(2, 3, x), rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("gamma", sorted(FBP23_FRACTIONAL))
def test_fbp_fractional_moments(fbp23, gamma):
    assert fbp23.moment(gamma) == pytest.approx(FBP23_FRACTIONAL[gamma], abs=1e-9)


@given(st.floats(0.5, 4.0), st.floats(1.5, 6.0))
def test_fbp_mean_variance(a, b):
    mu = builtin_law("free_beta_prime", a, b)
    assert mu.mean() == pytest.approx(a / (b - 1), rel=1e-8)
    if b > 2:
        assert mu.variance() == pytest.approx(a * (a + b - 1) / (b - 1) ** 3, rel=1e-7)


def test_fbp_heavy_moment_diverges(fbp21):
    assert fbp21.tail_descriptor().alpha == pytest.approx(0.5)
    assert fbp21.tail_descriptor().c == pytest.approx(2 * math.sqrt(2) / math.pi, rel=1e-9)
    assert fbp21.moment(1) == math.inf
    assert fbp21.moment(0.5) == math.inf


# heavy-tailed fractional moments; mpmath with x = 10 s^-10 on the far tail, frozen
HEAVY_FRACTIONAL = [(("free_beta_prime", 2, 1), 0.25, 1.7960678075296618822),
                    (("free_beta_prime", 2, 1), 0.4, 4.4291378577042081062),
                    (("inverse_mp",), 0.25, 1.5737874653547949681)]


@pytest.mark.parametrize("law,gamma,expected", HEAVY_FRACTIONAL)
def test_heavy_fractional_moments(law, gamma, expected):
    assert builtin_law(*law).moment(gamma) == pytest.approx(expected, rel=1e-10)


def test_tail_mass_of_inverse_mp(inverse_mp):
    t = 1e6
    assert math.sqrt(t) * float(tail_mass(inverse_mp, t)) == pytest.approx(2 / math.pi, rel=1e-3)


def test_invalid_params():
    with pytest.raises(InvalidParams):
        builtin_law("free_beta_prime", 1, 1)
    with pytest.raises(InvalidParams):
        builtin_law("no_such_law")
    with pytest.raises(InvalidParams):
        stable_tail_law(2.5)


def test_free_gig_endpoints_order():
    a, b = free_gig_endpoints(-1.0)
    assert 0 < a < b


def test_reciprocals(mp1, inverse_mp):
    assert levy_distance(pushforward(mp1, "reciprocal"), inverse_mp) < 1e-9
    inv = pushforward(builtin_law("free_beta_prime", 2, 3), "reciprocal")
    assert levy_distance(inv, builtin_law("free_beta_prime", 3, 2)) < 1e-9
    assert inv.mean() == pytest.approx(3.0, rel=1e-9)
    with pytest.raises(AtomAtZero):
        pushforward(builtin_law("marchenko_pastur", 0.5), "reciprocal")


@given(st.floats(0.1, 10.0))
def test_dilation_scales_moments(s):
    mu = builtin_law("free_beta_prime", 2, 3)
    nu = pushforward(mu, "dilate", s)
    assert nu.moment(1) == pytest.approx(s, rel=1e-9)
    assert nu.moment(2) == pytest.approx(2 * s * s, rel=1e-9)


def test_symmetrize(fbp23):
    sym = symmetrize(fbp23)
    assert sym.support_kind == "symmetric"
    assert sym.moment(1) == pytest.approx(0.0, abs=1e-12)
    assert sym.moment(3) == pytest.approx(0.0, abs=1e-9)
    assert sym.moment(2) == pytest.approx(2.0, rel=1e-9)
    assert sym.cdf(0.0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_stable_tail_law(alpha):
    mu = stable_tail_law(alpha)
    assert mu.mass() == pytest.approx(1.0, abs=1e-10)
    assert mu.moment(1) == pytest.approx(1.0, rel=1e-10)
    d = mu.tail_descriptor()
    t = 1e4
    assert t**alpha * float(tail_mass(mu, t)) == pytest.approx(d.c, rel=1e-10)


@given(st.floats(0.01, 0.99))
def test_cdf_quantile_inverse(p):
    mu = builtin_law("free_beta_prime", 2, 3)
    assert float(np.squeeze(mu.cdf(mu.quantile(p)))) == pytest.approx(p, abs=1e-9)


def test_cdf_monotone(fbp21):
    x = np.geomspace(0.1, 1e6, 200)
    assert np.all(np.diff(fbp21.cdf(x)) >= 0)


def test_mixture_and_empirical():
    mu = mixture([(0.5, builtin_law("point", 1.0)), (0.5, builtin_law("point", 3.0))])
    assert mu.moment(1) == pytest.approx(2.0)
    e = empirical([1.0, 3.0])
    assert levy_distance(mu, e) == pytest.approx(0.0, abs=1e-7)


def test_levy_distance_properties(mp1, fbp23):
    assert levy_distance(mp1, mp1) == pytest.approx(0.0, abs=1e-7)
    d = levy_distance(mp1, fbp23)
    assert d == pytest.approx(levy_distance(fbp23, mp1), abs=1e-6)
    assert 0 < d <= 1
    # shifting a point mass by h moves the Levy distance by h
    assert levy_distance(builtin_law("point", 0.0), builtin_law("point", 0.05)) == pytest.approx(0.05, abs=1e-6)


def test_dict_roundtrip(fbp23):
    back = Measure.from_dict(fbp23.to_dict())
    assert levy_distance(back, fbp23) < 1e-9
    assert back.moment(2) == pytest.approx(2.0, rel=1e-9)


def test_negating_tail_refused(fbp21):
    with pytest.raises(MeasureError):
        pushforward(stable_tail_law(1.5), "negate")
