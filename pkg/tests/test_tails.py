import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freeperp.measure import builtin_law, pushforward, stable_tail_law, symmetrize
from freeperp.perpetuity import PerpetuityProblem, critical_start
from freeperp.subordination import JointLaw
from freeperp.tails import (AmbiguousRegime, BadFit, NotCritical, Regime, TailReport, classify_regime,
                            predict_tail, predict_tail_positive, predict_tail_symmetric,
                            psi_side_factor, tauberian_estimate, verify_critical_tail)
from freeperp.transforms import psi

from conftest import C_FBP21, C_INV_MP


def test_fbp21_constant(fbp21):
    r = tauberian_estimate(fbp21, 0.5)
    assert r.exponent == pytest.approx(0.5, abs=0.01)
    assert r.constant == pytest.approx(C_FBP21, rel=1e-3)
    assert r.relative_error < 1e-3
    assert r.r_squared > 0.999


def test_inverse_mp_constant(inverse_mp):
    r = tauberian_estimate(inverse_mp)
    assert r.exponent == pytest.approx(0.5, abs=0.01)
    assert r.constant == pytest.approx(C_INV_MP, rel=1e-3)


def test_callable_input_matches_measure(fbp21):
    a = tauberian_estimate(fbp21, 0.5)
    b = tauberian_estimate(lambda z: psi(fbp21, z), 0.5)
    assert b.constant == pytest.approx(a.constant, rel=1e-12)
    assert math.isnan(b.predicted_constant)


@given(st.floats(0.05, 20.0))
def test_constant_scales_under_dilation(s):
    # D_s fbp(2, 1) has tail constant c sqrt(s)
    mu = pushforward(builtin_law("free_beta_prime", 2, 1), "dilate", s)
    r = tauberian_estimate(mu, 0.5, window=(1e3 * s, 1e7 * s))
    assert r.constant == pytest.approx(C_FBP21 * math.sqrt(s), rel=1e-3)


@pytest.mark.parametrize("alpha,tol", [(1.25, 1e-3), (1.5, 2e-3), (1.75, 3e-2)])
def test_stable_tail_round_trip(alpha, tol):
    mu = stable_tail_law(alpha)
    r = tauberian_estimate(mu)
    assert r.exponent == pytest.approx(alpha, abs=0.02)
    assert r.relative_error < tol


def test_stable_callable_needs_mean():
    mu = stable_tail_law(1.5)
    with pytest.raises(Exception):
        tauberian_estimate(lambda z: psi(mu, z), 1.5)
    r = tauberian_estimate(lambda z: psi(mu, z), 1.5, mean=1.0, predicted=mu.tail_descriptor().c)
    assert r.relative_error < 2e-3


def test_symmetric_route(fbp21):
    r = tauberian_estimate(symmetrize(fbp21), regime="symmetric")
    assert r.constant == pytest.approx(C_FBP21, rel=1e-4)
    assert r.regime.symmetric


def test_side_factor():
    assert psi_side_factor(0.5) == pytest.approx(math.pi / 2)
    assert psi_side_factor(1.5) < 0


def test_bad_fit_rejected():
    with pytest.raises(BadFit):
        TailReport(-0.1, 1.0, 1.0, Regime("positive_finite_var"), (1, 2), 0.0)
    # a compactly supported law has -psi(-1/t) ~ m1/t: exponent 1 and no tail
    r = tauberian_estimate(builtin_law("free_beta_prime", 2, 3), 1.0)
    assert r.exponent == pytest.approx(1.0, abs=1e-3)


def test_predictions_closed_form(crit_pair, gig_pair):
    e, c = predict_tail_positive(crit_pair)
    assert (e, c) == (0.5, pytest.approx(C_FBP21, rel=1e-12))
    e, c = predict_tail_positive(gig_pair)
    assert e == 0.5 and c == pytest.approx(C_INV_MP, rel=1e-9)


def test_symmetric_prediction():
    rho = JointLaw.symmetric_graph(builtin_law("free_beta_prime", 2, 3))
    e, c = predict_tail_symmetric(rho)
    # tau(B^2) = 2 and Var(A) = 1
    assert e == 1.0 and c == pytest.approx(2 / math.pi * math.sqrt(2.0))
    reg, _, _ = predict_tail(rho, "symmetric")
    assert reg.kind == "symmetric_finite_var"


def test_stable_prediction():
    S = stable_tail_law(1.5)
    rho = JointLaw.graph(S)
    reg = classify_regime(rho, symmetric=False)
    assert reg.kind == "positive_stable" and reg.alpha == 1.5
    e, c = predict_tail_positive(rho)
    a, cA = 1.5, S.tail_descriptor().c
    expect = math.sin(math.pi / a) / (math.pi / a) * (-math.sin(math.pi * a) / (math.pi * cA)) ** (1 / a)
    assert e == pytest.approx(2 / 3) and c == pytest.approx(expect)


def test_not_critical(sub_pair):
    with pytest.raises(NotCritical):
        predict_tail_positive(sub_pair)


def test_ambiguous_regime():
    # a t^-3 descriptor leaves Var(A) finite, so neither theorem is singled out
    from freeperp.measure import Tail
    S = builtin_law("free_beta_prime", 2, 3)
    rho = JointLaw.graph(S.relabel(asymptotic_tail=Tail(10.0, 0.1, 3.0, explicit=False)))
    with pytest.raises(AmbiguousRegime):
        classify_regime(rho, symmetric=False)


def test_verify_critical_fbp(crit_pair, fbp21):
    r = verify_critical_tail(PerpetuityProblem(crit_pair), fbp21)
    psi_c, delta_c = r.routes["psi"][1], r.routes["delta"][1]
    assert psi_c == pytest.approx(C_FBP21, rel=1e-2)
    assert delta_c == pytest.approx(psi_c, rel=3e-2)
    assert r.predicted_constant == pytest.approx(C_FBP21)


def test_critical_start_matches_prediction(gig_pair):
    mu = critical_start(PerpetuityProblem(gig_pair))
    assert mu.tail_descriptor().c == pytest.approx(C_INV_MP, rel=1e-9)
    r = tauberian_estimate(mu)
    assert r.constant == pytest.approx(C_INV_MP, rel=2e-3)
