import math

import numpy as np
import pytest

from freeperp.measure import InvalidParams, builtin_law, levy_distance
from freeperp.perpetuity import (NotIrreducible, PerpetuityProblem, Supercritical, affine_step,
                                 critical_start, moment_report, s_functional_residual,
                                 solve_perpetuity)
from freeperp.subordination import JointLaw
from freeperp.transforms import OutOfDomain, closed_form_s

Z_GRID = -np.linspace(0.02, 0.35, 10)



def test_point_pair_step_is_affine_image(mp1):
    Y = affine_step(mp1, JointLaw.point(0.5, 1.0))
    q = np.linspace(0.05, 0.95, 19)
    assert Y.quantile(q) == pytest.approx(0.5 * mp1.quantile(q) + 1.0, abs=1e-3)


def test_step_moments_from_freeness(mp1, sub_pair):
    # tau(Y) = tau(A) m1 + tau(B);
    # tau(Y^2) = tau(A^2) m1^2 + tau(A)^2 (m2 - m1^2) + 2 tau(AB) m1 + tau(B^2), with B = A here
    Y = affine_step(mp1, sub_pair)
    ta, ta2 = sub_pair.tau_a(), sub_pair.tau_a2()
    assert Y.moment(1) == pytest.approx(ta + sub_pair.tau_b(), rel=1e-4)
    assert Y.moment(2) == pytest.approx(ta2 + ta**2 * (2 - 1) + 2 * ta2 + ta2, rel=1e-4)


def test_fixed_point_invariance(fbp23, sub_pair):
    Y = affine_step(fbp23, sub_pair)
    assert levy_distance(Y, fbp23) < 1e-3
    assert s_functional_residual(Y, sub_pair.a_marginal(), Z_GRID) < 1e-4


def test_s_functional_closed_forms(fbp23):
    A = builtin_law("free_beta_prime", 2, 5)
    assert s_functional_residual(closed_form_s(fbp23), closed_form_s(A), Z_GRID) < 1e-13
    assert s_functional_residual(fbp23, A, Z_GRID) < 1e-10
    with pytest.raises(OutOfDomain):
        s_functional_residual(fbp23, A, [-0.5])
    # a wrong candidate is detected
    assert s_functional_residual(builtin_law("marchenko_pastur", 1.0), A, Z_GRID) > 1e-2


def test_criticality(sub_pair, crit_pair, gig_pair):
    assert PerpetuityProblem(sub_pair).criticality == "subcritical"
    assert PerpetuityProblem(sub_pair).tau_A == pytest.approx(0.5)
    assert PerpetuityProblem(crit_pair).criticality == "critical"
    assert PerpetuityProblem(gig_pair).criticality == "critical"
    sup = PerpetuityProblem(JointLaw.graph(builtin_law("free_beta_prime", 2, 2)))
    assert sup.criticality == "supercritical"
    with pytest.raises(Supercritical):
        solve_perpetuity(sup)


def test_reducible_and_degenerate():
    with pytest.raises(NotIrreducible):
        solve_perpetuity(PerpetuityProblem(JointLaw.point(0.5, 1.0)))
    with pytest.raises(InvalidParams):
        PerpetuityProblem(JointLaw.graph(builtin_law("free_beta_prime", 2, 5)), regime="symmetric")
    with pytest.raises(InvalidParams):
        PerpetuityProblem(JointLaw.grid([0.5], [1.0]), regime="sideways")


def test_critical_start(crit_pair, fbp21):
    mu = critical_start(PerpetuityProblem(crit_pair))
    # the predicted constant equals that of fbp(2, 1), so the start is fbp(2, 1) itself
    assert levy_distance(mu, fbp21) < 1e-9


def test_critical_fixed_point_step(crit_pair, fbp21):
    Y = affine_step(fbp21, crit_pair)
    assert levy_distance(Y, fbp21) < 2e-3
    assert Y.tail_descriptor().c == pytest.approx(2 * math.sqrt(2) / math.pi, rel=2e-2)


def test_moment_report(sub_pair, crit_pair, fbp23, fbp21):
    rep = moment_report(PerpetuityProblem(sub_pair), fbp23)
    assert rep.criticality == "subcritical"
    assert all(rep.finite.values()) and rep.series_bound_finite
    assert rep.moments[2] == pytest.approx(2.0)
    rep = moment_report(PerpetuityProblem(crit_pair), fbp21)
    assert rep.finite[1] is False and rep.moments[1] == math.inf
    assert rep.finite[0.25] and rep.moments[0.25] == pytest.approx(1.7960678075296618822, rel=1e-9)
    assert rep.tail.alpha == 0.5 and not rep.notes


def test_solver_short_run(sub_pair):
    # two steps from the law of B: the distance to fbp(2, 3) shrinks roughly by tau(A)
    seen = []
    with pytest.raises(Exception):
        solve_perpetuity(PerpetuityProblem(sub_pair), max_outer=2, callback=lambda k, d, mu: seen.append(mu))
    target = builtin_law("free_beta_prime", 2, 3)
    d = [levy_distance(mu, target) for mu in seen]
    assert d[1] < 0.6 * d[0]
