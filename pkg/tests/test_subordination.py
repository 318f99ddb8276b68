import numpy as np
import pytest
from hypothesis import given, strategies as st

from freeperp.measure import InvalidParams, builtin_law, symmetrize
from freeperp.subordination import (JointLaw, NoConvergence, cauchy_affine, delta_monotonicity_check,
                                    fbp_delta, fz_map, kernel_K, psi_affine, solve_grid,
                                    solve_subordination)
from freeperp.transforms import cauchy


@pytest.mark.parametrize("z", [-1.0, -10.0, -100.0, -0.01])
def test_delta_matches_fbp_formula(fbp23, sub_pair, z):
    p = solve_subordination(fbp23, sub_pair, z)
    assert abs(p.delta.imag) < 1e-12
    assert p.delta.real == pytest.approx(float(fbp_delta(2, 3, z)), abs=1e-8)
    assert p.consistency < 1e-9
    assert p.residual < 1e-11


def test_fixed_point_of_map(fbp23, sub_pair):
    z = 0.7 + 0.4j
    p = solve_subordination(fbp23, sub_pair, z)
    f, sf = fz_map(fbp23, sub_pair, z, p.f, p.sf)
    assert f == pytest.approx(p.f, rel=1e-10)
    assert sf == pytest.approx(p.sf, rel=1e-10)
    assert p.f.imag > 0 and p.sf.imag > 0


@given(st.floats(0.2, 3.0), st.floats(-2.0, 2.0), st.floats(-3.0, 5.0), st.floats(0.05, 4.0))
def test_point_pair_is_affine_image(a, b, x, y):
    # A = a, B = b: the output law is a X + b
    mu = builtin_law("free_beta_prime", 2, 3)
    rho = JointLaw.point(a, b)
    z = complex(x, y)
    assert cauchy_affine(mu, rho, z) == pytest.approx(cauchy(mu, (z - b) / a) / a, rel=1e-8)


def test_kernel_point_law():
    rho = JointLaw.point(2.0, 0.5)
    z, w = 1 + 1j, 0.3 - 0.2j
    assert kernel_K(rho, z, w) == pytest.approx(2.0 / (z - 0.5 + w * 2.0))


def test_perpetuity_is_fixed_by_cauchy(fbp23, sub_pair):
    z = np.array([-5.0 + 0j, 1.0 + 0.5j, 3.0 + 2j, 10j])
    assert cauchy_affine(fbp23, sub_pair, z) == pytest.approx(cauchy(fbp23, z), rel=1e-8)
    assert psi_affine(fbp23, sub_pair, z) == pytest.approx(z * cauchy(fbp23, z) - 1, rel=1e-8)


def test_grid_agrees_with_pointwise(fbp23, sub_pair):
    z = np.array([-3.0, -0.5, 0.5 + 1j, 2 + 0.01j], dtype=complex)
    f, sf, res, _ = solve_grid(fbp23, sub_pair, z)
    assert np.all(res < 1e-11)
    for k, zk in enumerate(z):
        p = solve_subordination(fbp23, sub_pair, zk)
        assert f[k] == pytest.approx(p.f, rel=1e-9, abs=1e-12)
        assert sf[k] == pytest.approx(p.sf, rel=1e-9, abs=1e-12)


def test_behaviour_at_infinity(fbp23, sub_pair):
    y = 1e4
    p = solve_subordination(fbp23, sub_pair, 1j * y)
    # f(iy)/iy -> 0 and sf(iy)/iy -> 1/tau(A) for the kernel a/(z - b + w a)
    assert abs(p.f / (1j * y)) < 1e-3
    assert (p.sf / (1j * y)).real == pytest.approx(1 / sub_pair.tau_a(), rel=1e-2)
    assert p.f == pytest.approx(-fbp23.mean(), abs=1e-3)


def test_monotonicity_positive(fbp23, sub_pair):
    rep = delta_monotonicity_check(fbp23, sub_pair)
    assert rep.ok, rep.notes
    assert rep.limit_value.real == pytest.approx(-1.0, abs=1e-3)


def test_symmetric_delta_closed_form():
    # A = a, B = 0, X semicircular: f(it) = -G_X(it/a) = i (sqrt(y^2 + 4) - y)/2, y = t/a
    rep = delta_monotonicity_check(builtin_law("semicircle"), JointLaw.point(0.5, 0.0), "symmetric")
    y = rep.grid / 0.5
    assert rep.delta == pytest.approx((np.sqrt(y * y + 4) - y) / 2, abs=1e-10)
    assert rep.ok


def test_symmetric_delta_positive_not_always_monotone():
    # with B = +-1 the profile rises then falls; the report flags it
    X = symmetrize(builtin_law("marchenko_pastur", 1.0))
    rep = delta_monotonicity_check(X, JointLaw.grid([0.5, 0.5], [1.0, -1.0]), "symmetric")
    assert rep.positive
    assert not rep.monotone and not rep.ok
    k = int(np.argmax(rep.delta))
    assert 0 < k < rep.delta.size - 1


def test_bad_regime(fbp23, sub_pair):
    with pytest.raises(ValueError):
        delta_monotonicity_check(fbp23, sub_pair, "sideways")


def test_joint_law_moments():
    S = builtin_law("free_gig", -1.0)
    rho = JointLaw.graph(S, power=2)
    assert rho.tau_a() == pytest.approx(S.moment(2))
    assert rho.tau_b() == pytest.approx(S.moment(1))
    assert rho.tau_a() == pytest.approx(1.0, abs=1e-9)
    sym = JointLaw.symmetric_graph(S, power=2)
    assert sym.tau_b() == pytest.approx(0.0, abs=1e-14)
    assert sym.is_symmetric_b() and not rho.is_symmetric_b()
    assert rho.b_nonnegative()


def test_joint_law_weights():
    from freeperp.subordination import GraphComponent
    with pytest.raises(InvalidParams):
        JointLaw((GraphComponent(0.5, builtin_law("point", 1.0)),))


def test_joint_law_roundtrip(sub_pair):
    back = JointLaw.from_dict(sub_pair.to_dict())
    assert back.tau_a() == pytest.approx(sub_pair.tau_a())
    assert back.var_a() == pytest.approx(sub_pair.var_a())


def test_iteration_budget(fbp23, sub_pair):
    with pytest.raises(NoConvergence):
        solve_grid(fbp23, sub_pair, np.array([0.5 + 1j]), tol=1e-30, max_iter=3)
