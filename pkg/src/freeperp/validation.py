"""Fast invariant suite behind ``freeperp validate``.

Each check returns ``(name, passed, detail)``; groups keep the run short
enough for routine use.
"""

from __future__ import annotations

import math

import numpy as np

from .measure import MeasureError, builtin_law, levy_distance, symmetrize

__all__ = ["GROUPS", "run_checks"]


def _comb():
    from .nc_comb import abel_identity, catalan, enumerate_nc, kreweras

    cat = all(len(enumerate_nc(p)) == catalan(p) for p in range(1, 11))
    yield "catalan counts p <= 10", cat, ""
    kr = all(len(pi.blocks) + len(kreweras(pi).blocks) == p + 1
             for p in range(1, 9) for pi in enumerate_nc(p))
    yield "kreweras block count p <= 8", kr, ""
    ab = all(l == r for l, r in (abel_identity(p) for p in range(2, 21)))
    yield "abel identity 2 <= p <= 20", ab, "exact rationals"


def _measures():
    laws = [builtin_law("marchenko_pastur", 1.0), builtin_law("free_beta_prime", 2, 3),
            builtin_law("free_beta_prime", 2, 1), builtin_law("inverse_mp"),
            builtin_law("free_gig", -1.0), symmetrize(builtin_law("free_beta_prime", 2, 3))]
    for mu in laws:
        name = mu.label["name"] if mu.label else "symmetrized free_beta_prime"
        bad = mu.validate()
        yield f"measure invariants: {name}", not bad, "; ".join(bad)
    mp = builtin_law("marchenko_pastur", 1.0)
    m = [mp.moment(p) for p in (1, 2, 3, 4)]
    err = max(abs(a - b) for a, b in zip(m, (1, 2, 5, 14)))
    yield "MP(1) moments are Catalan numbers", err < 1e-10, f"max error {err:.1e}"


def _moments():
    from .nc_comb import mult_power_cumulants

    worst = 0.0
    for mu in (builtin_law("marchenko_pastur", 1.0), builtin_law("free_beta_prime", 2, 3)):
        m1, var = mu.moment(1), mu.variance()
        for n in range(1, 9):
            k2 = float(mult_power_cumulants(mu, n, 2)[1])
            worst = max(worst, abs(k2 - n * var * m1 ** (2 * (n - 1))))
    yield "second cumulant of powers", worst < 1e-10, f"max error {worst:.1e}"


def _transforms():
    from .transforms import chi, psi

    a, b = 2.0, 3.0
    mu = builtin_law("free_beta_prime", a, b)
    w = -np.geomspace(1e-3, 0.999, 50)
    exact = w * (b - 1 - w) / ((1 + w) * (w + a))
    err = float(np.max(np.abs(chi(mu, w) - exact) / np.abs(exact)))
    yield "chi of free beta prime", err < 1e-9, f"max rel. error {err:.1e}"
    z = -np.geomspace(1e-2, 1e2, 25)
    back = float(np.max(np.abs(chi(mu, psi(mu, z)) - z) / np.abs(z)))
    yield "chi inverts psi", back < 1e-9, f"max rel. error {back:.1e}"


def _subordination():
    from .subordination import JointLaw, fbp_delta, solve_subordination

    rho = JointLaw.graph(builtin_law("free_beta_prime", 2, 5))
    x = builtin_law("free_beta_prime", 2, 3)
    errs, cons = [], []
    for z in (-1.0, -10.0, -100.0):
        p = solve_subordination(x, rho, z)
        errs.append(abs(p.delta.real - float(fbp_delta(2, 3, z))))
        cons.append(p.consistency)
    yield "delta of the free beta prime example", max(errs) < 1e-6, f"max error {max(errs):.1e}"
    yield "subordination consistency", max(cons) < 1e-9, f"max residual {max(cons):.1e}"


def _tails():
    from .subordination import JointLaw
    from .tails import predict_tail_positive, tauberian_estimate

    r = tauberian_estimate(builtin_law("free_beta_prime", 2, 1), 0.5)
    c0 = 2 * math.sqrt(2) / math.pi
    yield "tauberian constant, free beta prime", abs(r.constant - c0) < 0.01 * c0, f"{r.constant:.6f}"
    r = tauberian_estimate(builtin_law("inverse_mp"), 0.5)
    yield "tauberian constant, inverse MP", abs(r.constant - 2 / math.pi) < 0.01 * 2 / math.pi, f"{r.constant:.6f}"
    _, c = predict_tail_positive(JointLaw.graph(builtin_law("free_beta_prime", 2, 3)))
    yield "predicted constant, free beta prime pair", abs(c - c0) < 1e-12, f"{c:.12f}"
    _, c = predict_tail_positive(JointLaw.graph(builtin_law("free_gig", -1.0), power=2))
    yield "predicted constant, inverse MP pair", abs(c - 2 / math.pi) < 1e-9, f"{c:.12f}"


def _perpetuity():
    from .perpetuity import affine_step
    from .subordination import JointLaw

    x = builtin_law("free_beta_prime", 2, 3)
    out = affine_step(x, JointLaw.graph(builtin_law("free_beta_prime", 2, 5)))
    d = levy_distance(out, x)
    yield "fixed point is invariant under one step", d < 1e-3, f"Levy {d:.1e}"


GROUPS = {
    "comb": _comb,
    "measures": _measures,
    "moments": _moments,
    "transforms": _transforms,
    "subordination": _subordination,
    "tails": _tails,
    "perpetuity": _perpetuity,
}


def run_checks(group: str = "all") -> list[tuple[str, bool, str]]:
    if group != "all" and group not in GROUPS:
        raise ValueError(f"unknown group {group!r}; choose from all, {', '.join(GROUPS)}")
    names = list(GROUPS) if group == "all" else [group]
    rows = []
    for g in names:
        try:
            rows.extend(GROUPS[g]())
        except MeasureError as exc:
            rows.append((g, False, f"{type(exc).__name__}: {exc}"))
    return rows
