"""Free perpetuities ``X = A^{1/2} X A^{1/2} + B`` with ``X`` free from ``(A, B)``.

The one-step map ``mu_X -> law(A^{1/2} X A^{1/2} + B)`` is computed exactly
through subordination (Cauchy transform on a grid above the real axis) and a
Stieltjes inversion.  The perpetuity is its fixed point, reached by iterating
from the law of ``B`` until successive laws are close in Levy distance.

When the output has a ``t^-1/2`` tail the inversion runs on the law of
``1/Y``, whose Cauchy transform is ``1/v - G_Y(1/v)/v^2``; the fitted panel is
then read in the reciprocal chart, so no truncation of the tail is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measure import (Measure, MeasureError, InvalidParams, Panel, Tail, levy_distance)
from .subordination import JointLaw, solve_grid, NoConvergence
from .transforms import STransform, stieltjes_invert, OutOfDomain

__all__ = [
    "Supercritical", "NotIrreducible", "MassLeak", "NoConvergence", "PerpetuityProblem",
    "PerpetuityResult", "affine_step", "critical_start", "solve_perpetuity", "s_functional_residual",
    "MomentReport", "moment_report",
]


class Supercritical(MeasureError):
    pass


class NotIrreducible(MeasureError):
    pass


class MassLeak(MeasureError):
    pass


@dataclass
class PerpetuityProblem:
    rho: JointLaw
    regime: str = "positive"
    tau_A: float = field(init=False)
    criticality: str = field(init=False)
    tol: float = 1e-9

    def __post_init__(self):
        if self.regime not in ("positive", "symmetric"):
            raise InvalidParams(f"unknown regime {self.regime!r}")
        self.tau_A = self.rho.tau_a()
        if abs(self.tau_A - 1.0) <= self.tol:
            self.criticality = "critical"
        elif self.tau_A < 1.0:
            self.criticality = "subcritical"
        else:
            self.criticality = "supercritical"
        if self.regime == "positive" and not self.rho.b_nonnegative():
            raise InvalidParams("positive regime needs B >= 0")
        if self.regime == "symmetric" and not self.rho.is_symmetric_b():
            raise InvalidParams("symmetric regime needs (A, B) and (A, -B) equal in law")

    def check(self):
        if self.criticality == "supercritical":
            raise Supercritical(f"tau(A) = {self.tau_A:.6g} > 1: no perpetuity")
        if not self.rho.is_irreducible():
            raise NotIrreducible("A c + B = c has a constant solution")
        b = self.rho.b_marginal()
        if b.is_dirac and float(b.atom_x[0]) == 0.0:
            raise InvalidParams("B = 0")


# ---------------------------------------------------------------------------
# one step


def _cauchy_out(mu_x: Measure, rho: JointLaw):
    """Vectorised ``G`` of ``A^{1/2} X A^{1/2} + B`` on the upper half-plane."""
    state = {}

    def G(z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        f, _, _, _ = solve_grid(mu_x, rho, flat, tol=1e-11)
        g, _ = rho.integrals(flat, f)
        state["calls"] = state.get("calls", 0) + 1
        return np.asarray(g).reshape(z.shape)

    G.state = state
    return G


def _upper_bound(mu_x: Measure, rho: JointLaw) -> float:
    a_hi = rho.a_marginal().support()[1]
    b_hi = rho.b_marginal().support()[1]
    x_hi = max(abs(v) for v in mu_x.support())
    return a_hi * x_hi + b_hi


def _locate(density_probe, lo: float, hi: float, n: int = 241, floor: float = 1e-4):
    """Coarse support window from density samples on ``[lo, hi]``."""
    x = np.linspace(lo, hi, n)
    f = density_probe(x)
    on = np.flatnonzero(f > floor * f.max())
    if on.size == 0:
        return lo, hi
    h = x[1] - x[0]
    return max(lo, x[on[0]] - 3 * h), min(hi, x[on[-1]] + 3 * h)


def _bounded_step(G, lo: float, hi: float, points: int, support_kind, eps) -> Measure:
    def probe(x):
        return -G(x + 1j * 0.02 * (hi - lo)).imag / math.pi

    a, b = _locate(probe, lo, hi)
    x = np.linspace(a, b, points)
    return stieltjes_invert(G, x, eps_schedule=eps, support_kind=support_kind,
                            support_hint=(lo, math.inf) if support_kind == "nonnegative" else None)


def _reciprocal_step(G, y_lo: float, points: int, eps) -> Measure:
    """Invert the law of ``U = 1/Y`` on ``(0, 1/y_lo]`` and map it back."""

    def GU(v):
        v = np.asarray(v, dtype=complex)
        c = np.conj(1.0 / v)
        return 1.0 / v - np.conj(G(c)) / v**2

    u_hi = 1.0 / y_lo

    def probe(u):
        return -GU(u + 1j * 0.02 * u_hi).imag / math.pi

    _, b = _locate(probe, 0.0, u_hi * 1.02)
    u = np.linspace(0.0, b, points)[1:]
    # the tail of Y puts the left edge of U at 0
    law_u = stieltjes_invert(GU, u, eps_schedule=eps, support_kind="nonnegative",
                             support_hint=(0.0, math.inf), left_edge=0.0)
    if law_u.atoms.size:
        raise MassLeak("atoms found in the reciprocal chart")
    panels = [Panel(p.a, p.b, p.coef, recip=True) for p in law_u.panels]
    out = Measure.build([], panels, support_kind="nonnegative")
    return out.with_meta(**law_u.meta)


def affine_step(mu_x: Measure, rho: JointLaw, points: int = 401,
                eps=(1e-2, 5e-3, 2.5e-3), chart: str = "auto") -> Measure:
    """Law of ``A^{1/2} X A^{1/2} + B`` for ``X`` with law ``mu_x``, free from ``(A, B)``."""
    if mu_x.is_dirac and float(mu_x.atom_x[0]) == 0.0:
        return rho.b_marginal()
    positive = rho.b_nonnegative() and mu_x.support()[0] >= 0
    if not positive and not (rho.is_symmetric_b() and mu_x.support_kind == "symmetric"):
        raise InvalidParams("inputs must be both nonnegative or both symmetric")
    G = _cauchy_out(mu_x, rho)
    hi = _upper_bound(mu_x, rho)
    if chart == "auto":
        chart = "reciprocal" if positive and not math.isfinite(hi) else "linear"
    if chart == "reciprocal":
        y_lo = rho.b_marginal().support()[0] + rho.a_marginal().support()[0] * mu_x.support()[0]
        if not y_lo > 0:
            raise InvalidParams("reciprocal chart needs an output bounded away from 0")
        return _reciprocal_step(G, y_lo, points, eps)
    if not math.isfinite(hi):
        raise InvalidParams("unbounded symmetric outputs are not supported; use the matrix oracle")
    if positive:
        lo = rho.b_marginal().support()[0]
        out = _bounded_step(G, lo, hi, points, "nonnegative", eps)
        neg = float(out.cdf(np.array([-1e-300]))[0]) if out.support()[0] < 0 else 0.0
        if neg > 1e-4:
            raise MassLeak(f"mass {neg:.3g} on the negative axis")
        return out
    out = _bounded_step(G, -hi, hi, points, "symmetric", eps)
    return out


# ---------------------------------------------------------------------------
# fixed point


@dataclass
class PerpetuityResult:
    law: Measure
    iterations: int
    levy_steps: list
    converged: bool
    tail: Tail | None = None
    trace: list = field(default_factory=list)


def _tail_of(mu: Measure) -> Tail | None:
    try:
        return mu.tail_descriptor()
    except MeasureError:
        return None


def critical_start(problem: PerpetuityProblem) -> Measure:
    """Starting law for a critical positive problem: a dilated ``fbp(2, 1)``
    whose ``t^-1/2`` tail constant equals the predicted one.

    With ``tau(A) = 1`` one step of the map keeps the ``t^-1/2`` tail constant
    of its input, so iterates started from a compactly supported law never
    acquire the right tail and approach the fixed point only like ``1/k``.
    """
    from .measure import builtin_law, pushforward
    from .tails import predict_tail

    _, exponent, const = predict_tail(problem.rho, problem.regime)
    if exponent != 0.5:
        raise InvalidParams("matched start only for the finite-variance positive case")
    base = builtin_law("free_beta_prime", 2.0, 1.0)
    c0 = 2.0 * math.sqrt(2.0) / math.pi
    return pushforward(base, "dilate", (const / c0) ** 2)


def solve_perpetuity(problem: PerpetuityProblem, init: Measure | None = None, levy_tol: float = 1e-4,
                     max_outer: int = 200, callback=None, **step_kw) -> PerpetuityResult:
    """Iterate :func:`affine_step` until successive laws are ``levy_tol``-close.

    The default start is the law of ``B``; critical positive problems with
    finite ``Var(A)`` start from :func:`critical_start` instead.  When the
    iterates carry a power tail, its constant must also be stable (relative
    spread below 1e-3 over the last 5 steps).
    """
    problem.check()
    rho = problem.rho
    if init is None:
        critical = problem.criticality == "critical" and problem.regime == "positive"
        init = critical_start(problem) if critical else rho.b_marginal()
    mu = init
    steps, trace, consts = [], [], []
    for k in range(1, max_outer + 1):
        nxt = affine_step(mu, rho, **step_kw)
        d = levy_distance(mu, nxt)
        tail = _tail_of(nxt)
        steps.append(d)
        trace.append((k, d, tail.alpha if tail else math.nan, tail.c if tail else math.nan))
        if callback is not None:
            callback(k, d, nxt)
        mu = nxt
        consts.append(tail.c if tail else None)
        recent = consts[-5:]
        if all(c is None for c in recent):
            settled = True
        else:
            ok = len(recent) == 5 and all(c is not None for c in recent)
            settled = ok and (max(recent) - min(recent)) <= 1e-3 * recent[-1]
        if d < levy_tol and settled:
            return PerpetuityResult(mu, k, steps, True, _tail_of(mu), trace)
    raise NoConvergence(f"no Levy convergence after {max_outer} steps (last step {steps[-1]:.3g})")


# ---------------------------------------------------------------------------
# checks


def s_functional_residual(S_x, S_a, z_grid) -> float:
    """Largest relative defect of ``(1 + S_X(z)) S_X(w) = S_A(w) S_X(z)``, ``w = z (1 + S_X(z))``.

    ``S_x`` and ``S_a`` are measures or callables (e.g. closed forms).
    """
    sx = S_x if callable(S_x) and not isinstance(S_x, Measure) else STransform.of(S_x)
    sa = S_a if callable(S_a) and not isinstance(S_a, Measure) else STransform.of(S_a)
    worst = 0.0
    for z in np.atleast_1d(np.asarray(z_grid, dtype=float)):
        s = float(sx(z))
        w = z * (1.0 + s)
        if not -1.0 < w < 0.0:
            raise OutOfDomain(f"z (1 + S_X(z)) = {w} leaves (-1, 0)")
        lhs = (1.0 + s) * float(sx(w))
        rhs = float(sa(w)) * s
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return worst


@dataclass
class MomentReport:
    criticality: str
    moments: dict
    finite: dict
    series_bound_finite: bool | None
    tail: Tail | None
    notes: list = field(default_factory=list)


def moment_report(problem: PerpetuityProblem, solution: Measure, orders=(1, 2, 3, 4),
                  fractional=(0.25,)) -> MomentReport:
    """Moments of the solution against what the model parameters allow."""
    rho = problem.rho
    moments, finite, notes = {}, {}, []
    tail = _tail_of(solution)
    if problem.criticality == "subcritical":
        a_m = rho.a_marginal()
        b_m = rho.b_marginal()
        for p in orders:
            ok = math.isfinite(a_m.moment(p)) and math.isfinite(b_m.abs_moment(p))
            finite[p] = ok
            if ok:
                moments[p] = solution.moment(p) if solution.support_kind != "general" else math.nan
        # sum_n n^(1 - 1/p) tau(A)^n converges for tau(A) < 1
        t = problem.tau_A
        bound = all(math.isfinite(sum(n ** (1 - 1 / p) * t**n for n in range(1, 2000))) for p in orders)
        return MomentReport(problem.criticality, moments, finite, bound, tail, notes)
    # critical: no mean, fractional moments below the tail index
    index = tail.alpha if tail is not None else 0.5
    if tail is None:
        notes.append("no tail descriptor on the solution; index 1/2 assumed")
    finite[1] = False
    moments[1] = math.inf
    if index > 1:
        notes.append(f"tail index {index} exceeds 1 for a critical problem")
    for g in fractional:
        finite[g] = g < index
        moments[g] = solution.moment(g) if g < index else math.inf
    return MomentReport(problem.criticality, moments, finite, None, tail, notes)
