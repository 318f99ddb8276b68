"""Quantities attached to the free multiplicative powers ``mu^{boxtimes n}``.

Fractional moments come from the S-transform through

    m_gamma = sin(pi gamma)/(pi gamma) * int_0^{1-delta} ((1-t)/t * S(-t)^{-n})^gamma dt

and integer moments from free cumulants.  The remaining helpers build the
limit law of ``Pi_n^{1/n}``, the mean of the Cauchy-Stieltjes tilt and the
rescaled sums whose S-transforms converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate as _integrate

from . import _cheb
from .measure import Measure, MeasureError, Panel, InvalidParams
from .nc_comb import cumulants_to_moments, mult_power_cumulants
from .transforms import STransform, chi, DomainShrunk

__all__ = [
    "DivergedQuadrature", "WrongTailClass", "OracleUnavailable", "MomentAsymptotics",
    "fractional_moment_power", "log_window_moment", "stable_tail_moment_power",
    "integer_moment_power", "integer_moment_limit", "fractional_moment_limit",
    "stable_moment_limit", "lln_limit", "tilted_mean", "tilted_mean_variance_form",
    "edge_growth", "sy_limit", "eta", "eta_alpha", "integer_moment_trend", "lln_quantile",
]


class DivergedQuadrature(MeasureError):
    pass


class WrongTailClass(MeasureError):
    pass


class OracleUnavailable(MeasureError):
    pass


@dataclass
class MomentAsymptotics:
    """Limit constants for ``mu^{boxtimes n}`` with the measured scaled values."""

    eta: float
    eta_alpha: float
    alpha: float
    c: float
    predicted: float
    trend: list = field(default_factory=list)

    def relative_errors(self) -> list:
        return [(n, abs(v - self.predicted) / abs(self.predicted)) for n, v in self.trend]


def _require_positive(mu: Measure):
    if mu.support()[0] < 0:
        raise InvalidParams("need a law on [0, inf)")
    delta = mu.atom_mass_at(0.0)
    if delta >= 1:
        raise InvalidParams("law is the point mass at 0")
    return delta


def eta(mu: Measure) -> float:
    """``Var(mu)/m1(mu)^2`` (``inf`` for an infinite second moment)."""
    m1 = mu.moment(1)
    m2 = mu.moment(2)
    if not math.isfinite(m2):
        return math.inf
    return (m2 - m1 * m1) / (m1 * m1)


def eta_alpha(c: float, alpha: float, m1: float = 1.0) -> float:
    """Coefficient of ``(-z)^(alpha-1)`` in ``m1 S(z) - 1`` for a tail ``c t^-alpha``.

    Positive for ``alpha`` in (1, 2): ``S`` decreases on its domain, so it
    exceeds ``1/m1`` to the left of 0.
    """
    if not 1 < alpha < 2:
        raise WrongTailClass("alpha must lie in (1, 2)")
    return -c * math.pi * alpha / (math.sin(math.pi * alpha) * m1**alpha)


# ---------------------------------------------------------------------------
# fractional moments


def _log_integrand_t(S, n, gamma):
    def f(t):
        s = float(S(-t))
        return gamma * (math.log1p(-t) - math.log(t) - n * math.log(s))
    return f


def _quad_t(S, n: int, gamma: float, delta: float, rtol: float, var_hint: float):
    top = 1.0 - delta
    logf = _log_integrand_t(S, n, gamma)

    # t = top sin^2(pi v/2) behaves like v^2 at both ends, which smooths the
    # t^-gamma singularity at 0 and the (1 - t)^gamma edge at the top
    def integrand(v):
        if v <= 0.0 or v >= 1.0:
            return 0.0
        th = 0.5 * math.pi * v
        t = top * math.sin(th) ** 2
        return math.exp(logf(t)) * top * math.pi * math.sin(th) * math.cos(th)

    # the mass of the integrand sits near t ~ 1/(n var)
    scale = 1.0 / (n * max(var_hint, 1e-12))
    pts = sorted({2.0 / math.pi * math.asin(math.sqrt(min(k * scale / top, 0.98)))
                  for k in (0.01, 0.1, 1.0, 10.0, 100.0)})
    val, err = _integrate.quad(integrand, 0.0, 1.0, points=pts, epsrel=rtol,
                               epsabs=0.0, limit=400)
    return val, err


def _quad_y(mu: Measure, n: int, gamma: float, rtol: float, var_hint: float):
    """The same integral in ``y = -chi(-t)``: ``t = -psi(-y)``, ``dt = psi'(-y) dy``."""

    def parts(y):
        w = np.array([-1.0 / y + 0j])
        t = float(-mu.resolvent(w, 1).real[0])
        kappa = float(-mu.resolvent(w, 0).real[0] / y)
        h = 1e-20 * y
        dpsi = float(mu.resolvent(np.array([1.0 / (-y + 1j * h)]), 1).imag[0] / h)
        return t, kappa, dpsi

    def integrand(s):
        y = math.exp(s)
        t, kappa, dpsi = parts(y)
        if t <= 0 or kappa <= 0 or dpsi <= 0:
            return 0.0
        # ((1-t)/t)^(gamma (1-n)) y^(-n gamma)
        lg = gamma * ((1 - n) * (math.log(kappa) - math.log(t)) - n * s)
        return math.exp(lg) * dpsi * y

    centre = -math.log(n * max(var_hint, 1e-12))
    pts = [centre + k for k in (-8.0, -3.0, 0.0, 3.0, 8.0)]
    # near y = 0 the integrand decays only like y^(1 - gamma) in ds
    lo, hi = max(min(pts) - 40.0 / (1.0 - gamma), -150.0), max(pts) + 40.0
    val, err = _integrate.quad(integrand, lo, hi, points=pts, epsrel=rtol, epsabs=0.0, limit=400)
    # what is left below lo is a pure exponential e^((1-gamma) s)
    return val + integrand(lo) / (1.0 - gamma), err


def fractional_moment_power(mu: Measure, n: int, gamma: float, rtol: float = 1e-8,
                            route: str = "s", closed_form: bool = False) -> float:
    """``m_gamma(mu^{boxtimes n})`` for ``gamma`` in (0, 1).

    ``route="s"`` integrates the S-transform formula in ``t = (1 - delta) sin^2(pi v/2)``;
    ``route="psi"`` integrates the same quantity in the variable ``y = -chi(-t)``
    where everything is an explicit resolvent.
    """
    if not 0 < gamma < 1:
        raise InvalidParams("gamma must lie in (0, 1)")
    if n < 1:
        raise InvalidParams("n must be positive")
    delta = _require_positive(mu)
    pre = math.sin(math.pi * gamma) / (math.pi * gamma)
    if mu.is_dirac:
        c = float(mu.atom_x[0])
        return c ** (gamma * n)
    m1 = mu.moment(1)
    v = eta(mu) if math.isfinite(m1) else math.inf
    var_hint = v if math.isfinite(v) else 1.0
    # integrate the law rescaled to unit mean; undo with m1^(gamma n)
    if math.isfinite(m1):
        scale_back = gamma * n * math.log(m1)
    else:
        scale_back, m1 = 0.0, 1.0
    if route == "s":
        S = STransform.of(mu, closed_form=closed_form)
        Sn = S.dilation(1.0 / m1)
        val, err = _quad_t(Sn, n, gamma, delta, rtol, var_hint)
    elif route == "psi":
        from .measure import pushforward
        nu = mu if m1 == 1.0 else pushforward(mu, "dilate", 1.0 / m1)
        val, err = _quad_y(nu, n, gamma, rtol, var_hint)
    else:
        raise ValueError(f"unknown route {route!r}")
    if not (math.isfinite(val) and val > 0) or err > max(1e3 * rtol * abs(val), 1e-14):
        raise DivergedQuadrature(f"quadrature did not settle (value {val}, error {err})")
    return pre * val * math.exp(scale_back)


def fractional_moment_limit(var: float, gamma: float) -> float:
    """``lim n^(1-gamma) m_gamma`` for a unit-mean law of variance ``var``."""
    return (var * gamma) ** (gamma - 1) / math.gamma(1 + gamma)


def log_window_moment(mu: Measure, n: int, **kw) -> float:
    """``m_{1/log n}(mu^{boxtimes n})``; ``(n/log n)`` times it tends to ``e/Var``."""
    if n < 3:
        raise InvalidParams("n must be at least 3")
    return fractional_moment_power(mu, n, 1.0 / math.log(n), **kw)


def stable_moment_limit(c: float, alpha: float, gamma: float) -> float:
    """``lim n^((1-gamma)/(alpha-1)) m_gamma`` for a unit-mean law with tail ``c t^-alpha``.

    Near 0 the integrand behaves like ``t^-gamma exp(-n gamma eta_alpha t^(alpha-1))``,
    which integrates to the value below.
    """
    if not 1 < alpha < 2:
        raise WrongTailClass("alpha must lie in (1, 2)")
    e = eta_alpha(c, alpha)
    k = (1 - gamma) / (alpha - 1)
    return (math.sin(math.pi * gamma) / (math.pi * gamma) * math.gamma(k) / (alpha - 1)
            * (gamma * e) ** (-k))


def stable_tail_moment_power(mu: Measure, n, gamma: float, **kw) -> MomentAsymptotics:
    """Scaled values ``n^((1-gamma)/(alpha-1)) m_gamma(mu^{boxtimes n}) / m1^(gamma n)``."""
    desc = mu.tail_descriptor()
    if desc is None or not 1 < desc.alpha < 2:
        raise WrongTailClass("law has no power tail with index in (1, 2)")
    m1 = mu.moment(1)
    alpha = desc.alpha
    c = desc.c / m1**alpha   # tail constant of the unit-mean rescaling
    ns = [int(n)] if np.ndim(n) == 0 else [int(k) for k in n]
    k = (1 - gamma) / (alpha - 1)
    trend = []
    for m in ns:
        val = fractional_moment_power(mu, m, gamma, **kw) / m1 ** (gamma * m)
        trend.append((m, m**k * val))
    return MomentAsymptotics(eta=math.inf, eta_alpha=eta_alpha(desc.c, alpha, m1), alpha=alpha,
                             c=desc.c, predicted=stable_moment_limit(c, alpha, gamma), trend=trend)


# ---------------------------------------------------------------------------
# integer moments


def integer_moment_power(mu, n: int, p: int) -> float:
    """Exact ``m_p(mu^{boxtimes n})`` from the free cumulants of the power."""
    if p < 1:
        raise InvalidParams("p must be positive")
    kappa = mult_power_cumulants(mu, n, p)
    return cumulants_to_moments(kappa)[p - 1]


def integer_moment_limit(eta_: float, p: int) -> float:
    """``lim n^(1-p) m_p / m1^(n p) = (eta p)^(p-1)/p!``."""
    return (eta_ * p) ** (p - 1) / math.factorial(p)


def integer_moment_trend(mu: Measure, ns: Sequence[int], p: int) -> MomentAsymptotics:
    m1 = mu.moment(1)
    e = eta(mu)
    trend = [(n, integer_moment_power(mu, n, p) / (n ** (p - 1) * m1 ** (n * p))) for n in ns]
    return MomentAsymptotics(eta=e, eta_alpha=math.nan, alpha=math.nan, c=math.nan,
                             predicted=integer_moment_limit(e, p), trend=trend)


# ---------------------------------------------------------------------------
# law of large numbers


def _psi_parts(mu: Measure, z):
    """``psi(z)``, ``1 + psi(z)`` and ``psi'(z)`` for ``z < 0`` without cancellation."""
    z = np.asarray(z, dtype=float)
    w = 1.0 / z + 0j
    p = mu.resolvent(w, 1).real
    one_plus = mu.resolvent(w, 0).real / z      # int 1/(1 - z x)
    h = 1e-20 * np.abs(z)
    dp = mu.resolvent(1.0 / (z + 1j * h), 1).imag / h
    return p, one_plus, dp


def _lln_x(mu: Measure, z):
    p, q, _ = _psi_parts(mu, z)
    return p / (z * q)


def _lln_point(mu: Measure, z):
    """Point ``x(z)`` of the limit law, its CDF ``1 + psi(z)`` and density."""
    p, q, dp = _psi_parts(mu, z)
    x = p / (z * q)
    dens = dp * z * z * q * q / (z * dp - p * q)
    return x, q, dens


def _inverse_mean_edge(mu: Measure, delta: float) -> float:
    if delta > 0:
        return 0.0
    lo = mu.support()[0]
    if lo > 0:
        return 1.0 / mu.integrate(lambda x: 1.0 / x)
    for p in mu.panels:
        if not p.recip and p.a == 0.0 and p.sign > 0 and p.g_at_lower_edge() > 1e-14:
            return 0.0
    val = mu.integrate(lambda x: 1.0 / x if x > 0 else 0.0)
    return 1.0 / val if math.isfinite(val) and val > 0 else 0.0


def lln_limit(mu: Measure, nodes: int = 513) -> Measure:
    """Law ``nu`` of ``lim Pi_n^(1/n)``: ``nu({0}) = delta`` and quantile ``t -> 1/S(t - 1)``.

    With ``z = chi(t - 1)`` the quantile is ``x(z) = psi(z)/(z (1 + psi(z)))``,
    so the density is obtained in closed form along ``z`` and fitted on a
    single panel over ``[1/m_{-1}, m_1]``.
    """
    delta = _require_positive(mu)
    if mu.is_dirac:
        return Measure.point(float(mu.atom_x[0])).relabel(support_kind="nonnegative")
    m1 = mu.moment(1)
    if not math.isfinite(m1):
        raise InvalidParams("the limit law is provided for laws with a finite mean")
    lo = _inverse_mean_edge(mu, delta)
    hi = m1

    t = _cheb.first_kind_nodes(nodes)
    xs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
    # x(z) runs from m1 (z -> 0) down to lo (z -> -inf); bisect in s = log(-z)
    # for all nodes at once
    sa = np.full(xs.shape, -30.0)
    sb = np.full(xs.shape, 30.0)
    for _ in range(8):
        bad = _lln_x(mu, -np.exp(sa)) < xs
        if not bad.any():
            break
        sa[bad] -= 30.0
    for _ in range(8):
        bad = _lln_x(mu, -np.exp(sb)) > xs
        if not bad.any():
            break
        sb[bad] += 30.0
    for _ in range(64):
        sm = 0.5 * (sa + sb)
        above = _lln_x(mu, -np.exp(sm)) > xs
        sa = np.where(above, sm, sa)
        sb = np.where(above, sb, sm)
    vals = _lln_point(mu, -np.exp(0.5 * (sa + sb)))[2]
    pan = Panel.from_values(vals, lo, hi)
    # the density need not vanish at the edges, so the series converges
    # slowly there; the small mass defect is removed and recorded
    raw = pan.mass
    pan = pan.with_coef(pan.coef * ((1.0 - delta) / raw))
    atoms = [(0.0, delta)] if delta > 0 else []
    nu = Measure.build(atoms, [pan], support_kind="nonnegative")
    return nu.with_meta(renormalization=float((1.0 - delta) / raw))


def lln_quantile(mu: Measure, t):
    """``t -> 1/S(t - 1)`` on ``(delta, 1)`` (0 below ``delta``)."""
    delta = _require_positive(mu)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    inside = (t > delta) & (t < 1)
    if mu.is_dirac:
        out[inside] = float(mu.atom_x[0])
        return out
    w = t[inside] - 1.0
    z = chi(mu, w)
    out[inside] = w / ((w + 1.0) * z)
    out[t >= 1] = mu.moment(1)
    return out


# ---------------------------------------------------------------------------
# Cauchy-Stieltjes tilt


def tilted_mean(mu: Measure, y):
    """Mean of ``mu_y(dx) proportional to dmu(x)/(1 + y x)``: ``(1 - kappa)/(y kappa)``."""
    y = np.asarray(y, dtype=float)
    yy = np.atleast_1d(y)
    if np.any(yy <= 0):
        raise InvalidParams("y must be positive")
    w = -1.0 / yy + 0j
    one_minus = -mu.resolvent(w, 1).real        # -psi(-y) = int x y/(1 + x y)
    kappa = -mu.resolvent(w, 0).real / yy        # int 1/(1 + x y)
    out = one_minus / (yy * kappa)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def tilted_mean_variance_form(mu: Measure, y: float) -> float:
    """``m1 - y/(1 + y m1) * int (x - m1)^2 dmu_y`` computed by direct quadrature."""
    m1 = mu.moment(1)
    kappa = mu.integrate(lambda x: 1.0 / (1.0 + y * x))
    spread = mu.integrate(lambda x: (x - m1) ** 2 / (1.0 + y * x)) / kappa
    return m1 - y / (1.0 + y * m1) * spread


# ---------------------------------------------------------------------------
# edge growth and rescaled sums


def edge_growth(mu: Measure, n: int, config=None, method: str = "lapack", workers: int = 1):
    """``(L_n / (n m1^n), e Var/m1^2)`` with ``L_n`` the mean top eigenvalue of the oracle."""
    lo, hi = mu.support()
    if not math.isfinite(hi):
        raise InvalidParams("edge growth needs a compactly supported law")
    if mu.is_dirac:
        raise InvalidParams("edge growth is not defined for a point mass")
    try:
        from .rm_oracle import MatrixEnsembleConfig, mult_power_spectra
    except ImportError as exc:  # pragma: no cover
        raise OracleUnavailable(str(exc)) from exc
    config = config or MatrixEnsembleConfig(N=1000, trials=20, seed=0)
    spectra = mult_power_spectra(mu, n, config, method, workers)
    L = float(np.mean([s[-1] for s in spectra]))
    m1 = mu.moment(1)
    return L / (n * m1**n), math.e * eta(mu)


def sy_limit(mu: Measure, n: int, z, case="finite_variance", closed_form: bool = False):
    """``(S_{Y_n}(z), S_Y(z))`` for the rescaled free sums of multiplicative powers.

    ``case`` is ``"finite_variance"`` or ``("stable", alpha, c)``; with
    ``alpha``/``c`` set to None the law's tail descriptor is used.
    ``Y_n = D_{1/(n^beta m1^n)} (mu^{boxtimes n})^{boxplus floor(n^beta)}``.
    """
    _require_positive(mu)
    z = np.asarray(z, dtype=float)
    m1 = mu.moment(1)
    S = STransform.of(mu, closed_form=closed_form)
    if case == "finite_variance":
        beta = 1.0
        limit = np.exp(-eta(mu) * z)
    else:
        kind, alpha, c = case
        if kind != "stable":
            raise ValueError(f"unknown case {case!r}")
        if alpha is None or c is None:
            desc = mu.tail_descriptor()
            if desc is None:
                raise WrongTailClass("law has no power tail")
            alpha, c = desc.alpha, desc.c
        beta = 1.0 / (alpha - 1.0)
        limit = np.exp(eta_alpha(c, alpha, m1) * (-z) ** (alpha - 1))
    k = int(math.floor(n**beta))
    if k < 1:
        raise DomainShrunk("floor(n^beta) must be positive")
    # D_{1/m1} first so that no intermediate value overflows
    Sy = S.dilation(1.0 / m1).power(n).additive_power(k).dilation(1.0 / n**beta)
    return Sy(z), limit
