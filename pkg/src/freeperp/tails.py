"""Power tails of critical free perpetuities.

Tail constants are read off the ``psi`` transform: for a positive law,
``mu((t, inf)) ~ L t^-alpha`` is equivalent to ``-psi(-1/t) ~ C t^-alpha`` with
``C = (pi alpha / sin(pi alpha)) L`` when ``alpha < 1``; for ``alpha in (1, 2)``
the mean term ``m1/t`` is removed first.  Symmetric laws are probed on the
imaginary axis, ``-psi(-1/(it))``, which is the positive case for ``X^2``.

For a critical perpetuity the same constants follow from the subordination
function ``delta``: ``-psi_X(-1/t) ~ delta(-t)/t`` on the negative axis, and
``Delta(-t)/t`` with ``Delta(z) = delta(iz)/i`` in the symmetric case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .measure import DivergentIntegral, InvalidParams, Measure, MeasureError
from .perpetuity import PerpetuityProblem
from .subordination import JointLaw, solve_grid
from .transforms import psi, psi_centered

__all__ = [
    "BadFit", "NotCritical", "AmbiguousRegime", "Regime", "TailReport", "tauberian_estimate",
    "predict_tail_positive", "predict_tail_symmetric", "predict_tail", "classify_regime",
    "verify_critical_tail", "psi_side_factor",
]


class BadFit(MeasureError):
    pass


class NotCritical(MeasureError):
    pass


class AmbiguousRegime(MeasureError):
    pass


class Regime(NamedTuple):
    """``kind`` is one of ``positive_finite_var``, ``positive_stable``,
    ``symmetric_finite_var``, ``symmetric_stable``; stable kinds carry the
    tail ``c t^-alpha`` of ``A``."""

    kind: str
    alpha: float | None = None
    c: float | None = None

    @property
    def symmetric(self) -> bool:
        return self.kind.startswith("symmetric")


@dataclass
class TailReport:
    exponent: float
    constant: float
    predicted_constant: float
    regime: Regime
    fit_window: tuple
    relative_error: float
    r_squared: float = math.nan
    predicted_exponent: float = math.nan
    routes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.exponent > 0:
            raise BadFit(f"non-positive tail exponent {self.exponent:.4g}")

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent, "constant": self.constant,
            "predicted_exponent": self.predicted_exponent,
            "predicted_constant": self.predicted_constant,
            "regime": self.regime._asdict(), "fit_window": list(self.fit_window),
            "relative_error": self.relative_error, "r_squared": self.r_squared,
            "routes": {k: list(v) for k, v in self.routes.items()},
        }


def psi_side_factor(alpha: float) -> float:
    """``pi alpha / sin(pi alpha)``: negative for ``alpha in (1, 2)``."""
    return math.pi * alpha / math.sin(math.pi * alpha)


def _rel(x: float, ref: float) -> float:
    return abs(x - ref) / abs(ref) if math.isfinite(ref) and ref != 0 else math.nan


# ---------------------------------------------------------------------------
# fitting


def _power_fit(t: np.ndarray, v: np.ndarray, alpha_ref: float | None, min_r2: float):
    """Fit ``v ~ C t^-alpha``; returns ``(alpha, C, r2, alpha_used)``.

    The exponent is the least-squares slope over the whole window.  The
    constant is ``v t^alpha`` averaged over the top fifth of the window, with
    ``alpha`` the reference exponent when the fit agrees with it; reading it
    off the intercept would amplify the slope error by ``log t``.
    """
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise BadFit("transform values are not positive and finite on the window")
    lt, lv = np.log(t), np.log(v)
    A = np.column_stack([np.ones_like(lt), lt])
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - A @ coef
    ss = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 0.0
    if r2 < min_r2:
        raise BadFit(f"R^2 = {r2:.6f} below {min_r2}")
    alpha = -float(coef[1])
    use = alpha_ref if alpha_ref is not None and abs(alpha - alpha_ref) < 0.05 else alpha
    top = lt >= lt[-1] - 0.2 * (lt[-1] - lt[0])
    C = float(np.exp(np.mean(lv[top] + use * lt[top])))
    return alpha, C, r2, use


def _as_psi(mu_or_psi) -> tuple[Callable, Measure | None]:
    if isinstance(mu_or_psi, Measure):
        mu = mu_or_psi
        return (lambda z: psi(mu, z)), mu
    if callable(mu_or_psi):
        return mu_or_psi, None
    raise InvalidParams("expected a Measure or a callable psi")


def _window(window, points):
    lo, hi = window
    if not 0 < lo < hi:
        raise InvalidParams("fit window must satisfy 0 < t_min < t_max")
    return np.geomspace(lo, hi, points)


def tauberian_estimate(mu_or_psi, alpha_hint: float | None = None, regime="positive",
                       window=(1e3, 1e7), points: int = 41, mean: float | None = None,
                       predicted: float | None = None, min_r2: float = 0.999) -> TailReport:
    """Tail exponent and constant of ``mu`` from ``psi`` on a geometric window.

    ``regime`` is ``"positive"`` (fit ``-psi(-1/t)``) or ``"symmetric"`` (fit
    ``-psi(-1/(it))`` and report the tail of ``|X|``); a :class:`Regime` is
    also accepted.  For ``alpha_hint in (1, 2)`` in the positive case the term
    ``m1/t`` is removed first; ``mean`` supplies ``m1`` for callable input.
    ``alpha_hint`` and ``predicted`` default to the law's tail descriptor.
    """
    reg = regime if isinstance(regime, Regime) else None
    kind = (reg.kind.split("_")[0] if reg else regime)
    if kind not in ("positive", "symmetric"):
        raise InvalidParams(f"unknown regime {regime!r}")
    f, mu = _as_psi(mu_or_psi)
    # descriptor of the right tail; for a symmetric law |X| carries twice its mass
    d = mu.tail_descriptor() if mu is not None else None
    if alpha_hint is None and d is not None:
        alpha_hint = d.alpha
    t = _window(window, points)
    sign = 1.0
    if kind == "symmetric":
        v = -np.real(np.asarray(f(1j / t), dtype=complex))
    elif alpha_hint is not None and 1 < alpha_hint < 2:
        if mu is not None:
            v = psi_centered(mu, t)
        else:
            if mean is None:
                raise InvalidParams("mean subtraction needs the first moment")
            v = -np.real(np.asarray(f(-1.0 / t), dtype=complex)) - mean / t
        sign = -1.0
    else:
        v = -np.real(np.asarray(f(-1.0 / t), dtype=complex))
    alpha, C, r2, used = _power_fit(t, sign * v, alpha_hint, min_r2)
    if kind == "symmetric":
        const = C / psi_side_factor(used / 2.0)
    else:
        const = sign * C / psi_side_factor(used)
    if predicted is None and d is not None:
        predicted = 2.0 * d.c if kind == "symmetric" else d.c
    pred = math.nan if predicted is None else float(predicted)
    if reg is None:
        stable = alpha_hint is not None and 1 < alpha_hint < 2
        reg = Regime(f"{kind}_stable" if stable else f"{kind}_finite_var", alpha_hint if stable else None)
    return TailReport(alpha, const, pred, reg, (float(t[0]), float(t[-1])), _rel(const, pred), r2)


# ---------------------------------------------------------------------------
# predictions


def _variance_a(rho: JointLaw) -> float:
    try:
        v = rho.var_a()
    except DivergentIntegral:
        return math.inf
    return v if math.isfinite(v) else math.inf


def classify_regime(rho: JointLaw, symmetric: bool) -> Regime:
    """Match a critical pair to one of the tail theorems."""
    tau = rho.tau_a()
    if abs(tau - 1.0) > 1e-9:
        raise NotCritical(f"tau(A) = {tau:.12g} != 1")
    a = rho.a_marginal()
    if a.is_dirac:
        raise InvalidParams("A is a point mass")
    if not rho.is_irreducible():
        raise InvalidParams("model is reducible")
    if symmetric:
        if not rho.is_symmetric_b():
            raise InvalidParams("(A, B) and (A, -B) differ in law")
    elif not rho.b_nonnegative():
        raise InvalidParams("B must be nonnegative")
    b = rho.b_marginal()
    if b.is_dirac and float(b.atom_x[0]) == 0.0:
        raise InvalidParams("B = 0")
    var = _variance_a(rho)
    tail = rho.a_tail()
    prefix = "symmetric" if symmetric else "positive"
    if tail is not None and math.isfinite(var):
        raise AmbiguousRegime(f"A has finite variance and a tail descriptor (alpha = {tail.alpha:.4g})")
    if tail is not None:
        if not 1 < tail.alpha < 2:
            raise InvalidParams(f"tail index {tail.alpha} outside (1, 2)")
        return Regime(f"{prefix}_stable", tail.alpha, tail.c)
    if not math.isfinite(var):
        raise InvalidParams("A has infinite variance but no tail descriptor")
    return Regime(f"{prefix}_finite_var")


def _prediction(rho: JointLaw, reg: Regime) -> tuple[float, float]:
    if reg.kind == "positive_finite_var":
        return 0.5, 2.0 * math.sqrt(2.0) / math.pi * math.sqrt(rho.tau_b() / rho.var_a())
    if reg.kind == "symmetric_finite_var":
        return 1.0, 2.0 / math.pi * math.sqrt(rho.tau_b2() / rho.var_a())
    a, c = reg.alpha, reg.c
    if reg.kind == "positive_stable":
        base = -math.sin(math.pi * a) * rho.tau_b() / (math.pi * c)
        return 1.0 / a, math.sin(math.pi / a) / (math.pi / a) * base ** (1.0 / a)
    base = -math.sin(math.pi * a) * rho.tau_b2() / (2.0 * math.pi * c)
    return 2.0 / a, math.sin(math.pi / a) / (math.pi / a) * base ** (1.0 / a)


def predict_tail_positive(rho: JointLaw) -> tuple[float, float]:
    """``(exponent, constant)`` of ``mu_X((t, inf))`` for ``B >= 0``."""
    return _prediction(rho, classify_regime(rho, symmetric=False))


def predict_tail_symmetric(rho: JointLaw) -> tuple[float, float]:
    """``(exponent, constant)`` of ``mu_|X|((t, inf))`` for symmetric ``B``."""
    return _prediction(rho, classify_regime(rho, symmetric=True))


def predict_tail(rho: JointLaw, regime: str = "positive") -> tuple[Regime, float, float]:
    reg = classify_regime(rho, symmetric=(regime == "symmetric"))
    e, c = _prediction(rho, reg)
    return reg, e, c


# ---------------------------------------------------------------------------
# verification on a solved perpetuity


def _delta_values(solution: Measure, rho: JointLaw, t: np.ndarray, symmetric: bool) -> np.ndarray:
    if not symmetric:
        f, _, _, _ = solve_grid(solution, rho, -t + 0j)
        return -f.real
    # Delta(-t) = delta(-it)/i and delta(-it) = -conj(f(it))
    f, _, _, _ = solve_grid(solution, rho, 1j * t)
    return (1j * np.conj(f)).real


def verify_critical_tail(problem: PerpetuityProblem, solution: Measure, window=(1e3, 1e7),
                         points: int = 25, min_r2: float = 0.999) -> TailReport:
    """Tail of a solved critical perpetuity measured two ways.

    ``routes["psi"]`` fits ``psi`` of the solution; ``routes["delta"]`` fits
    ``delta(-t)/t`` from the subordination equation.  The report carries the
    psi-route numbers and the theorem prediction.
    """
    if problem.criticality != "critical":
        raise NotCritical(f"tau(A) = {problem.tau_A:.12g}")
    symmetric = problem.regime == "symmetric"
    reg, e_pred, c_pred = predict_tail(problem.rho, problem.regime)
    alpha_side = 2.0 / e_pred if symmetric else e_pred
    a = tauberian_estimate(solution, e_pred, reg, window, points, predicted=c_pred, min_r2=min_r2)
    t = _window(window, points)
    d = _delta_values(solution, problem.rho, t, symmetric) / t
    alpha_d, C, _, used = _power_fit(t, d, alpha_side if not symmetric else e_pred, min_r2)
    const_d = C / (psi_side_factor(used / 2.0) if symmetric else psi_side_factor(used))
    a.routes = {"psi": (a.exponent, a.constant), "delta": (alpha_d, const_d)}
    a.predicted_exponent = e_pred
    return a
