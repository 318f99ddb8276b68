"""Probability laws on the real line.

A :class:`Measure` is a finite list of atoms, a list of disjoint density
panels and an optional explicit power tail ``c * alpha * t**(-alpha - 1)`` on
``(T, inf)``.  Panels store their density as a Chebyshev series times an
inverse square-root edge weight (see :mod:`freeperp._cheb`), either in the
variable ``x`` itself or in ``u = 1/x`` so that laws with unbounded support
and ``t**(-1/2)`` tails are represented without truncation.

Everything is immutable; operations return new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import special

from . import _cheb

__all__ = [
    "MeasureError", "DivergentIntegral", "AtomAtZero", "InvalidParams",
    "FGIGEndpointSolveFailed", "PoleOnSupport",
    "Panel", "Tail", "Measure",
    "integrate", "moment", "tail_mass", "pushforward", "levy_distance",
    "builtin_law", "mixture", "symmetrize", "free_gig_endpoints",
    "stable_tail_law", "empirical",
]


class MeasureError(ValueError):
    """Base class for invalid operations on measures."""


class DivergentIntegral(MeasureError):
    pass


class AtomAtZero(MeasureError):
    pass


class InvalidParams(MeasureError):
    pass


class FGIGEndpointSolveFailed(MeasureError):
    pass


class PoleOnSupport(MeasureError):
    pass


# ---------------------------------------------------------------------------
# panels


@dataclass(frozen=True, eq=False)
class Panel:
    """Density panel on a chart interval ``[a, b]``.

    In the chart variable ``u`` the density is ``g(u)/sqrt((u-a)(b-u))`` with
    ``g`` the Chebyshev series ``coef``.  The physical variable is
    ``x = sign * u`` (``recip=False``) or ``x = sign / u`` (``recip=True``,
    which needs ``a >= 0``).
    """

    a: float
    b: float
    coef: np.ndarray
    recip: bool = False
    sign: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise InvalidParams(f"empty panel [{self.a}, {self.b}]")
        if self.recip and self.a < 0:
            raise InvalidParams("reciprocal chart needs a >= 0")
        c = np.array(self.coef, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_g(cls, g: Callable, a: float, b: float, recip=False, sign=1.0, tol=1e-14):
        """Fit the smooth factor ``g(u)`` (density times edge factor)."""
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        coef = _cheb.fit(lambda t: g(mid + half * t), tol=tol)
        return cls(a, b, coef, recip, sign)

    @classmethod
    def from_density(cls, f: Callable, a: float, b: float, recip=False, sign=1.0, tol=1e-12):
        """Fit a chart-variable density ``f(u)`` on ``(a, b)``."""
        def g(u):
            return f(u) * np.sqrt(np.maximum((u - a) * (b - u), 0.0))
        return cls.from_g(g, a, b, recip, sign, tol)

    @classmethod
    def from_values(cls, values: Sequence[float], a: float, b: float, recip=False, sign=1.0):
        """Panel through density samples at the first-kind Chebyshev nodes of [a, b]."""
        values = np.asarray(values, dtype=float)
        t = _cheb.first_kind_nodes(values.size)
        u = 0.5 * (a + b) + 0.5 * (b - a) * t
        g = values * np.sqrt((u - a) * (b - u))
        return cls(a, b, _cheb.coefficients_from_values(g), recip, sign)

    def node_values(self, n: int | None = None) -> np.ndarray:
        """Chart density at the first-kind nodes (inverse of :meth:`from_values`)."""
        n = n or max(self.coef.size, 8)
        t = _cheb.first_kind_nodes(n)
        u = self.mid + self.half * t
        return _cheb.evaluate(self.coef, t) / np.sqrt((u - self.a) * (self.b - u))

    # -- geometry ---------------------------------------------------------

    @property
    def mid(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def half(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def mass(self) -> float:
        return math.pi * self.coef[0]

    @property
    def unbounded(self) -> bool:
        return self.recip and self.a == 0.0

    def x_range(self) -> tuple[float, float]:
        if self.recip:
            lo, hi = 1.0 / self.b, (math.inf if self.a == 0 else 1.0 / self.a)
        else:
            lo, hi = self.a, self.b
        if self.sign < 0:
            lo, hi = -hi, -lo
        return lo, hi

    def to_x(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            y = 1.0 / u if self.recip else u
        return self.sign * y

    def _t(self, u):
        return (np.asarray(u, dtype=float) - self.mid) / self.half

    def g(self, u):
        return _cheb.evaluate(self.coef, self._t(u))

    def g_at_lower_edge(self) -> float:
        return float(_cheb.evaluate(self.coef, -1.0))

    # -- pointwise --------------------------------------------------------

    def density_u(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u > self.a) & (u < self.b)
        out = np.zeros_like(u)
        uu = u[inside]
        out[inside] = self.g(uu) / np.sqrt((uu - self.a) * (self.b - uu))
        return out

    def density(self, x):
        x = np.asarray(x, dtype=float)
        y = self.sign * x
        if not self.recip:
            return self.density_u(y)
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = self.density_u(1.0 / y[pos]) / y[pos] ** 2
        return out

    def cdf_u(self, u):
        return _cheb.cumulative(self.coef, self._t(u))

    def _cdf_y(self, y):
        y = np.asarray(y, dtype=float)
        if not self.recip:
            return self.cdf_u(y)
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = self.mass - self.cdf_u(1.0 / y[pos])
        return out

    def cdf(self, x):
        """Mass of the panel in ``(-inf, x]``."""
        x = np.asarray(x, dtype=float)
        if self.sign > 0:
            return self._cdf_y(x)
        return self.mass - self._cdf_y(-x)

    # -- quadrature -------------------------------------------------------

    def nodes(self, n: int | None = None):
        """Gauss-Chebyshev rule: physical nodes and weights (sum to the mass)."""
        n = n or (self.coef.size + 32)
        theta = np.pi * (np.arange(n) + 0.5) / n
        u = self.mid - self.half * np.cos(theta)
        w = (np.pi / n) * _cheb.g_theta(self.coef, theta)
        return self.to_x(u), w

    def integrate(self, phi: Callable, rtol: float = 1e-10):
        """Adaptive integral of ``phi(x)`` against the panel.

        With ``u = mid - half cos(theta)`` the measure becomes ``g dtheta`` on
        ``[0, pi]``, which removes the square-root edge behaviour.
        """
        def integrand(theta):
            # mid - half cos(theta), written without cancellation at either end
            if theta < 0.5 * math.pi:
                u = self.a + 2.0 * self.half * math.sin(0.5 * theta) ** 2
            else:
                u = self.b - 2.0 * self.half * math.cos(0.5 * theta) ** 2
            return float(phi(self.to_x(u))) * float(_cheb.g_theta(self.coef, theta))

        tol = dict(epsrel=rtol, epsabs=1e-15 * max(abs(self.mass), 1e-300), limit=400)
        if not self.recip:
            return _integrate.quad(integrand, 0.0, math.pi, **tol)
        # u = 0 is x = inf: theta = pi s^4 tames power growth of phi there
        return _integrate.quad(lambda s: 4.0 * math.pi * s**3 * integrand(math.pi * s**4), 0.0, 1.0, **tol)

    # -- resolvents -------------------------------------------------------

    def _g_u(self, w):
        """Cauchy transform of the chart-variable density."""
        w = np.asarray(w, dtype=complex)
        s = (w - self.mid) / self.half
        sm1, sp1 = (w - self.b) / self.half, (w - self.a) / self.half
        return _cheb.stieltjes(self.coef, s, sm1, sp1) / self.half

    def _y_nodes(self):
        """Gauss-Chebyshev nodes in the unsigned physical variable."""
        x, wt = self.nodes()
        return self.sign * x, wt

    def _far_u(self, w) -> np.ndarray:
        """Chart points far enough from [a, b] for a fixed Gauss rule."""
        w = np.asarray(w, dtype=complex)
        return np.abs(w - self.mid) > 3.0 * self.half

    def _resolvent_y(self, w, k: int):
        """``int y^k / (w - y)`` for the unsigned physical variable ``y``."""
        w = np.asarray(w, dtype=complex)
        m = self.mass
        if not self.recip:
            if k == 0:
                return self._g_u(w)
            out = np.empty_like(w)
            far = self._far_u(w)
            if np.any(far):
                y, wt = self._y_nodes()
                ww = w[far][:, None]
                out[far] = (wt * y**k / (ww - y)).sum(axis=1)
            near = ~far
            if np.any(near):
                wn = w[near]
                gn = self._g_u(wn)
                if k == 1:
                    out[near] = wn * gn - m
                else:
                    y, wt = self._y_nodes()
                    m1 = float((wt * y).sum())
                    out[near] = wn * wn * gn - wn * m - m1
            return out
        # reciprocal chart: y = 1/u
        out = np.empty_like(w)
        zero = w == 0
        v = np.where(zero, 1.0, 1.0 / np.where(zero, 1.0, w))
        if k == 1:
            out = -v * self._g_u(v)
        elif k == 0:
            far = self._far_u(v) | zero
            if np.any(far):
                y, wt = self._y_nodes()
                ww = w[far][:, None]
                out[far] = (wt / (ww - y)).sum(axis=1)
            near = ~far
            if np.any(near):
                vn = v[near]
                out[near] = vn * (m - vn * self._g_u(vn))
        elif k == 2:
            if self.a == 0:
                raise DivergentIntegral("second resolvent moment of a t^-1/2 tail")
            g0 = self._g_u(np.array([0.0 + 0.0j]))[0]
            out = -self._g_u(v) + g0
        else:
            raise ValueError("k must be 0, 1 or 2")
        return out

    def resolvent(self, w, k: int = 0):
        """``int x^k / (w - x) dpanel(x)`` for ``k`` in {0, 1, 2}."""
        w = np.asarray(w, dtype=complex)
        if self.sign > 0:
            return self._resolvent_y(w, k)
        return (-1.0) ** (k + 1) * self._resolvent_y(-w, k)

    # -- transforms -------------------------------------------------------

    def scaled(self, s: float) -> "Panel":
        """Law of ``s * X`` for ``s > 0`` (coefficients are unchanged)."""
        if self.recip:
            return Panel(self.a / s, self.b / s, self.coef, True, self.sign)
        return Panel(self.a * s, self.b * s, self.coef, False, self.sign)

    def negated(self) -> "Panel":
        return Panel(self.a, self.b, self.coef, self.recip, -self.sign)

    def reciprocal(self) -> "Panel":
        if not self.recip and self.a < 0:
            raise MeasureError("reciprocal of a panel straddling zero")
        return Panel(self.a, self.b, self.coef, not self.recip, self.sign)

    def with_coef(self, coef) -> "Panel":
        return Panel(self.a, self.b, coef, self.recip, self.sign)

    def quantile(self, r):
        """Points ``x`` with panel mass ``r`` in ``(-inf, x]``; ``0 <= r <= mass``."""
        r = np.asarray(r, dtype=float)
        # Mass below u as a function of theta is increasing.
        target = r if (self.sign > 0) != self.recip else self.mass - r
        theta_grid = np.linspace(0.0, math.pi, 2049)
        f_grid = _cheb.cumulative_theta(self.coef, theta_grid)
        f_grid = np.maximum.accumulate(f_grid)
        theta = np.interp(target, f_grid, theta_grid)
        for _ in range(4):
            gt = _cheb.g_theta(self.coef, theta)
            step = (_cheb.cumulative_theta(self.coef, theta) - target) / np.where(gt > 1e-300, gt, np.inf)
            theta = np.clip(theta - step, 0.0, math.pi)
        u = self.mid - self.half * np.cos(theta)
        return self.to_x(u)


# ---------------------------------------------------------------------------
# explicit power tail


@dataclass(frozen=True)
class Tail:
    """Power tail: density ``c alpha t^(-alpha-1)`` on ``(T, inf)``.

    With ``explicit=False`` the descriptor only records the asymptotics
    ``mu((t, inf)) ~ c t^(-alpha)``; the mass then lives in the panels.
    """

    T: float
    c: float
    alpha: float
    explicit: bool = True

    def __post_init__(self):
        if not (self.c > 0 and self.alpha > 0 and self.T > 0):
            raise InvalidParams("tail needs T, c, alpha > 0")

    @property
    def mass(self) -> float:
        return self.c * self.T ** (-self.alpha) if self.explicit else 0.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        big = x > self.T
        out[big] = self.mass - self.c * x[big] ** (-self.alpha)
        return out

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        big = x > self.T
        out[big] = self.c * self.alpha * x[big] ** (-self.alpha - 1.0)
        return out

    def monomial(self, gamma: float) -> float:
        if gamma >= self.alpha:
            return math.inf
        return self.c * self.alpha * self.T ** (gamma - self.alpha) / (self.alpha - gamma)

    def _i(self, beta: float, s):
        """``int_T^inf t^-beta / (s + t) dt`` via the Gauss hypergeometric function."""
        s = np.asarray(s, dtype=complex)
        return self.T ** (-beta) / beta * special.hyp2f1(1.0, beta, beta + 1.0, -s / self.T)

    def resolvent(self, w, k: int = 0):
        """``int t^k / (w - t)`` against the tail density."""
        beta = self.alpha + 1.0 - k
        if beta <= 0:
            raise DivergentIntegral("tail resolvent moment diverges")
        return -self.c * self.alpha * self._i(beta, -np.asarray(w, dtype=complex))

    def integrate(self, phi: Callable, rtol: float = 1e-10):
        """Substitute the tail mass ``q = c t^-alpha``; returns (value, error)."""
        qmax = self.mass

        def integrand(q):
            return float(phi((self.c / q) ** (1.0 / self.alpha)))

        return _integrate.quad(integrand, 0.0, qmax, epsrel=rtol, epsabs=1e-15, limit=400)

    def quantile(self, r):
        """Point with tail mass ``r`` below it."""
        r = np.asarray(r, dtype=float)
        rem = np.maximum(self.mass - r, 1e-300)
        return (self.c / rem) ** (1.0 / self.alpha)

    def scaled(self, s: float) -> "Tail":
        return Tail(self.T * s, self.c * s**self.alpha, self.alpha, self.explicit)


# ---------------------------------------------------------------------------
# measures

_KINDS = ("nonnegative", "symmetric", "general")


def _merge_atoms(x, w, tol=0.0):
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if x.size == 0:
        return np.zeros((0, 2))
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    keep = np.ones(x.size, dtype=bool)
    keep[1:] = np.diff(x) > tol
    groups = np.cumsum(keep) - 1
    xs = x[keep]
    ws = np.bincount(groups, weights=w)
    pos = ws > 0
    return np.column_stack([xs[pos], ws[pos]])


@dataclass(frozen=True, eq=False)
class Measure:
    """Atoms + density panels + optional power tail.

    Attributes
    ----------
    atoms : (k, 2) array of (location, mass), sorted by location
    panels : tuple of :class:`Panel`, pairwise disjoint
    tail : explicit :class:`Tail` or None
    support_kind : "nonnegative", "symmetric" or "general"
    asymptotic_tail : descriptor of the tail when the panels carry it
    label : builtin name and parameters, if any
    meta : free-form diagnostics (e.g. renormalisation factors)
    """

    atoms: np.ndarray
    panels: tuple = ()
    tail: Tail | None = None
    support_kind: str = "general"
    asymptotic_tail: Tail | None = None
    label: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).reshape(-1, 2)
        a = _merge_atoms(a[:, 0], a[:, 1]) if a.size else np.zeros((0, 2))
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        panels = tuple(sorted(self.panels, key=lambda p: p.x_range()[0]))
        object.__setattr__(self, "panels", panels)
        if self.support_kind not in _KINDS:
            raise InvalidParams(f"unknown support kind {self.support_kind!r}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def build(cls, atoms=(), panels=(), tail=None, support_kind=None, **kw):
        atoms = np.asarray(list(atoms), dtype=float).reshape(-1, 2)
        mu = cls(atoms, tuple(panels), tail, "general", **kw)
        if support_kind is None:
            support_kind = "nonnegative" if mu.support()[0] >= 0 else "general"
        return cls(mu.atoms, mu.panels, tail, support_kind, **kw)

    @classmethod
    def point(cls, c: float) -> "Measure":
        return cls.build([(c, 1.0)], support_kind=None)

    # -- basic queries ----------------------------------------------------

    @property
    def atom_x(self) -> np.ndarray:
        return self.atoms[:, 0]

    @property
    def atom_w(self) -> np.ndarray:
        return self.atoms[:, 1]

    def mass(self) -> float:
        total = float(self.atom_w.sum()) + sum(p.mass for p in self.panels)
        if self.tail is not None:
            total += self.tail.mass
        return total

    def atom_mass_at(self, x: float, tol: float = 0.0) -> float:
        hit = np.abs(self.atom_x - x) <= tol
        return float(self.atom_w[hit].sum())

    def support(self) -> tuple[float, float]:
        lo, hi = math.inf, -math.inf
        if self.atoms.size:
            lo, hi = self.atom_x.min(), self.atom_x.max()
        for p in self.panels:
            a, b = p.x_range()
            lo, hi = min(lo, a), max(hi, b)
        if self.tail is not None:
            lo, hi = min(lo, self.tail.T), math.inf
        return float(lo), float(hi)

    @property
    def is_dirac(self) -> bool:
        return not self.panels and self.tail is None and self.atoms.shape[0] == 1

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p in self.panels:
            out = out + p.density(x)
        if self.tail is not None:
            out = out + self.tail.density(x)
        return out

    def cdf(self, x) -> np.ndarray:
        """``mu((-inf, x])``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.atoms.size:
            cum = np.concatenate([[0.0], np.cumsum(self.atom_w)])
            out = out + cum[np.searchsorted(self.atom_x, x, side="right")]
        for p in self.panels:
            out = out + p.cdf(x)
        if self.tail is not None:
            out = out + self.tail.cdf(x)
        return out

    def tail_mass(self, t) -> np.ndarray:
        """``mu((t, inf))``, computed from the upper end to avoid cancellation."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if self.atoms.size:
            cum = np.concatenate([np.cumsum(self.atom_w[::-1])[::-1], [0.0]])
            out = out + cum[np.searchsorted(self.atom_x, t, side="right")]
        for p in self.panels:
            if p.recip and p.sign > 0:
                # mass of u < 1/t, direct and accurate deep in the tail
                tt = np.maximum(t, 1e-300)
                v = np.where(t > 0, p.cdf_u(1.0 / tt), p.mass)
                out = out + v
            else:
                out = out + (p.mass - p.cdf(t))
        if self.tail is not None:
            T = self.tail
            out = out + np.where(t > T.T, T.c * np.maximum(t, T.T) ** (-T.alpha), T.mass)
        return out

    # -- quantiles --------------------------------------------------------

    def _components(self):
        """Atoms, panels and tail as ordered (left, kind, object) triples."""
        comps = [(float(x), "atom", (float(x), float(w))) for x, w in self.atoms]
        comps += [(p.x_range()[0], "panel", p) for p in self.panels]
        if self.tail is not None:
            comps.append((self.tail.T, "tail", self.tail))
        comps.sort(key=lambda c: (c[0], c[1] != "atom"))
        return comps

    def quantile(self, q) -> np.ndarray:
        """Left-continuous inverse of the distribution function."""
        q = np.atleast_1d(np.asarray(q, dtype=float)) * self.mass()
        if not self.panels and self.tail is None:
            cum = np.cumsum(self.atom_w)
            idx = np.minimum(np.searchsorted(cum, q - 1e-15 * cum[-1], side="left"), cum.size - 1)
            return self.atom_x[idx]
        out = np.full(q.shape, np.nan)
        done = np.zeros(q.shape, dtype=bool)
        acc = 0.0
        comps = self._components()
        for left, kind, obj in comps:
            m = obj[1] if kind == "atom" else obj.mass
            sel = (~done) & (q <= acc + m)
            if np.any(sel):
                r = np.clip(q[sel] - acc, 0.0, m)
                if kind == "atom":
                    out[sel] = obj[0]
                else:
                    out[sel] = obj.quantile(r)
                done |= sel
            acc += m
        if np.any(~done) and comps:
            left, kind, obj = comps[-1]
            out[~done] = obj[0] if kind == "atom" else obj.x_range()[1] if kind == "panel" else math.inf
        return out

    # -- integration ------------------------------------------------------

    def integrate(self, phi: Callable, rtol: float = 1e-10, full_output: bool = False):
        """``int phi dmu``: atoms exactly, panels and tail adaptively."""
        val, err = 0.0, 0.0
        if self.atoms.size:
            val += float(np.sum(self.atom_w * np.asarray([phi(x) for x in self.atom_x], dtype=float)))
        for p in self.panels:
            v, e = p.integrate(phi, rtol)
            val, err = val + v, err + e
        if self.tail is not None:
            v, e = self.tail.integrate(phi, rtol)
            val, err = val + v, err + e
        if not np.isfinite(val):
            raise DivergentIntegral("integral is not finite")
        return (val, err) if full_output else val

    def moment(self, gamma: float) -> float:
        """``int x^gamma dmu``; ``inf`` when the tail makes it diverge."""
        if gamma <= 0:
            raise InvalidParams("moment order must be positive")
        integer = float(gamma).is_integer()
        if self.support_kind == "general" and not integer:
            raise InvalidParams("fractional moments need a nonnegative or symmetric law")
        desc = self.tail_descriptor()
        if desc is not None and gamma >= desc.alpha:
            return math.inf
        if self.support_kind != "nonnegative" and not integer:
            return self.abs_moment(gamma)
        p = int(gamma) if integer else None
        total = 0.0
        if self.atoms.size:
            with np.errstate(divide="ignore", invalid="ignore"):
                xs = self.atom_x ** gamma if p is None else self.atom_x ** p
            total += float(np.sum(self.atom_w * np.where(self.atom_w > 0, xs, 0.0)))
        for pan in self.panels:
            if p is not None and not pan.recip:
                x, w = pan.nodes(pan.coef.size + p + 8)
                total += float(np.sum(w * x**p))
            else:
                g = float(gamma)
                total += pan.integrate(lambda x: np.abs(x) ** g * (np.sign(x) ** p if p else 1.0))[0]
        if self.tail is not None:
            total += self.tail.monomial(gamma)
        return total

    def abs_moment(self, gamma: float) -> float:
        desc = self.tail_descriptor()
        if desc is not None and gamma >= desc.alpha:
            return math.inf
        return self.integrate(lambda x: abs(x) ** gamma)

    def mean(self) -> float:
        return self.moment(1)

    def variance(self) -> float:
        m1 = self.moment(1)
        return self.moment(2) - m1 * m1

    # -- transforms used everywhere ---------------------------------------

    def resolvent(self, w, k: int = 0) -> np.ndarray:
        """``int x^k / (w - x) dmu`` for ``k`` in {0, 1, 2}."""
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape, dtype=complex)
        if self.atoms.size:
            x, m = self.atom_x, self.atom_w
            ww = w.reshape(-1, 1)
            out += (m * x**k / (ww - x)).sum(axis=1).reshape(w.shape)
        for p in self.panels:
            out += p.resolvent(w, k)
        if self.tail is not None:
            out += self.tail.resolvent(w, k)
        return out

    def cauchy(self, w) -> np.ndarray:
        return self.resolvent(w, 0)

    def tail_descriptor(self) -> Tail | None:
        """Explicit tail, recorded asymptotics, or the one implied by a ``1/u`` panel."""
        if self.tail is not None:
            return self.tail
        if self.asymptotic_tail is not None:
            return self.asymptotic_tail
        c = 0.0
        for p in self.panels:
            if p.unbounded and p.sign > 0:
                c += 2.0 * p.g_at_lower_edge() / math.sqrt(p.b)
        if c > 0:
            T = max((c / 1e-8) ** 2, 1.0)
            return Tail(T, c, 0.5, explicit=False)
        return None

    # -- bookkeeping ------------------------------------------------------

    def with_meta(self, **kw) -> "Measure":
        meta = dict(self.meta)
        meta.update(kw)
        return Measure(self.atoms, self.panels, self.tail, self.support_kind,
                       self.asymptotic_tail, self.label, meta)

    def relabel(self, label=None, support_kind=None, asymptotic_tail=None) -> "Measure":
        return Measure(self.atoms, self.panels, self.tail, support_kind or self.support_kind,
                       asymptotic_tail if asymptotic_tail is not None else self.asymptotic_tail,
                       label, dict(self.meta))

    def validate(self, tol: float = 1e-9) -> list[str]:
        """Return a list of violated invariants (empty when valid)."""
        problems = []
        if abs(self.mass() - 1.0) > tol:
            problems.append(f"total mass {self.mass():.12g} != 1")
        if np.any(self.atom_w <= 0) or np.any(self.atom_w > 1 + tol):
            problems.append("atom masses outside (0, 1]")
        ranges = sorted(p.x_range() for p in self.panels)
        for (a0, b0), (a1, b1) in zip(ranges, ranges[1:]):
            if a1 < b0 - 1e-12 * max(1.0, abs(b0)):
                problems.append("overlapping panels")
        for x in self.atom_x:
            for a, b in ranges:
                if a < x < b:
                    problems.append(f"atom at {x} inside a panel")
        for p in self.panels:
            th = np.linspace(0.0, math.pi, 257)
            if np.min(_cheb.g_theta(p.coef, th)) < -1e-8 * max(1.0, abs(p.coef).max()):
                problems.append("negative panel density")
        if self.support_kind == "nonnegative" and self.support()[0] < -1e-12:
            problems.append("nonnegative law with negative support")
        if self.support_kind == "symmetric":
            m1 = self.moment(1)
            fin3 = self.tail_descriptor() is None or self.tail_descriptor().alpha > 3
            m3 = self.moment(3) if fin3 else 0.0
            ts = np.array([0.5, 1.0, 2.0])
            asym = np.max(np.abs(self.tail_mass(ts) - self.cdf(-ts - 1e-15)))
            if abs(m1) > tol or abs(m3) > 1e3 * tol or asym > 1e3 * tol:
                problems.append("law flagged symmetric is not symmetric")
        return problems

    # -- serialisation ----------------------------------------------------

    def to_dict(self, metadata: bool = True) -> dict:
        out: dict = {}
        if self.label is not None:
            out["builtin"] = {"name": self.label["name"], "params": dict(self.label["params"])}
        else:
            out["atoms"] = [[float(x), float(w)] for x, w in self.atoms]
            out["panels"] = [
                {"a": p.a, "b": p.b, "values": p.node_values().tolist(),
                 "chart": "reciprocal" if p.recip else "identity", "sign": p.sign}
                for p in self.panels
            ]
            if self.tail is not None:
                out["tail"] = {"T": self.tail.T, "c": self.tail.c, "alpha": self.tail.alpha}
            out["support_kind"] = self.support_kind
        if metadata:
            moments = {}
            for p in range(1, 5):
                try:
                    v = self.moment(p)
                except MeasureError:
                    v = None
                moments[str(p)] = None if v is None else (float(v) if math.isfinite(v) else "inf")
            mass = float(self.mass())
            out["metadata"] = {"mass": mass, "mass_ok": bool(abs(mass - 1) < 1e-9),
                               "moments": moments}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Measure":
        if "builtin" in d:
            spec = d["builtin"]
            return builtin_law(spec["name"], **spec.get("params", {}))
        panels = []
        for p in d.get("panels", []):
            panels.append(Panel.from_values(p["values"], p["a"], p["b"],
                                            recip=p.get("chart", "identity") == "reciprocal",
                                            sign=float(p.get("sign", 1.0))))
        tail = None
        if d.get("tail"):
            t = d["tail"]
            tail = Tail(float(t["T"]), float(t["c"]), float(t["alpha"]))
        return cls.build(d.get("atoms", []), panels, tail, support_kind=d.get("support_kind"))


# ---------------------------------------------------------------------------
# module-level operations


def integrate(mu: Measure, phi: Callable, rtol: float = 1e-10, full_output=False):
    return mu.integrate(phi, rtol, full_output)


def moment(mu: Measure, gamma: float) -> float:
    return mu.moment(gamma)


def tail_mass(mu: Measure, t):
    out = mu.tail_mass(t)
    return float(out) if np.ndim(out) == 0 else out


def _refit_pieces(pieces, recip=False):
    """Sum callable densities over possibly overlapping intervals into disjoint panels.

    ``pieces`` is a list of (lo, hi, f) with ``f`` a chart-variable density.
    """
    if not pieces:
        return []
    cuts = sorted({lo for lo, _, _ in pieces} | {hi for _, hi, _ in pieces})
    panels = []
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        active = [f for a, b, f in pieces if a <= lo and b >= hi]
        if not active:
            continue

        def dens(u, active=active):
            return sum(f(u) for f in active)

        pan = Panel.from_density(dens, lo, hi, recip=recip, tol=1e-13)
        if pan.mass > 0:
            panels.append(pan)
    return panels


def _merge_same(panels):
    """Add coefficients of panels sharing interval and chart; refit other overlaps."""
    groups: dict = {}
    for p in panels:
        key = (p.a, p.b, p.recip, p.sign)
        if key in groups:
            q = groups[key]
            n = max(q.coef.size, p.coef.size)
            c = np.zeros(n)
            c[: q.coef.size] += q.coef
            c[: p.coef.size] += p.coef
            groups[key] = q.with_coef(c)
        else:
            groups[key] = p
    merged = list(groups.values())
    ranges = sorted((p.x_range(), i) for i, p in enumerate(merged))
    overlap = any(r1[0] < r0[1] - 1e-14 for (r0, _), (r1, _) in zip(ranges, ranges[1:]))
    if not overlap:
        return merged
    if any(p.recip for p in merged):
        raise MeasureError("cannot merge overlapping unbounded panels")
    pieces = [(p.x_range()[0], p.x_range()[1], p.density) for p in merged]
    return _refit_pieces(pieces)


def pushforward(mu: Measure, kind: str, s: float | None = None) -> Measure:
    """Image of ``mu`` under square, reciprocal, abs, dilate(s) or negate."""
    kind = kind.lower()
    if kind == "dilate":
        if s is None:
            raise InvalidParams("dilate needs a factor s")
        if s == 0:
            return Measure.point(0.0)
        if s < 0:
            return pushforward(pushforward(mu, "dilate", -s), "negate")
        atoms = [(x * s, w) for x, w in mu.atoms]
        panels = [p.scaled(s) for p in mu.panels]
        tail = mu.tail.scaled(s) if mu.tail is not None else None
        asym = mu.asymptotic_tail.scaled(s) if mu.asymptotic_tail is not None else None
        label = None
        return Measure(np.asarray(atoms).reshape(-1, 2), tuple(panels), tail,
                       mu.support_kind, asym, label)
    if kind == "negate":
        if mu.tail is not None:
            raise MeasureError("negation of an explicit right tail is not representable")
        kind_out = {"nonnegative": "general"}.get(mu.support_kind, mu.support_kind)
        atoms = [(-x, w) for x, w in mu.atoms]
        return Measure(np.asarray(atoms).reshape(-1, 2), tuple(p.negated() for p in mu.panels),
                       None, kind_out)
    if kind == "reciprocal":
        if mu.atom_mass_at(0.0) > 0:
            raise AtomAtZero("reciprocal of a law with an atom at 0")
        atoms = [(1.0 / x, w) for x, w in mu.atoms]
        panels = [p.reciprocal() for p in mu.panels]
        if mu.tail is not None:
            T = mu.tail
            panels.append(Panel.from_density(
                lambda v: T.c * T.alpha * v ** (T.alpha - 1.0), 0.0, 1.0 / T.T, tol=1e-12))
        return Measure.build(atoms, panels, None,
                             support_kind="nonnegative" if mu.support_kind == "nonnegative" else None)
    if kind in ("square", "abs"):
        sq = kind == "square"
        f_map = (lambda x: x * x) if sq else abs
        atoms = [(f_map(x), w) for x, w in mu.atoms]
        bounded, unbounded = [], []
        for p in mu.panels:
            lo, hi = p.x_range()
            if p.recip:
                if p.a > 0 and not sq:
                    unbounded.append(p if p.sign > 0 else p.negated())
                    continue
                # x = sign/u ; x^2 = 1/u^2, |x| = 1/u
                if not sq:
                    unbounded.append(p if p.sign > 0 else p.negated())
                    continue
                a2, b2 = p.a ** 2, p.b ** 2

                def f2(v, p=p):
                    r = np.sqrt(v)
                    return p.density_u(r) / (2.0 * r)

                unbounded.append(Panel.from_density(f2, a2, b2, recip=True, tol=1e-12))
                continue
            if lo >= 0 or hi <= 0:
                if not sq:
                    bounded.append(p if lo >= 0 else p.negated())
                    continue
                plo, phi_ = (lo, hi) if lo >= 0 else (-hi, -lo)

                def fsq(v, p=p, neg=lo < 0):
                    r = np.sqrt(v)
                    return p.density(-r if neg else r) / (2.0 * r)

                bounded.append(Panel.from_density(fsq, plo**2, phi_**2, tol=1e-12))
            else:
                # straddles zero: fold both halves
                for side, (a_, b_) in ((1, (0.0, hi)), (-1, (0.0, -lo))):
                    if sq:
                        def fs(v, p=p, side=side):
                            r = np.sqrt(v)
                            return p.density(side * r) / (2.0 * r)
                        bounded.append(Panel.from_density(fs, a_**2, b_**2, tol=1e-12))
                    else:
                        def fa(v, p=p, side=side):
                            return p.density(side * v)
                        bounded.append(Panel.from_density(fa, a_, b_, tol=1e-12))
        panels = _merge_same(bounded) + _merge_same(unbounded)
        tail = None
        asym = None
        if mu.tail is not None:
            if sq:
                T = mu.tail
                tail = Tail(T.T**2, T.c, T.alpha / 2.0)
            else:
                tail = mu.tail
        desc = mu.tail_descriptor()
        if desc is not None and not desc.explicit:
            c = desc.c * (2.0 if mu.support_kind == "symmetric" else 1.0)
            asym = Tail(desc.T**2, c, desc.alpha / 2.0, explicit=False) if sq else \
                Tail(desc.T, c, desc.alpha, explicit=False)
        out = Measure.build(atoms, panels, tail, support_kind="nonnegative")
        return out.relabel(asymptotic_tail=asym)
    raise InvalidParams(f"unknown pushforward {kind!r}")


def _levy_grid(mu: Measure, nu: Measure, n: int = 2048) -> np.ndarray:
    q = (np.arange(1, n) - 0.5) / (n - 1)
    pts = [mu.quantile(q), nu.quantile(q), mu.atom_x, nu.atom_x]
    for m in (mu, nu):
        for p in m.panels:
            lo, hi = p.x_range()
            pts.append(np.array([lo, hi]))
    g = np.concatenate(pts)
    g = g[np.isfinite(g)]
    g = np.unique(g)
    # Refine: midpoints between consecutive grid points.
    mids = 0.5 * (g[1:] + g[:-1])
    return np.unique(np.concatenate([g, mids]))


def levy_distance(mu: Measure, nu: Measure, tol: float = 1e-7) -> float:
    """Lévy distance between two laws, by bisection on the band width.

    The band condition ``F(y) <= G(y + e) + e`` and ``G(y) <= F(y + e) + e`` is
    checked on a grid built from both laws' quantiles, atoms and panel edges.
    """
    grid = _levy_grid(mu, nu)
    jumps = np.concatenate([mu.atom_x, nu.atom_x])
    fm, fn = mu.cdf(grid), nu.cdf(grid)
    spread = max(grid[-1] - grid[0], 1.0)

    def ok(e):
        ys = np.concatenate([grid, jumps - e - 1e-12 * spread, jumps, grid - e])
        a = mu.cdf(ys) - nu.cdf(ys + e) - e
        b = nu.cdf(ys) - mu.cdf(ys + e) - e
        return max(a.max(), b.max()) <= 1e-12

    if np.max(np.abs(fm - fn)) <= 1e-13:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# builtin laws


def _mp(lam: float) -> Measure:
    if not lam > 0:
        raise InvalidParams("Marchenko-Pastur rate must be positive")
    r = math.sqrt(lam)
    lm, lp = (1 - r) ** 2, (1 + r) ** 2

    def g(x):
        # sqrt((lp-x)(x-lm))/(2 pi x) times sqrt((x-lm)(lp-x))
        if lm == 0.0:
            return (lp - x) / (2 * math.pi)
        return (lp - x) * (x - lm) / (2 * math.pi * x)

    atoms = [(0.0, 1 - lam)] if lam < 1 else []
    return Measure.build(atoms, [Panel.from_g(g, lm, lp)], support_kind="nonnegative")


def _fbp(a: float, b: float) -> Measure:
    if not (a > 0 and b >= 1):
        raise InvalidParams("free beta prime needs a > 0 and b >= 1")
    atoms = [(0.0, 1 - a)] if a < 1 else []
    if b == 1:
        if a == 1:
            raise InvalidParams("free beta prime with a = b = 1 has no positive lower edge")
        up = 4 * a / (a - 1) ** 2

        def g(u):
            return abs(a - 1) * (up - u) / (2 * math.pi * (1 + u))

        pan = Panel.from_g(g, 0.0, up, recip=True)
        c = 2 * math.sqrt(a) / math.pi
        tail = Tail(max((c / 1e-8) ** 2, 1.0), c, 0.5, explicit=False)
        mu = Measure.build(atoms, [pan], support_kind="nonnegative")
        return mu.relabel(asymptotic_tail=tail)
    sq1, sq2 = math.sqrt(a * b), math.sqrt(a + b - 1)
    gm, gp = ((sq1 - sq2) / (b - 1)) ** 2, ((sq1 + sq2) / (b - 1)) ** 2

    def g(x):
        if gm == 0.0:
            return (b - 1) * (gp - x) / (2 * math.pi * (1 + x))
        return (b - 1) * (gp - x) * (x - gm) / (2 * math.pi * x * (1 + x))

    return Measure.build(atoms, [Panel.from_g(g, gm, gp)], support_kind="nonnegative")


def _inverse_mp(lam: float = 1.0) -> Measure:
    if lam != 1:
        raise InvalidParams("inverse Marchenko-Pastur is provided for rate 1 only")
    mp = _mp(1.0)
    return pushforward(mp, "reciprocal")


def free_gig_endpoints(lam: float, start=(0.1, 4.0), max_steps: int = 200, tol: float = 1e-14):
    """Support endpoints of the free GIG law by damped Newton on the 2x2 system."""
    def F(v):
        a, b = v
        s = math.sqrt(a * b)
        return np.array([1 - lam + s - (a + b) / (2 * a * b),
                         1 + lam + 1 / s - (a + b) / 2])

    def J(v):
        a, b = v
        s = math.sqrt(a * b)
        return np.array([
            [0.5 * b / s + 1 / (2 * a * a), 0.5 * a / s + 1 / (2 * b * b)],
            [-0.5 * b / s**3 - 0.5, -0.5 * a / s**3 - 0.5],
        ])

    v = np.array(start, dtype=float)
    r = np.linalg.norm(F(v))
    for _ in range(max_steps):
        if r < tol:
            break
        try:
            step = np.linalg.solve(J(v), -F(v))
        except np.linalg.LinAlgError as exc:
            raise FGIGEndpointSolveFailed("singular Jacobian") from exc
        t = 1.0
        while t > 1e-8:
            cand = v + t * step
            if np.all(cand > 0) and np.linalg.norm(F(cand)) < (1 - 1e-4 * t) * r:
                break
            t *= 0.5
        else:
            raise FGIGEndpointSolveFailed("line search stalled")
        v = cand
        r = np.linalg.norm(F(v))
    else:
        if r >= tol:
            raise FGIGEndpointSolveFailed(f"no convergence in {max_steps} steps")
    if r >= 1e-10:
        raise FGIGEndpointSolveFailed(f"no convergence in {max_steps} steps")
    a, b = sorted(v)
    return float(a), float(b)


def _free_gig(lam: float) -> Measure:
    a, b = free_gig_endpoints(lam)
    s = math.sqrt(a * b)

    def g(x):
        return (x - a) * (b - x) * (1 / x + 1 / (s * x * x)) / (2 * math.pi)

    return Measure.build([], [Panel.from_g(g, a, b)], support_kind="nonnegative")


def _semicircle(m: float = 0.0, sigma: float = 1.0) -> Measure:
    if not sigma > 0:
        raise InvalidParams("semicircle needs sigma > 0")

    def g(x):
        return (4 * sigma**2 - (x - m) ** 2) / (2 * math.pi * sigma**2)

    kind = "symmetric" if m == 0 else ("nonnegative" if m - 2 * sigma >= 0 else "general")
    return Measure.build([], [Panel.from_g(g, m - 2 * sigma, m + 2 * sigma)], support_kind=kind)


def _bernoulli(p: float, x0: float = 0.0, x1: float = 1.0) -> Measure:
    if not 0 <= p <= 1:
        raise InvalidParams("bernoulli needs 0 <= p <= 1")
    return Measure.build([(x0, 1 - p), (x1, p)])


_BUILTINS = {
    "marchenko_pastur": (_mp, ("lam",)),
    "free_beta_prime": (_fbp, ("a", "b")),
    "inverse_mp": (_inverse_mp, ("lam",)),
    "free_gig": (_free_gig, ("lam",)),
    "semicircle": (_semicircle, ("m", "sigma")),
    "bernoulli": (_bernoulli, ("p", "x0", "x1")),
    "point": (lambda c: Measure.point(c), ("c",)),
}


def builtin_law(name: str, *args, **params) -> Measure:
    """Construct a named law: marchenko_pastur(lam), free_beta_prime(a, b),
    inverse_mp(lam=1), free_gig(lam), semicircle(m, sigma), bernoulli(p, x0, x1),
    point(c)."""
    if name not in _BUILTINS:
        raise InvalidParams(f"unknown builtin {name!r}")
    fn, names = _BUILTINS[name]
    if len(args) > len(names):
        raise InvalidParams(f"too many parameters for {name}")
    kw = dict(zip(names, args))
    for k in params:
        if k not in names:
            raise InvalidParams(f"{name} has no parameter {k!r}")
    kw.update(params)
    try:
        mu = fn(**{k: float(v) for k, v in kw.items()})
    except TypeError as exc:
        raise InvalidParams(str(exc)) from exc
    return mu.relabel(label={"name": name, "params": kw}, asymptotic_tail=mu.asymptotic_tail)


# ---------------------------------------------------------------------------
# derived constructions


def mixture(parts: Iterable[tuple[float, Measure]], support_kind: str | None = None) -> Measure:
    """Convex combination of laws whose panels do not overlap (or coincide)."""
    atoms, panels, tail = [], [], None
    for w, m in parts:
        atoms += [(x, w * a) for x, a in m.atoms]
        panels += [p.with_coef(w * p.coef) for p in m.panels]
        if m.tail is not None:
            if tail is not None:
                raise MeasureError("mixture of two explicit tails")
            tail = Tail(m.tail.T, w * m.tail.c, m.tail.alpha)
    return Measure.build(atoms, _merge_same(panels), tail, support_kind=support_kind)


def symmetrize(mu: Measure) -> Measure:
    """``(mu + mu(-.))/2``."""
    out = mixture([(0.5, mu), (0.5, pushforward(mu, "negate"))], support_kind="symmetric")
    return out


def stable_tail_law(alpha: float = 1.5, T: float = 1.0, body_weight: float = 0.5) -> Measure:
    """Unit-mean law: semicircle bump on (0, T) plus the power tail beyond ``T``.

    The tail is ``c alpha t^(-alpha-1)`` on ``(T, inf)`` with ``c T^-alpha`` equal to
    ``1 - body_weight``; the law is then dilated to unit mean.
    """
    if not 1 < alpha < 2:
        raise InvalidParams("stable-tail law needs alpha in (1, 2)")
    c = (1 - body_weight) * T**alpha
    h = 0.5 * T
    # semicircle on (0, T): density (2/(pi h^2)) sqrt(h^2 - (x-h)^2), mass 1
    body = Panel.from_g(lambda x: body_weight * 2.0 * (x * (T - x)) / (math.pi * h * h), 0.0, T)
    mu = Measure.build([], [body], Tail(T, c, alpha), support_kind="nonnegative")
    return pushforward(mu, "dilate", 1.0 / mu.moment(1))


def empirical(samples, weights=None, support_kind: str | None = None) -> Measure:
    """Empirical law of a sample (atoms)."""
    x = np.asarray(samples, dtype=float).ravel()
    w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, float)
    return Measure.build(np.column_stack([x, w]), support_kind=support_kind)
