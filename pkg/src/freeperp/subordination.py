"""Subordination for ``A^{1/2} X A^{1/2} + B`` with ``X`` free from a commuting pair.

For a law ``rho`` of the pair ``(A, B)`` let

    K(z, w)  = int a / (z - b + w a) drho(a, b)
    Ga(z, w) = int 1 / (z - b + w a) drho(a, b)

The subordination pair ``(f, sf)`` is the attracting fixed point of

    F_z(w1, w2) = (1/G_X(w2) - w2, 1/K(z, w1) - w1)

and the Cauchy transform of ``A^{1/2} X A^{1/2} + B`` is ``Ga(z, f(z))``.
We write ``delta = -f`` and ``h = sf + f``.  At the fixed point
``G_X(sf) = 1/(sf + f) = K(z, f)``.

Pairs are modelled as mixtures of graph components ``A = S^power``,
``B = beta S + beta0`` for a one-dimensional law ``S``, plus finite grids.
Every integral over a graph component reduces to resolvents of ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measure import (Measure, MeasureError, InvalidParams, mixture, pushforward,
                      builtin_law, Tail)

__all__ = [
    "NoConvergence", "PoleHit", "GraphComponent", "GridComponent", "JointLaw",
    "SubordinationPoint", "kernel_K", "fz_map", "solve_subordination", "solve_grid",
    "psi_affine", "cauchy_affine", "delta_monotonicity_check", "fbp_delta",
]


class NoConvergence(MeasureError):
    pass


class PoleHit(MeasureError):
    pass


# ---------------------------------------------------------------------------
# joint laws


@dataclass(frozen=True, eq=False)
class GraphComponent:
    """Weighted component with ``A = S**power`` and ``B = beta*S + beta0``."""

    weight: float
    base: Measure
    power: int = 1
    beta: float = 1.0
    beta0: float = 0.0

    def __post_init__(self):
        if self.power not in (1, 2):
            raise InvalidParams("power must be 1 or 2")
        if self.power == 1 and self.base.support()[0] < 0:
            raise InvalidParams("A must be nonnegative")

    def a_law(self) -> Measure:
        return self.base if self.power == 1 else pushforward(self.base, "square")

    def b_law(self) -> Measure:
        if self.beta0 != 0:
            raise InvalidParams("B marginal with an offset is not supported")
        return pushforward(self.base, "dilate", self.beta)

    def a_moment(self, p: float) -> float:
        return self.base.moment(p * self.power) if self.power * p != 0 else 1.0

    def ab_moment(self, i: int, j: int) -> float:
        """``E[A^i B^j]`` for small integers via the moments of ``S``."""
        total = 0.0
        for k in range(j + 1):
            c = math.comb(j, k) * self.beta**k * self.beta0 ** (j - k)
            if c == 0:
                continue
            order = self.power * i + k
            total += c * (self.base.moment(order) if order > 0 else 1.0)
        return total

    def integrals(self, z, w):
        """``(int 1/(z - b + w a), int a/(z - b + w a))`` over the component."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        zp = z - self.beta0
        S = self.base
        if self.power == 1:
            q = w - self.beta
            small = np.abs(q) < 1e-300
            qs = np.where(small, 1.0, q)
            u = -zp / qs
            i0 = -S.resolvent(u, 0) / qs
            i1 = -S.resolvent(u, 1) / qs
            if np.any(small):
                m1 = S.moment(1)
                i0 = np.where(small, 1.0 / zp, i0)
                i1 = np.where(small, m1 / zp, i1)
            return i0, i1
        # A = S^2: denominator w s^2 - beta s + z'
        disc = np.sqrt(self.beta**2 - 4 * w * zp + 0j)
        ws = np.where(np.abs(w) < 1e-300, 1e-300, w)
        r1 = (self.beta + disc) / (2 * ws)
        r2 = (self.beta - disc) / (2 * ws)
        g1 = S.resolvent(r1, 0)
        g2 = S.resolvent(r2, 0)
        den = ws * (r1 - r2)
        i0 = (g2 - g1) / den
        j1 = (r2 * g2 - r1 * g1) / den          # int s / D
        i2 = (1.0 + self.beta * j1 - zp * i0) / ws   # int s^2 / D
        return i0, i2


@dataclass(frozen=True, eq=False)
class GridComponent:
    """Finite atoms ``(a_i, b_i)`` with weights summing to ``weight``."""

    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "w"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if np.any(self.a < 0):
            raise InvalidParams("A must be nonnegative")

    @property
    def weight(self) -> float:
        return float(self.w.sum())

    def a_law(self) -> Measure:
        return Measure.build(np.column_stack([self.a, self.w / self.weight]))

    def b_law(self) -> Measure:
        return Measure.build(np.column_stack([self.b, self.w / self.weight]))

    def a_moment(self, p: float) -> float:
        return float(np.sum(self.w * self.a**p) / self.weight)

    def ab_moment(self, i: int, j: int) -> float:
        return float(np.sum(self.w * self.a**i * self.b**j) / self.weight)

    def integrals(self, z, w):
        z = np.asarray(z, dtype=complex)[..., None]
        w = np.asarray(w, dtype=complex)[..., None]
        den = z - self.b + w * self.a
        wt = self.w / self.weight
        return (wt / den).sum(-1), (wt * self.a / den).sum(-1)


@dataclass(frozen=True, eq=False)
class JointLaw:
    """Law of a commuting pair ``(A, B)``, ``A >= 0``: a mixture of components."""

    components: tuple
    label: str = ""

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise InvalidParams(f"component weights sum to {total}")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def graph(cls, base: Measure, power: int = 1, beta: float = 1.0, beta0: float = 0.0, label=""):
        return cls((GraphComponent(1.0, base, power, beta, beta0),), label)

    @classmethod
    def symmetric_graph(cls, base: Measure, power: int = 1, beta: float = 1.0, label=""):
        """``A = S^power`` and ``B = +-beta S`` with a fair independent sign."""
        return cls((GraphComponent(0.5, base, power, beta), GraphComponent(0.5, base, power, -beta)), label)

    @classmethod
    def grid(cls, a, b, w=None, label=""):
        a = np.asarray(a, dtype=float)
        w = np.full(a.size, 1.0 / a.size) if w is None else np.asarray(w, dtype=float)
        return cls((GridComponent(a, b, w),), label)

    @classmethod
    def point(cls, a: float, b: float):
        return cls.grid([a], [b], [1.0])

    # -- moments --------------------------------------------------------------

    def _mix(self, fn) -> float:
        return float(sum(c.weight * fn(c) for c in self.components))

    def tau_a(self) -> float:
        return self._mix(lambda c: c.a_moment(1))

    def tau_a2(self) -> float:
        return self._mix(lambda c: c.a_moment(2))

    def var_a(self) -> float:
        return self.tau_a2() - self.tau_a() ** 2

    def tau_b(self) -> float:
        return self._mix(lambda c: c.ab_moment(0, 1))

    def tau_b2(self) -> float:
        return self._mix(lambda c: c.ab_moment(0, 2))

    def odd_b_moments(self) -> tuple[float, float]:
        return self.tau_b(), self._mix(lambda c: c.ab_moment(0, 3))

    def is_symmetric_b(self, tol: float = 1e-9) -> bool:
        m1, m3 = self.odd_b_moments()
        if abs(m1) > tol or abs(m3) > tol:
            return False
        # the law must be invariant under b -> -b jointly with a
        graphs = [c for c in self.components if isinstance(c, GraphComponent)]
        for c in graphs:
            if not any(d.base is c.base and d.power == c.power and d.beta == -c.beta
                       and d.beta0 == -c.beta0 and abs(d.weight - c.weight) < tol for d in graphs):
                return False
        for c in self.components:
            if isinstance(c, GridComponent):
                key = sorted(zip(c.a, c.b, c.w))
                mirror = sorted(zip(c.a, -c.b, c.w))
                if not np.allclose(np.array(key), np.array(mirror), atol=tol):
                    return False
        return True

    def a_marginal(self) -> Measure:
        return mixture([(c.weight, c.a_law()) for c in self.components], support_kind="nonnegative")

    def b_marginal(self) -> Measure:
        out = mixture([(c.weight, c.b_law()) for c in self.components])
        if self.is_symmetric_b():
            out = out.relabel(support_kind="symmetric")
        elif out.support()[0] >= 0:
            out = out.relabel(support_kind="nonnegative")
        return out

    def b_nonnegative(self) -> bool:
        return self.b_marginal().support()[0] >= 0

    def a_tail(self) -> Tail | None:
        """Tail descriptor of the ``A`` marginal, if it has one."""
        tails = []
        for c in self.components:
            if isinstance(c, GraphComponent):
                d = c.base.tail_descriptor()
                if d is not None:
                    if c.power == 2:
                        d = Tail(d.T**2, d.c, d.alpha / 2, explicit=False)
                    tails.append((c.weight, d))
        if not tails:
            return None
        alpha = min(d.alpha for _, d in tails)
        c = sum(w * d.c for w, d in tails if d.alpha == alpha)
        return Tail(max(d.T for _, d in tails), c, alpha, explicit=False)

    def fixed_ratio_points(self, n: int = 257) -> np.ndarray:
        """Values of ``b/(1 - a)`` over the support (``a != 1``)."""
        vals = []
        q = (np.arange(n) + 0.5) / n
        for c in self.components:
            if isinstance(c, GraphComponent):
                s = c.base.quantile(q)
                a, b = s**c.power, c.beta * s + c.beta0
            else:
                a, b = c.a, c.b
            ok = np.abs(1 - a) > 1e-12
            vals.append(b[ok] / (1 - a[ok]))
        return np.concatenate(vals) if vals else np.zeros(0)

    def is_irreducible(self) -> bool:
        """False when a constant ``c`` solves ``A c + B = c`` almost surely."""
        v = self.fixed_ratio_points()
        for c in self.components:
            if isinstance(c, GridComponent):
                at_one = np.abs(c.a - 1) <= 1e-12
                if np.any(at_one & (np.abs(c.b) > 0)):
                    return True
        if v.size == 0:
            return True
        return float(v.max() - v.min()) > 1e-8

    # -- integrals ------------------------------------------------------------

    def integrals(self, z, w):
        i0 = 0.0
        i1 = 0.0
        for c in self.components:
            a, b = c.integrals(z, w)
            i0 = i0 + c.weight * a
            i1 = i1 + c.weight * b
        return i0, i1

    # -- serialisation --------------------------------------------------------

    def to_dict(self) -> dict:
        comps = []
        for c in self.components:
            if isinstance(c, GraphComponent):
                comps.append({"weight": c.weight, "base": c.base.to_dict(metadata=False),
                              "power": c.power, "beta": c.beta, "beta0": c.beta0})
            else:
                comps.append({"grid": {"a": c.a.tolist(), "b": c.b.tolist(), "w": c.w.tolist()}})
        return {"components": comps, "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "JointLaw":
        comps = []
        for c in d["components"]:
            if "grid" in c:
                g = c["grid"]
                comps.append(GridComponent(g["a"], g["b"], g["w"]))
            else:
                comps.append(GraphComponent(float(c.get("weight", 1.0)), Measure.from_dict(c["base"]),
                                            int(c.get("power", 1)), float(c.get("beta", 1.0)),
                                            float(c.get("beta0", 0.0))))
        return cls(tuple(comps), d.get("label", ""))


# ---------------------------------------------------------------------------
# the fixed-point map


def kernel_K(rho: JointLaw, z, w):
    """``K(z, w) = int a/(z - b + w a) drho``."""
    z_arr, w_arr = np.asarray(z, dtype=complex), np.asarray(w, dtype=complex)
    _, k = rho.integrals(z_arr, w_arr)
    k = np.asarray(k)
    if np.any(~np.isfinite(k)):
        raise PoleHit("kernel denominator vanishes on the support")
    return k if k.ndim else complex(k)


def _phi1(mu_x: Measure, w2):
    return 1.0 / mu_x.resolvent(w2, 0) - w2


def _phi2(rho: JointLaw, z, w1):
    return 1.0 / rho.integrals(z, w1)[1] - w1


def fz_map(mu_x: Measure, rho: JointLaw, z, w1, w2):
    """One application of ``F_z``."""
    z, w1, w2 = (np.asarray(v, dtype=complex) for v in (z, w1, w2))
    g = mu_x.resolvent(np.atleast_1d(w2), 0).reshape(w2.shape)
    k = kernel_K(rho, z, w1)
    if np.any(g == 0) or np.any(np.asarray(k) == 0):
        raise PoleHit("zero transform value")
    n1 = 1.0 / g - w2
    n2 = 1.0 / k - w1
    if n1.ndim == 0:
        return complex(n1), complex(n2)
    return n1, n2


@dataclass
class SubordinationPoint:
    """One solved fixed point ``(f, sf)`` of ``F_z``."""

    z: complex
    f: complex
    sf: complex
    residual: float
    iterations: int
    consistency: float = field(default=float("nan"))

    @property
    def delta(self) -> complex:
        return -self.f

    @property
    def h(self) -> complex:
        return self.sf + self.f


def _scale(*ws):
    return np.maximum(1.0, np.maximum.reduce([np.abs(w) for w in ws]))


def _residual(mu_x, rho, z, w1, w2):
    n1 = _phi1(mu_x, w2)
    n2 = _phi2(rho, z, w1)
    r = np.maximum(np.abs(n1 - w1), np.abs(n2 - w2)) / _scale(w1, w2)
    return np.where(np.isfinite(r), r, np.inf), n1, n2


def _newton(mu_x, rho, z, w2, steps=30, tol=1e-14, keep_upper=True):
    """Newton on ``g(w2) = phi2(phi1(w2)) - w2`` (analytic in ``w2``)."""
    w2 = w2.copy()

    def g(v):
        return _phi2(rho, z, _phi1(mu_x, v)) - v

    gv = g(w2)
    for _ in range(steps):
        scale = np.maximum(1.0, np.abs(w2))
        if np.all(np.abs(gv) / scale < tol):
            break
        h = 1e-7 * scale
        d = (g(w2 + h) - gv) / h
        step = np.where(np.isfinite(d) & (d != 0), gv / np.where(d == 0, 1.0, d), 0.0)
        lam = np.ones(w2.shape)
        for _ in range(20):
            cand = w2 - lam * step
            gc = g(cand)
            bad = ~np.isfinite(gc) | (np.abs(gc) > np.abs(gv))
            if keep_upper:
                bad |= (cand.imag < 0) & (np.asarray(z).imag > 0)
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
        ok = np.isfinite(gc) & (np.abs(gc) <= np.abs(gv))
        w2 = np.where(ok, cand, w2)
        gv = np.where(ok, gc, gv)
    return w2


def _newton_f(mu_x, rho, z, w1, steps=40, tol=1e-15):
    """Newton on ``g(w1) = phi1(phi2(w1)) - w1``.

    Used where ``sf`` runs off to infinity (``K(z, f)`` close to 0, as for
    atomic pairs): ``f`` stays bounded there and ``phi1`` is smooth at infinity.
    """
    w1 = w1.copy()

    def g(v):
        with np.errstate(divide="ignore", invalid="ignore"):
            return _phi1(mu_x, _phi2(rho, z, v)) - v

    gv = g(w1)
    for _ in range(steps):
        scale = np.maximum(1.0, np.abs(w1))
        if np.all(np.abs(gv) / scale < tol):
            break
        h = 1e-7 * scale
        d = (g(w1 + h) - gv) / h
        step = np.where(np.isfinite(d) & (d != 0), gv / np.where(d == 0, 1.0, d), 0.0)
        lam = np.ones(w1.shape)
        for _ in range(20):
            cand = w1 - lam * step
            gc = g(cand)
            bad = ~np.isfinite(gc) | (np.abs(gc) > np.abs(gv)) | (cand.imag < 0)
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
        ok = np.isfinite(gc) & (np.abs(gc) <= np.abs(gv)) & (cand.imag >= 0)
        w1 = np.where(ok, cand, w1)
        gv = np.where(ok, gc, gv)
    return w1


def _rescue(mu_x, rho, z, tol):
    """Continuation in ``Im z`` from far above, solving for ``f`` by Newton."""
    size = np.maximum(np.abs(z), 1.0)
    top = z.real + 1j * np.maximum(size, z.imag)
    w1, w2 = _initial(top)
    w1, w2, _, _ = _picard(mu_x, rho, top, w1, w2, tol, 5000)
    for e in np.geomspace(1.0, 1e-6, 61):
        zz = np.where(e * size > z.imag, z.real + 1j * e * size, z)
        w1 = _newton_f(mu_x, rho, zz, w1)
    w1 = _newton_f(mu_x, rho, z, w1)
    with np.errstate(divide="ignore", invalid="ignore"):
        w2 = _phi2(rho, z, w1)
    return w1, w2


def _picard(mu_x, rho, z, w1, w2, tol, max_iter):
    """Damped Picard iteration with periodic Newton polishing.

    Only the unconverged points are updated, so a few slow points do not make
    the whole grid pay for their iterations.
    """
    w1, w2 = w1.copy(), w2.copy()
    theta = np.ones(z.shape)
    res, n1, n2 = _residual(mu_x, rho, z, w1, w2)
    it = np.zeros(z.shape, dtype=int)
    for k in range(max_iter):
        idx = np.flatnonzero(res >= tol)
        if idx.size == 0:
            break
        zt, th = z[idx], theta[idx]
        c1 = (1 - th) * w1[idx] + th * n1[idx]
        c2 = (1 - th) * w2[idx] + th * n2[idx]
        r_new, m1, m2 = _residual(mu_x, rho, zt, c1, c2)
        worse = r_new > res[idx]
        theta[idx] = np.where(worse, np.maximum(0.5 * th, 1e-3), np.minimum(1.0, 1.5 * th))
        accept = ~worse | (theta[idx] <= 1e-3)
        sel = idx[accept]
        w1[sel], w2[sel] = c1[accept], c2[accept]
        res[sel], n1[sel], n2[sel] = r_new[accept], m1[accept], m2[accept]
        it[idx] += 1
        # switch to Newton once close enough
        if k % 25 == 24:
            close = idx[res[idx] < 1e-3]
            if close.size:
                zc = z[close]
                w2n = _newton(mu_x, rho, zc, w2[close])
                w1n = _phi1(mu_x, w2n)
                rn, a1, a2 = _residual(mu_x, rho, zc, w1n, w2n)
                better = rn < res[close]
                sel = close[better]
                w1[sel], w2[sel], res[sel] = w1n[better], w2n[better], rn[better]
                n1[sel], n2[sel] = a1[better], a2[better]
    return w1, w2, res, it


def _track(mu_x, rho, z, w1, w2, tol, max_iter):
    """Newton from a nearby solution; Picard only where Newton does not settle."""
    w2 = _newton(mu_x, rho, z, w2)
    w1 = _phi1(mu_x, w2)
    res, _, _ = _residual(mu_x, rho, z, w1, w2)
    it = np.zeros(z.shape, dtype=int)
    bad = ~(res < tol) | (w2.imag < 0)
    if np.any(bad):
        b1, b2, _, it_b = _picard(mu_x, rho, z[bad], w1[bad], w2[bad], tol, max_iter)
        w1[bad], w2[bad] = b1, b2
        it[bad] = it_b
    return w1, w2, it


def _initial(z):
    return 1j * np.ones(z.shape), z + 1j * np.maximum(np.abs(z), 1.0)


def solve_grid(mu_x: Measure, rho: JointLaw, z, tol: float = 1e-11, max_iter: int = 10000,
               init=None, raise_on_fail: bool = True):
    """Vectorised solve; returns ``(f, sf, residual, iterations)`` arrays.

    Points in the upper half-plane use damped Picard iteration followed by a
    Newton polish.  Real points (``z < 0`` for positive models) are reached by
    continuation from ``z + i eta`` with ``eta`` shrinking to zero.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w1, w2 = _initial(z) if init is None else (np.asarray(init[0], complex) * np.ones(z.shape),
                                               np.asarray(init[1], complex) * np.ones(z.shape))
    real = z.imag == 0
    its = np.zeros(z.shape, dtype=int)
    if np.any(real):
        zr = z[real]
        a1, a2 = w1[real], w2[real]
        if init is None:
            a1, a2 = _initial(zr + 1j * np.abs(zr))
        total = np.zeros(zr.shape, dtype=int)
        for e in [1.0, 0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 0.0]:
            zz = zr + 1j * e * np.maximum(np.abs(zr), 1e-300)
            a1, a2, r, it = _picard(mu_x, rho, zz, a1, a2, min(1e-6, tol * 1e3) if e > 0 else tol,
                                    max_iter if e == 0 else 2000)
            a2 = _newton(mu_x, rho, zz, a2, keep_upper=e > 0)
            a1 = _phi1(mu_x, a2)
            total += it
        a1, a2 = a1.real + 0j, a2.real + 0j
        w1[real], w2[real] = a1, a2
        its[real] = total
    up = ~real
    if np.any(up):
        zu = z[up]
        a1, a2 = w1[up], w2[up]
        total = np.zeros(zu.shape, dtype=int)
        if init is None:
            # points close to the real axis are reached from above, where the
            # map contracts strongly
            size = np.maximum(np.abs(zu), 1.0)
            for e in [1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3]:
                lift = e * size > zu.imag
                if not np.any(lift):
                    continue
                zz = np.where(lift, zu.real + 1j * np.maximum(e * size, zu.imag), zu)
                b1, b2, it = _track(mu_x, rho, zz[lift], a1[lift], a2[lift], 1e-6, 2000)
                a1[lift], a2[lift] = b1, b2
                total[lift] += it
            a1, a2, it = _track(mu_x, rho, zu, a1, a2, tol, max_iter)
        else:
            a1, a2, _, it = _picard(mu_x, rho, zu, a1, a2, tol, max_iter)
        a2 = _newton(mu_x, rho, zu, a2)
        w1[up], w2[up] = _phi1(mu_x, a2), a2
        its[up] = it + total
    res, _, _ = _residual(mu_x, rho, z, w1, w2)
    stuck = (res >= tol) & ~real
    if np.any(stuck):
        r1, r2 = _rescue(mu_x, rho, z[stuck], tol)
        r_res, _, _ = _residual(mu_x, rho, z[stuck], r1, r2)
        better = r_res < res[stuck]
        idx = np.flatnonzero(stuck)[better]
        w1[idx], w2[idx], res[idx] = r1[better], r2[better], r_res[better]
    if raise_on_fail and np.any(res >= tol):
        raise NoConvergence(f"fixed point residual {res.max():.3g} after {max_iter} iterations")
    return w1, w2, res, its


def solve_subordination(mu_x: Measure, rho: JointLaw, z, tol: float = 1e-11, max_iter: int = 10000,
                        init=None) -> SubordinationPoint:
    """Attracting fixed point of ``F_z`` at a single point ``z``."""
    f, sf, res, it = solve_grid(mu_x, rho, np.array([z]), tol, max_iter, init)
    f, sf = complex(f[0]), complex(sf[0])
    g = complex(mu_x.resolvent(np.array([sf]), 0)[0])
    k = complex(kernel_K(rho, z, f))
    ref = 1.0 / (sf + f)
    cons = max(abs(g - ref), abs(k - ref)) / max(abs(ref), 1e-300)
    return SubordinationPoint(complex(z), f, sf, float(res[0]), int(it[0]), cons)


def cauchy_affine(mu_x: Measure, rho: JointLaw, z, point: SubordinationPoint | None = None, **kw):
    """``G`` of ``A^{1/2} X A^{1/2} + B`` at ``z``: ``int 1/(z - b + f a) drho``."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if point is not None:
        f = np.array([point.f])
    else:
        f, _, _, _ = solve_grid(mu_x, rho, z_arr, **kw)
    g, _ = rho.integrals(z_arr, f)
    return g if np.ndim(z) else complex(g[0])


def psi_affine(mu_x: Measure, rho: JointLaw, z, **kw):
    """``psi`` of ``A^{1/2} X A^{1/2} + B`` at ``1/z``: ``int 1/(1 - delta a/z - b/z) - 1``."""
    g = cauchy_affine(mu_x, rho, z, **kw)
    out = np.asarray(z) * g - 1.0
    return out if np.ndim(z) else complex(out)


def fbp_delta(a: float, b: float, z):
    """Closed-form ``delta(z)`` for ``z < 0`` when ``B = A ~ fbp(a, a + b)`` and ``X ~ fbp(a, b)``."""
    z = np.asarray(z, dtype=float)
    if b == 1:
        return (a + 1 + np.sqrt((1 - a) ** 2 - 4 * a * z)) / 2
    root = np.sqrt((z * (b - 1) - (1 - a)) ** 2 - 4 * a * b * z)
    return a * (a - 1 + 2 * b + (b - 1) * z + root) / (2 * b * (a + b - 1))


@dataclass
class MonotonicityReport:
    regime: str
    grid: np.ndarray
    delta: np.ndarray
    monotone: bool
    positive: bool
    limit_value: complex
    limit_target: float
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.monotone and self.positive and not self.notes


def delta_monotonicity_check(mu_x: Measure, rho: JointLaw, regime: str = "positive",
                             grid: Sequence[float] | None = None) -> MonotonicityReport:
    """``delta`` on a log grid of ``(-inf, 0)`` or of the negative imaginary axis."""
    t = np.logspace(-2, 4, 25) if grid is None else np.asarray(grid, dtype=float)
    notes = []
    if regime == "positive":
        f, _, _, _ = solve_grid(mu_x, rho, -t + 0j)
        d = -f.real
        if np.max(np.abs(f.imag)) > 1e-9:
            notes.append("non-real delta on the negative axis")
    elif regime == "symmetric":
        # evaluate at z = i t in the upper half-plane; conjugate symmetry maps
        # it to -i t, where delta(-i t)/i = conj(delta(i t))/i
        f, _, _, _ = solve_grid(mu_x, rho, 1j * t)
        dd = np.conj(-f) / 1j
        if np.max(np.abs(dd.imag)) > 1e-8 * max(1.0, np.max(np.abs(dd))):
            notes.append("delta(it)/i is not real")
        d = dd.real
    else:
        raise ValueError("regime must be positive or symmetric")
    diffs = np.diff(d)
    monotone = bool(np.all(diffs >= -1e-10) or np.all(diffs <= 1e-10))
    positive = bool(np.all(d > 0))
    # f(iv) -> -tau(X) as v -> infinity when tau(|X|) < inf
    try:
        m1 = mu_x.moment(1)
    except MeasureError:
        m1 = math.inf
    lim = complex("nan")
    if math.isfinite(m1):
        v = 1e6
        fv, _, _, _ = solve_grid(mu_x, rho, np.array([1j * v]))
        lim = complex(fv[0])
        if abs(lim + m1) > 1e-3 * max(1.0, abs(m1)):
            notes.append("f(iv) does not approach -tau(X)")
    return MonotonicityReport(regime, t, d, monotone, positive, lim, -m1 if math.isfinite(m1) else math.nan, notes)
