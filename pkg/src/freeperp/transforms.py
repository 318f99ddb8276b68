"""Moment transform, its inverse, the S-transform, Cauchy transform and
Stieltjes inversion.

``psi(mu, z) = int z t / (1 - z t) dmu(t)``.  Writing ``H(w) = int t/(w - t)``
gives ``psi(z) = H(1/z)``, which the measure evaluates in closed form on
Chebyshev panels, so no cancellation occurs for small ``|z|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import _cheb
from .measure import Measure, Panel, MeasureError, PoleOnSupport

__all__ = [
    "OutOfDomain", "DomainShrunk", "NonNevanlinna", "MassDefect", "PoleOnSupport",
    "psi", "psi_centered", "chi", "s_transform", "cauchy", "STransform",
    "s_arithmetic", "stieltjes_invert", "closed_form_s",
]


class OutOfDomain(MeasureError):
    pass


class DomainShrunk(MeasureError):
    pass


class NonNevanlinna(MeasureError):
    pass


class MassDefect(MeasureError):
    pass


def _on_support(mu: Measure, x: np.ndarray) -> np.ndarray:
    """Real points that hit an atom or the interior/closure of a panel or the tail."""
    hit = np.zeros(x.shape, dtype=bool)
    for a in mu.atom_x:
        hit |= x == a
    for p in mu.panels:
        lo, hi = p.x_range()
        hit |= (x >= lo) & (x <= hi)
    if mu.tail is not None:
        hit |= x >= mu.tail.T
    return hit


def _check_real_poles(mu: Measure, w: np.ndarray):
    real = w.imag == 0
    if np.any(real):
        if np.any(_on_support(mu, w.real[real])):
            raise PoleOnSupport("evaluation point lies on the support")


def cauchy(mu: Measure, z):
    """``G(z) = int dmu(t)/(z - t)``."""
    z = np.asarray(z, dtype=complex)
    _check_real_poles(mu, np.atleast_1d(z))
    out = mu.resolvent(np.atleast_1d(z), 0)
    return out.reshape(z.shape) if z.ndim else complex(out[0])


def psi(mu: Measure, z):
    """``psi(z) = int z t/(1 - z t) dmu(t)``; ``psi(0) = 0``."""
    z = np.asarray(z, dtype=complex)
    zz = np.atleast_1d(z)
    out = np.zeros(zz.shape, dtype=complex)
    nz = zz != 0
    w = 1.0 / zz[nz]
    _check_real_poles(mu, w)
    out[nz] = mu.resolvent(w, 1)
    if z.ndim == 0:
        v = complex(out[0])
        return v.real if np.isreal(z) and abs(v.imag) <= 1e-300 + 0 * abs(v) else v
    if np.all(np.isreal(z)):
        return out.real
    return out


def psi_centered(mu: Measure, t):
    """``-psi(-1/t) - m1/t`` evaluated as ``-(1/t) int x^2/(t + x) dmu`` (no cancellation)."""
    t = np.asarray(t, dtype=float)
    tt = np.atleast_1d(t).astype(complex)
    # int x^2/(t + x) = -R(-t, 2)
    r2 = -mu.resolvent(-tt, 2).real
    out = -r2 / np.atleast_1d(t)
    return out.reshape(t.shape) if t.ndim else float(out[0])


def _psi_real(mu: Measure, z: float) -> float:
    return float(mu.resolvent(np.array([1.0 / z + 0j]), 1).real[0])


def _psi_prime(mu: Measure, z: float) -> float:
    """``psi'(z)`` by the complex-step rule (``psi`` is real analytic on (-inf, 0))."""
    h = 1e-20 * max(abs(z), 1e-300)
    w = 1.0 / (z + 1j * h)
    return float(mu.resolvent(np.array([w]), 1).imag[0] / h)


def chi(mu: Measure, w, newton_steps: int = 3):
    """Inverse of ``psi`` from (-inf, 0) onto ``(delta - 1, 0)``; ``delta = mu({0})``."""
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    delta = mu.atom_mass_at(0.0)
    if mu.support()[0] < 0:
        raise OutOfDomain("chi needs a nonnegative law")
    out = np.empty_like(w_arr)
    for i, wi in enumerate(w_arr):
        if not (delta - 1 < wi < 0):
            raise OutOfDomain(f"w = {wi} outside ({delta - 1}, 0)")

        def f(s):
            return _psi_real(mu, -math.exp(s)) - wi

        lo, hi = math.log(1e-12), math.log(1e12)
        flo, fhi = f(lo), f(hi)
        if flo * fhi > 0:
            # extend the bracket for laws concentrated near 0 or far away
            while flo < 0 and lo > -200:
                lo -= 10.0
                flo = f(lo)
            while fhi > 0 and hi < 200:
                hi += 10.0
                fhi = f(hi)
            if flo * fhi > 0:
                raise OutOfDomain(f"no root of psi(z) = {wi} in the bracket")
        s = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
        z = -math.exp(s)
        for _ in range(newton_steps):
            d = _psi_prime(mu, z)
            if not d > 0:
                break
            step = (_psi_real(mu, z) - wi) / d
            if not math.isfinite(step) or abs(step) > 0.5 * abs(z):
                break
            z -= step
        out[i] = z
    return out if np.ndim(w) else float(out[0])


def s_transform(mu: Measure, w):
    """``S(w) = (w + 1)/w * chi(w)``."""
    w_arr = np.asarray(w, dtype=float)
    return (w_arr + 1.0) / w_arr * chi(mu, w_arr)


# ---------------------------------------------------------------------------
# closed forms and S-arithmetic


def closed_form_s(mu: Measure) -> Callable | None:
    """S-transform of a labelled builtin when known in closed form."""
    lab = mu.label
    if lab is None:
        return None
    name, p = lab["name"], {k: float(v) for k, v in lab["params"].items()}
    if name == "free_beta_prime":
        a, b = p["a"], p["b"]
        return lambda z: (b - 1.0 - z) / (a + z)
    if name == "marchenko_pastur":
        lam = p["lam"]
        return lambda z: 1.0 / (lam + z)
    if name == "point":
        c = p["c"]
        return lambda z: np.full(np.shape(z), 1.0 / c) if np.ndim(z) else 1.0 / c
    if name == "inverse_mp":
        # reciprocal law: S_{1/X}(z) = 1/S_X(-1-z)
        return lambda z: -z
    return None


@dataclass(frozen=True)
class STransform:
    """An S-transform with its domain ``(lo, 0)``.

    ``fn`` evaluates the transform; ``measure`` is the underlying law when
    there is one.  Arithmetic returns new objects with composed evaluators.
    """

    fn: Callable
    lo: float
    measure: Measure | None = None
    closed: bool = False
    history: tuple = field(default_factory=tuple)

    @classmethod
    def of(cls, mu: Measure, closed_form: bool = False) -> "STransform":
        lo = mu.atom_mass_at(0.0) - 1.0
        if closed_form:
            f = closed_form_s(mu)
            if f is None:
                raise MeasureError("no closed form for this law")
            return cls(f, lo, mu, True)
        return cls(lambda z: s_transform(mu, z), lo, mu, False)

    def __call__(self, z):
        z_arr = np.asarray(z, dtype=float)
        if np.any(z_arr <= self.lo) or np.any(z_arr >= 0):
            raise OutOfDomain(f"point outside ({self.lo}, 0)")
        return self.fn(z)

    def derivative(self, z, h: float | None = None):
        """Central difference ``S'(z)``, shrunk to stay inside the domain."""
        z = float(z)
        h = h or 1e-4 * max(abs(z), 1e-3)
        h = min(h, 0.5 * abs(z), 0.5 * (z - self.lo))
        return (float(self(z + h)) - float(self(z - h))) / (2 * h)

    def power(self, n: int) -> "STransform":
        if n < 1:
            raise ValueError("power needs n >= 1")
        if n == 1:
            return self
        f = self.fn
        return STransform(lambda z: f(z) ** n, self.lo, None, self.closed,
                          self.history + (("power", n),))

    def additive_power(self, n: int) -> "STransform":
        """``S_{mu^{boxplus n}}(z) = S(z/n)/n``."""
        if n < 1:
            raise ValueError("additive_power needs n >= 1")
        f = self.fn
        lo = max(n * self.lo, -1.0)
        if lo >= 0:
            raise DomainShrunk("empty domain")
        return STransform(lambda z: f(np.asarray(z) / n) / n, lo, None, self.closed,
                          self.history + (("additive_power", n),))

    def dilation(self, a: float) -> "STransform":
        """``S_{D_a mu} = S/a``."""
        if not a > 0:
            raise ValueError("dilation needs a > 0")
        f = self.fn
        return STransform(lambda z: f(z) / a, self.lo, None, self.closed,
                          self.history + (("dilation", a),))

    def scaled(self, c: float) -> "STransform":
        """Multiply the transform by a positive constant."""
        f = self.fn
        return STransform(lambda z: c * f(z), self.lo, None, self.closed,
                          self.history + (("scale", c),))


def s_arithmetic(S: STransform, op: str, arg) -> STransform:
    """Apply ``power``, ``additive_power`` or ``dilation`` to an S-transform."""
    if op == "power":
        return S.power(int(arg))
    if op == "additive_power":
        return S.additive_power(int(arg))
    if op == "dilation":
        return S.dilation(float(arg))
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# Stieltjes inversion


def _richardson(eps: np.ndarray, vals: np.ndarray, order: int) -> np.ndarray:
    """Least-squares polynomial in eps through the columns of ``vals``; value at 0."""
    if eps.size == 1 or order == 0:
        return vals[np.argmin(eps)]
    V = np.vander(eps, order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    return coef[0]


def _golden_max(f, a, b, iters=60):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def stieltjes_invert(
    G,
    x_grid: Sequence[float],
    eps_schedule: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
    order: int = 1,
    atom_threshold: float = 1e-3,
    density_floor: float = 1e-3,
    nodes: int = 128,
    support_hint: tuple[float, float] | None = None,
    relative_eps: bool = False,
    support_kind: str | None = None,
    left_edge: float | None = None,
) -> Measure:
    """Recover a law from its Cauchy transform.

    ``G`` is a Measure or a vectorised callable on complex arrays.  The
    density ``-Im G(x + i eps)/pi`` is extrapolated to ``eps = 0`` over
    ``eps_schedule``; atoms are found where ``-eps Im G`` stays put as eps
    shrinks; each support component is refitted on Chebyshev nodes.  The law
    is renormalised to unit mass and the factor is kept in ``meta``.
    With ``relative_eps`` the offsets are multiplied by ``max(|x|, 1)``.
    A known ``left_edge`` replaces the estimated left end of the first
    support component.
    """
    if isinstance(G, Measure):
        mu = G
        G = lambda z: mu.resolvent(np.asarray(z, dtype=complex), 0)  # noqa: E731
    x = np.unique(np.asarray(x_grid, dtype=float))
    eps = np.asarray(sorted(eps_schedule, reverse=True), dtype=float)
    h = float(np.median(np.diff(x))) if x.size > 1 else 1.0

    def scale(xs):
        return np.maximum(np.abs(xs), 1.0) if relative_eps else np.ones_like(xs)

    def im_g(xs, e):
        vals = np.asarray(G(xs + 1j * e * scale(xs)), dtype=complex)
        if np.any(vals.imag > 1e-10 * np.maximum(np.abs(vals), 1.0)):
            raise NonNevanlinna("Im G > 0 on the upper half-plane")
        return vals.imag

    # -- atoms -------------------------------------------------------------
    e_det = max(2.0 * h, eps[0]) if not relative_eps else eps[0]
    m_det = -e_det * scale(x) * im_g(x, e_det)
    atoms = []
    cand = np.nonzero((m_det > atom_threshold)
                      & (m_det >= np.roll(m_det, 1)) & (m_det >= np.roll(m_det, -1)))[0]
    e_small = min(eps[-1], 1e-3 * h) if not relative_eps else eps[-1] * 1e-2
    for i in cand:
        lo_x = x[max(i - 1, 0)]
        hi_x = x[min(i + 1, x.size - 1)]
        x0 = _golden_max(lambda t: -float(im_g(np.array([t]), e_small)[0]), lo_x, hi_x)
        xs = np.array([x0])
        m1 = -e_small * scale(xs)[0] * float(im_g(xs, e_small)[0])
        m2 = -0.5 * e_small * scale(xs)[0] * float(im_g(xs, 0.5 * e_small)[0])
        if m1 > atom_threshold and m2 / m1 > 0.9:
            atoms.append((x0, 2 * m2 - m1))
    atoms = [(a, m) for a, m in atoms if m > 0]

    def g_cont(z):
        out = np.asarray(G(z), dtype=complex)
        for a, m in atoms:
            out = out - m / (z - a)
        return out

    def density(xs, shrink=1.0):
        vals = np.array([-g_cont(xs + 1j * e * shrink * scale(xs)).imag / math.pi for e in eps])
        return np.maximum(_richardson(eps, vals, order), 0.0)

    # -- support components -----------------------------------------------
    f = density(x)
    fmax = f.max() if f.size else 0.0
    panels = []
    if fmax > 0:
        on = f > density_floor * fmax
        for a_x in (a for a, _ in atoms):
            near = np.abs(x - a_x) <= 1.5 * h
            on &= ~(near & (f < 0.05 * fmax))
        edges = np.flatnonzero(np.diff(np.concatenate([[0], on.astype(int), [0]])))
        for s, e in zip(edges[::2], edges[1::2]):
            if e - s < 3:
                continue
            if left_edge is not None and not panels:
                a = left_edge
            else:
                a = _refine_edge(density, x[max(s - 6, 0)], x[min(s + 4, x.size - 1)], left=True)
            b = _refine_edge(density, x[max(e - 5, 0)], x[min(e + 5, x.size - 1)], left=False)
            if support_hint is not None:
                a, b = max(a, support_hint[0]), min(b, support_hint[1])
            if not b > a:
                continue
            t = _cheb.first_kind_nodes(nodes)
            u = 0.5 * (a + b) + 0.5 * (b - a) * t
            # shrink the offsets near the edges, where smoothing bias is largest
            near = np.clip(np.minimum(u - a, b - u) / (0.05 * (b - a)), 1e-4, 1.0)
            vals = density(u, near)
            pan = Panel.from_values(vals, a, b)
            pan = pan.with_coef(_cheb.chop(pan.coef, 1e-15 * abs(pan.coef).max()))
            if pan.mass > 1e-10:
                panels.append(pan)
    mass = sum(m for _, m in atoms) + sum(p.mass for p in panels)
    if not mass > 0:
        raise MassDefect("recovered law has no mass")
    factor = 1.0 / mass
    if abs(factor - 1.0) > 1e-2:
        raise MassDefect(f"renormalisation factor {factor:.6g} deviates from 1")
    atoms = [(a, m * factor) for a, m in atoms]
    panels = [p.with_coef(p.coef * factor) for p in panels]
    out = Measure.build(atoms, panels, support_kind=support_kind)
    return out.with_meta(renormalization=factor, atoms_found=len(atoms))


def _refine_edge(density, xa: float, xb: float, left: bool, n: int = 65) -> float:
    """Locate a support edge inside ``[xa, xb]``.

    The density is resampled with much smaller offsets, then ``f^2`` (linear
    at a square-root edge) is extrapolated from the first points above a
    relative threshold.  Blow-up edges fall back to the threshold crossing.
    """
    xs = np.linspace(xa, xb, n)
    f = density(xs, 1e-3)
    if not np.any(f > 0):
        return float(0.5 * (xa + xb))
    thr = 1e-3 * f.max()
    idx = np.flatnonzero(f > thr)
    if left:
        i = idx[0]
        sel = np.arange(i, min(i + 4, n))
        outer, inner = xs[max(i - 1, 0)], xs[i]
    else:
        i = idx[-1]
        sel = np.arange(max(i - 3, 0), i + 1)
        outer, inner = xs[min(i + 1, n - 1)], xs[i]
    if sel.size >= 2:
        slope, icpt = np.polyfit(xs[sel], f[sel] ** 2, 1)
        grows_inward = slope > 0 if left else slope < 0
        if grows_inward:
            r = -icpt / slope
            return float(np.clip(r, min(outer, inner), max(outer, inner)))
        # inverse square-root blow-up: 1/f^2 is linear instead
        slope, icpt = np.polyfit(xs[sel], 1.0 / f[sel] ** 2, 1)
        if (slope > 0) if left else (slope < 0):
            r = -icpt / slope
            return float(np.clip(r, min(outer, inner), max(outer, inner)))
    return float(outer)
