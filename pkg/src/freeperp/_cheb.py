"""Chebyshev series helpers for densities with inverse square-root edge weights.

A panel density on [a, b] is stored as ``g(u) / sqrt((u - a)(b - u))`` with ``g``
smooth, expanded as ``g = sum_k c_k T_k(t)`` in the reduced variable
``t = (2u - a - b) / (b - a)``.  Square-root vanishing, square-root blow-up and
mixed edges all give a smooth ``g``.  Every quantity below (mass, distribution
function, Cauchy transform) then has a closed form in the coefficients.
"""

from __future__ import annotations

import numpy as np
from scipy import fft

_TINY = 1e-300


def first_kind_nodes(n: int) -> np.ndarray:
    """Chebyshev points of the first kind on [-1, 1], descending."""
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


def coefficients_from_values(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through first-kind node values."""
    values = np.asarray(values, dtype=float)
    n = values.size
    c = fft.dct(values, type=2) / n
    c[0] *= 0.5
    return c


def chop(c: np.ndarray, tol: float) -> np.ndarray:
    """Drop trailing coefficients below ``tol`` (keeps at least one)."""
    big = np.nonzero(np.abs(c) > tol)[0]
    if big.size == 0:
        return c[:1].copy()
    return c[: big[-1] + 1].copy()


def fit(g, n0: int = 32, nmax: int = 8192, tol: float = 1e-14) -> np.ndarray:
    """Adaptive Chebyshev fit of ``g`` on [-1, 1].

    Doubles the number of first-kind nodes until the trailing sixteenth of the
    coefficients drops below ``tol`` relative to the largest one.
    """
    n = n0
    while True:
        c = coefficients_from_values(g(first_kind_nodes(n)))
        scale = max(np.abs(c).max(), _TINY)
        tail = np.abs(c[-max(4, n // 16):])
        if np.all(tail < tol * scale) or n >= nmax:
            return chop(c, 0.1 * tol * scale)
        n *= 2


def evaluate(c: np.ndarray, t) -> np.ndarray:
    """Evaluate the series at real points ``t`` (Clenshaw)."""
    return np.polynomial.chebyshev.chebval(t, c)


def _u_series(d: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sum_j d_j U_j(x) by Clenshaw recurrence."""
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for dj in d[::-1]:
        b1, b2 = dj + 2.0 * x * b1 - b2, b1
    return b1


def cumulative(c: np.ndarray, t) -> np.ndarray:
    """Integral of ``g(s) / sqrt(1 - s^2)`` over [-1, t].

    With ``t = -cos(theta)`` this is ``c_0 theta + sum_k c_k (-1)^k sin(k theta)/k``.
    """
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    theta = np.arccos(-t)
    out = c[0] * theta
    if c.size > 1:
        k = np.arange(1, c.size)
        d = c[1:] * (-1.0) ** k / k
        out = out + np.sin(theta) * _u_series(d, np.cos(theta))
    return out


def cumulative_theta(c: np.ndarray, theta) -> np.ndarray:
    """Same as :func:`cumulative` but parametrised by ``theta`` in [0, pi]."""
    theta = np.asarray(theta, dtype=float)
    out = c[0] * theta
    if c.size > 1:
        k = np.arange(1, c.size)
        d = c[1:] * (-1.0) ** k / k
        out = out + np.sin(theta) * _u_series(d, np.cos(theta))
    return out


def g_theta(c: np.ndarray, theta) -> np.ndarray:
    """``g(-cos theta)``; the density in the angle variable."""
    return evaluate(c, -np.cos(np.asarray(theta, dtype=float)))


def stieltjes(c: np.ndarray, s, sm1=None, sp1=None) -> np.ndarray:
    """``int_{-1}^{1} g(t) / (sqrt(1 - t^2) (s - t)) dt`` for ``s`` off [-1, 1].

    Uses ``int T_k / (sqrt(1-t^2)(s-t)) = pi zeta^k / sqrt(s^2-1)`` with
    ``zeta = s - sqrt(s^2 - 1)``, ``|zeta| < 1``.  ``sm1``/``sp1`` may carry
    ``s - 1`` and ``s + 1`` computed without rounding near the endpoints.
    """
    s = np.asarray(s, dtype=complex)
    # Force a definite zero sign on real inputs so the branch is s-like at infinity.
    s = np.where(s.imag == 0.0, s.real + 0.0j, s)
    sm1 = s - 1.0 if sm1 is None else np.where(s.imag == 0.0, np.real(sm1) + 0.0j, sm1)
    sp1 = s + 1.0 if sp1 is None else np.where(s.imag == 0.0, np.real(sp1) + 0.0j, sp1)
    r = np.sqrt(sm1) * np.sqrt(sp1)
    zeta = 1.0 / (s + r)
    acc = np.zeros_like(s)
    for ck in c[::-1]:
        acc = acc * zeta + ck
    return np.pi * acc / r
