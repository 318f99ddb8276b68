"""Random-matrix Monte Carlo oracle.

Independent Haar-rotated diagonal matrices are asymptotically free, so the
spectra of finite products and perpetuity partial sums approximate the free
objects computed analytically elsewhere in the package.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measure import Measure, MeasureError, empirical
from .subordination import GraphComponent, GridComponent, JointLaw

__all__ = [
    "NotSymmetric", "NoConvergence", "MatrixEnsembleConfig", "sample_spectral_diag",
    "haar_orthogonal", "haar_conjugate", "symmetric_eigenvalues", "jacobi_eigenvalues",
    "mult_power_spectra", "empirical_mult_power", "perpetuity_spectra",
    "empirical_perpetuity", "trial_rng",
]


class NotSymmetric(MeasureError):
    pass


class NoConvergence(MeasureError):
    pass


@dataclass(frozen=True)
class MatrixEnsembleConfig:
    N: int = 500
    trials: int = 20
    seed: int = 0
    n_terms: int = 60

    def __post_init__(self):
        if self.N < 2 or self.trials < 1 or self.n_terms < 1:
            raise ValueError("need N >= 2, trials >= 1 and n_terms >= 1")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Private stream per trial, derived from ``(seed, trial)``."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial)])


def sample_spectral_diag(mu: Measure, N: int, rng=None, as_matrix: bool = True):
    """Diagonal of quantiles of ``mu`` at ``(i - 1/2)/N`` (no randomness)."""
    d = mu.quantile((np.arange(N) + 0.5) / N)
    return np.diag(d) if as_matrix else d


def haar_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar orthogonal matrix: QR of a Gaussian matrix with ``diag(R) > 0``."""
    q, r = np.linalg.qr(rng.standard_normal((N, N)))
    return q * np.sign(np.diag(r))


def haar_conjugate(M: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    Q = haar_orthogonal(M.shape[0], rng)
    return Q @ M @ Q.T


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigenvalues(M, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Each round of the circle ordering applies ``n/2`` disjoint rotations at
    once.  Stops when the off-diagonal Frobenius norm drops below
    ``tol * ||M||_F``.
    """
    A = np.array(M, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise NotSymmetric("matrix must be square")
    norm = np.linalg.norm(A)
    if np.max(np.abs(A - A.T)) > 1e-10 * max(norm, 1.0):
        raise NotSymmetric("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    if n == 1 or norm == 0:
        return np.sort(np.diag(A))
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * norm:
            return np.sort(np.diag(A))
        for P, Q in rounds:
            apq = A[P, Q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            app, aqq = A[P, P], A[Q, Q]
            theta = np.where(active, (aqq - app) / (2 * np.where(active, apq, 1.0)), 0.0)
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.sign(th) / (np.abs(th) + np.sqrt(th**2 + 1))
            # very small rotations: tan(phi) ~ 1/(2 theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            t = np.where(active & (theta == 0), 1.0, np.where(active, t, 0.0))
            c = 1 / np.sqrt(1 + t**2)
            s = t * c
            colP, colQ = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = c * colP - s * colQ
            A[:, Q] = s * colP + c * colQ
            rowP, rowQ = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * rowP - s[:, None] * rowQ
            A[Q, :] = s[:, None] * rowP + c[:, None] * rowQ
    raise NoConvergence("Jacobi sweeps exhausted")


def symmetric_eigenvalues(M, method: str = "jacobi") -> np.ndarray:
    """Sorted eigenvalues; ``method`` is ``"jacobi"`` or ``"lapack"``."""
    if method == "jacobi":
        return jacobi_eigenvalues(M)
    A = np.asarray(M, dtype=float)
    if np.max(np.abs(A - A.T)) > 1e-10 * max(np.linalg.norm(A), 1.0):
        raise NotSymmetric("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (A + A.T))


def _eig(M, method):
    return symmetric_eigenvalues(M, method)


def _map_trials(fn, trials: int, workers: int):
    """``[fn(k) for k in range(trials)]``, optionally on a thread pool.

    Each trial draws from its own stream, so the output does not depend on
    ``workers``.
    """
    if workers <= 1:
        return [fn(k) for k in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def mult_power_spectra(mu: Measure, n: int, config: MatrixEnsembleConfig, method: str = "lapack",
                       workers: int = 1):
    """Eigenvalues of ``Pi_n`` for each trial (list of sorted arrays)."""
    if mu.support()[0] < 0:
        raise MeasureError("multiplicative powers need a nonnegative law")
    d = sample_spectral_diag(mu, config.N, as_matrix=False)
    root = np.sqrt(np.maximum(d, 0.0))

    def trial(k):
        rng = trial_rng(config.seed, k)
        Y = np.diag(d)
        for _ in range(n - 1):
            Q = haar_orthogonal(config.N, rng)
            Y = root[:, None] * (Q.T @ Y @ Q) * root[None, :]
            Y = 0.5 * (Y + Y.T)
        return _eig(Y, method)

    return _map_trials(trial, config.trials, workers)


def empirical_mult_power(mu: Measure, n: int, config: MatrixEnsembleConfig, method: str = "lapack",
                         workers: int = 1) -> Measure:
    """Empirical law of ``Pi_n`` pooled over trials (atoms)."""
    spectra = mult_power_spectra(mu, n, config, method, workers)
    return empirical(np.concatenate(spectra), support_kind="nonnegative")


def _pair_diagonals(rho: JointLaw, N: int):
    """Jointly sampled ``(a_i, b_i)``: stratified counts per component, quantiles within."""
    weights = np.array([c.weight for c in rho.components])
    counts = np.floor(weights * N).astype(int)
    rem = N - counts.sum()
    order = np.argsort(-(weights * N - counts), kind="stable")
    counts[order[:rem]] += 1
    a_parts, b_parts = [], []
    for c, m in zip(rho.components, counts):
        if m == 0:
            continue
        if isinstance(c, GraphComponent):
            s = c.base.quantile((np.arange(m) + 0.5) / m)
            a_parts.append(s**c.power)
            b_parts.append(c.beta * s + c.beta0)
        elif isinstance(c, GridComponent):
            p = c.w / c.weight
            idx = np.searchsorted(np.cumsum(p), (np.arange(m) + 0.5) / m)
            idx = np.minimum(idx, p.size - 1)
            a_parts.append(c.a[idx])
            b_parts.append(c.b[idx])
    return np.concatenate(a_parts), np.concatenate(b_parts)


def perpetuity_spectra(rho: JointLaw, config: MatrixEnsembleConfig, method: str = "lapack",
                       workers: int = 1):
    """Eigenvalues of the truncated perpetuity sum for each trial.

    The nested form ``X <- A_k^{1/2} X A_k^{1/2} + B_k`` (``k = n-1, ..., 1``,
    starting from ``B_n``) equals the partial sum of the series exactly.
    """
    a, b = _pair_diagonals(rho, config.N)
    root = np.sqrt(a)

    def trial(k):
        rng = trial_rng(config.seed, k)
        X = np.diag(b)
        for _ in range(config.n_terms - 1):
            Q = haar_orthogonal(config.N, rng)
            X = root[:, None] * (Q.T @ X @ Q) * root[None, :]
            X[np.diag_indices_from(X)] += b
            X = 0.5 * (X + X.T)
        return _eig(X, method)

    return _map_trials(trial, config.trials, workers)


def empirical_perpetuity(rho: JointLaw, config: MatrixEnsembleConfig, method: str = "lapack",
                         workers: int = 1) -> Measure:
    """Empirical law of the truncated perpetuity series pooled over trials."""
    spectra = perpetuity_spectra(rho, config, method, workers)
    kind = "nonnegative" if rho.b_nonnegative() else None
    return empirical(np.concatenate(spectra), support_kind=kind)
