"""Sparse coding: ADMM for the Lasso and orthogonal matching pursuit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..exceptions import InvalidArgument


@dataclass
class SparseCode:
    """Coefficients of one beat (shape ``(n,)``) or many (``(n, T)``)."""

    coeffs: np.ndarray
    k: int | None = None
    converged: bool = True
    n_iter: int = 0
    kkt: float = 0.0


def soft_threshold(v, kappa):
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def lasso_objective(D, s, x, lam):
    r = s - D @ x
    return float(np.sum(r * r) + lam * np.abs(x).sum())


def kkt_residual(D, s, x, lam):
    """Worst subgradient violation of ``||s - Dx||^2 + lam ||x||_1``.

    Returns one value per column when ``s`` is a matrix.
    """
    grad = 2.0 * D.T @ (D @ x - s)
    zero = x == 0
    viol = np.where(zero, np.maximum(0.0, np.abs(grad) - lam),
                    np.abs(grad + lam * np.sign(x)))
    return viol.max(axis=0)


def _polish(gram, dts, z, lam, max_steps=10):
    """Active-set finish started from the sign pattern of ``z``.

    Solves the stationarity equations on the current support, dropping
    coordinates whose sign flips and adding the worst KKT violator.
    Returns None when no consistent pattern is reached.
    """
    signs = np.sign(z)
    for _ in range(max_steps):
        support = np.flatnonzero(signs)
        x = np.zeros_like(z)
        if support.size:
            sub = gram[np.ix_(support, support)]
            try:
                xs = np.linalg.solve(sub, dts[support] - 0.5 * lam * signs[support])
            except np.linalg.LinAlgError:
                return None
            flipped = np.sign(xs) != signs[support]
            if flipped.any():
                signs[support[flipped]] = 0.0
                continue
            x[support] = xs
        grad = 2.0 * (gram @ x - dts)
        viol = np.where(signs == 0, np.abs(grad) - lam, -np.inf)
        j = int(np.argmax(viol))
        if viol[j] <= 0:
            return x
        signs[j] = -np.sign(grad[j])
    return None


def _kkt(gram, dts, z, lam):
    grad = 2.0 * (gram @ z - dts)
    return np.where(z == 0, np.maximum(0.0, np.abs(grad) - lam),
                    np.abs(grad + lam * np.sign(z))).max(axis=0)


def admm_lasso(D, s, lam=0.01, max_iter=500, tol=1e-6, rho=1.0, x0=None,
               polish_every=25) -> SparseCode:
    """Minimize ``||s - Dx||_2^2 + lam ||x||_1`` by ADMM.

    ``s`` may be a single beat (N,) or a matrix of beats (N, T); all
    columns share one cached Cholesky factor.  Convergence is declared when
    the KKT residual of the (exactly sparse) z-iterate is at most ``tol``
    for every column.  Every ``polish_every`` iterations, unconverged
    columns try an active-set finish: the stationarity equations are solved
    on the current support and sign pattern, and the result is kept if it
    satisfies the KKT conditions.  On hitting ``max_iter`` the best iterate
    per column is returned with ``converged=False``.
    """
    D = np.asarray(D, dtype=float)
    s = np.asarray(s, dtype=float)
    if lam <= 0:
        raise InvalidArgument("lam must be positive")
    vector = s.ndim == 1
    S = s[:, None] if vector else s
    n = D.shape[1]
    gram = D.T @ D
    dts = D.T @ S
    factor = cho_factor(2.0 * gram + rho * np.eye(n))

    z = np.zeros((n, S.shape[1])) if x0 is None else np.array(
        x0, dtype=float).reshape(n, -1).copy()
    u = np.zeros_like(z)
    best = z.copy()
    best_kkt = np.full(S.shape[1], np.inf)
    kappa = lam / rho
    it = 0
    for it in range(1, max_iter + 1):
        x = cho_solve(factor, 2.0 * dts + rho * (z - u))
        z = soft_threshold(x + u, kappa)
        u += x - z
        kkt = _kkt(gram, dts, z, lam)
        better = kkt < best_kkt
        best[:, better] = z[:, better]
        best_kkt[better] = kkt[better]
        if best_kkt.max() <= tol:
            break
        if polish_every and it % polish_every == 0:
            for j in np.flatnonzero(best_kkt > tol):
                xp = _polish(gram, dts[:, j], z[:, j], lam)
                if xp is None:
                    continue
                k = _kkt(gram, dts[:, j], xp, lam)
                if k < best_kkt[j]:
                    best[:, j] = xp
                    best_kkt[j] = k
            if best_kkt.max() <= tol:
                break
    worst = float(best_kkt.max()) if best_kkt.size else 0.0
    coeffs = best[:, 0] if vector else best
    return SparseCode(coeffs, converged=worst <= tol, n_iter=it, kkt=worst)


def omp(D, s, k) -> SparseCode:
    """Orthogonal matching pursuit with at most ``k`` atoms.

    Stops early once the residual vanishes.  Ties in atom selection go to
    the lowest index.
    """
    D = np.asarray(D, dtype=float)
    s = np.asarray(s, dtype=float)
    n = D.shape[1]
    if not 1 <= k <= n:
        raise InvalidArgument(f"k={k} outside [1, {n}]")
    x = np.zeros(n)
    residual = s.copy()
    support: list[int] = []
    scale = max(1.0, float(np.linalg.norm(s)))
    for _ in range(k):
        if np.linalg.norm(residual) <= 1e-12 * scale:
            break
        corr = np.abs(D.T @ residual)
        corr[support] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 1e-14 * scale:
            break
        support.append(j)
        sub = D[:, support]
        coef, *_ = np.linalg.lstsq(sub, s, rcond=None)
        residual = s - sub @ coef
    if support:
        x[support] = coef
    return SparseCode(x, k=k, n_iter=len(support))
