"""Per-user dictionaries of normal beats and the operators derived from them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InvalidArgument, RankDeficient
from .solvers import admm_lasso

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.01
DEFAULT_RIDGE = 1e-3


@dataclass(frozen=True, eq=False)
class Dictionary:
    """N x n matrix of unit-norm atoms (columns), n < N."""

    atoms: np.ndarray
    patient_id: str = ""
    objective: tuple = field(default=(), repr=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2:
            raise InvalidArgument("atoms must be a matrix")
        N, n = atoms.shape
        if n >= N:
            raise InvalidArgument(f"dictionary must be undercomplete, got {N}x{n}")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise InvalidArgument("atoms must have unit l2 norm")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def shape(self):
        return self.atoms.shape


@dataclass(frozen=True, eq=False)
class Annihilator:
    """(N - n) x N matrix with orthonormal rows and ``f @ D == 0``."""

    f: np.ndarray

    @property
    def shape(self):
        return self.f.shape


@dataclass(frozen=True, eq=False)
class LsOperator:
    """Ridge pseudo-solution ``l = (D^T D + lam I)^-1 D^T`` (n x N)."""

    l: np.ndarray  # noqa: E741
    lam: float
    projector: np.ndarray = field(repr=False, default=None)  # I - D l


def normalize_columns(A):
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return A / norms


def dictionary_objective(S, D, X, lam):
    R = S - D @ X
    return float(np.sum(R * R) + lam * np.abs(X).sum())


def mod_update(S, X, eps=None):
    """Method of optimal directions: ``S X^T (X X^T + eps I)^-1``."""
    XXt = X @ X.T
    n = XXt.shape[0]
    if eps is None:
        eps = 1e-6 * np.trace(XXt) / n
    eps = max(eps, 1e-12)
    return np.linalg.solve(XXt + eps * np.eye(n), X @ S.T).T


def learn_dictionary(S, n=20, lam=DEFAULT_LAMBDA, iters=30, seed=0,
                     patient_id="", lasso_iter=500, tol=1e-6) -> Dictionary:
    """Learn an n-atom dictionary for the columns of S (N x T, unit norm).

    Alternates Lasso coding (ADMM, warm-started) with a ridge-regularized
    MOD update followed by atom renormalization.  Code rows are rescaled by
    the old atom norms so that ``D @ X`` is unchanged by renormalization.
    An update that would raise the objective is rejected and learning
    stops, so the recorded objective never increases.
    """
    S = np.asarray(S, dtype=float)
    N, T = S.shape
    if T < n:
        raise InvalidArgument(f"need at least n={n} beats, got {T}")
    if n >= N:
        raise InvalidArgument(f"n={n} must be smaller than N={N}")
    rng = np.random.default_rng(seed)
    D = normalize_columns(S[:, rng.choice(T, size=n, replace=False)]
                          + 1e-3 * rng.standard_normal((N, n)))
    code = admm_lasso(D, S, lam, max_iter=lasso_iter, tol=tol)
    X = code.coeffs
    history = [dictionary_objective(S, D, X, lam)]
    for it in range(iters):
        D_new = mod_update(S, X)
        norms = np.linalg.norm(D_new, axis=0)
        dead = norms < 1e-10
        if dead.any():
            # replace unused atoms with the worst-represented beats
            err = np.sum((S - D_new @ X) ** 2, axis=0)
            D_new[:, dead] = S[:, np.argsort(err)[::-1][:dead.sum()]]
            norms = np.linalg.norm(D_new, axis=0)
        D_new = D_new / norms
        X_new = admm_lasso(D_new, S, lam, max_iter=lasso_iter, tol=tol,
                           x0=X * norms[:, None]).coeffs
        value = dictionary_objective(S, D_new, X_new, lam)
        if value > history[-1]:
            logger.debug("MOD step %d raised objective %.6g -> %.6g; stopping",
                         it, history[-1], value)
            break
        D, X = D_new, X_new
        history.append(value)
    return Dictionary(normalize_columns(D), patient_id, tuple(history))


def build_annihilator(D, rtol=1e-10) -> Annihilator:
    """Orthonormal basis of the left null space of D, as rows."""
    atoms = D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    N, n = atoms.shape
    U, sv, _ = np.linalg.svd(atoms, full_matrices=True)
    rank = int(np.sum(sv > rtol * sv[0])) if sv.size and sv[0] > 0 else 0
    if rank < n:
        raise RankDeficient(f"dictionary rank {rank} < {n} atoms")
    f = U[:, n:].T.copy()
    f.setflags(write=False)
    return Annihilator(f)


def build_ls_operator(D, lam=DEFAULT_RIDGE) -> LsOperator:
    atoms = D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    n = atoms.shape[1]
    l = np.linalg.solve(atoms.T @ atoms + lam * np.eye(n), atoms.T)  # noqa: E741
    projector = np.eye(atoms.shape[0]) - atoms @ l
    return LsOperator(l, lam, projector)
