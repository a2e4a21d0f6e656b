"""Morphology transformation matrices: linear maps from a source user's
beats into a target user's normal-beat subspace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_beats, normalize_rows
from ..exceptions import Diverged, InvalidArgument
from ..sparse.dictionary import DEFAULT_LAMBDA, Dictionary, normalize_columns
from ..sparse.solvers import admm_lasso


@dataclass(frozen=True, eq=False)
class MorphTransform:
    q: np.ndarray
    source_id: str
    target_id: str
    gamma: float
    eta: float
    epochs: int
    lam: float = DEFAULT_LAMBDA


def mtm_gradient(Q, S, D, X, gamma):
    """``((1 + gamma) Q - gamma I) S S^T - D X S^T``.

    This is half the gradient of ``||QS - DX||^2 + gamma ||S - QS||^2``.
    """
    N = Q.shape[0]
    SSt = S @ S.T
    return ((1.0 + gamma) * Q - gamma * np.eye(N)) @ SSt - D @ X @ S.T


def mtm_objective(Q, S, D, X, gamma):
    A = Q @ S - D @ X
    B = S - Q @ S
    return float(np.sum(A * A) + gamma * np.sum(B * B))


def learn_mtm(D_p, S_l, gamma=0.2, eta=0.002, epochs=25, lam=DEFAULT_LAMBDA,
              source_id="", target_id="") -> MorphTransform:
    """Alternate Lasso coding of the mapped beats with gradient steps on Q.

    ``S_l`` holds the source user's beats as unit-norm columns (N x T).
    Each epoch maps and renormalizes the beats, codes them on the target
    dictionary, then takes one step along :func:`mtm_gradient` (which uses
    the raw beats).
    """
    D = D_p.atoms if isinstance(D_p, Dictionary) else np.asarray(D_p, dtype=float)
    S = np.asarray(S_l, dtype=float)
    if gamma <= 0:
        raise InvalidArgument("gamma must be positive; gamma=0 admits the trivial Q=0")
    if epochs < 0:
        raise InvalidArgument("epochs must be non-negative")
    if not target_id and isinstance(D_p, Dictionary):
        target_id = D_p.patient_id
    N = S.shape[0]
    Q = np.eye(N)
    X = None
    for epoch in range(1, epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            S_hat = normalize_columns(Q @ S)
            X = admm_lasso(D, S_hat, lam, x0=X).coeffs
            Q = Q - eta * mtm_gradient(Q, S, D, X, gamma)
        if not np.all(np.isfinite(Q)):
            raise Diverged(epoch)
    return MorphTransform(Q, source_id, target_id, gamma, eta, epochs, lam)


def apply_mtm(Q, beats) -> np.ndarray:
    """Map beats (rows, or a single vector) and renormalize to unit energy."""
    q = Q.q if isinstance(Q, MorphTransform) else np.asarray(Q, dtype=float)
    beats = np.asarray(beats, dtype=float)
    return normalize_rows(beats @ q.T)


class MorphologyAdapter(TransformerMixin, BaseEstimator):
    """Learns Q from a source user's normal beats (rows of ``X``) so that
    ``transform`` carries that user's beats into the target morphology."""

    def __init__(self, target_dictionary=None, gamma=0.2, eta=0.002, epochs=25,
                 lam=DEFAULT_LAMBDA):
        self.target_dictionary = target_dictionary
        self.gamma = gamma
        self.eta = eta
        self.epochs = epochs
        self.lam = lam

    def fit(self, X, y=None, source_id=""):
        if self.target_dictionary is None:
            raise InvalidArgument("target_dictionary is required")
        X = check_beats(X, unit_norm=True)
        self.transform_ = learn_mtm(self.target_dictionary, X.T, self.gamma, self.eta,
                                    self.epochs, self.lam, source_id=source_id)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        X = check_beats(X, length=self.n_features_in_)
        return apply_mtm(self.transform_, X)
