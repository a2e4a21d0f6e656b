"""scikit-learn style wrappers.  Rows of ``X`` are beats."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_beats
from .dictionary import (DEFAULT_LAMBDA, DEFAULT_RIDGE, build_annihilator,
                         build_ls_operator, learn_dictionary)
from .residuals import (ResidualKind, lae_energies, lae_flops, npe_energies,
                        npe_flops, sae_energies, sae_flops)
from .solvers import admm_lasso


class SparseDictionary(TransformerMixin, BaseEstimator):
    """Learns a normal-beat dictionary; ``transform`` returns Lasso codes.

    Fitted attributes: ``dictionary_``, ``components_`` (n_atoms x N, the
    atoms as rows), ``annihilator_`` and ``ls_operator_``.
    """

    def __init__(self, n_atoms=20, lam=DEFAULT_LAMBDA, n_iter=30, ridge=DEFAULT_RIDGE,
                 random_state=0):
        self.n_atoms = n_atoms
        self.lam = lam
        self.n_iter = n_iter
        self.ridge = ridge
        self.random_state = random_state

    def fit(self, X, y=None, patient_id=""):
        X = check_beats(X)
        self.dictionary_ = learn_dictionary(X.T, self.n_atoms, self.lam, self.n_iter,
                                            seed=self.random_state, patient_id=patient_id)
        self.components_ = self.dictionary_.atoms.T
        self.annihilator_ = build_annihilator(self.dictionary_)
        self.ls_operator_ = build_ls_operator(self.dictionary_, self.ridge)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        X = check_beats(X, length=self.n_features_in_)
        return admm_lasso(self.dictionary_.atoms, X.T, self.lam).coeffs.T


class ResidualScorer(SparseDictionary):
    """Anomaly score = residual energy of a beat on the normal dictionary.

    ``kind`` is one of SAE, NPE, LAE1, LAE2.
    """

    def __init__(self, kind="NPE", n_atoms=20, lam=DEFAULT_LAMBDA, n_iter=30,
                 ridge=DEFAULT_RIDGE, k=5, random_state=0):
        super().__init__(n_atoms=n_atoms, lam=lam, n_iter=n_iter, ridge=ridge,
                         random_state=random_state)
        self.kind = kind
        self.k = k

    def score_samples(self, X):
        check_is_fitted(self, "dictionary_")
        X = check_beats(X, length=self.n_features_in_)
        kind = ResidualKind(self.kind)
        if kind is ResidualKind.NPE:
            return npe_energies(self.annihilator_, X)
        if kind is ResidualKind.SAE:
            return sae_energies(self.dictionary_, X, self.k)
        variant = 1 if kind is ResidualKind.LAE1 else 2
        return lae_energies(self.dictionary_, self.ls_operator_, X, variant)

    @property
    def flops_per_beat(self):
        check_is_fitted(self, "dictionary_")
        N, n = self.dictionary_.shape
        kind = ResidualKind(self.kind)
        if kind is ResidualKind.NPE:
            return npe_flops(N, n)
        if kind is ResidualKind.SAE:
            return sae_flops(N, n, self.k)
        return lae_flops(N, n, 1 if kind is ResidualKind.LAE1 else 2)
