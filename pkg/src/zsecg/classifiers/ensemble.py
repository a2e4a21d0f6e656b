"""CNN + NPE-likelihood ensemble gated by the CNN's softmax confidence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_beats, check_binary_labels, check_pairs
from ..exceptions import InvalidArgument
from ..metrics import f1_score
from ..sparse.dictionary import Annihilator, build_annihilator, learn_dictionary
from ..sparse.residuals import npe_energies
from .cnn import Cnn1DClassifier, CnnModel
from .probabilistic import ResidualDistributions, fit_distributions, prob_classify

CNN_PATH, PROB_PATH = "cnn", "prob"


def confidence_grid():
    """The 50 uniformly spaced thresholds 0.50, 0.51, ..., 0.99."""
    return np.round(np.linspace(0.50, 0.99, 50), 10)


@dataclass
class EnsembleModel:
    cnn: CnnModel
    dist: ResidualDistributions
    annihilator: Annihilator
    confidence_threshold: float = 0.5


def _combine(cnn_log_probs, npe, dist, C):
    conf = np.exp(cnn_log_probs).max(axis=1)
    use_cnn = conf >= C
    decisions = np.where(use_cnn, cnn_log_probs.argmax(axis=1), prob_classify(dist, npe))
    return decisions.astype(np.int64), use_cnn


def ensemble_classify(ens: EnsembleModel, beat_pair, single_beat):
    """Decision(s) and branch(es) taken.

    Accepts a single (2, 128) pair with its (128,) beat, or batches.
    """
    pairs = np.asarray(beat_pair, dtype=float)
    singles = np.asarray(single_beat, dtype=float)
    one = pairs.ndim == 2
    if one:
        pairs, singles = pairs[None], singles[None]
    log_probs = ens.cnn.predict_log_proba(check_pairs(pairs))
    decisions, use_cnn = _combine(log_probs, npe_energies(ens.annihilator, singles),
                                  ens.dist, ens.confidence_threshold)
    paths = np.where(use_cnn, CNN_PATH, PROB_PATH)
    if one:
        return int(decisions[0]), str(paths[0])
    return decisions, paths


def f1_vs_confidence(cnn_log_probs, npe, labels, dist, grid=None):
    grid = confidence_grid() if grid is None else np.asarray(grid)
    f1 = np.array([f1_score(_combine(cnn_log_probs, npe, dist, C)[0], labels) for C in grid])
    return grid, f1


def select_confidence(ens: EnsembleModel, val_set) -> float:
    """Grid-search C on ``(pairs, singles, y)``; greatest C among ties."""
    pairs, singles, y = val_set
    log_probs = ens.cnn.predict_log_proba(check_pairs(pairs))
    grid, f1 = f1_vs_confidence(log_probs, npe_energies(ens.annihilator, singles), y, ens.dist)
    top = np.flatnonzero(f1 == f1.max())
    return float(grid[top[-1]])


class EnsembleClassifier(ClassifierMixin, BaseEstimator):
    """Trains the CNN, fits the NPE distributions and picks C.

    ``X`` is (n, 2, 128) with channel 0 the single beat.  ``annihilator``
    (or ``normal_beats`` to learn one) describes the target user's normal
    subspace.  C is chosen on the validation set unless
    ``confidence_threshold`` is given.
    """

    def __init__(self, annihilator=None, confidence_threshold=None, npe_channel=0,
                 cnn=None, random_state=0):
        self.annihilator = annihilator
        self.confidence_threshold = confidence_threshold
        self.npe_channel = npe_channel
        self.cnn = cnn
        self.random_state = random_state

    def fit(self, X, y, X_val=None, y_val=None, normal_beats=None):
        X = check_pairs(X)
        y = check_binary_labels(y)
        if self.annihilator is not None:
            F = self.annihilator
        elif normal_beats is not None:
            nb = check_beats(normal_beats)
            F = build_annihilator(learn_dictionary(nb.T, seed=self.random_state))
        else:
            raise InvalidArgument("need an annihilator or the user's normal beats")
        if X_val is None:
            from ..pipeline.datasets import stratified_split_indices

            tr, va = stratified_split_indices(y, 0.8, self.random_state)
            X, X_val, y, y_val = X[tr], X[va], y[tr], y[va]
        X_val = check_pairs(X_val)
        y_val = check_binary_labels(y_val)
        cnn = self.cnn if self.cnn is not None else Cnn1DClassifier(random_state=self.random_state)
        if not hasattr(cnn, "model_"):
            cnn.fit(X, y, X_val, y_val)
        energies = npe_energies(F, X[:, self.npe_channel])
        dist = fit_distributions(energies[y == 0], energies[y == 1])
        self.model_ = EnsembleModel(cnn.model_, dist, F, 0.5)
        C = self.confidence_threshold
        if C is None:
            C = select_confidence(self.model_, (X_val, X_val[:, self.npe_channel], y_val))
        self.model_.confidence_threshold = C
        self.cnn_ = cnn
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_pairs(X)
        return ensemble_classify(self.model_, X, X[:, self.npe_channel])[0]

    def paths(self, X):
        check_is_fitted(self, "model_")
        X = check_pairs(X)
        return ensemble_classify(self.model_, X, X[:, self.npe_channel])[1]
