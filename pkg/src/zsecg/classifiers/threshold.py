from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_beats, check_binary_labels
from ..exceptions import InvalidArgument
from ..metrics import f1_score
from ..sparse.estimators import ResidualScorer

NORMAL, ABNORMAL = 0, 1


@dataclass(frozen=True)
class ThresholdClassifier:
    """Flags a beat as Abnormal when its residual energy exceeds ``threshold``."""

    kind: str
    threshold: float

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidArgument(f"threshold {self.threshold} outside [0, 1]")


def threshold_classify(clf: ThresholdClassifier, residual_energy):
    out = (np.asarray(residual_energy) > clf.threshold).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def f1_vs_threshold(energies, labels, thresholds=None):
    """F1 for every threshold on a grid (default 101 points over [0, 1])."""
    thresholds = np.linspace(0.0, 1.0, 101) if thresholds is None else np.asarray(thresholds)
    energies = np.asarray(energies)
    f1 = np.array([f1_score(energies > t, labels) for t in thresholds])
    return thresholds, f1


def best_threshold(energies, labels, thresholds=None):
    """Threshold with the highest F1 (largest such threshold on ties)."""
    grid, f1 = f1_vs_threshold(energies, labels, thresholds)
    top = np.flatnonzero(f1 == f1.max())
    return float(grid[top[-1]])


class ResidualThresholdDetector(ClassifierMixin, BaseEstimator):
    """Dictionary on normal beats + fixed threshold on residual energy.

    ``fit`` learns the dictionary from the Normal rows of ``X``; when
    ``threshold`` is None and both classes are present, the F1-maximizing
    threshold on ``X`` is used, otherwise the 99th percentile of the normal
    energies.
    """

    def __init__(self, kind="NPE", threshold=None, n_atoms=20, lam=0.01, n_iter=30,
                 k=5, random_state=0):
        self.kind = kind
        self.threshold = threshold
        self.n_atoms = n_atoms
        self.lam = lam
        self.n_iter = n_iter
        self.k = k
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_beats(X)
        y = np.zeros(len(X), dtype=np.int64) if y is None else check_binary_labels(y)
        self.scorer_ = ResidualScorer(self.kind, self.n_atoms, self.lam, self.n_iter,
                                      k=self.k, random_state=self.random_state)
        self.scorer_.fit(X[y == 0])
        if self.threshold is not None:
            thr = self.threshold
        elif y.min() != y.max():
            thr = best_threshold(self.scorer_.score_samples(X), y)
        else:
            thr = float(np.clip(np.quantile(self.scorer_.score_samples(X), 0.99), 0, 1))
        self.classifier_ = ThresholdClassifier(self.kind, thr)
        self.classes_ = np.array([NORMAL, ABNORMAL])
        return self

    def score_samples(self, X):
        check_is_fitted(self, "scorer_")
        return self.scorer_.score_samples(X)

    def decision_function(self, X):
        return self.score_samples(X) - self.classifier_.threshold

    def predict(self, X):
        return threshold_classify(self.classifier_, self.score_samples(X))
