"""Likelihood classifier on null-space projection energies.

Normal energies are modelled as exponential, abnormal ones as Gaussian;
both fits are closed-form maximum likelihood.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_labels
from ..exceptions import DegenerateDistribution, InvalidArgument

SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class ResidualDistributions:
    beta: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.beta > 0 or not self.sigma > 0:
            raise InvalidArgument("beta and sigma must be positive")


def fit_exponential(xs) -> float:
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise InvalidArgument("cannot fit an exponential to no data")
    if np.any(xs < 0):
        raise InvalidArgument("exponential data must be non-negative")
    return float(xs.mean())


def fit_gaussian(xs):
    """Sample mean and population (1/n) standard deviation."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size < 2:
        raise InvalidArgument("need at least two values for a Gaussian fit")
    mu = float(xs.mean())
    sigma = float(np.sqrt(np.mean((xs - mu) ** 2)))
    if sigma < SIGMA_FLOOR:
        warnings.warn(f"degenerate Gaussian fit (sigma={sigma}); using {SIGMA_FLOOR}",
                      DegenerateDistribution, stacklevel=2)
        sigma = SIGMA_FLOOR
    return mu, sigma


def exponential_pdf(x, beta):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, np.exp(-np.clip(x, 0, None) / beta) / beta, 0.0)


def gaussian_pdf(x, mu, sigma):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))


def exponential_loglik(xs, beta):
    xs = np.asarray(xs, dtype=float)
    return float(np.sum(-np.log(beta) - xs / beta))


def gaussian_loglik(xs, mu, sigma):
    xs = np.asarray(xs, dtype=float)
    return float(np.sum(-np.log(sigma * np.sqrt(2 * np.pi)) - 0.5 * ((xs - mu) / sigma) ** 2))


def fit_distributions(normal_energies, abnormal_energies) -> ResidualDistributions:
    mu, sigma = fit_gaussian(abnormal_energies)
    return ResidualDistributions(fit_exponential(normal_energies), mu, sigma)


def prob_classify(dist: ResidualDistributions, npe_energy):
    """1 (Abnormal) unless the exponential density is strictly larger."""
    x = np.asarray(npe_energy, dtype=float)
    normal = exponential_pdf(x, dist.beta) > gaussian_pdf(x, dist.mu, dist.sigma)
    out = (~normal).astype(np.int64)
    return int(out) if out.ndim == 0 else out


class NpeLikelihoodClassifier(ClassifierMixin, BaseEstimator):
    """Estimator over residual energies; ``X`` is (n,) or (n, 1)."""

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).ravel()
        y = check_binary_labels(y)
        self.distributions_ = fit_distributions(x[y == 0], x[y == 1])
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X):
        check_is_fitted(self, "distributions_")
        return prob_classify(self.distributions_, np.asarray(X, dtype=float).ravel())
