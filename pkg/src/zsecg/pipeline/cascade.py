"""Two-stage monitoring: a cheap null-space check clears confidently normal
beats and only the rest reach the CNN ensemble."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..classifiers.cnn import cnn_flops
from ..classifiers.ensemble import EnsembleModel, ensemble_classify
from ..exceptions import InvalidArgument
from ..ingest.records import BeatSet
from ..metrics import Metrics, evaluate
from ..sparse.dictionary import DEFAULT_LAMBDA, Annihilator, build_annihilator, learn_dictionary
from ..sparse.residuals import npe_energies, npe_flops

NPE_ROUTE, ENSEMBLE_ROUTE, NPE_ABNORMAL_ROUTE = "npe", "ensemble", "npe_abnormal"
DEFAULT_FRACTIONS = tuple(np.round(np.arange(10) / 10, 10))


@dataclass(frozen=True)
class CascadeConfig:
    npe_fraction_target: float
    npe_low_threshold: float
    two_sided: bool = False
    npe_high_threshold: float = float("inf")

    def __post_init__(self):
        if not 0.0 <= self.npe_fraction_target <= 1.0:
            raise InvalidArgument(f"fraction {self.npe_fraction_target} not in [0, 1]")

    def as_dict(self):
        return asdict(self)


def crossfit_energies(normals, n_atoms=20, lam=DEFAULT_LAMBDA, iters=30, folds=5, seed=0):
    """Out-of-fold NPE energies of the user's training normals.

    Energies of the beats a dictionary was learned from are biased low, so
    a quantile taken on them forwards too many unseen normals.  Each fold is
    scored by a dictionary learned on the remaining folds instead.
    """
    from sklearn.model_selection import KFold

    X = normals.single if isinstance(normals, BeatSet) else np.asarray(normals, dtype=float)
    if len(X) < 2 * folds:
        raise InvalidArgument(f"need at least {2 * folds} beats for {folds}-fold calibration")
    out = np.empty(len(X))
    for tr, va in KFold(folds, shuffle=True, random_state=seed).split(X):
        D = learn_dictionary(X[tr].T, min(n_atoms, len(tr) - 1), lam, iters, seed)
        out[va] = npe_energies(build_annihilator(D), X[va])
    return out


def calibrate_cascade(annihilator: Annihilator, train_normals, target_fraction,
                      two_sided=False, high_threshold=None, energies=None) -> CascadeConfig:
    """Pick the NPE energy below which ``target_fraction`` of the user's
    normals fall.

    ``train_normals`` is a BeatSet or an (n, N) array of single beats,
    scored with ``annihilator``; pass ``energies`` (for instance from
    :func:`crossfit_energies`) to calibrate on precomputed values instead.
    The threshold sits halfway between consecutive sorted energies, so
    exactly ``round(target_fraction * n)`` calibration energies lie below
    it.  With ``two_sided`` beats above ``high_threshold`` (default: the
    largest calibration energy) are flagged Abnormal without the ensemble.
    """
    if not 0.0 <= target_fraction <= 1.0:
        raise InvalidArgument(f"target fraction {target_fraction} not in [0, 1]")
    if energies is None:
        X = train_normals.single if isinstance(train_normals, BeatSet) else train_normals
        energies = npe_energies(annihilator, X)
    e = np.sort(np.asarray(energies, dtype=float))
    if e.size == 0:
        raise InvalidArgument("no calibration beats")
    k = int(round(target_fraction * e.size))
    if k == 0:
        low = -np.inf
    elif k == e.size:
        low = np.inf
    else:
        low = float(0.5 * (e[k - 1] + e[k]))
    high = float(e[-1]) if high_threshold is None else float(high_threshold)
    return CascadeConfig(float(target_fraction), float(low), bool(two_sided),
                         high if two_sided else float("inf"))


def route(cascade: CascadeConfig, npe) -> np.ndarray:
    npe = np.asarray(npe, dtype=float)
    out = np.full(npe.shape, ENSEMBLE_ROUTE, dtype=object)
    out[npe < cascade.npe_low_threshold] = NPE_ROUTE
    if cascade.two_sided:
        out[(npe > cascade.npe_high_threshold) & (out != NPE_ROUTE)] = NPE_ABNORMAL_ROUTE
    return out.astype(str)


def cascade_decisions(cascade: CascadeConfig, npe, ensemble_decisions):
    routes = route(cascade, npe)
    dec = np.asarray(ensemble_decisions, dtype=np.int64).copy()
    dec[routes == NPE_ROUTE] = 0
    dec[routes == NPE_ABNORMAL_ROUTE] = 1
    return dec, routes


def ensemble_path_flops(N=128, n=20) -> int:
    """Per-beat cost had the beat gone through the ensemble: CNN forward plus
    the probabilistic branch's null-space projection."""
    return cnn_flops() + npe_flops(N, n)


def flops_saved(routes, N=128, n=20) -> int:
    n_short = int(np.sum(np.asarray(routes) != ENSEMBLE_ROUTE))
    return n_short * (ensemble_path_flops(N, n) - npe_flops(N, n))


@dataclass
class CascadeReport:
    metrics: Metrics
    decisions: np.ndarray
    routes: np.ndarray
    fraction_npe: float
    flops_saved: int
    flops_total: int

    @property
    def route_counts(self) -> dict:
        names, counts = np.unique(self.routes, return_counts=True)
        return {str(k): int(v) for k, v in zip(names, counts)}


def _report(cascade, npe, ens_dec, truth, N, n):
    dec, routes = cascade_decisions(cascade, npe, ens_dec)
    short = routes != ENSEMBLE_ROUTE
    saved = flops_saved(routes, N, n)
    total = len(routes) * ensemble_path_flops(N, n) - saved
    return CascadeReport(evaluate(dec, truth), dec, routes,
                         float(short.mean()) if len(routes) else 0.0, saved, total)


def run_cascade(cascade: CascadeConfig, ensemble: EnsembleModel, test_beats: BeatSet,
                npe_channel=0) -> CascadeReport:
    X = test_beats.pairs
    npe_in = X[:, npe_channel]
    ens_dec, _ = ensemble_classify(ensemble, X, npe_in)
    npe = npe_energies(ensemble.annihilator, npe_in)
    N, n = npe_in.shape[1], _n_atoms(ensemble.annihilator, npe_in.shape[1])
    return _report(cascade, npe, ens_dec, test_beats.y, N, n)


def _n_atoms(annihilator: Annihilator, N) -> int:
    f = annihilator.f if isinstance(annihilator, Annihilator) else np.asarray(annihilator)
    return N - f.shape[0]


def sweep_cascade(annihilator, train_normals, npe, ensemble_decisions, truth,
                  fractions=DEFAULT_FRACTIONS, N=128, two_sided=False, energies=None):
    """Efficiency curve from precomputed test energies and ensemble decisions.

    Returns one dict per fraction with the target and realized NPE-only
    fractions, F1 and FLOPs saved.  ``energies`` are forwarded to
    :func:`calibrate_cascade`.
    """
    n = _n_atoms(annihilator, N)
    rows = []
    for frac in fractions:
        cfg = calibrate_cascade(annihilator, train_normals, frac, two_sided, energies=energies)
        rep = _report(cfg, npe, ensemble_decisions, truth, N, n)
        rows.append({"fraction_target": float(frac), "fraction_npe": rep.fraction_npe,
                     "f1": rep.metrics.f1, "flops_saved": rep.flops_saved,
                     "threshold": cfg.npe_low_threshold})
    return rows
