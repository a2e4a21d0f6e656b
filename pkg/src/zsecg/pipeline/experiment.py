"""Per-patient and corpus-level experiments.

For every seed a training set is composed, split 80/20, a CNN is trained,
the NPE distributions are fitted on the training beats and the confidence
threshold is chosen on the validation beats.  The target's held-out beats
are then scored by the ensemble, the CNN alone, the likelihood classifier
alone and a plain NPE threshold.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..classifiers.cnn import CnnModel, TrainConfig, cnn_train
from ..classifiers.ensemble import (EnsembleModel, _combine, confidence_grid,
                                    f1_vs_confidence, select_confidence)
from ..classifiers.probabilistic import fit_distributions, prob_classify
from ..classifiers.threshold import best_threshold, f1_vs_threshold
from ..exceptions import EmptyTrainingSet, InvalidArgument, InvalidTrainingSet, ZsecgError
from ..ingest.records import BeatSet
from ..ingest.segment import make_patient_split
from ..metrics import METRIC_NAMES, Metrics, evaluate
from ..sparse.residuals import lae_energies, npe_energies, sae_energies
from ..sparse.dictionary import build_annihilator
from ..sparse.roc import auc
from .cascade import DEFAULT_FRACTIONS, crossfit_energies, sweep_cascade
from .datasets import (StrategyConfig, compose_training_set, fit_user_model,
                       prepare_pool, segment_corpus, split_train_val)

logger = logging.getLogger(__name__)

SYSTEMS = ("ensemble", "cnn", "prob", "threshold")
RESIDUAL_KINDS = ("SAE", "NPE", "LAE")


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    seeds: tuple = tuple(range(10))
    val_ratio: float = 0.8
    lr: float = 1e-3
    weight_decay: float = 1e-2
    batch_size: int = 128
    patience: int = 15
    max_epochs: int = 500
    npe_channel: int = 0
    sae_k: int = 5
    cascade_fractions: tuple = DEFAULT_FRACTIONS
    residual_curves: bool = True
    dictionary_seed: int = 0

    def __post_init__(self):
        if isinstance(self.strategy, (str, dict)):
            s = self.strategy
            object.__setattr__(self, "strategy", StrategyConfig(**s) if isinstance(s, dict)
                               else StrategyConfig(s))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "cascade_fractions",
                           tuple(float(f) for f in self.cascade_fractions))
        if not self.seeds:
            raise InvalidArgument("at least one seed is required")
        if self.npe_channel not in (0, 1):
            raise InvalidArgument("npe_channel must be 0 (single) or 1 (trio)")

    def train_config(self, seed) -> TrainConfig:
        return TrainConfig(lr=self.lr, weight_decay=self.weight_decay,
                           batch_size=self.batch_size, patience=self.patience,
                           max_epochs=self.max_epochs, seed=seed)

    def as_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["cascade_fractions"] = list(self.cascade_fractions)
        return d


@dataclass
class RunResult:
    seed: int
    metrics: dict                 # system -> Metrics
    confidence: float
    npe_threshold: float
    distributions: dict
    n_train: int
    n_val: int
    n_test: int
    best_epoch: int
    f1_vs_confidence: np.ndarray  # test F1 of the ensemble over the C grid
    cascade: list = field(default_factory=list)
    path_counts: dict = field(default_factory=dict)
    model: EnsembleModel = field(default=None, repr=False)


@dataclass
class PatientResult:
    patient_id: str
    strategy: str
    runs: list
    n_train_normals: int
    n_test: int
    aucs: dict = field(default_factory=dict)
    threshold_curves: dict = field(default_factory=dict)  # kind -> (grid, f1)

    def mean(self, system) -> dict:
        """Metrics averaged over runs; confusion counts are summed."""
        ms = [r.metrics[system] for r in self.runs]
        out = {k: float(np.mean([getattr(m, k) for m in ms])) for k in METRIC_NAMES}
        out.update({k: int(sum(getattr(m, k) for m in ms)) for k in ("tp", "fp", "tn", "fn")})
        return out

    def confidence_curve(self):
        return np.mean([r.f1_vs_confidence for r in self.runs], axis=0)

    def cascade_curve(self):
        keys = ("fraction_target", "fraction_npe", "f1", "flops_saved")
        n = len(self.runs[0].cascade)
        return [{k: float(np.mean([r.cascade[i][k] for r in self.runs])) for k in keys}
                for i in range(n)]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    patients: list
    skipped: dict = field(default_factory=dict)

    @property
    def strategy(self):
        return self.config.strategy.kind

    def macro(self, system="ensemble") -> dict:
        if not self.patients:
            raise InvalidArgument("no patient finished")
        per = [p.mean(system) for p in self.patients]
        return {k: float(np.mean([m[k] for m in per])) for k in METRIC_NAMES}

    def macro_f1(self, system="ensemble") -> float:
        return self.macro(system)["f1"]

    def confidence_curve(self):
        """(grid, macro-F1 of the ensemble at each C)."""
        return confidence_grid(), np.mean([p.confidence_curve() for p in self.patients], axis=0)

    def threshold_curves(self):
        out = {}
        for kind in RESIDUAL_KINDS:
            curves = [p.threshold_curves[kind] for p in self.patients if kind in p.threshold_curves]
            if curves:
                out[kind] = (curves[0][0], np.mean([c[1] for c in curves], axis=0))
        return out

    def mean_auc(self, kind) -> float:
        vals = [p.aucs[kind] for p in self.patients if kind in p.aucs]
        return float(np.mean(vals)) if vals else float("nan")

    def cascade_curve(self):
        curves = [p.cascade_curve() for p in self.patients if p.runs[0].cascade]
        if not curves:
            return []
        keys = curves[0][0].keys()
        return [{k: float(np.mean([c[i][k] for c in curves])) for k in keys}
                for i in range(len(curves[0]))]


def residual_energies(user_model, X, kind, k=5):
    if kind == "SAE":
        return sae_energies(user_model.dictionary.atoms, X, k)
    if kind == "NPE":
        return npe_energies(user_model.annihilator, X)
    if kind == "LAE":
        return lae_energies(user_model.dictionary.atoms, user_model.ls_operator, X, 2)
    raise InvalidArgument(f"unknown residual kind {kind!r}")


def _residual_study(user_model, test: BeatSet, k):
    aucs, curves = {}, {}
    y = test.y
    for kind in RESIDUAL_KINDS:
        e = residual_energies(user_model, test.single, kind, k)
        curves[kind] = f1_vs_threshold(e, y)
        if 0 < y.sum() < len(y):
            aucs[kind] = auc(e, y)
    return aucs, curves


def run_single(pool, user_model, test: BeatSet, calib_energies,
               cfg: ExperimentConfig, seed: int) -> RunResult:
    """One seeded run on a prepared training pool.

    ``calib_energies`` are the user's out-of-fold normal NPE energies used to
    calibrate the cascade (ignored when no cascade fractions are set).
    """
    ds = compose_training_set(pool, seed)
    train, val = split_train_val(ds, cfg.val_ratio, seed)
    if len(np.unique(train.y)) < 2:
        raise InvalidTrainingSet("generated training set holds a single class")
    model, hist = cnn_train(CnnModel.initialize(seed), (train.pairs, train.y),
                            (val.pairs, val.y), cfg.train_config(seed))
    ch = cfg.npe_channel
    F = user_model.annihilator if ch == 0 else build_annihilator(user_model.trio_dictionary)
    pick = (lambda b: b.single) if ch == 0 else (lambda b: b.trio)
    e_train = npe_energies(F, pick(train))
    dist = fit_distributions(e_train[train.y == 0], e_train[train.y == 1])
    ens = EnsembleModel(model, dist, F, 0.5)
    ens.confidence_threshold = select_confidence(ens, (val.pairs, pick(val), val.y))
    e_val = npe_energies(F, pick(val))
    npe_thr = best_threshold(e_val, val.y)

    logp = model.predict_log_proba(test.pairs)
    e_test = npe_energies(F, pick(test))
    ens_dec, use_cnn = _combine(logp, e_test, dist, ens.confidence_threshold)
    y = test.y
    metrics = {
        "ensemble": evaluate(ens_dec, y),
        "cnn": evaluate(logp.argmax(axis=1), y),
        "prob": evaluate(prob_classify(dist, e_test), y),
        "threshold": evaluate(e_test > npe_thr, y),
    }
    _, f1c = f1_vs_confidence(logp, e_test, y, dist)
    cascade = (sweep_cascade(F, None, e_test, ens_dec, y, cfg.cascade_fractions,
                             energies=calib_energies) if cfg.cascade_fractions else [])
    return RunResult(seed, metrics, float(ens.confidence_threshold), float(npe_thr),
                     asdict(dist), len(train), len(val), len(test), hist.best_epoch,
                     f1c, cascade, {"cnn": int(use_cnn.sum()), "prob": int((~use_cnn).sum())},
                     ens)


def run_patient_experiment(patient_id, corpus, strategy=None, n_runs=None,
                           seeds=None, config: ExperimentConfig | None = None) -> PatientResult:
    """Train and evaluate ``n_runs`` seeded detectors for one target user.

    ``corpus`` is a ``{patient_id: BeatSet}`` mapping or a list of records;
    every other patient in it serves as a source user.
    """
    cfg = config or ExperimentConfig()
    if isinstance(strategy, StrategyConfig):
        cfg = replace(cfg, strategy=strategy)
    elif strategy is not None:
        cfg = replace(cfg, strategy=replace(cfg.strategy, kind=strategy))
    if seeds is not None:
        cfg = replace(cfg, seeds=tuple(seeds))
    if n_runs is not None:
        if n_runs > len(cfg.seeds):
            cfg = replace(cfg, seeds=tuple(range(n_runs)))
        cfg = replace(cfg, seeds=cfg.seeds[:n_runs])
    beats = corpus if isinstance(corpus, dict) else segment_corpus(corpus)
    patient_id = str(patient_id)
    if patient_id not in beats:
        raise InvalidArgument(f"patient {patient_id} not in corpus")
    split = make_patient_split(beats[patient_id], cfg.strategy.train_minutes, patient_id)
    user_model = fit_user_model(split.train_normals, cfg.strategy, cfg.dictionary_seed,
                                patient_id)
    pool = prepare_pool(split, beats, cfg.strategy, user_model)
    calib = None
    if cfg.cascade_fractions:
        normals = split.train_normals.single if cfg.npe_channel == 0 else split.train_normals.trio
        s = cfg.strategy
        calib = crossfit_energies(normals, s.n_atoms, s.lam, s.dict_iters,
                                  seed=cfg.dictionary_seed)
    runs = [run_single(pool, user_model, split.test_beats, calib, cfg, s)
            for s in cfg.seeds]
    aucs, curves = ({}, {})
    if cfg.residual_curves:
        aucs, curves = _residual_study(user_model, split.test_beats, cfg.sae_k)
    logger.info("%s [%s] ensemble F1 %.4f", patient_id, cfg.strategy.kind,
                np.mean([r.metrics["ensemble"].f1 for r in runs]))
    return PatientResult(patient_id, cfg.strategy.kind, runs, len(split.train_normals),
                         len(split.test_beats), aucs, curves)


def _guarded(pid, beats, cfg):
    try:
        return pid, run_patient_experiment(pid, beats, config=cfg), None
    except (EmptyTrainingSet, InvalidTrainingSet, ZsecgError) as exc:
        logger.warning("patient %s skipped: %s", pid, exc)
        return pid, None, f"{type(exc).__name__}: {exc}"


def run_experiment(corpus, config: ExperimentConfig | None = None, patients=None,
                   n_jobs=1) -> ExperimentResult:
    """Every target patient in turn (optionally in parallel processes)."""
    cfg = config or ExperimentConfig()
    beats = corpus if isinstance(corpus, dict) else segment_corpus(corpus)
    targets = list(beats) if patients is None else [str(p) for p in patients]
    missing = [p for p in targets if p not in beats]
    if missing:
        raise InvalidArgument(f"patients not in corpus: {missing}")
    if n_jobs == 1:
        out = [_guarded(pid, beats, cfg) for pid in targets]
    else:
        from joblib import Parallel, delayed

        out = Parallel(n_jobs=n_jobs)(delayed(_guarded)(pid, beats, cfg) for pid in targets)
    done = [r for _, r, _ in out if r is not None]
    skipped = {pid: why for pid, r, why in out if r is None}
    return ExperimentResult(cfg, done, skipped)


def macro_metrics(results, system="ensemble") -> dict:
    """Macro-average over :class:`PatientResult` objects or Metrics."""
    items = list(results)
    if items and isinstance(items[0], Metrics):
        from ..metrics import macro_average

        return macro_average(items)
    return ExperimentResult(ExperimentConfig(), items).macro(system)
