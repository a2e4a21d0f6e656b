"""Personalized training sets for a target user built from other users' data.

Three strategies are supported:

``baseline``
    the target's normal beats, every abnormal beat of the other users and
    enough randomly chosen normal beats of the other users to balance the
    classes.
``abs``
    the target's normal beats plus one synthesized abnormal beat per filter
    of an abnormal-beat-synthesis library estimated on the other users.
``da``
    the baseline composition, with each other user's beats first carried
    into the target's morphology by a learned transformation (one per user
    and channel).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.model_selection import train_test_split

from ..adaptation.abs import (DEFAULT_ABS_RIDGE, DEFAULT_FILTER_LENGTH,
                              DEFAULT_PRUNE_THRESHOLD, AbsLibrary,
                              average_normal_beat, build_abs_library,
                              synthesize_beatset)
from ..adaptation.mtm import MorphTransform, apply_mtm, learn_mtm
from ..exceptions import (EmptyTrainingSet, InvalidArgument, RankDeficient,
                          ZsecgError)
from ..ingest.records import BeatSet, EcgRecord
from ..ingest.segment import PatientSplit, make_patient_split, segment_record
from ..sparse.dictionary import (DEFAULT_LAMBDA, DEFAULT_RIDGE, Annihilator,
                                 Dictionary, LsOperator, build_annihilator,
                                 build_ls_operator, learn_dictionary)

logger = logging.getLogger(__name__)

STRATEGIES = ("baseline", "abs", "da")
_ALIASES = {"baseline": "baseline", "abs": "abs", "da": "da",
            "domainadaptation": "da", "domain_adaptation": "da",
            "abnormalbeatsynthesis": "abs"}

# keeps eta * (1 + gamma) * lambda_max(S S^T) safely below 2
_STABILITY_MARGIN = 1.9


def strategy_name(kind) -> str:
    key = str(kind).strip().lower().replace("-", "_")
    if key not in _ALIASES:
        raise InvalidArgument(f"unknown strategy {kind!r}; expected one of {STRATEGIES}")
    return _ALIASES[key]


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "baseline"
    n_atoms: int = 20
    lam: float = DEFAULT_LAMBDA
    dict_iters: int = 30
    ridge: float = DEFAULT_RIDGE
    gamma: float = 0.2
    eta: float = 0.002
    epochs: int = 25
    filter_length: int = DEFAULT_FILTER_LENGTH
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    abs_ridge: float = DEFAULT_ABS_RIDGE
    train_minutes: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "kind", strategy_name(self.kind))
        if self.n_atoms < 1 or self.dict_iters < 0:
            raise InvalidArgument("n_atoms must be >= 1 and dict_iters >= 0")
        if self.lam <= 0 or self.ridge <= 0 or self.abs_ridge < 0:
            raise InvalidArgument("regularization weights must be positive")
        if self.gamma <= 0 or self.eta <= 0 or self.epochs < 0:
            raise InvalidArgument("need gamma > 0, eta > 0 and epochs >= 0")
        if self.filter_length < 1:
            raise InvalidArgument("filter_length must be positive")
        if self.train_minutes <= 0:
            raise InvalidArgument("train_minutes must be positive")

    def as_dict(self):
        return asdict(self)


@dataclass
class UserModel:
    """Normal-beat models of one user: per-channel dictionaries and the
    operators derived from the single-beat dictionary."""

    dictionary: Dictionary
    trio_dictionary: Dictionary
    annihilator: Annihilator
    ls_operator: LsOperator


def fit_user_model(normals: BeatSet, cfg: StrategyConfig = StrategyConfig(),
                   seed=0, patient_id="") -> UserModel:
    if len(normals) == 0:
        raise EmptyTrainingSet(f"{patient_id}: no normal beats to learn from")
    if len(normals) < cfg.n_atoms:
        raise EmptyTrainingSet(f"{patient_id}: {len(normals)} normal beats is fewer "
                               f"than {cfg.n_atoms} atoms")
    kw = dict(n=cfg.n_atoms, lam=cfg.lam, iters=cfg.dict_iters, seed=seed,
              patient_id=patient_id)
    D = learn_dictionary(normals.single.T, **kw)
    D3 = learn_dictionary(normals.trio.T, **kw)
    try:
        F = build_annihilator(D)
    except RankDeficient as exc:
        raise EmptyTrainingSet(f"{patient_id}: {exc}") from exc
    return UserModel(D, D3, F, build_ls_operator(D.atoms, cfg.ridge))


def segment_corpus(records) -> dict:
    """``{patient_id: BeatSet}`` from records (or pass BeatSets through)."""
    out = {}
    for r in records:
        if isinstance(r, EcgRecord):
            out[r.patient_id] = segment_record(r)
        else:
            out[str(r.patient_id[0]) if len(r) else f"#{len(out)}"] = r
    return out


def stratified_split_indices(y, ratio=0.8, seed=0):
    """Index arrays (train, val), stratified by class when possible."""
    y = np.asarray(y)
    if not 0.0 < ratio < 1.0:
        raise InvalidArgument(f"ratio {ratio} not in (0, 1)")
    idx = np.arange(len(y))
    if len(y) < 2:
        raise InvalidArgument("need at least two samples to split")
    _, counts = np.unique(y, return_counts=True)
    n_train = int(round(ratio * len(y)))
    n_train = min(max(n_train, 1), len(y) - 1)
    stratify = y if counts.min() >= 2 and len(counts) <= min(n_train, len(y) - n_train) else None
    tr, va = train_test_split(idx, train_size=n_train, stratify=stratify,
                              random_state=seed)
    return np.sort(tr), np.sort(va)


def split_train_val(dataset: BeatSet, ratio=0.8, seed=0):
    tr, va = stratified_split_indices(dataset.y, ratio, seed)
    return dataset.subset(tr), dataset.subset(va)


def _stable_columns(S, gamma, eta):
    """Evenly thin the columns of ``S`` until the gradient step is stable."""
    lam_max = np.linalg.norm(S, 2) ** 2
    limit = _STABILITY_MARGIN / (eta * (1.0 + gamma))
    if lam_max < limit:
        return S
    keep = max(1, int(S.shape[1] * limit / lam_max))
    while keep > 1:
        sub = S[:, np.linspace(0, S.shape[1] - 1, keep).round().astype(int)]
        if np.linalg.norm(sub, 2) ** 2 < limit:
            return sub
        keep -= 1
    return S[:, :1]


def learn_source_transforms(source: BeatSet, target: UserModel, cfg: StrategyConfig,
                            source_id="", target_id=""):
    """(single, trio) transforms from the source's early normal beats."""
    early = make_patient_split(source, cfg.train_minutes, source_id).train_normals
    out = []
    for S, D in ((early.single, target.dictionary), (early.trio, target.trio_dictionary)):
        S = _stable_columns(S.T, cfg.gamma, cfg.eta)
        out.append(learn_mtm(D, S, cfg.gamma, cfg.eta, cfg.epochs, cfg.lam,
                             source_id=source_id, target_id=target_id))
    return tuple(out)


def adapt_beats(beats: BeatSet, q_single: MorphTransform, q_trio: MorphTransform) -> BeatSet:
    if len(beats) == 0:
        return beats
    return BeatSet(apply_mtm(q_single, beats.single), apply_mtm(q_trio, beats.trio),
                   beats.labels, beats.patient_id, beats.origin, beats.time)


@dataclass
class TrainingPool:
    """Everything the per-run composition needs; seed independent.

    For ``baseline`` and ``da`` the other users' normals and abnormals are
    kept in full (already adapted for ``da``); for ``abs`` the abnormals are
    the synthesized beats and ``other_normals`` is empty.
    """

    strategy: str
    target_normals: BeatSet
    other_normals: BeatSet
    other_abnormals: BeatSet
    transforms: dict = None
    library: AbsLibrary = None
    skipped_sources: dict = None


def _others(others, target_id):
    if isinstance(others, dict):
        items = [(str(k), v) for k, v in others.items() if str(k) != target_id]
    else:
        items = [(str(b.patient_id[0]) if len(b) else "", b) for b in others]
        items = [(k, v) for k, v in items if k != target_id]
    items = [(k, v if isinstance(v, BeatSet) else segment_record(v)) for k, v in items]
    items = [(k, v) for k, v in items if len(v)]
    if not items:
        raise InvalidArgument("no other users to build a training set from")
    return items


def prepare_pool(target: PatientSplit, others, cfg: StrategyConfig,
                 user_model: UserModel | None = None) -> TrainingPool:
    if len(target.train_normals) == 0:
        raise EmptyTrainingSet(f"{target.patient_id}: no training normals")
    sources = _others(others, target.patient_id)
    kind = cfg.kind
    if kind == "abs":
        library = build_abs_library((b for _, b in sources), cfg.filter_length,
                                    cfg.abs_ridge, cfg.prune_threshold)
        avg = average_normal_beat(target.train_normals.single)
        synth = synthesize_beatset(library, avg, target.patient_id)
        return TrainingPool(kind, target.train_normals, BeatSet.empty(), synth,
                            library=library)
    normals, abnormals, transforms, skipped = [], [], {}, {}
    if kind == "da" and user_model is None:
        user_model = fit_user_model(target.train_normals, cfg, patient_id=target.patient_id)
    for sid, beats in sources:
        if kind == "da":
            try:
                qs, qt = learn_source_transforms(beats, user_model, cfg, sid,
                                                 target.patient_id)
            except ZsecgError as exc:
                logger.warning("source %s left out: %s", sid, exc)
                skipped[sid] = str(exc)
                continue
            transforms[sid] = (qs, qt)
            beats = adapt_beats(beats, qs, qt)
        normals.append(beats.normals())
        abnormals.append(beats.abnormals())
    return TrainingPool(kind, target.train_normals, BeatSet.concat(normals),
                        BeatSet.concat(abnormals), transforms=transforms,
                        skipped_sources=skipped)


def compose_training_set(pool: TrainingPool, seed=0) -> BeatSet:
    """Labelled (single, trio) training set for one run."""
    if pool.strategy == "abs":
        return BeatSet.concat([pool.target_normals, pool.other_abnormals])
    rng = np.random.default_rng(seed)
    tn, on, ab = pool.target_normals, pool.other_normals, pool.other_abnormals
    need = len(ab) - len(tn)
    if need >= len(on):
        on_sel = on
        ab = ab.subset(np.sort(rng.choice(len(ab), len(tn) + len(on), replace=False)))
    elif need >= 0:
        on_sel = on.subset(np.sort(rng.choice(len(on), need, replace=False)))
    else:
        on_sel = BeatSet.empty()
        tn = tn.subset(np.sort(rng.choice(len(tn), len(ab), replace=False)))
    return BeatSet.concat([tn, on_sel, ab])


def build_training_set(target: PatientSplit, others, strategy="baseline", seed=0,
                       user_model: UserModel | None = None) -> BeatSet:
    """One-shot convenience around :func:`prepare_pool` and
    :func:`compose_training_set`."""
    cfg = strategy if isinstance(strategy, StrategyConfig) else StrategyConfig(strategy)
    return compose_training_set(prepare_pool(target, others, cfg, user_model), seed)
