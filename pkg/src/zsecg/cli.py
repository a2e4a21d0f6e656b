"""Command-line interface (``zsecg``)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as zio
from .exceptions import ZsecgError

logger = logging.getLogger("zsecg")


def _load_beats(args):
    """``{patient_id: BeatSet}`` from ``--data-dir`` or ``--synthetic``."""
    from .ingest import load_corpus, synth_corpus
    from .pipeline.datasets import segment_corpus

    if getattr(args, "synthetic", None) is not None:
        records = synth_corpus(args.synthetic, n_patients=args.synthetic_patients,
                               beats_per_patient=args.synthetic_beats,
                               difficulty=args.synthetic_difficulty)
    elif getattr(args, "data_dir", None):
        records = load_corpus(args.data_dir, fmt=args.format, channel=args.channel)
    else:
        raise ZsecgError("give --data-dir or --synthetic SEED")
    return segment_corpus(records)


def _add_corpus_args(p):
    p.add_argument("--data-dir")
    p.add_argument("--format", choices=("wfdb", "csv"), default="wfdb")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--synthetic", type=int, metavar="SEED",
                   help="use a generated corpus instead of --data-dir")
    p.add_argument("--synthetic-patients", type=int, default=6)
    p.add_argument("--synthetic-beats", type=int, default=600)
    p.add_argument("--synthetic-difficulty", type=float, default=1.0)


def _add_experiment_args(p):
    _add_corpus_args(p)
    p.add_argument("--config", help="JSON file of defaults; flags override it")
    p.add_argument("--strategy", choices=("baseline", "abs", "da"))
    p.add_argument("--patients", help="'all' or comma-separated ids")
    p.add_argument("--runs", type=int)
    p.add_argument("--seeds", help="e.g. 0..9 or 0,1,2")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--epochs", type=int, help="MTM epochs")
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--out", default="results")


def _experiment_values(args):
    from .pipeline.config import load_config, merge

    flags = {k: getattr(args, k, None) for k in
             ("strategy", "patients", "runs", "seeds", "max_epochs", "patience",
              "gamma", "eta", "epochs", "n_jobs")}
    return merge(load_config(args.config), flags)


def _targets(values, beats):
    from .ingest import excluded_patients
    from .pipeline.config import parse_patients

    chosen = parse_patients(values.get("patients"), set(beats))
    if chosen is None:
        excluded = excluded_patients()
        chosen = [p for p in beats if p not in excluded]
    return chosen


def _run_experiment(args, **overrides):
    from .pipeline.config import experiment_config
    from .pipeline.experiment import run_experiment

    values = _experiment_values(args)
    values.update(overrides)
    cfg = experiment_config(values)
    beats = _load_beats(args)
    targets = _targets(values, beats)
    return run_experiment(beats, cfg, targets, n_jobs=int(values.get("n_jobs") or 1))


def cmd_ingest(args):
    from .ingest import BeatSet, IngestReport, load_corpus, segment_record

    records = load_corpus(args.data_dir, fmt=args.format, channel=args.channel,
                          patients=args.patients.split(",") if args.patients else None)
    sets = []
    for rec in records:
        rep = IngestReport(rec.patient_id)
        sets.append(segment_record(rec, rep))
        print(f"{rec.patient_id}: {rep.n_beats} beats, {len(rep.skipped)} skipped")
    beats = BeatSet.concat(sets)
    beats.save(args.out)
    print(f"wrote {len(beats)} beats to {args.out}")


def _patient_normals(beats, pid, minutes):
    from .ingest import make_patient_split

    sel = beats.subset(beats.patient_id == pid)
    if len(sel) == 0:
        raise ZsecgError(f"patient {pid} not in the beat file")
    return make_patient_split(sel, minutes, pid).train_normals


def cmd_learn_dict(args):
    from .ingest import BeatSet
    from .sparse import learn_dictionary

    beats = BeatSet.load(args.inp)
    pid = args.patient or str(beats.patient_id[0])
    normals = _patient_normals(beats, pid, args.train_minutes)
    S = (normals.single if args.channel == "single" else normals.trio).T
    D = learn_dictionary(S, n=args.n, lam=args.lam, iters=args.iters, seed=args.seed,
                         patient_id=pid)
    zio.save(D, args.out, {"source": str(args.inp), "patient_id": pid,
                           "channel": args.channel, "n_beats": int(S.shape[1]),
                           "lambda": args.lam, "seed": args.seed})
    print(f"{pid}: {D.shape[0]}x{D.shape[1]} dictionary, final objective "
          f"{D.objective[-1] if D.objective else float('nan'):.6g} -> {args.out}")


def cmd_learn_mtm(args):
    from .adaptation import learn_mtm
    from .ingest import BeatSet

    D = zio.load(args.dict, "dictionary")
    beats = BeatSet.load(args.inp)
    normals = _patient_normals(beats, args.source, args.train_minutes)
    S = (normals.single if args.channel == "single" else normals.trio).T
    q = learn_mtm(D, S, args.gamma, args.eta, args.epochs, args.lam,
                  source_id=args.source, target_id=D.patient_id)
    zio.save(q, args.out, {"dictionary": str(args.dict), "beats": str(args.inp)})
    print(f"MTM {args.source} -> {D.patient_id or '?'} -> {args.out}")


def cmd_build_dataset(args):
    from .ingest import BeatSet, make_patient_split
    from .pipeline.datasets import StrategyConfig, build_training_set

    beats = BeatSet.load(args.inp)
    ids = list(dict.fromkeys(beats.patient_id.tolist()))
    corpus = {p: beats.subset(beats.patient_id == p) for p in ids}
    if args.target not in corpus:
        raise ZsecgError(f"patient {args.target} not in the beat file")
    split = make_patient_split(corpus[args.target], args.train_minutes, args.target)
    ds = build_training_set(split, corpus, StrategyConfig(args.strategy,
                                                          train_minutes=args.train_minutes),
                            seed=args.seed)
    ds.save(args.out)
    print(f"{args.strategy} training set for {args.target}: {len(ds)} beats "
          f"({int(ds.y.sum())} abnormal) -> {args.out}")


def cmd_train_cnn(args):
    from .classifiers import CnnModel, TrainConfig, cnn_train
    from .ingest import BeatSet
    from .pipeline.datasets import split_train_val

    ds = BeatSet.load(args.dataset)
    train, val = split_train_val(ds, 0.8, args.seed)
    cfg = TrainConfig(max_epochs=args.max_epochs, patience=args.patience, seed=args.seed)
    model, hist = cnn_train(CnnModel.initialize(args.seed), (train.pairs, train.y),
                            (val.pairs, val.y), cfg)
    zio.save(model, args.out, {"dataset": str(args.dataset), "seed": args.seed,
                               "best_epoch": hist.best_epoch,
                               "best_val_loss": hist.best_val_loss,
                               "epochs_run": len(hist.val_loss)})
    acc = float(np.mean(model.predict_log_proba(val.pairs).argmax(1) == val.y))
    print(f"best epoch {hist.best_epoch}, val loss {hist.best_val_loss:.4f}, "
          f"val accuracy {acc:.4f} -> {args.out}")


def _print_summary(res):
    from .pipeline.experiment import SYSTEMS

    if not res.patients:
        print("no patient finished")
        return
    for system in SYSTEMS:
        m = res.macro(system)
        print(f"[{res.strategy}] {system:9s} " + " ".join(f"{k}={v:.4f}" for k, v in m.items()))
    for pid, why in res.skipped.items():
        print(f"skipped {pid}: {why}")


def cmd_run(args):
    from .pipeline.results import emit_results

    res = _run_experiment(args)
    emit_results(res, args.out)
    _print_summary(res)
    print(f"results in {args.out}")


def cmd_cascade(args):
    from .pipeline.results import emit_results

    fractions = sorted({0.0, float(args.fraction)})
    res = _run_experiment(args, cascade_fractions=tuple(fractions), residual_curves=False)
    emit_results(res, args.out)
    curve = {round(r["fraction_target"], 10): r for r in res.cascade_curve()}
    base, cas = curve[0.0], curve[round(float(args.fraction), 10)]
    print(f"plain ensemble macro-F1 {base['f1']:.4f}")
    print(f"cascade target {args.fraction}: NPE-only fraction {cas['fraction_npe']:.4f}, "
          f"macro-F1 {cas['f1']:.4f}, FLOPs saved per patient {cas['flops_saved']:.0f}")


def cmd_sweep_confidence(args):
    from .pipeline.results import write_series

    res = _run_experiment(args, residual_curves=False)
    grid, f1 = res.confidence_curve()
    Path(args.out).mkdir(parents=True, exist_ok=True)
    path = Path(args.out) / "f1_vs_confidence.csv"
    write_series(path, ["confidence", "f1"], zip(grid, f1))
    best = int(np.flatnonzero(f1 == f1.max())[-1])
    print(f"best C {grid[best]:.2f} (macro-F1 {f1[best]:.4f}); "
          f"CNN alone {res.macro_f1('cnn'):.4f} -> {path}")


def cmd_sweep_threshold(args):
    from .ingest import make_patient_split
    from .pipeline.config import load_config, merge
    from .pipeline.datasets import StrategyConfig, fit_user_model
    from .pipeline.experiment import RESIDUAL_KINDS, _residual_study
    from .pipeline.results import write_series

    values = merge(load_config(args.config), {"patients": args.patients})
    beats = _load_beats(args)
    cfg = StrategyConfig()
    curves, aucs = {k: [] for k in RESIDUAL_KINDS}, {k: [] for k in RESIDUAL_KINDS}
    grid = None
    for pid in _targets(values, beats):
        try:
            split = make_patient_split(beats[pid], cfg.train_minutes, pid)
            um = fit_user_model(split.train_normals, cfg, patient_id=pid)
        except ZsecgError as exc:
            print(f"skipped {pid}: {exc}")
            continue
        a, c = _residual_study(um, split.test_beats, args.k)
        for kind in RESIDUAL_KINDS:
            grid = c[kind][0]
            curves[kind].append(c[kind][1])
            if kind in a:
                aucs[kind].append(a[kind])
    Path(args.out).mkdir(parents=True, exist_ok=True)
    path = Path(args.out) / "f1_vs_threshold.csv"
    rows = [(kind, t, v) for kind in RESIDUAL_KINDS if curves[kind]
            for t, v in zip(grid, np.mean(curves[kind], axis=0))]
    write_series(path, ["kind", "threshold", "f1"], rows)
    for kind in RESIDUAL_KINDS:
        if aucs[kind]:
            print(f"{kind}: mean AUC {np.mean(aucs[kind]):.5f} over {len(aucs[kind])} patients")
    print(f"curves -> {path}")


def cmd_synth(args):
    from .ingest import synth_corpus, write_csv

    out = Path(args.out)
    for rec in synth_corpus(args.seed, args.patients, args.beats, difficulty=args.difficulty):
        write_csv(rec, out)
    print(f"wrote {args.patients} synthetic records to {out} (load with --format csv)")


def build_parser():
    p = argparse.ArgumentParser(prog="zsecg",
                                description="Personalized zero-shot ECG arrhythmia detection.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="segment records into a beat file")
    s.add_argument("--data-dir", required=True)
    s.add_argument("--format", choices=("wfdb", "csv"), default="wfdb")
    s.add_argument("--channel", type=int, default=0)
    s.add_argument("--patients")
    s.add_argument("--out", default="beats.bin")
    s.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("sparse", help="dictionary learning")
    ssub = sp.add_subparsers(dest="sparse_command", required=True)
    s = ssub.add_parser("learn-dict")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--patient")
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--lambda", dest="lam", type=float, default=0.01)
    s.add_argument("--iters", type=int, default=30)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--channel", choices=("single", "trio"), default="single")
    s.add_argument("--train-minutes", type=float, default=5.0)
    s.add_argument("--out", default="dict.json")
    s.set_defaults(func=cmd_learn_dict)

    ap = sub.add_parser("adapt", help="domain adaptation")
    asub = ap.add_subparsers(dest="adapt_command", required=True)
    s = asub.add_parser("learn-mtm")
    s.add_argument("--dict", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--source", required=True)
    s.add_argument("--gamma", type=float, default=0.2)
    s.add_argument("--eta", type=float, default=0.002)
    s.add_argument("--epochs", type=int, default=25)
    s.add_argument("--lambda", dest="lam", type=float, default=0.01)
    s.add_argument("--channel", choices=("single", "trio"), default="single")
    s.add_argument("--train-minutes", type=float, default=5.0)
    s.add_argument("--out", default="mtm.json")
    s.set_defaults(func=cmd_learn_mtm)

    s = sub.add_parser("build-dataset", help="personalized training set for one user")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--strategy", choices=("baseline", "abs", "da"), default="da")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train-minutes", type=float, default=5.0)
    s.add_argument("--out", default="ds.bin")
    s.set_defaults(func=cmd_build_dataset)

    s = sub.add_parser("train-cnn", help="train the 1-D CNN on a dataset file")
    s.add_argument("--dataset", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-epochs", type=int, default=500)
    s.add_argument("--patience", type=int, default=15)
    s.add_argument("--out", default="model.json")
    s.set_defaults(func=cmd_train_cnn)

    s = sub.add_parser("run", help="full per-patient experiment")
    _add_experiment_args(s)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("cascade", help="energy-saving cascade at one NPE-only fraction")
    _add_experiment_args(s)
    s.add_argument("--fraction", type=float, default=0.4)
    s.set_defaults(func=cmd_cascade)

    s = sub.add_parser("sweep-confidence", help="ensemble F1 over the confidence grid")
    _add_experiment_args(s)
    s.set_defaults(func=cmd_sweep_confidence)

    s = sub.add_parser("sweep-threshold", help="residual-energy F1 over thresholds")
    _add_corpus_args(s)
    s.add_argument("--config")
    s.add_argument("--patients")
    s.add_argument("--k", type=int, default=5, help="OMP sparsity for SAE")
    s.add_argument("--out", default="results")
    s.set_defaults(func=cmd_sweep_threshold)

    s = sub.add_parser("synth", help="write a synthetic CSV corpus")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--patients", type=int, default=6)
    s.add_argument("--beats", type=int, default=600)
    s.add_argument("--difficulty", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ZsecgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
