"""CSV/JSON result files.

Floats are written with ``repr`` so they parse back bit-for-bit, and rows
are emitted in a fixed order so identical results give identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..metrics import METRIC_NAMES, Metrics
from .experiment import SYSTEMS, ExperimentResult

COUNT_NAMES = ("tp", "fp", "tn", "fn")
FILES = ("metrics_per_run.csv", "metrics_per_patient.csv", "metrics_aggregate.csv",
         "confusion.csv", "aucs.csv", "f1_vs_threshold.csv", "f1_vs_confidence.csv",
         "efficiency.csv", "config.json")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _metric_row(m):
    if isinstance(m, Metrics):
        return [getattr(m, k) for k in METRIC_NAMES + COUNT_NAMES]
    return [m[k] for k in METRIC_NAMES + COUNT_NAMES]


def emit_results(results, out_dir) -> list:
    """Write every result file for one or more experiments; returns paths."""
    if isinstance(results, ExperimentResult):
        results = [results]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_run, per_patient, aggregate, confusion = [], [], [], []
    aucs, thr, conf, eff = [], [], [], []
    configs = {}
    for res in results:
        s = res.strategy
        for p in res.patients:
            for r in p.runs:
                for system in SYSTEMS:
                    per_run.append([s, p.patient_id, r.seed, system]
                                   + _metric_row(r.metrics[system]))
            for system in SYSTEMS:
                mean = p.mean(system)
                per_patient.append([s, p.patient_id, system] + _metric_row(mean))
                confusion.append([s, p.patient_id, system] + [mean[k] for k in COUNT_NAMES])
            for kind, value in sorted(p.aucs.items()):
                aucs.append([s, p.patient_id, kind, value])
        if res.patients:
            for system in SYSTEMS:
                macro = res.macro(system)
                aggregate.append([s, system, len(res.patients)]
                                 + [macro[k] for k in METRIC_NAMES])
            for kind, (grid, f1) in res.threshold_curves().items():
                thr.extend([s, kind, t, v] for t, v in zip(grid, f1))
            grid, f1 = res.confidence_curve()
            conf.extend([s, c, v] for c, v in zip(grid, f1))
            for row in res.cascade_curve():
                eff.append([s, row["fraction_target"], row["fraction_npe"], row["f1"],
                            row["flops_saved"]])
        configs[s] = {
            "config": res.config.as_dict(),
            "seeds": list(res.config.seeds),
            "patients": [p.patient_id for p in res.patients],
            "skipped": dict(sorted(res.skipped.items())),
            "runs": {p.patient_id: [{"seed": r.seed, "confidence": r.confidence,
                                     "npe_threshold": r.npe_threshold,
                                     "distributions": r.distributions,
                                     "n_train": r.n_train, "n_val": r.n_val,
                                     "n_test": r.n_test, "best_epoch": r.best_epoch,
                                     "path_counts": r.path_counts}
                                    for r in p.runs] for p in res.patients},
        }
    names = list(METRIC_NAMES + COUNT_NAMES)
    _write(out / FILES[0], ["strategy", "patient_id", "seed", "system"] + names, per_run)
    _write(out / FILES[1], ["strategy", "patient_id", "system"] + names, per_patient)
    _write(out / FILES[2], ["strategy", "system", "n_patients"] + list(METRIC_NAMES), aggregate)
    _write(out / FILES[3], ["strategy", "patient_id", "system"] + list(COUNT_NAMES), confusion)
    _write(out / FILES[4], ["strategy", "patient_id", "kind", "auc"], aucs)
    _write(out / FILES[5], ["strategy", "kind", "threshold", "f1"], thr)
    _write(out / FILES[6], ["strategy", "confidence", "f1"], conf)
    _write(out / FILES[7], ["strategy", "fraction_target", "fraction_npe", "f1",
                            "flops_saved"], eff)
    with open(out / FILES[8], "w") as fh:
        json.dump({"version": __version__, "experiments": configs}, fh, indent=2,
                  sort_keys=True, default=_json_default)
        fh.write("\n")
    return [out / f for f in FILES]


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_run_metrics(path) -> list:
    """``(strategy, patient_id, seed, system, Metrics)`` rows of a per-run file."""
    out = []
    for row in read_csv(path):
        m = Metrics(**{k: float(row[k]) for k in METRIC_NAMES},
                    **{k: int(row[k]) for k in COUNT_NAMES})
        out.append((row["strategy"], row["patient_id"], int(row["seed"]), row["system"], m))
    return out


def write_series(path, header, rows):
    """Generic plot-ready CSV (used by the sweep commands)."""
    _write(path, header, rows)
