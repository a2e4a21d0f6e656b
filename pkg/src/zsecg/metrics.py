"""Binary classification metrics with Abnormal (1) as the positive class."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import InvalidArgument

METRIC_NAMES = ("accuracy", "specificity", "precision", "recall", "f1")


def _ratio(num, den):
    return num / den if den else 0.0


@dataclass
class Metrics:
    accuracy: float
    specificity: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_counts(cls, tp, fp, tn, fn) -> "Metrics":
        """Zero denominators give 0 rather than NaN."""
        tp, fp, tn, fn = int(tp), int(fp), int(tn), int(fn)
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = _ratio(2 * precision * recall, precision + recall)
        return cls(accuracy=_ratio(tp + tn, tp + fp + tn + fn),
                   specificity=_ratio(tn, tn + fp), precision=precision,
                   recall=recall, f1=f1, tp=tp, fp=fp, tn=tn, fn=fn)

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self):
        return asdict(self)


def confusion(predictions, truth):
    p = np.asarray(predictions).astype(bool).ravel()
    t = np.asarray(truth).astype(bool).ravel()
    if p.shape != t.shape:
        raise InvalidArgument("predictions and ground truth differ in length")
    return (int(np.sum(p & t)), int(np.sum(p & ~t)),
            int(np.sum(~p & ~t)), int(np.sum(~p & t)))


def evaluate(predictions, ground_truth) -> Metrics:
    return Metrics.from_counts(*confusion(predictions, ground_truth))


def f1_score(predictions, truth) -> float:
    return evaluate(predictions, truth).f1


def macro_average(metrics) -> dict:
    """Unweighted mean of each metric over patients."""
    metrics = list(metrics)
    if not metrics:
        raise InvalidArgument("nothing to average")
    return {name: float(np.mean([getattr(m, name) for m in metrics]))
            for name in METRIC_NAMES}


def pooled(metrics) -> Metrics:
    """Metrics of the summed confusion matrix."""
    metrics = list(metrics)
    return Metrics.from_counts(sum(m.tp for m in metrics), sum(m.fp for m in metrics),
                               sum(m.tn for m in metrics), sum(m.fn for m in metrics))
