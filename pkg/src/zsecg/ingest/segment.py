"""Beat segmentation, resampling and the per-patient train/test protocol."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import EmptyTrainingSet, InvalidSegment, Skipped
from .records import (BEAT_LENGTH, AamiClass, Beat, BeatSet, BeatTrio,
                      EcgRecord, aami_class)

logger = logging.getLogger(__name__)

INWARD = 0.1
OUTWARD = 0.1


def _round(x: float) -> int:
    # half-up rather than Python's banker's rounding
    return int(np.floor(x + 0.5))


def resample(values, target_len=BEAT_LENGTH) -> np.ndarray:
    """Linearly interpolate ``values`` onto ``target_len`` uniform points.

    Both endpoints of the input are preserved.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise InvalidSegment(f"cannot resample a segment of length {values.size}")
    if values.size == target_len:
        return values.copy()
    grid = np.linspace(0.0, values.size - 1, target_len)
    return np.interp(grid, np.arange(values.size), values)


def unit_energy(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    norm = np.linalg.norm(values)
    if not np.isfinite(norm) or norm == 0:
        raise InvalidSegment("segment has zero energy")
    return values / norm


def single_bounds(left, center, right):
    return (_round(left + INWARD * (center - left)),
            _round(right - INWARD * (right - center)))


def trio_bounds(left, center, right, length=None):
    lo = _round(left - OUTWARD * (center - left))
    hi = _round(right + OUTWARD * (right - center))
    lo = max(lo, 0)
    if length is not None:
        hi = min(hi, length - 1)
    return lo, hi


def _neighbours(record: EcgRecord, i: int):
    if i <= 0 or i >= len(record.r_peaks) - 1:
        raise Skipped(f"peak {i} of {record.patient_id} lacks a neighbour")
    p = record.r_peaks
    return int(p[i - 1]), int(p[i]), int(p[i + 1])


def extract_single_beat(record: EcgRecord, i: int) -> Beat:
    left, center, right = _neighbours(record, i)
    lo, hi = single_bounds(left, center, right)
    values = unit_energy(resample(record.samples[lo:hi + 1]))
    return Beat(values, aami_class(record.labels[i]), record.patient_id, center)


def extract_beat_trio(record: EcgRecord, i: int) -> BeatTrio:
    left, center, right = _neighbours(record, i)
    lo, hi = trio_bounds(left, center, right, len(record.samples))
    values = unit_energy(resample(record.samples[lo:hi + 1]))
    return BeatTrio(values, aami_class(record.labels[i]), record.patient_id, center)


@dataclass
class IngestReport:
    patient_id: str
    n_peaks: int = 0
    n_beats: int = 0
    skipped: list = field(default_factory=list)


def segment_record(record: EcgRecord, report: IngestReport | None = None) -> BeatSet:
    """Cut every interior peak of ``record`` into a single-beat/trio pair."""
    report = report if report is not None else IngestReport(record.patient_id)
    report.n_peaks = len(record.r_peaks)
    singles, trios, labels, origins = [], [], [], []
    for i in range(len(record.r_peaks)):
        try:
            s = extract_single_beat(record, i)
            t = extract_beat_trio(record, i)
        except (Skipped, InvalidSegment) as exc:
            report.skipped.append((i, str(exc)))
            continue
        singles.append(s.values)
        trios.append(t.values)
        labels.append(s.label.value)
        origins.append(s.origin_index)
    report.n_beats = len(labels)
    if report.skipped:
        logger.debug("%s: skipped %d of %d peaks", record.patient_id,
                     len(report.skipped), report.n_peaks)
    if not labels:
        return BeatSet.empty()
    origins = np.asarray(origins)
    return BeatSet(np.array(singles), np.array(trios), np.array(labels),
                   record.patient_id, origins, origins / record.sampling_rate)


@dataclass
class PatientSplit:
    patient_id: str
    train_normals: BeatSet
    test_beats: BeatSet
    train_minutes: float = 5.0


def make_patient_split(record: EcgRecord | BeatSet, train_minutes=5.0,
                       patient_id=None) -> PatientSplit:
    """Normal beats before ``train_minutes`` train; everything else tests."""
    beats = record if isinstance(record, BeatSet) else segment_record(record)
    if patient_id is None:
        patient_id = (record.patient_id if isinstance(record, EcgRecord)
                      else (str(beats.patient_id[0]) if len(beats) else ""))
    early = beats.time < train_minutes * 60.0
    train = early & (beats.labels == AamiClass.N.value)
    if not train.any():
        raise EmptyTrainingSet(
            f"{patient_id}: no normal beats in the first {train_minutes} minutes")
    return PatientSplit(patient_id, beats.subset(train), beats.subset(~train),
                        train_minutes)


EXCLUDED_PACEMAKER = frozenset({"102", "104", "107", "217"})
EXCLUDED_VARIABLE = frozenset({"105", "114", "201", "202", "207", "209",
                               "213", "222", "223", "234"})

MITBIH_RECORDS = (
    "100", "101", "102", "103", "104", "105", "106", "107", "108", "109",
    "111", "112", "113", "114", "115", "116", "117", "118", "119", "121",
    "122", "123", "124", "200", "201", "202", "203", "205", "207", "208",
    "209", "210", "212", "213", "214", "215", "217", "219", "220", "221",
    "222", "223", "228", "230", "231", "232", "233", "234",
)


def excluded_patients() -> frozenset:
    """Records left out of the experiments (pacemaker or highly variable)."""
    return EXCLUDED_PACEMAKER | EXCLUDED_VARIABLE


def used_patients() -> tuple:
    excluded = excluded_patients()
    return tuple(r for r in MITBIH_RECORDS if r not in excluded)
