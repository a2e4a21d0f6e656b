"""CSV fallback format.

``<id>.csv`` holds ``sample_index,amplitude`` rows and ``<id>.peaks.csv``
holds ``peak_index,symbol`` rows, both with a header line.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..exceptions import ParseError
from .records import EcgRecord, is_mapped

DEFAULT_SAMPLING_RATE = 360.0


def _rows(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    return rows


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv(path, sampling_rate=DEFAULT_SAMPLING_RATE) -> EcgRecord:
    path = Path(path)
    peaks_path = path.with_name(path.name[:-len(".csv")] + ".peaks.csv")
    if not peaks_path.exists():
        raise ParseError(f"missing peaks file {peaks_path}")

    amplitudes = []
    for k, row in enumerate(_rows(path)):
        if len(row) < 2:
            raise ParseError(f"{path}: row {k} has {len(row)} columns")
        try:
            idx, amp = int(row[0]), float(row[1])
        except ValueError as exc:
            raise ParseError(f"{path}: non-numeric value in row {k}: {row}") from exc
        if idx != k:
            raise ParseError(f"{path}: sample_index {idx} at row {k}")
        amplitudes.append(amp)

    peaks, symbols = [], []
    for k, row in enumerate(_rows(peaks_path)):
        if len(row) < 2:
            raise ParseError(f"{peaks_path}: row {k} has {len(row)} columns")
        try:
            peaks.append(int(row[0]))
        except ValueError as exc:
            raise ParseError(f"{peaks_path}: bad peak index {row[0]!r}") from exc
        symbols.append(row[1].strip())

    keep = [k for k, s in enumerate(symbols) if is_mapped(s)]
    try:
        return EcgRecord(path.name[:-len(".csv")], np.asarray(amplitudes),
                         sampling_rate, np.asarray([peaks[k] for k in keep], dtype=np.int64),
                         tuple(symbols[k] for k in keep))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_csv(record: EcgRecord, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{record.patient_id}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_index", "amplitude"])
        for i, v in enumerate(record.samples):
            w.writerow([i, repr(float(v))])
    with open(directory / f"{record.patient_id}.peaks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["peak_index", "symbol"])
        for p, s in zip(record.r_peaks.tolist(), record.labels):
            w.writerow([p, s])
    return path
