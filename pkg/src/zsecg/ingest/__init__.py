"""Reading ECG records and turning them into labelled, normalized beats."""

from .csvio import parse_csv, write_csv
from .records import (AAMI_MAP, BEAT_LENGTH, AamiClass, Beat, BeatSet,
                      BeatTrio, EcgRecord, aami_class)
from .segment import (IngestReport, PatientSplit, excluded_patients,
                      extract_beat_trio, extract_single_beat,
                      make_patient_split, resample, segment_record,
                      single_bounds, trio_bounds, unit_energy, used_patients)
from .synth import synth_corpus
from .wfdb import parse_wfdb

__all__ = [
    "AAMI_MAP", "BEAT_LENGTH", "AamiClass", "Beat", "BeatSet", "BeatTrio",
    "EcgRecord", "IngestReport", "PatientSplit", "aami_class",
    "excluded_patients", "extract_beat_trio", "extract_single_beat",
    "make_patient_split", "parse_csv", "parse_wfdb", "resample",
    "segment_record", "single_bounds", "synth_corpus", "trio_bounds",
    "unit_energy", "used_patients", "write_csv", "load_corpus",
]


def load_corpus(data_dir, fmt="wfdb", channel=0, patients=None):
    """Load every record in ``data_dir`` (optionally only ``patients``)."""
    from pathlib import Path

    data_dir = Path(data_dir)
    if fmt == "wfdb":
        paths = sorted(data_dir.glob("*.hea"))
        ids = [p.stem for p in paths]
        loader = lambda p: parse_wfdb(p, channel=channel)  # noqa: E731
    elif fmt == "csv":
        paths = sorted(p for p in data_dir.glob("*.csv")
                       if not p.name.endswith(".peaks.csv"))
        ids = [p.name[:-4] for p in paths]
        loader = parse_csv
    else:
        raise ValueError(f"unknown format {fmt!r}")
    wanted = None if patients is None else {str(p) for p in patients}
    return [loader(p) for p, i in zip(paths, ids) if wanted is None or i in wanted]
