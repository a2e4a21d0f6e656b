"""Core ECG containers: records, beats and labelled beat collections."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..exceptions import InvalidArgument, UnmappedSymbol

BEAT_LENGTH = 128

# MIT-BIH beat symbol -> AAMI class
AAMI_MAP = {
    "N": "N", "L": "N", "R": "N", "e": "N", "j": "N",
    "V": "V", "E": "V",
    "A": "S", "a": "S", "J": "S", "S": "S",
    "F": "F",
    "/": "Q", "f": "Q", "Q": "Q",
}


class AamiClass(str, Enum):
    N = "N"
    V = "V"
    S = "S"
    F = "F"
    Q = "Q"

    @property
    def is_abnormal(self) -> bool:
        return self is not AamiClass.N

    @property
    def binary(self) -> int:
        """1 for Abnormal (the positive class), 0 for Normal."""
        return int(self.is_abnormal)


def aami_class(symbol: str) -> AamiClass:
    try:
        return AamiClass(AAMI_MAP[symbol])
    except KeyError:
        raise UnmappedSymbol(symbol) from None


def is_mapped(symbol: str) -> bool:
    return symbol in AAMI_MAP


@dataclass(frozen=True, eq=False)
class EcgRecord:
    """One ECG channel with its beat annotations.

    ``labels`` are raw MIT-BIH symbols aligned with ``r_peaks``.
    """

    patient_id: str
    samples: np.ndarray
    sampling_rate: float
    r_peaks: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        peaks = np.asarray(self.r_peaks, dtype=np.int64)
        labels = tuple(self.labels)
        if samples.ndim != 1:
            raise InvalidArgument("samples must be one-dimensional")
        if self.sampling_rate <= 0:
            raise InvalidArgument("sampling_rate must be positive")
        if len(labels) != len(peaks):
            raise InvalidArgument(
                f"{len(labels)} labels for {len(peaks)} r_peaks")
        if len(peaks) and (np.any(np.diff(peaks) <= 0)
                           or peaks[0] < 0 or peaks[-1] >= len(samples)):
            raise InvalidArgument(
                "r_peaks must be strictly increasing and inside the record")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "r_peaks", peaks)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sampling_rate


@dataclass(frozen=True, eq=False)
class Beat:
    values: np.ndarray
    label: AamiClass
    patient_id: str
    origin_index: int


@dataclass(frozen=True, eq=False)
class BeatTrio(Beat):
    pass


def _rows(a, n):
    a = np.asarray(a, dtype=float)
    return a.reshape(n, -1) if n else a.reshape(0, a.shape[-1] if a.ndim > 1 else BEAT_LENGTH)


@dataclass(eq=False)
class BeatSet:
    """Column-aligned collection of single-beat / beat-trio pairs.

    Rows of ``single`` and ``trio`` are unit-energy length-128 beats.
    ``origin`` holds the sample index of each beat's central R-peak and
    ``time`` the corresponding time in seconds.
    """

    single: np.ndarray
    trio: np.ndarray
    labels: np.ndarray
    patient_id: np.ndarray
    origin: np.ndarray
    time: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.labels)
        self.single = _rows(self.single, n)
        self.trio = _rows(self.trio, n)
        self.labels = np.asarray(self.labels, dtype="<U1")
        self.patient_id = np.asarray(self.patient_id, dtype=str)
        if self.patient_id.ndim == 0:
            self.patient_id = np.full(n, str(self.patient_id))
        self.origin = np.asarray(self.origin, dtype=np.int64)
        self.time = (np.zeros(n) if self.time is None
                     else np.asarray(self.time, dtype=float))
        if not (self.single.shape[0] == self.trio.shape[0] == n
                == len(self.patient_id) == len(self.origin) == len(self.time)):
            raise InvalidArgument("BeatSet fields have inconsistent lengths")

    def __len__(self):
        return len(self.labels)

    @property
    def y(self) -> np.ndarray:
        """Binary targets, 1 = Abnormal."""
        return (self.labels != AamiClass.N.value).astype(np.int64)

    @property
    def pairs(self) -> np.ndarray:
        """Two-channel CNN input of shape (T, 2, 128)."""
        return np.stack([self.single, self.trio], axis=1)

    def subset(self, index) -> "BeatSet":
        return BeatSet(self.single[index], self.trio[index], self.labels[index],
                       self.patient_id[index], self.origin[index],
                       self.time[index])

    def normals(self) -> "BeatSet":
        return self.subset(self.y == 0)

    def abnormals(self) -> "BeatSet":
        return self.subset(self.y == 1)

    def keys(self) -> set:
        """(patient, origin) identities, used to check split integrity."""
        return set(zip(self.patient_id.tolist(), self.origin.tolist()))

    @classmethod
    def empty(cls, length=BEAT_LENGTH) -> "BeatSet":
        z = np.zeros((0, length))
        return cls(z, z.copy(), np.array([], dtype="<U1"),
                   np.array([], dtype=str), np.array([], dtype=np.int64),
                   np.array([], dtype=float))

    @classmethod
    def concat(cls, sets) -> "BeatSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            return cls.empty()
        return cls(np.concatenate([s.single for s in sets]),
                   np.concatenate([s.trio for s in sets]),
                   np.concatenate([s.labels for s in sets]),
                   np.concatenate([s.patient_id for s in sets]),
                   np.concatenate([s.origin for s in sets]),
                   np.concatenate([s.time for s in sets]))

    def save(self, path):
        # file handle keeps numpy from appending ".npz" to e.g. beats.bin
        with open(path, "wb") as fh:
            np.savez(fh, single=self.single, trio=self.trio,
                     labels=self.labels, patient_id=self.patient_id,
                     origin=self.origin, time=self.time)

    @classmethod
    def load(cls, path) -> "BeatSet":
        with np.load(path, allow_pickle=False) as z:
            return cls(z["single"], z["trio"], z["labels"], z["patient_id"],
                       z["origin"], z["time"])
