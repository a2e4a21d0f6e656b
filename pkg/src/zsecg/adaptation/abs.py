"""Abnormal beat synthesis: LTI degradation filters learned from registered
patients and replayed on a new user's average normal beat."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._validation import normalize_rows
from ..exceptions import InvalidArgument
from ..ingest.records import AamiClass, Beat, BeatSet

DEFAULT_FILTER_LENGTH = 32
DEFAULT_PRUNE_THRESHOLD = 0.9
DEFAULT_ABS_RIDGE = 1e-3


@dataclass(frozen=True, eq=False)
class AbsFilter:
    h: np.ndarray
    source_id: str = ""
    source_abnormal_index: int = -1
    source_label: str = "Q"


@dataclass
class AbsLibrary:
    filters: list = field(default_factory=list)
    filter_length: int = DEFAULT_FILTER_LENGTH
    ridge: float = DEFAULT_ABS_RIDGE
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD

    def __len__(self):
        return len(self.filters)

    def synthesize(self, avg_normal) -> np.ndarray:
        """One unit-energy synthetic abnormal beat per filter (rows)."""
        avg = avg_normal.values if isinstance(avg_normal, Beat) else np.asarray(avg_normal)
        if not self.filters:
            return np.zeros((0, avg.size))
        return np.array([synthesize_abnormal(avg, f).values for f in self.filters])


def convolution_matrix(x, M):
    """N x M matrix C with ``C @ h`` equal to the first N samples of x * h."""
    x = np.asarray(x, dtype=float)
    N = x.size
    C = np.zeros((N, M))
    for j in range(M):
        C[j:, j] = x[:N - j]
    return C


def same_convolve(x, h):
    """Convolution truncated to len(x), anchored at the filter's first tap."""
    x = np.asarray(x, dtype=float)
    return np.convolve(x, h)[:x.size]


def estimate_abs_filter(avg_normal, abnormal, M=DEFAULT_FILTER_LENGTH,
                        ridge=DEFAULT_ABS_RIDGE, source_id="", index=-1,
                        label="Q") -> AbsFilter:
    """Ridge least-squares filter h with ``avg_normal * h ~ abnormal``."""
    s_n = avg_normal.values if isinstance(avg_normal, Beat) else np.asarray(avg_normal, float)
    s_a = abnormal.values if isinstance(abnormal, Beat) else np.asarray(abnormal, float)
    if M >= s_n.size:
        raise InvalidArgument(f"filter length {M} must be below beat length {s_n.size}")
    C = convolution_matrix(s_n, M)
    A = C.T @ C
    floor = 1e-12 * max(np.trace(A) / M, 1.0)
    h = np.linalg.solve(A + max(ridge, floor) * np.eye(M), C.T @ s_a)
    return AbsFilter(h, source_id, index, label)


def average_normal_beat(normals) -> np.ndarray:
    """The actual normal beat closest (l2) to the mean normal beat."""
    normals = np.asarray(normals, dtype=float)
    if normals.ndim != 2 or len(normals) == 0:
        raise InvalidArgument("need at least one normal beat")
    mean = normals.mean(axis=0)
    return normals[int(np.argmin(np.linalg.norm(normals - mean, axis=1)))].copy()


def prune_filters(filters, threshold=DEFAULT_PRUNE_THRESHOLD):
    """Greedy pruning by cosine similarity.

    A filter is kept only if its cosine similarity to every filter kept so
    far is below ``threshold``; ``threshold >= 1`` keeps everything.
    """
    if threshold >= 1.0:
        return list(filters)
    kept, unit = [], []
    for f in filters:
        norm = np.linalg.norm(f.h)
        if norm == 0:
            continue
        u = f.h / norm
        if unit and np.max(np.asarray(unit) @ u) >= threshold:
            continue
        kept.append(f)
        unit.append(u)
    return kept


def build_abs_library(sources, M=DEFAULT_FILTER_LENGTH, ridge=DEFAULT_ABS_RIDGE,
                      prune_threshold=DEFAULT_PRUNE_THRESHOLD) -> AbsLibrary:
    """Learn and prune one filter per abnormal beat of every source user.

    ``sources`` is an iterable of :class:`BeatSet` objects, one per user;
    the single-beat channel is used.
    """
    filters = []
    for beats in sources:
        normals = beats.single[beats.y == 0]
        if len(normals) == 0:
            continue
        avg = average_normal_beat(normals)
        for i in np.flatnonzero(beats.y == 1):
            pid = str(beats.patient_id[i]) if len(beats.patient_id) else ""
            filters.append(estimate_abs_filter(avg, beats.single[i], M, ridge, pid,
                                               int(beats.origin[i]), str(beats.labels[i])))
    return AbsLibrary(prune_filters(filters, prune_threshold), M, ridge, prune_threshold)


def synthesize_abnormal(avg_normal, filt: AbsFilter, patient_id="") -> Beat:
    avg = avg_normal.values if isinstance(avg_normal, Beat) else np.asarray(avg_normal, float)
    if isinstance(avg_normal, Beat) and not patient_id:
        patient_id = avg_normal.patient_id
    values = normalize_rows(same_convolve(avg, filt.h))
    label = AamiClass(filt.source_label) if filt.source_label in "VSFQ" else AamiClass.Q
    return Beat(values, label, patient_id, -1)


def tile_trio(single) -> np.ndarray:
    """Trio stand-in for a synthesized single beat: three copies, resampled."""
    from ..ingest.segment import resample

    single = np.asarray(single, dtype=float)
    if single.ndim == 1:
        return normalize_rows(resample(np.tile(single, 3), single.size))
    return np.array([tile_trio(s) for s in single]).reshape(single.shape)


def synthesize_beatset(library: AbsLibrary, avg_normal, patient_id="") -> BeatSet:
    singles = library.synthesize(avg_normal)
    labels = [f.source_label if f.source_label in "VSFQ" else "Q" for f in library.filters]
    n = len(singles)
    return BeatSet(singles, tile_trio(singles) if n else singles.copy(),
                   np.array(labels, dtype="<U1"), np.full(n, patient_id),
                   -np.arange(1, n + 1), np.zeros(n))
