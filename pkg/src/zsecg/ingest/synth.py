"""Synthetic ECG corpora for tests that must run without MIT-BIH on disk.

Normal beats are a sum of Gaussian bumps (P, Q, R, S, T) whose positions,
widths and amplitudes are drawn per patient.  Abnormal beats pass the same
template through an FIR distortion and arrive early, in the spirit of the
LTI degradation model used for abnormal beat synthesis.  Within a corpus
each abnormal class has one prototype distortion that every patient
perturbs slightly, so a class keeps a recognizable shape across patients
while riding on each patient's own normal morphology.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidArgument
from .records import EcgRecord

# (center s, width s, amplitude) for P, Q, R, S, T
_BASE_WAVES = np.array([
    [-0.20, 0.025, 0.15],
    [-0.035, 0.010, -0.12],
    [0.000, 0.012, 1.00],
    [0.035, 0.012, -0.25],
    [0.28, 0.050, 0.30],
])

_ABNORMAL_SYMBOLS = ("V", "A", "F")


def _patient_morphology(rng, difficulty=0.0):
    spread = 1.0 + difficulty
    waves = _BASE_WAVES.copy()
    waves[:, 0] *= rng.uniform(0.8, 1.25)
    waves[[0, 4], 0] += rng.uniform(-0.03, 0.03, size=2) * spread
    waves[:, 1] *= rng.uniform(0.7, 1.6 * spread, size=5)
    waves[:, 2] *= rng.uniform(0.5 / spread, 1.5 * spread, size=5)
    # some patients carry an inverted T or a deep S (bundle-branch-like)
    p = min(0.3 * spread, 0.9)
    if rng.random() < p:
        waves[4, 2] *= -1
    if rng.random() < p:
        waves[3, 2] *= 2.5
        waves[2, 1] *= 1.5 * spread
    return waves


def _distortion_filter(rng, length=24):
    taps = np.zeros(length)
    taps[0] = rng.uniform(0.2, 0.6)
    lag = rng.integers(4, length)
    taps[lag] = rng.choice([-1.0, 1.0]) * rng.uniform(0.6, 1.2)
    taps += rng.normal(0.0, 0.15, size=length) * np.exp(-np.arange(length) / 8.0)
    return taps


def _perturb_filter(rng, proto, difficulty):
    scale = 0.15 * (1.0 + difficulty)
    decay = np.exp(-np.arange(proto.size) / 8.0)
    jitter = rng.normal(0.0, scale, proto.size)
    return proto * (1.0 + jitter) + rng.normal(0.0, 0.03, proto.size) * decay


def _template(waves, t):
    out = np.zeros_like(t)
    for center, width, amp in waves:
        out += amp * np.exp(-0.5 * ((t - center) / width) ** 2)
    return out


def synth_record(rng, patient_id, n_beats, abnormal_rate, fs=360.0,
                 noise=0.01, n_filters=3, difficulty=0.0, prototypes=None) -> EcgRecord:
    """One patient's record.

    ``difficulty`` (>= 0) widens the spread of morphologies across patients
    and adds beat-to-beat jitter of the wave amplitudes and timings; 0 gives
    identical beats up to additive noise.  ``prototypes`` (one FIR filter
    per abnormal class) are perturbed for this patient; without them the
    patient draws ``n_filters`` unrelated distortions.
    """
    if not 0.0 <= abnormal_rate <= 1.0:
        raise InvalidArgument(f"abnormal_rate {abnormal_rate} not in [0, 1]")
    if difficulty < 0:
        raise InvalidArgument("difficulty must be non-negative")
    waves = _patient_morphology(rng, difficulty)
    if prototypes is None:
        filters = [_distortion_filter(rng) for _ in range(n_filters)]
        symbols = [rng.choice(_ABNORMAL_SYMBOLS) for _ in range(n_filters)]
    else:
        filters = [_perturb_filter(rng, np.asarray(h, float), difficulty) for h in prototypes]
        symbols = [_ABNORMAL_SYMBOLS[k % len(_ABNORMAL_SYMBOLS)] for k in range(len(filters))]
        n_filters = len(filters)
    rr_mean = rng.uniform(0.7, 1.0)

    abnormal = rng.random(n_beats) < abnormal_rate
    kinds = rng.integers(0, n_filters, size=n_beats)
    rr = rr_mean * (1.0 + rng.normal(0.0, 0.03, size=n_beats))
    rr[abnormal] *= 0.8
    peak_times = 0.6 + np.concatenate([[0.0], np.cumsum(rr[1:])])
    n_samples = int(np.ceil((peak_times[-1] + 0.8) * fs))
    signal = rng.normal(0.0, noise, size=n_samples)

    half = int(0.45 * fs)
    local_t = np.arange(-half, half + 1) / fs
    normal_shape = _template(waves, local_t)
    abnormal_shapes = []
    for h in filters:
        shape = np.convolve(normal_shape, h)[:len(local_t)]
        # recentre so the strongest deflection sits on the annotated peak
        shift = int(np.argmax(np.abs(shape))) - half
        abnormal_shapes.append(np.roll(shape, -shift) / np.abs(shape).max())

    peaks = np.round(peak_times * fs).astype(np.int64)
    labels = []
    for k, p in enumerate(peaks):
        shape = abnormal_shapes[kinds[k]] if abnormal[k] else normal_shape
        if difficulty > 0:
            jitter = waves.copy()
            jitter[:, 0] += rng.normal(0.0, 0.004 * difficulty, size=5)
            jitter[:, 2] *= 1.0 + rng.normal(0.0, 0.08 * difficulty, size=5)
            shape = _template(jitter, local_t)
            if abnormal[k]:
                h = filters[kinds[k]]
                h = h * (1.0 + rng.normal(0.0, 0.1 * difficulty, size=h.size))
                shape = np.convolve(shape, h)[:len(local_t)]
                shift = int(np.argmax(np.abs(shape))) - half
                shape = np.roll(shape, -shift) / np.abs(shape).max()
        lo, hi = p - half, p + half + 1
        s_lo, s_hi = max(lo, 0), min(hi, n_samples)
        signal[s_lo:s_hi] += shape[s_lo - lo:len(shape) - (hi - s_hi)]
        labels.append(symbols[kinds[k]] if abnormal[k] else "N")
    return EcgRecord(str(patient_id), signal, fs, peaks, tuple(labels))


def synth_corpus(seed, n_patients=6, beats_per_patient=600, abnormal_rate=0.2,
                 fs=360.0, noise=0.01, difficulty=0.0) -> list:
    """Deterministic list of synthetic :class:`EcgRecord` objects."""
    if not 0.0 <= abnormal_rate <= 1.0:
        raise InvalidArgument(f"abnormal_rate {abnormal_rate} not in [0, 1]")
    if n_patients < 1 or beats_per_patient < 3:
        raise InvalidArgument("need at least one patient with three beats")
    children = np.random.SeedSequence(seed).spawn(n_patients + 1)
    shared = np.random.default_rng(children[-1])
    prototypes = [_distortion_filter(shared) for _ in _ABNORMAL_SYMBOLS]
    return [synth_record(np.random.default_rng(c), f"S{k:03d}", beats_per_patient,
                         abnormal_rate, fs=fs, noise=noise, difficulty=difficulty,
                         prototypes=prototypes)
            for k, c in enumerate(children[:-1])]
