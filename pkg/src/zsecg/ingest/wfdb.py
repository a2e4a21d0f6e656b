"""Reader for WFDB records: ``.hea`` header, format-212/16 ``.dat`` and
MIT-format ``.atr`` annotations."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ParseError, UnsupportedFormat
from .records import EcgRecord, is_mapped

# WFDB annotation code -> mnemonic (ecgcodes.h)
ANNOTATION_CODES = {
    1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A", 9: "S",
    10: "E", 11: "j", 12: "/", 13: "Q", 14: "~", 16: "|", 18: "s", 19: "T",
    20: "*", 21: "D", 22: '"', 23: "=", 24: "p", 25: "B", 26: "^", 27: "t",
    28: "+", 29: "u", 30: "?", 31: "!", 32: "[", 33: "]", 34: "e", 35: "n",
    36: "@", 37: "x", 38: "f", 39: "(", 40: ")", 41: "r",
}

SUPPORTED_FORMATS = (212, 16)

_SKIP, _NUM, _SUB, _CHAN, _AUX = 59, 60, 61, 62, 63

_GAIN_RE = re.compile(
    r"^(?P<gain>[-+0-9.eE]+)(\((?P<baseline>[-+0-9]+)\))?(/(?P<units>\S+))?$")


@dataclass
class SignalSpec:
    file_name: str
    fmt: int
    gain: float
    baseline: int
    adc_zero: int
    initial_value: int | None
    description: str


@dataclass
class Header:
    record_name: str
    n_signals: int
    sampling_rate: float
    n_samples: int | None
    signals: list


def parse_header(path) -> Header:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read header {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError(f"empty header {path}")
    head = lines[0].split()
    try:
        record_name = head[0].split("/")[0]
        n_signals = int(head[1])
        sampling_rate = float(head[2].split("/")[0].split("(")[0]) if len(head) > 2 else 250.0
        n_samples = int(head[3]) if len(head) > 3 else None
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed record line in {path}: {lines[0]!r}") from exc
    if len(lines) < 1 + n_signals:
        raise ParseError(f"{path} declares {n_signals} signals but has "
                         f"{len(lines) - 1} signal lines")

    signals = []
    for line in lines[1:1 + n_signals]:
        fields = line.split(maxsplit=8)
        try:
            fmt = int(re.match(r"^(\d+)", fields[1]).group(1))
            gain, baseline = 200.0, None
            adc_zero = int(fields[4]) if len(fields) > 4 else 0
            if len(fields) > 2:
                m = _GAIN_RE.match(fields[2])
                if m is None:
                    raise ValueError(fields[2])
                gain = float(m.group("gain")) or 200.0
                if m.group("baseline") is not None:
                    baseline = int(m.group("baseline"))
            initial = int(fields[5]) if len(fields) > 5 else None
        except (IndexError, ValueError, AttributeError) as exc:
            raise ParseError(f"malformed signal line in {path}: {line!r}") from exc
        signals.append(SignalSpec(
            file_name=fields[0], fmt=fmt, gain=gain,
            baseline=adc_zero if baseline is None else baseline,
            adc_zero=adc_zero, initial_value=initial,
            description=fields[8] if len(fields) > 8 else ""))
    return Header(record_name, n_signals, sampling_rate, n_samples, signals)


def decode_212(raw: bytes | np.ndarray, n_values: int) -> np.ndarray:
    """Unpack format-212 bytes into signed 12-bit integers.

    Each 3-byte group holds two samples: the first uses byte 0 plus the low
    nibble of byte 1 as its high bits, the second uses byte 2 plus the high
    nibble of byte 1.
    """
    data = np.frombuffer(raw, dtype=np.uint8) if isinstance(raw, (bytes, bytearray)) else raw
    n_groups = (n_values + 1) // 2
    if data.size < 3 * n_groups - (1 if n_values % 2 else 0):
        raise ParseError(f"format-212 data holds fewer than {n_values} samples")
    padded = np.zeros(3 * n_groups, dtype=np.uint8)
    take = min(data.size, padded.size)
    padded[:take] = data[:take]
    b = padded.reshape(-1, 3).astype(np.int32)
    first = b[:, 0] | ((b[:, 1] & 0x0F) << 8)
    second = b[:, 2] | ((b[:, 1] & 0xF0) << 4)
    out = np.empty(2 * n_groups, dtype=np.int32)
    out[0::2] = first
    out[1::2] = second
    out = out[:n_values]
    out[out > 2047] -= 4096
    return out


def encode_212(values) -> bytes:
    """Pack signed 12-bit integers into format-212 bytes."""
    v = np.asarray(values, dtype=np.int64)
    if np.any(v < -2048) or np.any(v > 2047):
        raise ValueError("format 212 holds 12-bit values only")
    u = (v & 0xFFF).astype(np.int64)
    if u.size % 2:
        u = np.append(u, 0)
    a, c = u[0::2], u[1::2]
    out = np.empty((a.size, 3), dtype=np.uint8)
    out[:, 0] = a & 0xFF
    out[:, 1] = ((a >> 8) & 0x0F) | (((c >> 8) & 0x0F) << 4)
    out[:, 2] = c & 0xFF
    n_bytes = 3 * (v.size // 2) + (2 if v.size % 2 else 0)
    return out.tobytes()[:n_bytes]


def read_signals(header: Header, directory) -> np.ndarray:
    """Return digital samples as an (n_samples, n_signals) int array."""
    directory = Path(directory)
    files = {}
    for i, sig in enumerate(header.signals):
        files.setdefault(sig.file_name, []).append(i)
    columns = [None] * header.n_signals
    for file_name, idx in files.items():
        fmts = {header.signals[i].fmt for i in idx}
        if len(fmts) != 1:
            raise UnsupportedFormat(f"mixed formats in {file_name}")
        fmt = fmts.pop()
        if fmt not in SUPPORTED_FORMATS:
            raise UnsupportedFormat(f"signal format {fmt} is not supported")
        try:
            raw = np.fromfile(directory / file_name, dtype=np.uint8)
        except OSError as exc:
            raise ParseError(f"cannot read signal file {file_name}: {exc}") from exc
        n_sig = len(idx)
        if fmt == 212:
            n_frames = header.n_samples if header.n_samples is not None else (raw.size * 2 // 3) // n_sig
            flat = decode_212(raw, n_frames * n_sig)
        else:
            n_frames = header.n_samples if header.n_samples is not None else raw.size // (2 * n_sig)
            if raw.size < 2 * n_frames * n_sig:
                raise ParseError(f"{file_name} holds fewer than {n_frames} frames")
            flat = raw[:2 * n_frames * n_sig].view("<i2").astype(np.int32)
        frames = flat.reshape(n_frames, n_sig)
        for j, i in enumerate(idx):
            columns[i] = frames[:, j]
    return np.stack(columns, axis=1)


def read_annotations(path):
    """Decode an MIT-format annotation file into (sample indices, symbols)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read annotation file {path}: {exc}") from exc
    if len(raw) % 2:
        raw = raw + b"\x00"
    words = np.frombuffer(raw, dtype="<u2")
    samples, symbols = [], []
    t = 0
    i = 0
    while i < len(words):
        w = int(words[i])
        code, value = w >> 10, w & 0x3FF
        i += 1
        if code == 0 and value == 0:
            break
        if code == _SKIP:
            if i + 2 > len(words):
                raise ParseError("truncated SKIP in annotation file")
            # PDP-11 long: high 16 bits first
            t += (int(words[i]) << 16) | int(words[i + 1])
            if t >= 1 << 31:
                t -= 1 << 32
            i += 2
        elif code == _AUX:
            i += (value + 1) // 2
        elif code in (_NUM, _SUB, _CHAN):
            pass
        else:
            t += value
            samples.append(t)
            symbols.append(ANNOTATION_CODES.get(code, f"#{code}"))
    return np.asarray(samples, dtype=np.int64), symbols


def parse_wfdb(header_path, channel=0, annotator="atr") -> EcgRecord:
    """Read a WFDB record and its beat annotations.

    Samples are converted to physical units, ``(adc - baseline) / gain``.
    Only annotations with an AAMI-mapped beat symbol are kept as r-peaks.
    """
    header_path = Path(header_path)
    if header_path.suffix != ".hea":
        header_path = header_path.with_suffix(".hea")
    header = parse_header(header_path)
    if not 0 <= channel < header.n_signals:
        raise ParseError(f"channel {channel} not in record with "
                         f"{header.n_signals} signals")
    digital = read_signals(header, header_path.parent)
    if header.n_samples is not None and digital.shape[0] != header.n_samples:
        raise ParseError(f"signal length {digital.shape[0]} does not match "
                         f"header ({header.n_samples})")
    sig = header.signals[channel]
    samples = (digital[:, channel] - sig.baseline) / sig.gain

    ann_path = header_path.with_suffix("." + annotator)
    peaks, symbols = read_annotations(ann_path)
    keep = [k for k, s in enumerate(symbols)
            if is_mapped(s) and 0 <= peaks[k] < len(samples)]
    peaks = peaks[keep]
    symbols = [symbols[k] for k in keep]
    # duplicate sample positions would break strict ordering; keep the first
    if len(peaks):
        order = np.argsort(peaks, kind="stable")
        peaks = peaks[order]
        symbols = [symbols[k] for k in order]
        uniq = np.concatenate([[True], np.diff(peaks) > 0])
        peaks = peaks[uniq]
        symbols = [s for s, u in zip(symbols, uniq) if u]
    return EcgRecord(header.record_name, samples, header.sampling_rate,
                     peaks, tuple(symbols))
