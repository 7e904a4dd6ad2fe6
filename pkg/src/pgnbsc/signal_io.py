"""Recordings, annotations, montage selection and the synthetic generator.

Two on-disk signal formats are understood:

* EDF (European Data Format): 256-byte main header, 256 bytes per signal,
  16-bit little-endian two's complement samples.
* A plain CSV format: first row channel names, second row ``rate,<Hz>``,
  then one row per sample instant.

Annotations live in a CSV of ``start_s,stop_s,label`` lines where the label is
one of the TUH-style codes ``absz, cpsz, mysz, spsz, tnsz, tcsz``.
"""

from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .exceptions import (
    AmbiguousChannel,
    BadDuration,
    BadRate,
    InconsistentRates,
    InvertedInterval,
    MalformedFile,
    MissingChannel,
    UnknownLabel,
)

__all__ = [
    "SeizureType",
    "Recording",
    "SeizureAnnotation",
    "MontageSpec",
    "STANDARD_1020",
    "read_recording",
    "write_recording",
    "write_edf",
    "read_annotations",
    "write_annotations",
    "select_montage",
    "synth_recording",
]


class SeizureType(str, enum.Enum):
    ABSENCE = "absz"
    COMPLEX_PARTIAL = "cpsz"
    MYOCLONIC = "mysz"
    SIMPLE_PARTIAL = "spsz"
    TONIC = "tnsz"
    TONIC_CLONIC = "tcsz"
    # only exists once simple and complex partial are merged
    FOCAL = "focal"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise UnknownLabel(str(text).strip())

    @classmethod
    def raw_types(cls):
        """The six labels present in the source annotations, in table order."""
        return [
            cls.ABSENCE,
            cls.COMPLEX_PARTIAL,
            cls.MYOCLONIC,
            cls.SIMPLE_PARTIAL,
            cls.TONIC,
            cls.TONIC_CLONIC,
        ]

    def __str__(self):
        return self.value


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Recording:
    """Multichannel recording; ``data`` is (n_channels, n_samples) in microvolts."""

    labels: tuple
    data: np.ndarray
    rate: float
    source_id: str = ""

    def __post_init__(self):
        data = np.atleast_2d(self.data)
        if data.ndim != 2:
            raise ValueError("data must be 2-D (channels x samples)")
        if len(self.labels) != data.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {data.shape[0]} channels"
            )
        if data.shape[1] < 1:
            raise ValueError("recording must hold at least one sample")
        if not self.rate > 0:
            raise BadRate(f"rate must be positive, got {self.rate}")
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def duration_s(self):
        return self.n_samples / self.rate

    @property
    def channels(self):
        """``(label, samples, rate)`` triples in stored order."""
        return [(l, self.data[i], self.rate) for i, l in enumerate(self.labels)]

    def replace(self, **changes):
        kw = dict(labels=self.labels, data=self.data, rate=self.rate,
                  source_id=self.source_id)
        kw.update(changes)
        return Recording(**kw)


@dataclass(frozen=True, order=True)
class SeizureAnnotation:
    start_s: float
    stop_s: float
    label: SeizureType = field(compare=False)

    def __post_init__(self):
        if not self.start_s >= 0:
            raise InvertedInterval(f"negative start {self.start_s}")
        if not self.stop_s > self.start_s:
            raise InvertedInterval(
                f"stop {self.stop_s} must exceed start {self.start_s}"
            )

    @property
    def duration_s(self):
        return self.stop_s - self.start_s


STANDARD_1020 = (
    "Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
    "F7", "F8", "T3", "T4", "T5", "T6", "Fz", "Cz", "Pz",
)

_REF_SUFFIX = re.compile(r"[-_ ]?(REF|LE|AR|AVG|A1|A2|M1|M2)$", re.IGNORECASE)


def _strip_reference(name):
    return _REF_SUFFIX.sub("", name.strip())


@dataclass(frozen=True)
class MontageSpec:
    required_names: tuple = STANDARD_1020

    def __post_init__(self):
        names = tuple(self.required_names)
        if len(names) != 19:
            raise ValueError(f"montage needs 19 names, got {len(names)}")
        if len({n.lower() for n in names}) != len(names):
            raise ValueError("montage names must be unique")
        object.__setattr__(self, "required_names", names)

    def match(self, name, candidates):
        """Indices of ``candidates`` whose stripped label contains ``name``."""
        key = name.lower()
        return [
            i for i, c in enumerate(candidates)
            if key in _strip_reference(c).lower()
        ]


def select_montage(rec, spec=None):
    """Reduce ``rec`` to the montage channels, in montage order."""
    spec = spec or MontageSpec()
    rows = []
    for name in spec.required_names:
        hits = spec.match(name, rec.labels)
        if not hits:
            raise MissingChannel(name)
        if len(hits) > 1:
            raise AmbiguousChannel(name, [rec.labels[i] for i in hits])
        rows.append(hits[0])
    return rec.replace(labels=tuple(rec.labels[i] for i in rows),
                       data=rec.data[rows])


# --------------------------------------------------------------------------
# file formats

def read_recording(path, rate_policy="raise"):
    """Load an EDF or toolkit-CSV recording.

    ``rate_policy`` only matters for EDF files whose signals have different
    sampling rates: ``"raise"`` refuses them, ``"resample"`` brings every
    signal to the highest rate present.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if path.suffix.lower() == ".edf" or head == b"0       ":
        return _read_edf(path, rate_policy)
    return _read_csv(path)


def write_recording(rec, path):
    """Write ``rec`` in the toolkit CSV format (exact float round trip)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rec.labels)
        w.writerow(["rate", repr(rec.rate)])
        np.savetxt(fh, rec.data.T, fmt="%.17g", delimiter=",")
    return path


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            labels = next(reader)
            rate_row = next(reader)
        except StopIteration:
            raise MalformedFile(f"{path}: missing header rows") from None
        if len(rate_row) != 2 or rate_row[0].strip().lower() != "rate":
            raise MalformedFile(f"{path}: second row must be 'rate,<Hz>'")
        try:
            rate = float(rate_row[1])
        except ValueError:
            raise MalformedFile(f"{path}: bad rate {rate_row[1]!r}") from None
        rows = [r for r in reader if r]
    if not rows:
        raise MalformedFile(f"{path}: no samples")
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(labels):
        raise MalformedFile(f"{path}: ragged sample rows")
    return Recording(labels=labels, data=data.T, rate=rate, source_id=path.stem)


def _field(raw, name, path, cast=str):
    text = raw.decode("ascii", errors="replace").strip()
    try:
        return cast(text)
    except ValueError:
        raise MalformedFile(f"{path}: bad header field {name}={text!r}") from None


def _read_edf(path, rate_policy):
    blob = path.read_bytes()
    if len(blob) < 256:
        raise MalformedFile(f"{path}: header truncated")
    header_bytes = _field(blob[184:192], "header bytes", path, int)
    n_records = _field(blob[236:244], "records", path, int)
    record_s = _field(blob[244:252], "record duration", path, float)
    ns = _field(blob[252:256], "signals", path, int)
    if ns < 1 or header_bytes != 256 * (ns + 1) or len(blob) < header_bytes:
        raise MalformedFile(f"{path}: inconsistent signal header")

    pos = 256

    def column(width, name, cast=str):
        nonlocal pos
        out = [_field(blob[pos + i * width: pos + (i + 1) * width], name, path, cast)
               for i in range(ns)]
        pos += width * ns
        return out

    labels = column(16, "label")
    column(80, "transducer")
    column(8, "dimension")
    phys_min = np.array(column(8, "physical min", float))
    phys_max = np.array(column(8, "physical max", float))
    dig_min = np.array(column(8, "digital min", int), dtype=float)
    dig_max = np.array(column(8, "digital max", int), dtype=float)
    column(80, "prefilter")
    spr = np.array(column(8, "samples per record", int))
    if np.any(spr < 1) or np.any(dig_max <= dig_min) or not record_s > 0:
        raise MalformedFile(f"{path}: invalid signal parameters")

    record_len = int(spr.sum()) * 2
    payload = len(blob) - header_bytes
    if n_records < 0:
        n_records, rem = divmod(payload, record_len)
        if rem:
            raise MalformedFile(f"{path}: partial data record")
    elif payload < n_records * record_len:
        raise MalformedFile(
            f"{path}: expected {n_records} records, file holds "
            f"{payload / record_len:.2f}"
        )
    if n_records < 1:
        raise MalformedFile(f"{path}: no data records")

    raw = np.frombuffer(blob, dtype="<i2", count=n_records * record_len // 2,
                        offset=header_bytes).reshape(n_records, -1)
    bounds = np.concatenate([[0], np.cumsum(spr)])
    gain = (phys_max - phys_min) / (dig_max - dig_min)

    keep = [i for i, l in enumerate(labels) if l != "EDF Annotations"]
    signals = {}
    for i in keep:
        dig = raw[:, bounds[i]:bounds[i + 1]].reshape(-1).astype(np.float64)
        signals[i] = (dig - dig_min[i]) * gain[i] + phys_min[i]
    rates = {i: spr[i] / record_s for i in keep}

    target = max(rates.values())
    if len(set(rates.values())) > 1:
        if rate_policy != "resample":
            raise InconsistentRates(
                f"{path}: signal rates differ ({sorted(set(rates.values()))})"
            )
        for i in keep:
            if rates[i] != target:
                signals[i] = resample_poly(signals[i], int(spr.max()), int(spr[i]))
    data = np.vstack([signals[i] for i in keep])
    return Recording(labels=[labels[i] for i in keep], data=data, rate=target,
                     source_id=path.stem)


def _fmt(value, width):
    """Format a number into at most ``width`` ASCII characters."""
    if float(value).is_integer() and len(str(int(value))) <= width:
        text = str(int(value))
    else:
        for digits in range(width, 0, -1):
            text = f"{value:.{digits}g}"
            if len(text) <= width:
                break
    return text.ljust(width).encode("ascii")


def write_edf(rec, path, record_s=1.0):
    """Write ``rec`` as a 16-bit EDF file.

    Each channel is scaled to the full digital range using its own min/max.
    The recording length must be a whole number of data records.
    """
    spr = rec.rate * record_s
    if not float(spr).is_integer():
        raise ValueError("rate * record duration must be an integer")
    spr = int(spr)
    n_records, rem = divmod(rec.n_samples, spr)
    if rem or n_records < 1:
        raise ValueError("recording length must be a whole number of records")
    ns = rec.n_channels
    dmin, dmax = -32768, 32767

    pmin = np.floor(rec.data.min(axis=1))
    pmax = np.ceil(rec.data.max(axis=1))
    pmax = np.where(pmax <= pmin, pmin + 1, pmax)

    hdr = b"".join([
        _fmt(0, 8), b"X X X X".ljust(80), b"Startdate X X X X".ljust(80),
        b"01.01.01", b"00.00.00", _fmt(256 * (ns + 1), 8), b" " * 44,
        _fmt(n_records, 8), _fmt(record_s, 8), _fmt(ns, 4),
    ])
    hdr += b"".join(l.encode("ascii", "replace")[:16].ljust(16) for l in rec.labels)
    hdr += b" " * 80 * ns
    hdr += b"uV".ljust(8) * ns
    hdr += b"".join(_fmt(v, 8) for v in pmin)
    hdr += b"".join(_fmt(v, 8) for v in pmax)
    hdr += _fmt(dmin, 8) * ns + _fmt(dmax, 8) * ns
    hdr += b" " * 80 * ns
    hdr += _fmt(spr, 8) * ns
    hdr += b" " * 32 * ns

    # use the values as written so the reader reproduces the same scaling
    pmin = np.array([float(_fmt(v, 8)) for v in pmin])
    pmax = np.array([float(_fmt(v, 8)) for v in pmax])
    gain = (pmax - pmin) / (dmax - dmin)
    dig = np.round((rec.data - pmin[:, None]) / gain[:, None] + dmin)
    dig = np.clip(dig, dmin, dmax).astype("<i2")
    body = dig.reshape(ns, n_records, spr).transpose(1, 0, 2).tobytes()
    Path(path).write_bytes(hdr + body)
    return Path(path)


def read_annotations(path):
    """Parse a ``start_s,stop_s,label`` CSV into sorted annotations."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise MalformedFile(f"{path}:{lineno}: expected start,stop,label")
            try:
                start, stop = float(row[0]), float(row[1])
            except ValueError:
                if lineno == 1:  # header line
                    continue
                raise MalformedFile(f"{path}:{lineno}: bad time value") from None
            label = SeizureType.parse(row[2])
            if label is SeizureType.FOCAL:
                raise UnknownLabel(row[2].strip())
            out.append(SeizureAnnotation(start, stop, label))
    return sorted(out)


def write_annotations(annotations, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for a in annotations:
            w.writerow([repr(float(a.start_s)), repr(float(a.stop_s)), a.label.value])
    return Path(path)


# --------------------------------------------------------------------------
# synthetic recordings

_TEMPLATE_SEED = 20220101
_SP_CHANNELS = (0, 10, 12, 14)                     # Fp1 F7 T3 T5
_CP_CHANNELS = (0, 2, 4, 6, 8, 10, 12, 14, 16, 17)  # left chain + Fz Cz


def _spike_wave(t, freq):
    phase = (t * freq) % 1.0
    spike = np.exp(-0.5 * ((phase - 0.1) / 0.025) ** 2)
    return 1.6 * spike - np.sin(2 * np.pi * freq * t) * 0.6


def _template(kind, n, rate):
    """Noise-free ictal pattern, shape (19, n). Positions never depend on seed."""
    t = np.arange(n) / rate
    out = np.zeros((19, n))
    if kind is SeizureType.ABSENCE:
        out[:] = 90.0 * _spike_wave(t, 3.0)
    elif kind is SeizureType.TONIC:
        out[:] = 70.0 * np.sin(2 * np.pi * 20.0 * t)
    elif kind is SeizureType.TONIC_CLONIC:
        envelope = 0.5 * (1 + np.sin(2 * np.pi * 0.8 * t)) ** 2
        out[:] = 80.0 * envelope * np.sin(2 * np.pi * 10.0 * t)
    elif kind is SeizureType.MYOCLONIC:
        rng = np.random.default_rng(_TEMPLATE_SEED)
        onsets = np.cumsum(rng.uniform(0.35, 0.9, size=int(n / rate / 0.35) + 2))
        jerk = np.zeros(n)
        for onset in onsets[onsets < t[-1]]:
            dt = t - onset
            jerk += np.where(np.abs(dt) < 0.08,
                             np.sin(2 * np.pi * 12.5 * dt) * np.exp(-(dt / 0.03) ** 2),
                             0.0)
        out[:] = 150.0 * jerk
    elif kind in (SeizureType.SIMPLE_PARTIAL, SeizureType.COMPLEX_PARTIAL):
        rhythm = np.sin(2 * np.pi * 6.0 * t)
        out[list(_SP_CHANNELS)] = 45.0 * rhythm
        if kind is SeizureType.COMPLEX_PARTIAL:
            # weaker propagated activity on the remaining channels of the chain
            extra = [c for c in _CP_CHANNELS if c not in _SP_CHANNELS]
            out[extra] = 12.0 * rhythm
    else:
        raise ValueError(f"no synthetic template for {kind}")
    return out


def synth_recording(kind, duration_s, rate=250.0, seed=0, noise_uv=6.0,
                    line_uv=15.0, gain_jitter=0.25):
    """Generate a 19-channel labelled ictal recording.

    The class template is deterministic; ``seed`` drives the additive Gaussian
    background, 60 Hz line interference phase and a per-recording amplitude
    gain drawn from ``1 + gain_jitter * U(-1, 1)``.
    """
    kind = SeizureType.parse(kind)
    if not duration_s >= 1.8:
        raise BadDuration(f"duration must be >= 1.8 s, got {duration_s}")
    if not rate >= 100:
        raise BadRate(f"rate must be >= 100 Hz, got {rate}")
    n = int(round(duration_s * rate))
    rng = np.random.default_rng(seed)
    gain = 1.0 + gain_jitter * rng.uniform(-1.0, 1.0)
    data = gain * _template(kind, n, rate)
    data += rng.normal(0.0, noise_uv, size=data.shape)
    t = np.arange(n) / rate
    data += line_uv * np.sin(2 * np.pi * 60.0 * t + rng.uniform(0, 2 * np.pi))
    labels = tuple(f"EEG {name.upper()}-REF" for name in STANDARD_1020)
    return Recording(labels=labels, data=data, rate=rate,
                     source_id=f"synth_{kind.value}_{seed}")
