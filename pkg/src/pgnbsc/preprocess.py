"""Signal conditioning: 250 Hz resampling, 60 Hz notch, first IMF, windowing."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import firwin, iirnotch, lfilter, resample_poly

from .exceptions import MalformedFile, RateTooLow, TooShort, WrongRate
from .signal_io import STANDARD_1020, SeizureType, select_montage

logger = logging.getLogger(__name__)

TARGET_RATE = 250
WINDOW_SAMPLES = 450  # 1.8 s at 250 Hz
WINDOW_S = WINDOW_SAMPLES / TARGET_RATE


@dataclass(frozen=True)
class FilterSpec:
    resample_target: int = TARGET_RATE
    notch_center: float = 60.0
    notch_bandwidth: float = 2.0
    fir_taps: int = 0  # 0 lets the polyphase designer choose the length
    kaiser_beta: float = 5.0
    emd_max_sift: int = 50
    emd_sd_threshold: float = 0.3

    def __post_init__(self):
        if not self.notch_center < self.resample_target / 2:
            raise ValueError("notch centre must lie below Nyquist")
        if self.fir_taps and self.fir_taps % 2 == 0:
            raise ValueError("fir_taps must be odd")
        if self.notch_bandwidth <= 0:
            raise ValueError("notch bandwidth must be positive")


@dataclass(frozen=True)
class EpochWindow:
    samples: np.ndarray  # (19, 450)
    label: SeizureType
    source_id: str = ""
    window_index: int = 0

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        if s.shape != (19, WINDOW_SAMPLES):
            raise ValueError(f"window must be 19 x {WINDOW_SAMPLES}, got {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "label", SeizureType.parse(self.label))


# --------------------------------------------------------------------------
# resampling and notch

def _kaiser_lowpass(p, q, taps, beta):
    """Anti-aliasing FIR for upsample-by-p / downsample-by-q."""
    return firwin(taps, 1.0 / max(p, q), window=("kaiser", beta))


def resample_250(rec, spec=None):
    """Polyphase rational resampling of every channel to 250 Hz."""
    spec = spec or FilterSpec()
    if rec.rate < 100:
        raise RateTooLow(f"{rec.rate} Hz is below the 100 Hz minimum")
    target = spec.resample_target
    if rec.rate == target:
        return rec
    ratio = Fraction(target) / Fraction(rec.rate).limit_denominator(10_000)
    p, q = ratio.numerator, ratio.denominator
    out_len = int(round(rec.n_samples * target / rec.rate))
    kwargs = {"window": ("kaiser", spec.kaiser_beta)}
    if spec.fir_taps:
        # resample_poly applies the gain of p itself
        kwargs = {"window": _kaiser_lowpass(p, q, spec.fir_taps, spec.kaiser_beta)}
    data = resample_poly(rec.data, p, q, axis=1, **kwargs)[:, :out_len]
    return rec.replace(data=data, rate=float(target))


def notch_coefficients(spec=None, rate=TARGET_RATE):
    spec = spec or FilterSpec()
    quality = spec.notch_center / spec.notch_bandwidth
    return iirnotch(spec.notch_center, quality, fs=rate)


def notch_60(rec, spec=None):
    """Causal biquad notch at the mains frequency, applied channel by channel."""
    spec = spec or FilterSpec()
    if rec.rate != spec.resample_target:
        raise WrongRate(f"notch expects {spec.resample_target} Hz, got {rec.rate}")
    b, a = notch_coefficients(spec, rec.rate)
    return rec.replace(data=lfilter(b, a, rec.data, axis=1))


# --------------------------------------------------------------------------
# empirical mode decomposition, first IMF only

class SiftInfo(NamedTuple):
    iterations: int
    no_extrema: bool
    sd: float


def _extrema(x):
    """Indices of local maxima and minima; flat tops use their first sample."""
    d = np.diff(x)
    # carry the last nonzero slope through plateaus
    nz = np.flatnonzero(d)
    if nz.size == 0:
        return np.array([], int), np.array([], int)
    sign = np.sign(d[nz])
    change = np.flatnonzero(sign[1:] != sign[:-1])
    idx = nz[change] + 1
    # for a plateau the extremum sits at its start (index right after slope)
    is_max = sign[change] > 0
    return idx[is_max], idx[~is_max]


def _mirror(idx, x, n, nsym=2):
    """Reflect the outermost extrema about both end samples."""
    left = idx[:nsym]
    right = idx[-nsym:]
    t = np.concatenate([-left[::-1], idx, 2 * (n - 1) - right[::-1]])
    v = np.concatenate([x[left[::-1]], x[idx], x[right[::-1]]])
    t, keep = np.unique(t, return_index=True)
    return t, v[keep]


def _envelope_mean(h):
    n = h.size
    maxima, minima = _extrema(h)
    if maxima.size < 1 or minima.size < 1 or maxima.size + minima.size < 3:
        return None
    grid = np.arange(n)
    tu, vu = _mirror(maxima, h, n)
    tl, vl = _mirror(minima, h, n)
    if tu.size < 2 or tl.size < 2:
        return None
    upper = CubicSpline(tu, vu)(grid)
    lower = CubicSpline(tl, vl)(grid)
    return 0.5 * (upper + lower)


def first_imf(x, max_sift=50, sd_threshold=0.3, return_info=False):
    """Extract the first intrinsic mode function by sifting.

    Stops when ``sum((h_prev - h)**2) / sum(h_prev**2)`` falls below
    ``sd_threshold`` or after ``max_sift`` iterations. A signal without
    enough extrema to build envelopes (e.g. a monotone ramp) is returned
    unchanged with ``no_extrema`` set in the info tuple.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 8:
        raise TooShort("first_imf needs at least 8 samples")
    h = x.copy()
    sd = np.inf
    it = 0
    no_extrema = False
    while it < max_sift:
        mean = _envelope_mean(h)
        if mean is None:
            no_extrema = it == 0
            break
        new = h - mean
        it += 1
        denom = np.sum(h ** 2)
        sd = np.sum((h - new) ** 2) / denom if denom > 0 else 0.0
        h = new
        if sd < sd_threshold:
            break
    if no_extrema:
        h = x.copy()
    return (h, SiftInfo(it, no_extrema, float(sd))) if return_info else h


def imf_recording(rec, spec=None):
    spec = spec or FilterSpec()
    data = np.vstack([
        first_imf(ch, spec.emd_max_sift, spec.emd_sd_threshold) for ch in rec.data
    ])
    return rec.replace(data=data)


# --------------------------------------------------------------------------
# windowing

@dataclass
class SkipReport:
    skipped: list = field(default_factory=list)  # (source_id, annotation, reason)

    def add(self, source_id, ann, reason):
        self.skipped.append((source_id, ann, reason))

    def __len__(self):
        return len(self.skipped)


def window_spans(n_span):
    """Start offsets (within a span of ``n_span`` samples) of emitted windows."""
    if n_span < WINDOW_SAMPLES:
        return []
    if n_span < 2 * WINDOW_SAMPLES:
        return [(n_span - WINDOW_SAMPLES) // 2]
    return list(range(0, (n_span // WINDOW_SAMPLES) * WINDOW_SAMPLES, WINDOW_SAMPLES))


def window_ictal(rec, annotations, skips=None):
    """Cut each annotated seizure into 1.8 s non-overlapping windows.

    Window indices run consecutively over the whole recording so that
    ``(source_id, window_index)`` is unique.
    """
    if rec.rate != TARGET_RATE:
        raise WrongRate(f"windowing expects {TARGET_RATE} Hz, got {rec.rate}")
    if skips is None:
        skips = SkipReport()
    windows = []
    for ann in sorted(annotations):
        lo = int(round(ann.start_s * TARGET_RATE))
        hi = min(int(round(ann.stop_s * TARGET_RATE)), rec.n_samples)
        if hi - lo < WINDOW_SAMPLES:
            skips.add(rec.source_id, ann, "shorter than one window")
            continue
        for off in window_spans(hi - lo):
            a = lo + off
            windows.append(EpochWindow(rec.data[:, a:a + WINDOW_SAMPLES], ann.label,
                                       rec.source_id, len(windows)))
    return windows


def preprocess_recording(rec, annotations, spec=None, montage=None, trace=None,
                         skips=None):
    """Run the fixed stage order: montage, resample, notch, IMF1, window.

    ``trace`` (a list) receives the stage names as they run.
    """
    spec = spec or FilterSpec()
    stages = [
        ("montage", lambda r: select_montage(r, montage)),
        ("resample", lambda r: resample_250(r, spec)),
        ("notch", lambda r: notch_60(r, spec)),
        ("imf1", lambda r: imf_recording(r, spec)),
    ]
    for name, fn in stages:
        rec = fn(rec)
        if trace is not None:
            trace.append(name)
    windows = window_ictal(rec, annotations, skips)
    if trace is not None:
        trace.append("window")
    logger.debug("%s: %d windows", rec.source_id, len(windows))
    return windows


# --------------------------------------------------------------------------
# windows file: one row per (window, channel)

def write_windows_csv(windows, path, channels=None):
    channels = channels or STANDARD_1020
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source_id", "window_index", "label", "channel"]
                   + [f"s{i}" for i in range(WINDOW_SAMPLES)])
        for win in windows:
            for ch, row in zip(channels, win.samples):
                w.writerow([win.source_id, win.window_index, win.label.value, ch]
                           + [repr(float(v)) for v in row])
    return path


def read_windows_csv(path):
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:4] != ["source_id", "window_index", "label", "channel"] \
                or len(header) != 4 + WINDOW_SAMPLES:
            raise MalformedFile(f"{path}: not a windows file")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                key = (row[0], int(row[1]))
                values = [float(v) for v in row[4:]]
            except (ValueError, IndexError):
                raise MalformedFile(f"{path}:{lineno}: bad row") from None
            if len(values) != WINDOW_SAMPLES:
                raise MalformedFile(f"{path}:{lineno}: expected {WINDOW_SAMPLES} samples")
            groups.setdefault(key, (row[2], []))[1].append(values)
    out = []
    for (src, idx), (label, rows) in groups.items():
        if len(rows) != 19:
            raise MalformedFile(f"{path}: window {src}/{idx} has {len(rows)} channels")
        out.append(EpochWindow(np.array(rows), label, src, idx))
    return out
