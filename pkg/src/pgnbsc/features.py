"""The 13 per-channel window features and their 247-column registry.

All single-signal functions take a 1-D array and return floats; they raise
on degenerate input. :func:`extract_all` absorbs those errors into sentinel
values so that one flat electrode cannot abort a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_signal
from .exceptions import DataError, DegeneratePath, TooShort, ZeroVariance
from .preprocess import WINDOW_SAMPLES, EpochWindow
from .signal_io import STANDARD_1020, SeizureType

FEATURE_NAMES = (
    "std",
    "shannon_entropy",
    "kurtosis",
    "hjorth_mobility",
    "hjorth_complexity",
    "skewness",
    "energy",
    "nonlinear_energy",
    "higuchi_fd",
    "katz_fd",
    "spectral_entropy_mean",
    "spectral_entropy_max",
    "spectral_entropy_min",
)

# value used when a feature is undefined on a channel
SENTINELS = {name: 0.0 for name in FEATURE_NAMES}
SENTINELS.update(higuchi_fd=1.0, katz_fd=1.0)


@dataclass(frozen=True)
class FeatureParams:
    entropy_bins: int = 64
    higuchi_kmax: int = 8
    spectral_subwin: int = 128
    spectral_hop: int = 64

    def __post_init__(self):
        if self.entropy_bins < 2:
            raise ValueError("entropy_bins must be >= 2")
        if self.higuchi_kmax < 2:
            raise ValueError("higuchi_kmax must be >= 2")
        if not 2 <= self.spectral_subwin <= WINDOW_SAMPLES:
            raise ValueError(f"spectral_subwin must be in [2, {WINDOW_SAMPLES}]")
        if self.spectral_hop < 1:
            raise ValueError("spectral_hop must be positive")


def feature_registry(channels=STANDARD_1020):
    """Column names ``<channel>.<feature>``, channel-major."""
    return tuple(f"{ch}.{feat}" for ch in channels for feat in FEATURE_NAMES)


# --------------------------------------------------------------------------
# time-domain features

def _central_moments(x):
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    return d, m2


def _standardised(x, what):
    """Deviations divided by their largest magnitude, so m2**2 cannot underflow."""
    d = x - x.mean()
    scale = np.max(np.abs(d))
    if scale == 0:
        raise ZeroVariance(f"{what} of a constant signal")
    d = d / scale
    return d, np.mean(d ** 2)


def _rounding_floor(x):
    # variances below this are floating-point noise, e.g. diff of a ramp
    return (16 * np.finfo(float).eps * np.max(np.abs(x))) ** 2


def std_dev(x):
    """Population standard deviation."""
    x = as_signal(x, 2, "std_dev")
    return float(np.sqrt(_central_moments(x)[1]))


def shannon_entropy(x, bins=64):
    """Amplitude-histogram entropy in bits over ``[min(x), max(x)]``."""
    x = as_signal(x, 2, "shannon_entropy")
    lo, hi = x.min(), x.max()
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / x.size
    return float(-np.sum(p * np.log2(p)))


def kurtosis(x):
    """Pearson (non-excess) kurtosis ``m4 / m2**2``."""
    x = as_signal(x, 4, "kurtosis")
    d, m2 = _standardised(x, "kurtosis")
    return float(np.mean(d ** 4) / m2 ** 2)


def skewness(x):
    x = as_signal(x, 3, "skewness")
    d, m2 = _standardised(x, "skewness")
    return float(np.mean(d ** 3) / m2 ** 1.5)


def hjorth(x):
    """Hjorth ``(mobility, complexity)`` from first differences."""
    x = as_signal(x, 3, "hjorth")
    dx = np.diff(x)
    ddx = np.diff(dx)
    v0, v1, v2 = np.var(x), np.var(dx), np.var(ddx)
    if v0 == 0 or v1 <= _rounding_floor(x):
        raise ZeroVariance("hjorth needs var(x) > 0 and var(diff(x)) > 0")
    mobility = np.sqrt(v1 / v0)
    return float(mobility), float(np.sqrt(v2 / v1) / mobility)


def energy(x):
    x = as_signal(x, 1, "energy")
    return float(np.dot(x, x))


def nonlinear_energy(x):
    """Mean Teager-Kaiser energy ``x[n]**2 - x[n-1]*x[n+1]``."""
    x = as_signal(x, 3, "nonlinear_energy")
    return float(np.mean(x[1:-1] ** 2 - x[:-2] * x[2:]))


# --------------------------------------------------------------------------
# fractal and spectral features

def higuchi_curve(x, kmax=8):
    """Mean normalised curve length ``L(k)`` for ``k = 1..kmax``."""
    x = as_signal(x, 2 * kmax + 2, "higuchi_fd")
    n = x.size
    lengths = np.empty(kmax)
    for k in range(1, kmax + 1):
        lm = np.empty(k)
        for m in range(1, k + 1):
            # x(m), x(m+k), ..., x(m+r*k) in 1-based indexing
            sub = x[m - 1::k]
            r = (n - m) // k
            lm[m - 1] = np.abs(np.diff(sub[:r + 1])).sum() * (n - 1) / (r * k) / k
        lengths[k - 1] = lm.mean()
    return lengths


def higuchi_fd(x, kmax=8):
    """Higuchi fractal dimension: slope of ``ln L(k)`` against ``ln(1/k)``."""
    if kmax < 2:
        raise TooShort("higuchi_fd needs kmax >= 2 for a slope fit")
    lengths = higuchi_curve(x, kmax)
    if np.any(lengths <= 0):
        raise DegeneratePath("zero curve length at some scale")
    k = np.arange(1, kmax + 1)
    slope = np.polyfit(np.log(1.0 / k), np.log(lengths), 1)[0]
    return float(slope)


def katz_fd(x):
    """Katz fractal dimension of the curve ``(i, x[i])`` with unit steps."""
    x = as_signal(x, 3, "katz_fd")
    dx = np.diff(x)
    if not np.any(dx):
        raise DegeneratePath("katz_fd of a constant signal")
    path = np.sum(np.hypot(1.0, dx))
    i = np.arange(x.size)
    extent = np.max(np.hypot(i, x - x[0]))
    n = x.size - 1
    return float(np.log10(n) / (np.log10(n) + np.log10(extent / path)))


def _subwindow_entropies(x, subwin, hop):
    starts = range(0, x.size - subwin + 1, hop)
    frames = np.stack([x[s:s + subwin] for s in starts])
    power = np.abs(np.fft.rfft(frames, axis=1)[:, 1:]) ** 2
    nbins = power.shape[1]
    total = power.sum(axis=1, keepdims=True)
    out = np.zeros(frames.shape[0])
    live = total[:, 0] > 0
    p = power[live] / total[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    out[live] = -terms.sum(axis=1) / np.log(nbins)
    return out, live


def spectral_entropy_stats(x, params=None):
    """Normalised spectral entropy ``(mean, max, min)`` over sliding sub-windows."""
    params = params or FeatureParams()
    x = as_signal(x, params.spectral_subwin, "spectral_entropy_stats")
    h, live = _subwindow_entropies(x, params.spectral_subwin, params.spectral_hop)
    if not live.any():
        raise ZeroVariance("no spectral power outside DC")
    return float(h.mean()), float(h.max()), float(h.min())


# --------------------------------------------------------------------------
# per-window extraction

def channel_features(x, params=None):
    """All 13 features for one channel.

    Returns ``(values, degenerate)`` where ``degenerate`` is True when any
    feature had to fall back to its sentinel.
    """
    params = params or FeatureParams()
    x = np.asarray(x, dtype=np.float64)
    vals = dict(SENTINELS)
    degenerate = False

    def attempt(names, fn):
        nonlocal degenerate
        try:
            out = fn()
        except DataError:
            degenerate = True
            return
        out = out if isinstance(out, tuple) else (out,)
        for name, v in zip(names, out):
            if np.isfinite(v):
                vals[name] = float(v)
            else:
                degenerate = True

    attempt(["std"], lambda: std_dev(x))
    attempt(["shannon_entropy"], lambda: shannon_entropy(x, params.entropy_bins))
    attempt(["kurtosis"], lambda: kurtosis(x))
    attempt(["hjorth_mobility", "hjorth_complexity"], lambda: hjorth(x))
    attempt(["skewness"], lambda: skewness(x))
    attempt(["energy"], lambda: energy(x))
    attempt(["nonlinear_energy"], lambda: nonlinear_energy(x))
    attempt(["higuchi_fd"], lambda: higuchi_fd(x, params.higuchi_kmax))
    attempt(["katz_fd"], lambda: katz_fd(x))
    attempt(["spectral_entropy_mean", "spectral_entropy_max", "spectral_entropy_min"],
            lambda: spectral_entropy_stats(x, params))
    return np.array([vals[n] for n in FEATURE_NAMES]), degenerate


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple
    label: SeizureType
    source_id: str = ""
    window_index: int = 0
    flagged_channels: tuple = field(default=())

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def extract_all(window, params=None, channels=STANDARD_1020):
    """Compute the 247-value feature vector for one :class:`EpochWindow`."""
    params = params or FeatureParams()
    rows, flagged = [], []
    for ch, x in zip(channels, window.samples):
        values, bad = channel_features(x, params)
        rows.append(values)
        if bad:
            flagged.append(ch)
    return FeatureVector(np.concatenate(rows), feature_registry(channels),
                         window.label, window.source_id, window.window_index,
                         tuple(flagged))


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Map windows of shape ``(n, 19, 450)`` to ``(n, 247)`` feature rows.

    Stateless apart from remembering the input geometry, so it drops into a
    :class:`sklearn.pipeline.Pipeline` ahead of a classifier.
    """

    def __init__(self, entropy_bins=64, higuchi_kmax=8, spectral_subwin=128,
                 spectral_hop=64, channels=STANDARD_1020):
        self.entropy_bins = entropy_bins
        self.higuchi_kmax = higuchi_kmax
        self.spectral_subwin = spectral_subwin
        self.spectral_hop = spectral_hop
        self.channels = channels

    def _params(self):
        return FeatureParams(self.entropy_bins, self.higuchi_kmax,
                             self.spectral_subwin, self.spectral_hop)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] != len(self.channels):
            raise ValueError(
                f"expected (n_windows, {len(self.channels)}, n_samples), got {X.shape}"
            )
        return X

    def fit(self, X, y=None):
        X = self._check(X)
        self._params()
        self.n_samples_ = X.shape[2]
        self.feature_names_out_ = np.array(feature_registry(self.channels), dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_names_out_")
        X = self._check(X)
        params = self._params()
        out = np.empty((X.shape[0], len(self.feature_names_out_)))
        for i, win in enumerate(X):
            out[i] = np.concatenate([channel_features(ch, params)[0] for ch in win])
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_.copy()


def windows_to_array(windows):
    return np.stack([w.samples for w in windows]) if windows else np.empty((0, 19, WINDOW_SAMPLES))


__all__ = [
    "FEATURE_NAMES",
    "FeatureParams",
    "FeatureVector",
    "FeatureExtractor",
    "feature_registry",
    "std_dev",
    "shannon_entropy",
    "kurtosis",
    "skewness",
    "hjorth",
    "energy",
    "nonlinear_energy",
    "higuchi_fd",
    "katz_fd",
    "spectral_entropy_stats",
    "channel_features",
    "extract_all",
    "windows_to_array",
    "EpochWindow",
]
