"""Small input checks shared by the numeric modules."""

import numpy as np

from .exceptions import DataError, EmptyMask, TooShort, WidthMismatch


def as_signal(x, min_len=1, what="signal"):
    """Return ``x`` as a finite 1-D float array of at least ``min_len`` samples."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1:
        a = a.reshape(-1)
    if a.size < min_len:
        raise TooShort(f"{what} needs at least {min_len} samples, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{what} contains non-finite values")
    return a


def as_mask(mask, n_features):
    m = np.asarray(mask, dtype=bool).reshape(-1)
    if m.size != n_features:
        raise WidthMismatch(f"mask has {m.size} entries for {n_features} features")
    if not m.any():
        raise EmptyMask("mask selects no features")
    return m


def check_width(X, n_features):
    if X.shape[1] != n_features:
        raise WidthMismatch(f"expected {n_features} features, got {X.shape[1]}")
