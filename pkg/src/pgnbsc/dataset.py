"""Feature matrices, label schemes, training-set balancing and split reports."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError, EmptyClass, MalformedFile, RegistryMismatch
from .features import feature_registry
from .preprocess import WINDOW_S
from .signal_io import SeizureType

META_COLUMNS = ("label", "source_id", "window_index")


class LabelScheme(str, enum.Enum):
    SIX_CLASS = "six"
    FIVE_CLASS_FOCAL = "five_focal"

    def map(self, label):
        label = SeizureType.parse(label)
        if self is LabelScheme.FIVE_CLASS_FOCAL and label in (
            SeizureType.COMPLEX_PARTIAL, SeizureType.SIMPLE_PARTIAL
        ):
            return SeizureType.FOCAL
        return label

    def classes(self):
        """Effective labels of this scheme in a fixed order."""
        out = []
        for t in SeizureType.raw_types():
            m = self.map(t)
            if m not in out:
                out.append(m)
        return out


@dataclass(frozen=True)
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray  # label codes, e.g. "absz"
    names: tuple
    source_ids: np.ndarray
    window_indices: np.ndarray
    scheme: LabelScheme = LabelScheme.SIX_CLASS
    flagged: np.ndarray = field(default=None)  # rows with sentinel-filled channels

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64).reshape(-1, len(self.names))
        n = X.shape[0]
        y = np.array([SeizureType.parse(v).value for v in self.y], dtype=object)
        src = np.array(self.source_ids, dtype=object).reshape(-1)
        idx = np.array(self.window_indices, dtype=np.int64).reshape(-1)
        flagged = (np.zeros(n, bool) if self.flagged is None
                   else np.array(self.flagged, dtype=bool).reshape(-1))
        if not (len(y) == len(src) == len(idx) == len(flagged) == n):
            raise DataError("feature matrix columns disagree on row count")
        for arr in (X, y, src, idx, flagged):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "source_ids", src)
        object.__setattr__(self, "window_indices", idx)
        object.__setattr__(self, "flagged", flagged)
        object.__setattr__(self, "scheme", LabelScheme(self.scheme))

    def __len__(self):
        return self.X.shape[0]

    @property
    def class_counts(self):
        return dict(Counter(self.y.tolist()))

    @classmethod
    def from_vectors(cls, vectors, scheme=LabelScheme.SIX_CLASS, names=None):
        vectors = list(vectors)
        if names is None:
            names = vectors[0].names if vectors else feature_registry()
        for v in vectors:
            if tuple(v.names) != tuple(names):
                raise RegistryMismatch("feature vectors use different registries")
        X = np.array([v.values for v in vectors]).reshape(-1, len(names))
        return cls(X, [v.label for v in vectors], names,
                   [v.source_id for v in vectors],
                   [v.window_index for v in vectors], scheme,
                   [bool(v.flagged_channels) for v in vectors])

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return replace(self, X=self.X[rows], y=self.y[rows],
                       source_ids=self.source_ids[rows],
                       window_indices=self.window_indices[rows],
                       flagged=self.flagged[rows])

    def concat(self, other):
        if other.names != self.names:
            raise RegistryMismatch("cannot concatenate different registries")
        return replace(self, X=np.vstack([self.X, other.X]),
                       y=np.concatenate([self.y, other.y]),
                       source_ids=np.concatenate([self.source_ids, other.source_ids]),
                       window_indices=np.concatenate([self.window_indices,
                                                      other.window_indices]),
                       flagged=np.concatenate([self.flagged, other.flagged]))

    def row_digests(self):
        """SHA-256 of each row's feature bytes."""
        return [hashlib.sha256(r.tobytes()).hexdigest() for r in self.X]


def apply_scheme(m, scheme):
    scheme = LabelScheme(scheme)
    y = [scheme.map(v).value for v in m.y]
    return replace(m, y=y, scheme=scheme)


def upsample_factor(count_max, count):
    """Nearest-integer repetition factor, halves rounded up, never below 1."""
    return max(1, math.floor(count_max / count + 0.5))


def balance_upsample(m):
    """Repeat minority-class rows by the nearest integer factor of the largest class.

    Original rows keep their order; each minority class then gets ``f - 1``
    further copies of its rows appended, copy by copy.
    """
    counts = m.class_counts
    if len(counts) < 2:
        raise EmptyClass("balancing needs at least two non-empty classes")
    biggest = max(counts.values())
    extra = []
    for label in sorted(counts, key=lambda c: _label_order(c)):
        f = upsample_factor(biggest, counts[label])
        rows = np.flatnonzero(m.y == label)
        extra.extend(np.tile(rows, f - 1).tolist())
    order = np.concatenate([np.arange(len(m)), np.asarray(extra, dtype=np.int64)])
    return m.take(order)


def _label_order(code):
    order = [t.value for t in SeizureType]
    return order.index(code)


def check_disjoint_sources(train, test):
    shared = set(train.source_ids.tolist()) & set(test.source_ids.tolist())
    if shared:
        raise DataError(f"recordings appear in both train and test: {sorted(shared)}")


# --------------------------------------------------------------------------
# reports

_DISPLAY = {
    SeizureType.ABSENCE: "Absence",
    SeizureType.COMPLEX_PARTIAL: "Complex partial",
    SeizureType.MYOCLONIC: "Myoclonic",
    SeizureType.SIMPLE_PARTIAL: "Simple partial",
    SeizureType.TONIC: "Tonic",
    SeizureType.TONIC_CLONIC: "Tonic-clonic",
    SeizureType.FOCAL: "Focal onset",
}


def display_name(code):
    return _DISPLAY[SeizureType.parse(code)]


def split_rows(train, test):
    """Per-class rows of ``(name, files_tr, files_tt, w_tr, w_tt, dur_tr, dur_tt)``."""
    if train.names != test.names:
        raise RegistryMismatch("train and test use different registries")
    labels = [t.value for t in SeizureType
              if t.value in set(train.y.tolist()) | set(test.y.tolist())]
    if not labels:
        labels = [t.value for t in train.scheme.classes()]
    rows = []
    for lab in labels:
        tr, tt = train.y == lab, test.y == lab
        w_tr, w_tt = int(tr.sum()), int(tt.sum())
        rows.append((display_name(lab),
                     len(set(train.source_ids[tr].tolist())),
                     len(set(test.source_ids[tt].tolist())),
                     w_tr, w_tt, w_tr * WINDOW_S, w_tt * WINDOW_S))
    total = ("TOTAL",) + tuple(sum(r[i] for r in rows) for i in range(1, 7))
    return rows, total


SPLIT_HEADER = ("Seizure type", "Training", "Testing", "wTrain", "wTest",
                "wDuration_Tr (s)", "wDuration_Tt (s)")


def split_report(train, test):
    """Aligned text table of per-class file/window counts and windowed durations."""
    rows, total = split_rows(train, test)
    cells = [SPLIT_HEADER] + [_fmt_row(r) for r in rows] + [_fmt_row(total)]
    widths = [max(len(c[i]) for c in cells) for i in range(len(SPLIT_HEADER))]
    lines = []
    for j, c in enumerate(cells):
        first = c[0].ljust(widths[0])
        rest = [c[i].rjust(widths[i]) for i in range(1, len(c))]
        lines.append("  ".join([first] + rest))
        if j == 0 or j == len(cells) - 2:
            lines.append("-" * len(lines[-1]))
    return "\n".join(lines) + "\n"


def split_report_csv(train, test):
    rows, total = split_rows(train, test)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPLIT_HEADER)
    for r in rows + [total]:
        w.writerow(_fmt_row(r))
    return buf.getvalue()


def _fmt_row(r):
    return (r[0],) + tuple(str(v) for v in r[1:5]) + tuple(f"{v:.1f}" for v in r[5:])


# --------------------------------------------------------------------------
# CSV

def write_features_csv(m, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(m.names) + list(META_COLUMNS))
        for x, y, s, i in zip(m.X, m.y, m.source_ids, m.window_indices):
            w.writerow([repr(float(v)) for v in x] + [y, s, int(i)])
    return Path(path)


def read_features_csv(path, scheme=None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFile(f"{path}: empty file") from None
        if tuple(header[-3:]) != META_COLUMNS:
            raise MalformedFile(f"{path}: last columns must be {META_COLUMNS}")
        names = tuple(header[:-3])
        X, y, src, idx = [], [], [], []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedFile(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                X.append([float(v) for v in row[:-3]])
                idx.append(int(row[-1]))
            except ValueError:
                raise MalformedFile(f"{path}:{lineno}: non-numeric value") from None
            y.append(row[-3])
            src.append(row[-2])
    y_types = [SeizureType.parse(v) for v in y]
    if scheme is None:
        scheme = (LabelScheme.FIVE_CLASS_FOCAL if SeizureType.FOCAL in y_types
                  else LabelScheme.SIX_CLASS)
    return FeatureMatrix(np.array(X).reshape(-1, len(names)), y_types, names,
                         src, idx, scheme)
