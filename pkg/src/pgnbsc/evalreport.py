"""Confusion counts, accuracy/F1, the TP grid with FP/FN rows, and report files."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError, EmptyEval, LengthMismatch, MalformedFile, UndefinedMetric


def _index(classes, label):
    try:
        return classes.index(label)
    except ValueError:
        raise DataError(f"label {label!r} not among {classes}") from None


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-all TP/TN/FP/FN per class, derived from resolved predictions."""

    classes: tuple
    tp: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    total: int

    @classmethod
    def from_labels(cls, truths, preds, classes):
        truths, preds = list(truths), list(preds)
        if len(truths) != len(preds):
            raise LengthMismatch(f"{len(truths)} truths vs {len(preds)} predictions")
        classes = tuple(classes)
        t = np.array([_index(classes, v) for v in truths], dtype=np.int64)
        p = np.array([_index(classes, v) for v in preds], dtype=np.int64)
        k = len(classes)
        tp = np.array([np.sum((t == j) & (p == j)) for j in range(k)])
        fp = np.array([np.sum((t != j) & (p == j)) for j in range(k)])
        fn = np.array([np.sum((t == j) & (p != j)) for j in range(k)])
        tn = len(t) - tp - fp - fn
        return cls(classes, tp, tn, fp, fn, len(t))

    @classmethod
    def from_grid(cls, grid):
        g = grid.grid
        tp = np.diag(g).copy()
        total = int(g.sum())
        fp = g.sum(axis=0) - tp
        fn = g.sum(axis=1) - tp
        return cls(grid.classes, tp, total - tp - fp - fn, fp, fn, total)

    def counts(self, label):
        j = _index(list(self.classes), label)
        return int(self.tp[j]), int(self.tn[j]), int(self.fp[j]), int(self.fn[j])


def accuracy_from_counts(tp, tn, fp, fn):
    total = tp + tn + fp + fn
    if total == 0:
        raise EmptyEval("accuracy of an empty evaluation")
    return (tp + tn) / total


def f1_from_counts(tp, fp, fn):
    """``TP / (TP + (FP + FN) / 2)``; undefined when nothing is positive."""
    if tp + fp + fn == 0:
        raise UndefinedMetric("F1 undefined with TP + FP + FN = 0")
    return tp / (tp + 0.5 * (fp + fn))


def accuracy(c, label):
    tp, tn, fp, fn = c.counts(label)
    return accuracy_from_counts(tp, tn, fp, fn)


def f1(c, label):
    tp, _, fp, fn = c.counts(label)
    return f1_from_counts(tp, fp, fn)


def micro_accuracy(c):
    if c.total == 0:
        raise EmptyEval("accuracy of an empty evaluation")
    return float(c.tp.sum()) / c.total


@dataclass(frozen=True)
class HeatmapGrid:
    """``grid[t, p]`` counts samples of true class t predicted as p."""

    classes: tuple
    grid: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    def check(self):
        g = self.grid
        diag = np.diag(g)
        if not (np.array_equal(self.fp, g.sum(axis=0) - diag)
                and np.array_equal(self.fn, g.sum(axis=1) - diag)):
            raise DataError("heatmap FP/FN rows disagree with the grid")
        return self


def build_heatmap(truths, preds, classes):
    truths, preds = list(truths), list(preds)
    if len(truths) != len(preds):
        raise LengthMismatch(f"{len(truths)} truths vs {len(preds)} predictions")
    classes = tuple(classes)
    k = len(classes)
    g = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(truths, preds):
        g[_index(classes, t), _index(classes, p)] += 1
    diag = np.diag(g)
    return HeatmapGrid(classes, g, g.sum(axis=0) - diag, g.sum(axis=1) - diag)


def heatmap_csv(g):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\predicted"] + list(g.classes))
    for c, row in zip(g.classes, g.grid):
        w.writerow([c] + [int(v) for v in row])
    w.writerow(["FP"] + [int(v) for v in g.fp])
    w.writerow(["FN"] + [int(v) for v in g.fn])
    return buf.getvalue()


def read_heatmap_csv(path):
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    try:
        classes = tuple(rows[0][1:])
        k = len(classes)
        body = rows[1:1 + k]
        if [r[0] for r in body] != list(classes) or rows[1 + k][0] != "FP" \
                or rows[2 + k][0] != "FN":
            raise MalformedFile(f"{path}: unexpected heatmap layout")
        grid = np.array([[int(v) for v in r[1:]] for r in body], dtype=np.int64)
        fp = np.array([int(v) for v in rows[1 + k][1:]], dtype=np.int64)
        fn = np.array([int(v) for v in rows[2 + k][1:]], dtype=np.int64)
    except (IndexError, ValueError):
        raise MalformedFile(f"{path}: unexpected heatmap layout") from None
    return HeatmapGrid(classes, grid.reshape(k, k), fp, fn).check()


def render(g, path, title=None, display=None):
    """Write ``<path>.csv`` and a vector ``<path>.svg`` for the grid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    g.check()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")
    csv_path.write_text(heatmap_csv(g))

    names = [display(c) if display else str(c) for c in g.classes]
    table = np.vstack([g.grid, g.fp[None], g.fn[None]])
    k = len(names)
    with matplotlib.rc_context({"svg.hashsalt": "pgnbsc", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(1.2 * k + 2.5, 0.9 * (k + 2) + 1.5))
        vmax = max(int(table.max()), 1)
        im = ax.imshow(table, cmap="Blues", vmin=0, vmax=vmax, aspect="auto")
        for (r, c), v in np.ndenumerate(table):
            ax.text(c, r, str(int(v)), ha="center", va="center",
                    color="white" if v > 0.6 * vmax else "black", fontsize=9)
        ax.axhline(k - 0.5, color="black", linewidth=1.5)
        ax.set_xticks(range(k), names, rotation=35, ha="right")
        ax.set_yticks(range(k + 2), names + ["FP", "FN"])
        ax.set_xlabel("Predicted label")
        ax.set_ylabel("True label")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        svg_path = path.with_suffix(".svg")
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return csv_path, svg_path


@dataclass(frozen=True)
class EvalReport:
    counts: ConfusionCounts
    grid: HeatmapGrid
    truths: tuple
    preds: tuple

    @classmethod
    def from_predictions(cls, truths, preds, classes):
        counts = ConfusionCounts.from_labels(truths, preds, classes)
        grid = build_heatmap(truths, preds, classes)
        return cls(counts, grid, tuple(truths), tuple(preds)).cross_check()

    def cross_check(self):
        """Recompute every count from raw pairs and from the grid; must agree."""
        self.grid.check()
        for other in (ConfusionCounts.from_grid(self.grid),
                      ConfusionCounts.from_labels(self.truths, self.preds,
                                                  self.counts.classes)):
            for name in ("tp", "tn", "fp", "fn"):
                if not np.array_equal(getattr(self.counts, name), getattr(other, name)):
                    raise DataError(f"inconsistent {name} counts")
        if not (np.array_equal(self.grid.fp, self.counts.fp)
                and np.array_equal(self.grid.fn, self.counts.fn)):
            raise DataError("heatmap FP/FN rows disagree with confusion counts")
        return self

    @property
    def micro_accuracy(self):
        return micro_accuracy(self.counts)

    def per_class(self):
        rows = []
        for c in self.counts.classes:
            tp, tn, fp, fn = self.counts.counts(c)
            try:
                f = f1_from_counts(tp, fp, fn)
            except UndefinedMetric:
                f = None
            rows.append((c, tp, tn, fp, fn, accuracy_from_counts(tp, tn, fp, fn), f))
        return rows

    @property
    def macro_accuracy(self):
        return float(np.mean([r[5] for r in self.per_class()]))

    def metrics_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "TP", "TN", "FP", "FN", "accuracy", "f1"])
        for c, tp, tn, fp, fn, acc, f in self.per_class():
            w.writerow([c, tp, tn, fp, fn, repr(acc), "" if f is None else repr(f)])
        w.writerow(["micro_accuracy", "", "", "", "", repr(self.micro_accuracy), ""])
        w.writerow(["mean_per_class_accuracy", "", "", "", "", repr(self.macro_accuracy), ""])
        return buf.getvalue()

    def summary(self, title="", display=None):
        name = display or str
        lines = [title] if title else []
        lines.append(f"samples: {self.counts.total}")
        lines.append(f"micro accuracy (diagonal / total): {self.micro_accuracy:.4f}")
        lines.append(f"mean per-class one-vs-all accuracy: {self.macro_accuracy:.4f}")
        lines.append("")
        lines.append(f"{'class':<18}{'TP':>6}{'FP':>6}{'FN':>6}{'acc':>8}{'F1':>8}")
        for c, tp, tn, fp, fn, acc, f in self.per_class():
            fs = "   n/a" if f is None else f"{f:8.3f}"
            lines.append(f"{name(c):<18}{tp:>6}{fp:>6}{fn:>6}{acc:8.3f}{fs:>8}")
        return "\n".join(lines) + "\n"

    def write(self, directory, title="", display=None):
        """Emit metrics.csv, heatmap.csv, heatmap.svg and summary.txt."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.cross_check()
        (d / "metrics.csv").write_text(self.metrics_csv())
        render(self.grid, d / "heatmap", title=title, display=display)
        if read_heatmap_csv(d / "heatmap.csv").grid.tolist() != self.grid.grid.tolist():
            raise DataError("heatmap CSV does not re-parse to the grid")
        (d / "summary.txt").write_text(self.summary(title, display))
        return d
