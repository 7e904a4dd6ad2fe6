"""End-to-end orchestration of the three classifier models.

Model 1: balanced training data, one multiclass kernel NB on all features.
Model 2: six one-vs-all kernel NBs, each on a BGWO-selected feature mask.
Model 3: as Model 2 after merging simple and complex partial into "focal".
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bgwo import BgwoConfig, BGWOSelector
from .corpus import build_corpus, load_index
from .dataset import (
    FeatureMatrix,
    LabelScheme,
    apply_scheme,
    balance_upsample,
    check_disjoint_sources,
    display_name,
    split_report,
    split_report_csv,
    write_features_csv,
)
from .evalreport import EvalReport
from .exceptions import EmptyClass
from .features import FeatureParams, extract_all
from .nbayes import KernelNB, OneVsAllKernelNB, save_model
from .preprocess import FilterSpec, SkipReport, preprocess_recording
from .signal_io import read_annotations, read_recording

logger = logging.getLogger(__name__)

MODEL_IDS = (1, 2, 3)


@dataclass(frozen=True)
class ModelConfig:
    model_id: int = 3
    seed: int = 42
    kernel: str = "kde"
    bgwo: BgwoConfig = field(default_factory=BgwoConfig)
    features: FeatureParams = field(default_factory=FeatureParams)
    filters: FilterSpec = field(default_factory=FilterSpec)

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise ValueError(f"model_id must be one of {MODEL_IDS}")

    @property
    def scheme(self):
        return LabelScheme.FIVE_CLASS_FOCAL if self.model_id == 3 else LabelScheme.SIX_CLASS

    @property
    def use_bgwo(self):
        return self.model_id != 1

    def to_dict(self):
        return {
            "model": {"model_id": self.model_id, "seed": self.seed,
                      "kernel": self.kernel, "scheme": self.scheme.value,
                      "use_bgwo": self.use_bgwo},
            "bgwo": dataclasses.asdict(self.bgwo),
            "features": dataclasses.asdict(self.features),
            "filters": dataclasses.asdict(self.filters),
        }

    @classmethod
    def from_dict(cls, doc):
        doc = doc or {}
        unknown = set(doc) - {"model", "bgwo", "features", "filters"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        model = {k: v for k, v in doc.get("model", {}).items()
                 if k not in ("scheme", "use_bgwo")}
        return cls(**model,
                   bgwo=BgwoConfig(**doc.get("bgwo", {})),
                   features=FeatureParams(**doc.get("features", {})),
                   filters=FilterSpec(**doc.get("filters", {})))


def load_config(path=None, **overrides):
    """Read a JSON config (sections model/bgwo/features/filters) and apply overrides.

    Overrides are ``section__key=value`` or bare model keys such as
    ``model_id=1``.
    """
    doc = json.loads(Path(path).read_text()) if path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.rpartition("__")
        doc.setdefault(section or "model", {})[name] = value
    return ModelConfig.from_dict(doc)


# --------------------------------------------------------------------------
# corpus -> feature matrices

def windows_from_files(rec_path, ann_path, source_id=None, filters=None, skips=None):
    rec = read_recording(rec_path)
    if source_id:
        rec = rec.replace(source_id=source_id)
    return preprocess_recording(rec, read_annotations(ann_path), filters, skips=skips)


def corpus_features(corpus_dir, params=None, filters=None):
    """Preprocess and featurise a corpus; returns ``(train, test, skips)``."""
    params = params or FeatureParams()
    rows = {"train": [], "test": []}
    skips = SkipReport()
    for rid, split, rec_path, ann_path in load_index(corpus_dir):
        windows = windows_from_files(rec_path, ann_path, rid, filters, skips)
        rows[split].extend(extract_all(w, params) for w in windows)
    train = FeatureMatrix.from_vectors(rows["train"])
    test = FeatureMatrix.from_vectors(rows["test"], names=train.names)
    return train, test, skips


# --------------------------------------------------------------------------
# model runs

def _digest_matrix(m):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(m.X).tobytes())
    h.update("\x00".join(m.y.tolist()).encode())
    h.update("\x00".join(map(str, m.source_ids.tolist())).encode())
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    inputs: dict
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    selection: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self, with_timings=True):
        d = dataclasses.asdict(self)
        if not with_timings:
            d.pop("timings")
        return d

    def add_output(self, name, path, root=None):
        path = Path(path)
        rel = path.relative_to(root) if root else path
        self.outputs[name] = {"path": rel.as_posix(),
                              "sha256": hashlib.sha256(path.read_bytes()).hexdigest()}


def prepare_training(cfg, train, test):
    """Scheme application and balancing shared by every model."""
    train = apply_scheme(train, cfg.scheme)
    test = apply_scheme(test, cfg.scheme)
    check_disjoint_sources(train, test)
    classes = [c.value for c in cfg.scheme.classes()]
    missing = [c for c in classes if c not in train.class_counts]
    if missing:
        raise EmptyClass(f"no training windows for {missing}")
    return balance_upsample(train), test, classes


def make_estimator(cfg, classes):
    if not cfg.use_bgwo:
        return KernelNB(classes=classes, kernel=cfg.kernel)
    b = cfg.bgwo
    selector = BGWOSelector(population=b.population, max_iterations=b.max_iterations,
                            early_stop_window=b.early_stop_window,
                            early_stop_ratio=b.early_stop_ratio,
                            bias_margin=b.bias_margin, a_start=b.a_start,
                            eval_fraction=b.eval_fraction, kernel=cfg.kernel)
    return OneVsAllKernelNB(classes=classes, selector=selector, kernel=cfg.kernel,
                            random_state=cfg.seed)


def run_model(cfg, train, test):
    """Train and evaluate one model; returns ``(model, report, manifest)``."""
    timings = {}
    t0 = time.perf_counter()
    balanced, test, classes = prepare_training(cfg, train, test)
    timings["prepare"] = time.perf_counter() - t0

    manifest = RunManifest(config=cfg.to_dict(),
                           inputs={"train_sha256": _digest_matrix(train),
                                   "test_sha256": _digest_matrix(test),
                                   "train_rows": len(train),
                                   "balanced_rows": len(balanced),
                                   "test_rows": len(test),
                                   "balanced_counts": dict(sorted(
                                       balanced.class_counts.items()))},
                           timings=timings)

    t0 = time.perf_counter()
    model = make_estimator(cfg, classes).fit(balanced.X, balanced.y)
    timings["fit"] = time.perf_counter() - t0

    if isinstance(model, OneVsAllKernelNB):
        for c, sel in model.selectors_.items():
            names = [n for n, keep in zip(train.names, sel.get_support()) if keep]
            manifest.selection[c] = {"n_selected": len(names),
                                     "iterations": sel.n_iter_,
                                     "best_fitness": _finite_or_none(sel.best_fitness_),
                                     "fitness_trace": [_finite_or_none(v) for v in
                                                       sel.fitness_trace_]}

    t0 = time.perf_counter()
    preds = model.predict(test.X)
    report = EvalReport.from_predictions(test.y.tolist(), preds.tolist(), classes)
    timings["evaluate"] = time.perf_counter() - t0
    manifest.inputs["micro_accuracy"] = report.micro_accuracy
    return model, report, manifest


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def write_mask(path, names, mask, trace, target, extra=None):
    doc = {"target": target,
           "selected": [n for n, keep in zip(names, mask) if keep],
           "n_features": len(names),
           "fitness_trace": [_finite_or_none(v) for v in trace]}
    doc.update(extra or {})
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
    return Path(path)


def read_mask(path, names):
    doc = json.loads(Path(path).read_text())
    chosen = set(doc["selected"])
    unknown = chosen - set(names)
    if unknown:
        raise ValueError(f"{path}: names not in registry: {sorted(unknown)[:3]}")
    return doc["target"], np.array([n in chosen for n in names])


def write_outputs(out_dir, cfg, train, test, model, report, manifest, skips=None):
    """Write model, masks, split report, evaluation report and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")
    manifest.add_output("config", out / "config.json", out)

    write_features_csv(train, out / "features_train.csv")
    write_features_csv(test, out / "features_test.csv")
    manifest.add_output("features_train", out / "features_train.csv", out)
    manifest.add_output("features_test", out / "features_test.csv", out)

    (out / "split_report.txt").write_text(split_report(train, test))
    (out / "split_report.csv").write_text(split_report_csv(train, test))
    manifest.add_output("split_report", out / "split_report.csv", out)

    save_model(model, out / "model.json", train.names,
               extra={"model_id": cfg.model_id, "scheme": cfg.scheme.value})
    manifest.add_output("model", out / "model.json", out)

    if isinstance(model, OneVsAllKernelNB):
        (out / "masks").mkdir(exist_ok=True)
        for c, sel in model.selectors_.items():
            p = write_mask(out / "masks" / f"{c}.json", train.names, sel.get_support(),
                           sel.fitness_trace_, c)
            manifest.add_output(f"mask_{c}", p, out)

    title = f"Model {cfg.model_id} ({cfg.scheme.value})"
    rep = report.write(out / "report", title=title, display=display_name)
    for name in ("metrics.csv", "heatmap.csv", "heatmap.svg", "summary.txt"):
        manifest.add_output(f"report_{name}", rep / name, out)
    if skips is not None:
        manifest.inputs["skipped_annotations"] = len(skips)

    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=1,
                                                  sort_keys=True) + "\n")
    return out


def run_all(cfg, out_dir, corpus_dir=None):
    """Corpus on disk -> features -> model -> report directory.

    Without ``corpus_dir`` the bundled synthetic corpus is generated into
    ``out_dir/corpus`` first.
    """
    out = Path(out_dir)
    t0 = time.perf_counter()
    if corpus_dir is None:
        corpus_dir = build_corpus(out / "corpus")
    t_corpus = time.perf_counter() - t0
    t0 = time.perf_counter()
    train, test, skips = corpus_features(corpus_dir, cfg.features, cfg.filters)
    t_feat = time.perf_counter() - t0
    model, report, manifest = run_model(cfg, train, test)
    manifest.timings.update(corpus=t_corpus, features=t_feat)
    write_outputs(out, cfg, train, test, model, report, manifest, skips)
    return report, manifest
