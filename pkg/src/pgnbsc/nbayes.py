"""Kernel-density naive Bayes with uniform priors, single and one-vs-all."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_mask
from .exceptions import DataError, EmptyClass, MalformedFile, WidthMismatch

REST = "rest"
DENSITY_FLOOR = 1e-300
LOG_FLOOR = np.log(DENSITY_FLOOR)
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
_CHUNK = 2_000_000  # elements per broadcast block in the KDE sum

MODEL_FORMAT = "pgnbsc-model"
MODEL_VERSION = 1


def silverman_bandwidth(values):
    """Silverman's rule ``0.9 * min(sd, IQR/1.34) * n**(-1/5)``.

    If one of the two spread estimates is zero the other is used; when both
    vanish the bandwidth is floored at ``1e-6 * (1 + |mean|)``.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    sd = v.std(ddof=1) if n > 1 else 0.0
    q75, q25 = np.percentile(v, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(sd, iqr)
    if spread <= 0:
        spread = max(sd, iqr)
    floor = 1e-6 * (1.0 + abs(v.mean()))
    return max(0.9 * spread * n ** -0.2, floor)


def _kde_log_density(X, values, bandwidth):
    """Per-feature log KDE density; X (n, d), values (m, d), bandwidth (d,)."""
    n, d = X.shape
    m = values.shape[0]
    out = np.empty((n, d))
    step = max(1, _CHUNK // max(1, m * d))
    log_norm = np.log(m) + np.log(bandwidth) + _LOG_SQRT_2PI
    for a in range(0, n, step):
        z = (X[a:a + step, None, :] - values[None, :, :]) / bandwidth
        out[a:a + step] = logsumexp(-0.5 * z * z, axis=1) - log_norm
    return np.maximum(out, LOG_FLOOR)


def _gauss_log_density(X, mean, var):
    lp = -0.5 * (X - mean) ** 2 / var - 0.5 * np.log(var) - _LOG_SQRT_2PI
    return np.maximum(lp, LOG_FLOOR)


class KernelNB(ClassifierMixin, BaseEstimator):
    """Naive Bayes with a Gaussian-kernel density per (class, feature).

    Parameters
    ----------
    classes : sequence, optional
        Class labels in declaration order; ties in :meth:`predict` go to the
        earliest. Defaults to the sorted unique labels seen in ``fit``.
    mask : array of bool, optional
        Feature columns to use. ``None`` uses every column.
    kernel : {"kde", "gaussian"}
        ``"kde"`` is the unbounded Gaussian-kernel density estimate;
        ``"gaussian"`` is ordinary one-Gaussian-per-class naive Bayes, kept
        for comparison.

    Priors are always uniform, whatever the class frequencies.
    """

    def __init__(self, classes=None, mask=None, kernel="kde"):
        self.classes = classes
        self.mask = mask
        self.kernel = kernel

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=object)
        if y.shape[0] != X.shape[0]:
            raise DataError("X and y disagree on row count")
        if self.kernel not in ("kde", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        self.n_features_in_ = X.shape[1]
        self.mask_ = (np.ones(X.shape[1], bool) if self.mask is None
                      else as_mask(self.mask, X.shape[1]))
        classes = (sorted(set(y.tolist())) if self.classes is None
                   else list(self.classes))
        self.classes_ = np.array(classes, dtype=object)
        Xm = X[:, self.mask_]
        self.train_values_ = []
        bw = []
        for c in classes:
            rows = Xm[y == c]
            if rows.shape[0] == 0:
                raise EmptyClass(f"class {c!r} has no training rows")
            self.train_values_.append(rows)
            bw.append([silverman_bandwidth(col) for col in rows.T])
        self.bandwidths_ = np.array(bw)
        self.class_log_prior_ = np.full(len(classes), -np.log(len(classes)))
        return self

    def _masked(self, X):
        check_is_fitted(self, "train_values_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] == self.n_features_in_:
            return X[:, self.mask_]
        if X.shape[1] == int(self.mask_.sum()):
            return X
        raise WidthMismatch(
            f"expected {self.n_features_in_} (or {int(self.mask_.sum())} masked) "
            f"features, got {X.shape[1]}"
        )

    def feature_log_density(self, X):
        """Per-feature class-conditional log densities, shape (n, classes, d)."""
        Xm = self._masked(X)
        out = np.empty((Xm.shape[0], len(self.classes_), Xm.shape[1]))
        for j, values in enumerate(self.train_values_):
            if self.kernel == "kde":
                out[:, j] = _kde_log_density(Xm, values, self.bandwidths_[j])
            else:
                var = np.maximum(values.var(axis=0), self.bandwidths_[j] ** 2)
                out[:, j] = _gauss_log_density(Xm, values.mean(axis=0), var)
        return out

    def log_posterior(self, X):
        """Unnormalised log posterior per class, shape (n, classes)."""
        return self.class_log_prior_ + self.feature_log_density(X).sum(axis=2)

    def predict_log_proba(self, X):
        lp = self.log_posterior(X)
        return lp - logsumexp(lp, axis=1, keepdims=True)

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.log_posterior(X), axis=1)]


class OneVsAllKernelNB(ClassifierMixin, BaseEstimator):
    """One kernel-NB per class, each trained positive-vs-rest on its own mask.

    Parameters
    ----------
    classes : sequence, optional
        Classes in declaration order (one classifier each).
    selector : estimator, optional
        Feature selector cloned per class with ``target=<class>`` and
        ``random_state=random_state + class_index``; its ``get_support()``
        becomes that classifier's mask. Without one every classifier uses
        all features unless ``masks`` is passed to :meth:`fit`.
    kernel : {"kde", "gaussian"}
    random_state : int
    """

    def __init__(self, classes=None, selector=None, kernel="kde", random_state=0):
        self.classes = classes
        self.selector = selector
        self.kernel = kernel
        self.random_state = random_state

    def fit(self, X, y, masks=None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=object)
        classes = (sorted(set(y.tolist())) if self.classes is None
                   else list(self.classes))
        self.classes_ = np.array(classes, dtype=object)
        self.n_features_in_ = X.shape[1]
        self.selectors_ = {}
        self.estimators_ = []
        for j, c in enumerate(classes):
            if masks is not None:
                mask = as_mask(masks[c], X.shape[1])
            elif self.selector is not None:
                sel = clone(self.selector).set_params(
                    target=c, random_state=int(self.random_state) + j)
                sel.fit(X, y)
                self.selectors_[c] = sel
                mask = sel.get_support()
            else:
                mask = np.ones(X.shape[1], bool)
            yb = np.where(y == c, c, REST).astype(object)
            est = KernelNB(classes=[c, REST], mask=mask, kernel=self.kernel)
            self.estimators_.append(est.fit(X, yb))
        return self

    @property
    def masks_(self):
        check_is_fitted(self, "estimators_")
        return {c: e.mask_ for c, e in zip(self.classes_, self.estimators_)}

    def log_odds(self, X):
        """Positive-vs-rest log odds of every classifier, shape (n, classes)."""
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise WidthMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        cols = []
        for est in self.estimators_:
            lp = est.log_posterior(X)
            cols.append(lp[:, 0] - lp[:, 1])
        return np.column_stack(cols)

    def predict_ensemble(self, X):
        """``(votes, labels)``: per-classifier positive votes and the resolved label.

        A classifier votes positive when its log odds are >= 0. The resolved
        label is the positive voter with the largest log odds; with no
        positive vote the largest log odds still decides. Ties go to the
        earlier class.
        """
        lo = self.log_odds(X)
        return lo >= 0, self.classes_[np.argmax(lo, axis=1)]

    def predict(self, X):
        return self.predict_ensemble(X)[1]


# --------------------------------------------------------------------------
# serialisation

def _hex(a):
    return [float(v).hex() for v in np.asarray(a, dtype=np.float64).reshape(-1)]


def _unhex(seq, shape):
    return np.array([float.fromhex(s) for s in seq], dtype=np.float64).reshape(shape)


def _dump_nb(est):
    return {
        "classes": [str(c) for c in est.classes_],
        "kernel": est.kernel,
        "n_features_in": int(est.n_features_in_),
        "mask": np.flatnonzero(est.mask_).tolist(),
        "bandwidths": _hex(est.bandwidths_),
        "train_values": [
            {"rows": int(v.shape[0]), "values": _hex(v)} for v in est.train_values_
        ],
    }


def _load_nb(doc):
    est = KernelNB(classes=doc["classes"], kernel=doc["kernel"])
    n_in = doc["n_features_in"]
    mask = np.zeros(n_in, bool)
    mask[doc["mask"]] = True
    d = int(mask.sum())
    est.mask = mask
    est.n_features_in_ = n_in
    est.mask_ = mask
    est.classes_ = np.array(doc["classes"], dtype=object)
    est.bandwidths_ = _unhex(doc["bandwidths"], (len(doc["classes"]), d))
    est.train_values_ = [_unhex(t["values"], (t["rows"], d))
                         for t in doc["train_values"]]
    est.class_log_prior_ = np.full(len(doc["classes"]), -np.log(len(doc["classes"])))
    return est


def save_model(model, path, feature_names=None, extra=None):
    """Write a fitted model as versioned JSON with hex-encoded floats."""
    if isinstance(model, OneVsAllKernelNB):
        body = {"kind": "one_vs_all",
                "classes": [str(c) for c in model.classes_],
                "estimators": [_dump_nb(e) for e in model.estimators_]}
    elif isinstance(model, KernelNB):
        body = {"kind": "kernel_nb", "estimator": _dump_nb(model)}
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION,
           "feature_names": list(feature_names) if feature_names is not None else None,
           "extra": extra or {}, **body}
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    return Path(path)


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(model, feature_names, extra)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    if doc.get("format") != MODEL_FORMAT:
        raise MalformedFile(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise MalformedFile(f"{path}: unsupported version {doc.get('version')}")
    if doc["kind"] == "kernel_nb":
        model = _load_nb(doc["estimator"])
    elif doc["kind"] == "one_vs_all":
        model = OneVsAllKernelNB(classes=doc["classes"])
        model.classes_ = np.array(doc["classes"], dtype=object)
        model.estimators_ = [_load_nb(e) for e in doc["estimators"]]
        model.n_features_in_ = model.estimators_[0].n_features_in_
        model.selectors_ = {}
    else:
        raise MalformedFile(f"{path}: unknown model kind {doc['kind']!r}")
    return model, doc.get("feature_names"), doc.get("extra", {})
