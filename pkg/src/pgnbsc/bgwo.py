"""Binary grey wolf optimisation for wrapper feature selection.

Each wolf is a boolean mask over the feature columns. A mask is scored by
``1 - F1`` of a one-vs-rest kernel naive Bayes for a single target class;
empty masks (and masks whose F1 is undefined) cost ``inf`` so they can never
lead the pack.

Position updates follow the binary "approach 1" scheme: toward each of the
three leaders a continuous grey-wolf step is squashed through a sigmoid and
thresholded, and the new mask takes each bit from one of the three resulting
candidate masks chosen uniformly at random.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .evalreport import f1_from_counts
from .exceptions import DataError, Exhausted, RegistryMismatch, UndefinedMetric
from .nbayes import REST, KernelNB

N_LEADERS = 3


@dataclass(frozen=True)
class BgwoConfig:
    population: int = 8
    max_iterations: int = 100
    early_stop_window: int = 6
    early_stop_ratio: float = 0.05
    bias_margin: float = 0.01
    a_start: float = 2.0
    eval_fraction: float = 0.3

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if self.early_stop_window < 2:
            raise ValueError("early_stop_window must be >= 2")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not 0 < self.eval_fraction < 1:
            raise ValueError("eval_fraction must lie in (0, 1)")


@dataclass
class Wolf:
    mask: np.ndarray
    fitness: float = math.inf

    def copy(self):
        return Wolf(self.mask.copy(), self.fitness)


@dataclass
class WolfPack:
    wolves: list
    leaders: list
    seed: int
    t: int = 0
    max_iterations: int = 100
    best_history: list = field(default_factory=list)

    @property
    def best(self):
        return self.leaders[0]

    def copy(self):
        return replace(self, wolves=[w.copy() for w in self.wolves],
                       leaders=[w.copy() for w in self.leaders],
                       best_history=list(self.best_history))


# --------------------------------------------------------------------------
# fitness

def _f1_cost(truth_pos, pred_pos):
    tp = int(np.sum(truth_pos & pred_pos))
    fp = int(np.sum(~truth_pos & pred_pos))
    fn = int(np.sum(truth_pos & ~pred_pos))
    try:
        return 1.0 - f1_from_counts(tp, fp, fn)
    except UndefinedMetric:
        return math.inf


def _binary_labels(y, target):
    y = np.asarray(y, dtype=object)
    return np.where(y == target, target, REST).astype(object)


def mask_fitness(mask, X_train, y_train, X_eval, y_eval, target, kernel="kde"):
    """``1 - F1`` of a freshly trained target-vs-rest kernel NB on ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return math.inf
    yb = _binary_labels(y_train, target)
    if not ((yb == target).any() and (yb == REST).any()):
        return math.inf
    est = KernelNB(classes=[target, REST], mask=mask, kernel=kernel).fit(X_train, yb)
    pred = est.predict(X_eval)
    return _f1_cost(np.asarray(y_eval, dtype=object) == target, pred == target)


def fitness(mask, train, eval, target, kernel="kde"):
    """Wrapper cost of ``mask`` on feature matrices; ``inf`` for an empty mask."""
    if train.names != eval.names:
        raise RegistryMismatch("train and eval matrices use different registries")
    if target not in set(train.y.tolist()):
        raise DataError(f"target {target!r} absent from training data")
    return mask_fitness(mask, train.X, train.y, eval.X, eval.y, target, kernel)


class WrapperFitness:
    """Cached ``1 - F1`` evaluator for one (train, eval, target) triple.

    Per-feature class-conditional log densities of every evaluation row do not
    depend on the mask, so they are computed once; a mask's log odds are then
    a sum over its selected columns. Results match :func:`mask_fitness`.
    """

    def __init__(self, X_train, y_train, X_eval, y_eval, target, kernel="kde"):
        self.target = target
        self.n_features = X_train.shape[1]
        yb = _binary_labels(y_train, target)
        self.truth = np.asarray(y_eval, dtype=object) == target
        self.valid = bool((yb == target).any() and (yb == REST).any())
        if self.valid:
            est = KernelNB(classes=[target, REST], kernel=kernel).fit(X_train, yb)
            table = est.feature_log_density(X_eval)
            self._pos = table[:, 0, :]
            self._neg = table[:, 1, :]
        self._cache = {}
        self.evaluations = 0

    def __call__(self, mask):
        mask = np.asarray(mask, dtype=bool)
        key = np.packbits(mask).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self.evaluations += 1
        if not mask.any() or not self.valid:
            cost = math.inf
        else:
            pos = self._pos[:, mask].sum(axis=1)
            neg = self._neg[:, mask].sum(axis=1)
            cost = _f1_cost(self.truth, pos >= neg)
        self._cache[key] = cost
        return cost


def holdout_split(X, eval_fraction=0.3):
    """Deterministic train/eval split by hashing each row's bytes.

    Identical rows (e.g. upsampled copies) always land on the same side.
    Returns boolean ``is_eval`` per row.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    u = np.array([
        int.from_bytes(hashlib.sha256(r.tobytes()).digest()[:8], "big") / 2.0 ** 64
        for r in X
    ])
    return u < eval_fraction


# --------------------------------------------------------------------------
# pack dynamics

def _rng(seed, t, i):
    # one stream per (iteration, wolf) so evaluation order cannot matter
    return np.random.default_rng([int(seed), int(t), int(i)])


def _insert_leaders(leaders, candidates, margin):
    """Admit candidates into the leader list under an acceptance margin.

    A candidate enters only if it beats some leader by more than ``margin``;
    it then takes its sorted place and the worst leader drops out, so the
    list stays sorted best-first.
    """
    leaders = [w.copy() for w in leaders]
    for cand in sorted(candidates, key=lambda w: w.fitness):
        if not math.isfinite(cand.fitness):
            break
        if any(cand.fitness < lead.fitness - margin for lead in leaders):
            leaders.append(cand.copy())
            leaders.sort(key=lambda w: w.fitness)
            leaders.pop()
    return leaders


def init_pack(n_features, cfg, fitness_fn, seed=0):
    """Random Bernoulli(1/2) masks, evaluated; the best three become leaders."""
    wolves = []
    for i in range(cfg.population):
        mask = _rng(seed, 0, i).random(n_features) < 0.5
        wolves.append(Wolf(mask, fitness_fn(mask)))
    order = sorted(range(len(wolves)), key=lambda i: wolves[i].fitness)
    leaders = [wolves[i].copy() for i in order[:N_LEADERS]]
    return WolfPack(wolves, leaders, seed, 0, cfg.max_iterations,
                    [leaders[0].fitness])


def acceptance_margin(t, cfg):
    """Leader-replacement margin, growing linearly with the iteration count."""
    if cfg.max_iterations == 0:
        return 0.0
    return cfg.bias_margin * t / cfg.max_iterations


def _move(wolf_mask, leaders, a, rng):
    d = wolf_mask.size
    x = wolf_mask.astype(np.float64)
    candidates = []
    for lead in leaders:
        r1, r2, r3 = rng.random((3, d))
        A = 2.0 * a * r1 - a
        C = 2.0 * r2
        D = np.abs(C * lead.mask - x)
        cstep = 1.0 / (1.0 + np.exp(-10.0 * (A * D - 0.5)))
        bstep = cstep >= r3
        candidates.append(lead.mask | bstep)
    pick = rng.random(d)
    return np.where(pick < 1 / 3, candidates[0],
                    np.where(pick < 2 / 3, candidates[1], candidates[2]))


def step(pack, cfg, fitness_fn):
    """Advance the pack by one iteration and return the new pack."""
    if pack.t >= cfg.max_iterations:
        raise Exhausted(f"iteration budget of {cfg.max_iterations} used up")
    a = cfg.a_start * (1.0 - pack.t / cfg.max_iterations)
    new = []
    for i, wolf in enumerate(pack.wolves):
        mask = _move(wolf.mask, pack.leaders, a, _rng(pack.seed, pack.t + 1, i))
        new.append(Wolf(mask, fitness_fn(mask)))
    leaders = _insert_leaders(pack.leaders, new, acceptance_margin(pack.t, cfg))
    history = pack.best_history + [leaders[0].fitness]
    return replace(pack, wolves=new, leaders=leaders, t=pack.t + 1,
                   best_history=history)


def should_stop(pack, cfg):
    """Plateau test on the best-fitness history.

    Fires once at least ``early_stop_window`` iterations have run and the
    population standard deviation of the last ``early_stop_window`` values
    is below ``early_stop_ratio`` times that of the whole history (or the
    whole history is flat).
    """
    w = cfg.early_stop_window
    hist = np.asarray(pack.best_history, dtype=np.float64)
    if pack.t < w or hist.size < w:
        return False
    if not np.all(np.isfinite(hist[-w:])):
        return False
    finite = hist[np.isfinite(hist)]
    if np.ptp(finite) == 0:
        return True
    recent = hist[-w:]
    recent_sd = 0.0 if np.ptp(recent) == 0 else recent.std()
    return bool(recent_sd < cfg.early_stop_ratio * finite.std())


def run_pack(n_features, cfg, fitness_fn, seed=0):
    pack = init_pack(n_features, cfg, fitness_fn, seed)
    while pack.t < cfg.max_iterations and not should_stop(pack, cfg):
        pack = step(pack, cfg, fitness_fn)
    return pack


def _nonempty(pack):
    for w in pack.leaders + pack.wolves:
        if w.mask.any():
            return w.mask.copy()
    return np.ones_like(pack.best.mask)


def select_arrays(X, y, target, cfg=None, seed=0, X_eval=None, y_eval=None,
                  kernel="kde"):
    """Array-level selection; returns ``(mask, best_history, pack)``."""
    cfg = cfg or BgwoConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=object)
    if X_eval is None:
        is_eval = holdout_split(X, cfg.eval_fraction)
        X, X_eval, y, y_eval = X[~is_eval], X[is_eval], y[~is_eval], y[is_eval]
    fn = WrapperFitness(X, y, np.asarray(X_eval, dtype=np.float64), y_eval, target,
                        kernel)
    pack = run_pack(X.shape[1], cfg, fn, seed)
    mask = pack.best.mask.copy() if pack.best.mask.any() else _nonempty(pack)
    return mask, list(pack.best_history), pack


def select_features(train, eval=None, target=None, cfg=None, seed=0, kernel="kde"):
    """Pick a feature mask for ``target`` on feature matrices.

    With ``eval=None`` the training matrix is split internally (70/30 by row
    hash) into fitting and scoring parts.
    """
    if target is None:
        raise DataError("a target class is required")
    if eval is not None and eval.names != train.names:
        raise RegistryMismatch("train and eval matrices use different registries")
    mask, history, _ = select_arrays(
        train.X, train.y, target, cfg, seed,
        None if eval is None else eval.X, None if eval is None else eval.y, kernel)
    return mask, history


class BGWOSelector(SelectorMixin, BaseEstimator):
    """scikit-learn feature selector wrapping binary grey wolf optimisation.

    ``fit(X, y)`` searches masks for ``target`` (one class against the rest)
    and exposes the winner through ``get_support()``; ``fitness_trace_``
    holds the best cost after each iteration.
    """

    def __init__(self, target=None, population=8, max_iterations=100,
                 early_stop_window=6, early_stop_ratio=0.05, bias_margin=0.01,
                 a_start=2.0, eval_fraction=0.3, kernel="kde", random_state=0):
        self.target = target
        self.population = population
        self.max_iterations = max_iterations
        self.early_stop_window = early_stop_window
        self.early_stop_ratio = early_stop_ratio
        self.bias_margin = bias_margin
        self.a_start = a_start
        self.eval_fraction = eval_fraction
        self.kernel = kernel
        self.random_state = random_state

    def config(self):
        return BgwoConfig(self.population, self.max_iterations,
                          self.early_stop_window, self.early_stop_ratio,
                          self.bias_margin, self.a_start, self.eval_fraction)

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=object)
        if self.target is None:
            raise DataError("BGWOSelector needs a target class")
        if self.target not in set(y.tolist()):
            raise DataError(f"target {self.target!r} absent from y")
        self.n_features_in_ = X.shape[1]
        seed = 0 if self.random_state is None else int(self.random_state)
        mask, history, pack = select_arrays(X, y, self.target, self.config(), seed,
                                            kernel=self.kernel)
        self.support_ = mask
        self.fitness_trace_ = history
        self.best_fitness_ = pack.best.fitness
        self.n_iter_ = pack.t
        self.stopped_early_ = pack.t < self.max_iterations
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_
