import numpy as np
import pytest

from pgnbsc.corpus import build_corpus
from pgnbsc.dataset import FeatureMatrix
from pgnbsc.pipeline import corpus_features
from pgnbsc.signal_io import Recording


def tone(freq, rate, seconds, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return amp * np.sin(2 * np.pi * freq * t + phase)


def planted_matrix(seed, n_rows=200, n_informative=5, n_noise=45, shift=1.0):
    """Two balanced classes; the first columns carry class means +/-shift."""
    rng = np.random.default_rng(1000 + seed)
    half = n_rows // 2
    X = rng.normal(size=(n_rows, n_informative + n_noise))
    X[:half, :n_informative] += shift
    X[half:, :n_informative] -= shift
    y = ["absz"] * half + ["tnsz"] * (n_rows - half)
    names = [f"f{i}" for i in range(X.shape[1])]
    return FeatureMatrix(X, y, names, [f"r{i // 10}" for i in range(n_rows)],
                         list(range(n_rows)))


def matrix(X, y, sources=None):
    X = np.asarray(X, dtype=float)
    names = [f"f{i}" for i in range(X.shape[1])]
    sources = sources or [f"s{i}" for i in range(len(y))]
    return FeatureMatrix(X, y, names, sources, list(range(len(y))))


def one_channel(x, rate=250.0, label="EEG T3-REF"):
    return Recording([label], np.asarray(x)[None, :], rate)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def corpus_matrices(corpus_dir):
    train, test, skips = corpus_features(corpus_dir)
    return train, test, skips
