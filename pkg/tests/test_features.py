import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from conftest import tone
from oracles import higuchi_oracle
from pgnbsc.exceptions import DegeneratePath, TooShort, ZeroVariance
from pgnbsc.features import (
    FEATURE_NAMES,
    SENTINELS,
    FeatureExtractor,
    FeatureParams,
    energy,
    extract_all,
    feature_registry,
    higuchi_curve,
    higuchi_fd,
    hjorth,
    katz_fd,
    kurtosis,
    nonlinear_energy,
    shannon_entropy,
    skewness,
    spectral_entropy_stats,
    std_dev,
    windows_to_array,
)
from pgnbsc.preprocess import EpochWindow
from pgnbsc.signal_io import STANDARD_1020


def white(n, seed=0):
    return np.random.default_rng(seed).normal(size=n)


# --- single-feature examples -------------------------------------------------

def test_std_dev():
    assert std_dev([1, 1, 1, 1]) == 0
    assert std_dev([0, 2, 0, 2]) == 1
    with pytest.raises(TooShort):
        std_dev([])


def test_shannon_entropy():
    assert shannon_entropy(np.full(10, 3.0)) == 0
    # one sample per bin: bin i spans [i, i+1) on [0, 64]
    x = np.append(np.arange(63) + 0.5, 64.0)
    assert shannon_entropy(x, 64) == pytest.approx(6.0)
    for bins in (2, 7, 64):
        assert shannon_entropy([0, 1] * 20, bins) == pytest.approx(1.0)


def test_kurtosis():
    assert kurtosis([-1, 1, -1, 1]) == 1
    assert abs(kurtosis(white(100_000, 11)) - 3) < 0.1
    with pytest.raises(ZeroVariance):
        kurtosis([2, 2, 2, 2])


def test_skewness():
    assert skewness([-2, -1, 1, 2]) == 0
    x = np.array([0, 0, 0, 9.0])
    d = x - x.mean()
    assert skewness(x) == pytest.approx(np.mean(d ** 3) / np.mean(d ** 2) ** 1.5)
    assert skewness(x) == pytest.approx(2 / math.sqrt(3))
    with pytest.raises(ZeroVariance):
        skewness([1, 1, 1])


@pytest.mark.parametrize("f", [3.0, 10.0, 20.0])
def test_hjorth_sine(f):
    mob, comp = hjorth(tone(f, 250, 8))
    assert mob == pytest.approx(2 * math.sin(math.pi * f / 250), rel=0.01)
    assert comp == pytest.approx(1.0, rel=0.02)


def test_hjorth_constant():
    with pytest.raises(ZeroVariance):
        hjorth(np.ones(20))


def test_energy():
    assert energy([3, 4]) == 25
    assert energy(np.zeros(7)) == 0
    x = white(50)
    assert energy(2.5 * x) == pytest.approx(6.25 * energy(x))


def test_nonlinear_energy():
    assert nonlinear_energy(np.full(9, 4.0)) == 0
    assert nonlinear_energy([1, 2, 3]) == 1
    f, fs = 10.0, 250.0
    assert nonlinear_energy(tone(f, fs, 4)) == pytest.approx(
        math.sin(2 * math.pi * f / fs) ** 2, rel=0.01)
    with pytest.raises(TooShort):
        nonlinear_energy([1, 2])


@pytest.mark.parametrize("seed", range(3))
def test_higuchi_matches_loop_oracle(seed):
    x = np.cumsum(white(300, seed))
    fd, curve = higuchi_oracle(x, 8)
    assert higuchi_fd(x, 8) == pytest.approx(fd, abs=1e-10)
    np.testing.assert_allclose(higuchi_curve(x, 8), curve, rtol=1e-12)


def test_higuchi_limits():
    assert higuchi_fd(np.arange(1000.0)) == pytest.approx(1.0, abs=0.05)
    assert higuchi_fd(white(5000, 5)) == pytest.approx(2.0, abs=0.15)
    with pytest.raises(TooShort):
        higuchi_fd(white(100), kmax=1)
    with pytest.raises(TooShort):
        higuchi_fd(white(17), kmax=8)


def test_higuchi_ordering():
    noise = higuchi_fd(white(450, 9))
    sine = higuchi_fd(tone(6, 250, 1.8))
    ramp = higuchi_fd(np.linspace(0, 1, 450))
    assert noise > sine > ramp


def test_katz():
    assert katz_fd(np.arange(200.0)) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DegeneratePath):
        katz_fd(np.full(20, 3.0))
    ramp = np.arange(200.0)
    tri = np.abs((np.arange(200) % 40) - 20.0)
    assert katz_fd(tri) > katz_fd(ramp)


def test_katz_changes_under_scaling():
    x = white(450, 4)
    assert katz_fd(3 * x) != pytest.approx(katz_fd(x), rel=1e-3)


def test_spectral_entropy():
    s = spectral_entropy_stats(tone(20, 250, 1.8))
    assert max(s) < 0.35
    mean, hi, lo = spectral_entropy_stats(white(450, 8))
    assert mean > 0.85
    assert lo <= mean <= hi
    with pytest.raises(TooShort):
        spectral_entropy_stats(white(100))


def test_spectral_entropy_single_line_is_zero():
    # 16 full cycles in a 128-sample frame land in a single FFT bin
    x = np.cos(2 * np.pi * 16 * np.arange(128) / 128)
    assert spectral_entropy_stats(x) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)


def test_moments_against_scipy():
    x = white(777, 2) ** 3
    assert kurtosis(x) == pytest.approx(stats.kurtosis(x, fisher=False), rel=1e-10)
    assert skewness(x) == pytest.approx(stats.skew(x), rel=1e-10)


# --- properties --------------------------------------------------------------

signals = arrays(np.float64, 450,
                 elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


@settings(max_examples=60, deadline=None)
@given(signals, st.floats(0.01, 100))
def test_scale_invariance(x, c):
    x = x + white(x.size, 1)  # keep every statistic well conditioned
    for fn in (kurtosis, skewness, higuchi_fd):
        a, b = fn(x), fn(c * x)
        assert b == pytest.approx(a, rel=1e-6, abs=1e-9)
    np.testing.assert_allclose(hjorth(c * x), hjorth(x), rtol=1e-6)
    np.testing.assert_allclose(spectral_entropy_stats(c * x), spectral_entropy_stats(x),
                               rtol=1e-6, atol=1e-9)
    assert std_dev(c * x) == pytest.approx(c * std_dev(x), rel=1e-9)
    assert energy(c * x) == pytest.approx(c * c * energy(x), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(signals, st.integers(2, 128))
def test_entropy_bounds(x, bins):
    assert 0 <= shannon_entropy(x, bins) <= math.log2(bins) + 1e-12
    if not np.any(x - x[0]):
        return
    mean, hi, lo = spectral_entropy_stats(x)
    assert 0 <= lo <= mean <= hi <= 1 + 1e-12


def _window(data):
    return EpochWindow(data, "tnsz", "w", 0)


def adversarial():
    t = np.arange(450)
    impulse = np.zeros(450)
    impulse[200] = 1e4
    return st.sampled_from([np.zeros(450), np.full(450, 7.0), t * 1.0, impulse,
                            np.sign(np.sin(t)), np.where(t < 225, -1e6, 1e6)])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.one_of(signals, adversarial()), min_size=19, max_size=19))
def test_extract_all_always_finite(chans):
    v = extract_all(_window(np.vstack(chans)))
    assert v.values.shape == (247,)
    assert np.all(np.isfinite(v.values))


def test_extract_all_shape_and_determinism():
    data = np.random.default_rng(0).normal(size=(19, 450))
    a, b = extract_all(_window(data)), extract_all(_window(data.copy()))
    assert a.names == feature_registry()
    assert len(a.names) == 247 and a.names[0] == "Fp1.std"
    assert a.values.tobytes() == b.values.tobytes()
    assert a.flagged_channels == ()


def test_zero_channel_gets_sentinels():
    data = np.random.default_rng(0).normal(size=(19, 450))
    data[4] = 0.0
    v = extract_all(_window(data))
    block = v.values[4 * 13:5 * 13]
    np.testing.assert_array_equal(block, [SENTINELS[n] for n in FEATURE_NAMES])
    assert v.flagged_channels == (STANDARD_1020[4],)


def test_feature_params_invariants():
    with pytest.raises(ValueError):
        FeatureParams(entropy_bins=1)
    with pytest.raises(ValueError):
        FeatureParams(spectral_subwin=451)


def test_extractor_matches_extract_all():
    rng = np.random.default_rng(3)
    wins = [_window(rng.normal(size=(19, 450))) for _ in range(2)]
    X = windows_to_array(wins)
    ext = FeatureExtractor().fit(X)
    out = ext.transform(X)
    assert out.shape == (2, 247)
    for row, w in zip(out, wins):
        np.testing.assert_array_equal(row, extract_all(w).values)
    assert list(ext.get_feature_names_out()) == list(feature_registry())
    assert FeatureExtractor(higuchi_kmax=5).get_params()["higuchi_kmax"] == 5
