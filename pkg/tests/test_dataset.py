import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import matrix
from pgnbsc.dataset import (
    FeatureMatrix,
    LabelScheme,
    apply_scheme,
    balance_upsample,
    check_disjoint_sources,
    read_features_csv,
    split_report,
    split_report_csv,
    split_rows,
    upsample_factor,
    write_features_csv,
)
from pgnbsc.exceptions import DataError, EmptyClass, MalformedFile
from pgnbsc.signal_io import SeizureType


def counts_matrix(counts, seed=0):
    rng = np.random.default_rng(seed)
    y = [lab for lab, n in counts.items() for _ in range(n)]
    return matrix(rng.normal(size=(len(y), 3)), y)


def test_six_class_is_identity():
    m = counts_matrix({"cpsz": 3, "spsz": 2, "absz": 1})
    out = apply_scheme(m, LabelScheme.SIX_CLASS)
    assert out.y.tolist() == m.y.tolist()
    np.testing.assert_array_equal(out.X, m.X)


def test_focal_merge_is_additive_and_idempotent():
    m = counts_matrix({"cpsz": 100, "spsz": 20, "tnsz": 7})
    once = apply_scheme(m, LabelScheme.FIVE_CLASS_FOCAL)
    assert once.class_counts == {"focal": 120, "tnsz": 7}
    twice = apply_scheme(once, LabelScheme.FIVE_CLASS_FOCAL)
    assert twice.y.tolist() == once.y.tolist()


def test_focal_scheme_has_five_labels():
    m = counts_matrix({t.value: 2 for t in SeizureType.raw_types()})
    out = apply_scheme(m, "five_focal")
    assert len(out.class_counts) == 5
    assert [c.value for c in LabelScheme.FIVE_CLASS_FOCAL.classes()] == \
        ["absz", "focal", "mysz", "tnsz", "tcsz"]


@pytest.mark.parametrize("big,small,f", [(100, 30, 3), (100, 70, 1), (100, 100, 1),
                                         (100, 40, 3), (100, 66, 2), (9, 2, 5)])
def test_upsample_factor(big, small, f):
    assert upsample_factor(big, small) == f


def test_balance_100_30():
    out = balance_upsample(counts_matrix({"absz": 100, "tnsz": 30}))
    assert out.class_counts == {"absz": 100, "tnsz": 90}


def test_balance_100_70_unchanged():
    m = counts_matrix({"absz": 100, "tnsz": 70})
    out = balance_upsample(m)
    assert out.class_counts == {"absz": 100, "tnsz": 70}
    np.testing.assert_array_equal(out.X, m.X)


def test_balance_needs_two_classes():
    with pytest.raises(EmptyClass):
        balance_upsample(counts_matrix({"absz": 5}))


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.sampled_from([t.value for t in SeizureType.raw_types()]),
                       st.integers(1, 40), min_size=2))
def test_balance_properties(counts):
    m = counts_matrix(counts)
    out = balance_upsample(m)
    biggest = max(counts.values())
    for lab, n in counts.items():
        assert out.class_counts[lab] == n * upsample_factor(biggest, n)
    # originals first and untouched
    np.testing.assert_array_equal(out.X[:len(m)], m.X)
    # every duplicate is hash-identical to a row of its own class
    src = {}
    for d, lab in zip(m.row_digests(), m.y):
        src[d] = lab
    for d, lab in zip(out.row_digests(), out.y):
        assert src[d] == lab


def test_split_report_durations():
    train = counts_matrix({"absz": 253, "tnsz": 10})
    test = counts_matrix({"absz": 5})
    rows, total = split_rows(train, test)
    absence = rows[0]
    assert absence[0] == "Absence"
    assert absence[3] == 253
    assert absence[5] == pytest.approx(455.4)
    assert "455.4" in split_report(train, test)
    for i in range(1, 7):
        assert total[i] == pytest.approx(sum(r[i] for r in rows))
    csv_lines = split_report_csv(train, test).splitlines()
    assert csv_lines[-1].startswith("TOTAL,")


def test_split_report_empty_test():
    train = counts_matrix({"absz": 3, "tnsz": 2})
    empty = train.take([])
    text = split_report(train, empty)
    assert "TOTAL" in text
    rows, total = split_rows(train, empty)
    assert total[4] == 0


def test_leakage_guard():
    a = matrix(np.zeros((2, 2)), ["absz", "tnsz"], ["rec1", "rec2"])
    b = matrix(np.zeros((1, 2)), ["absz"], ["rec2"])
    with pytest.raises(DataError):
        check_disjoint_sources(a, b)
    check_disjoint_sources(a, matrix(np.zeros((1, 2)), ["absz"], ["rec3"]))


def test_features_csv_round_trip(tmp_path):
    m = counts_matrix({"absz": 3, "focal": 2}, seed=4)
    m = FeatureMatrix(m.X * 1e-7 + 1 / 3, m.y, m.names, m.source_ids, m.window_indices,
                      LabelScheme.FIVE_CLASS_FOCAL)
    back = read_features_csv(write_features_csv(m, tmp_path / "f.csv"))
    np.testing.assert_array_equal(back.X, m.X)
    assert back.y.tolist() == m.y.tolist()
    assert back.names == m.names
    assert back.scheme is LabelScheme.FIVE_CLASS_FOCAL
    assert back.window_indices.tolist() == m.window_indices.tolist()


def test_features_csv_malformed(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("f0,f1,label,source_id,window_index\n1.0,2.0,absz,r\n")
    with pytest.raises(MalformedFile):
        read_features_csv(p)
    p.write_text("f0,f1,label,source\n")
    with pytest.raises(MalformedFile):
        read_features_csv(p)


def test_matrix_is_read_only():
    m = counts_matrix({"absz": 2})
    with pytest.raises(ValueError):
        m.X[0, 0] = 1.0
