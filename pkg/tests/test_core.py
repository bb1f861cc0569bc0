import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpru.core import (
    ConfidenceVector,
    ForgetSpec,
    PredictionRecord,
    PredictionSet,
    split_by_forget,
    validate_confidence,
)
from mpru.errors import (
    DimensionMismatch,
    DuplicateId,
    EntryAboveOne,
    ForgetClassOutOfRange,
    NegativeEntry,
    SumOutOfTolerance,
    ValidationError,
)


def test_validate_exact_simplex_point():
    v = validate_confidence([0.5, 0.5], 1e-6)
    assert v.to_list() == [0.5, 0.5]


def test_validate_boundary_of_tolerance_renormalizes():
    # sum error 4e-7 <= 1e-6: accepted and renormalized
    v = validate_confidence([0.7, 0.3000004], 1e-6)
    assert abs(sum(v.to_list()) - 1.0) <= 1e-12
    assert v[0] == pytest.approx(0.7 / 1.0000004, abs=1e-15)


def test_validate_negative_entry_names_index():
    with pytest.raises(NegativeEntry) as err:
        validate_confidence([0.5, -0.1, 0.6], 1e-6)
    assert err.value.index == 1
    assert err.value.value == -0.1


def test_validate_entry_above_one():
    with pytest.raises(EntryAboveOne) as err:
        validate_confidence([1.2, -0.0, 0.0], 1e-6)
    assert err.value.index == 0


def test_validate_sum_out_of_tolerance():
    with pytest.raises(SumOutOfTolerance):
        validate_confidence([0.7, 0.31], 1e-6)


def test_validate_rejects_empty_and_nan():
    with pytest.raises(ValidationError):
        validate_confidence([], 1e-6)
    with pytest.raises(ValidationError):
        validate_confidence([0.5, float("nan")], 1e-6)


def test_singleton_vector_is_valid():
    assert validate_confidence([1.0], 1e-6).to_list() == [1.0]


def test_entries_are_read_only():
    v = validate_confidence([0.25, 0.75])
    with pytest.raises(ValueError):
        v.entries[0] = 1.0


@given(
    st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=1, max_size=12).filter(
        lambda xs: sum(xs) > 1e-6
    )
)
def test_normalized_vectors_always_on_simplex(raw):
    v = ConfidenceVector.from_normalized(np.array(raw))
    arr = v.entries
    assert np.all(arr >= 0.0)
    assert abs(float(arr.sum()) - 1.0) <= 1e-12


def _set_from_labels(labels, n=3):
    probs = np.full((len(labels), n), 1.0 / n)
    return PredictionSet.from_arrays(
        ids=[f"r{i}" for i in range(len(labels))],
        true_labels=labels,
        probs=probs,
        label_space=range(n),
        n_labels=n,
    )


def test_split_selects_by_label():
    preds = _set_from_labels([0, 1, 1, 2])
    forget, retain = split_by_forget(preds, ForgetSpec(1))
    assert [r.id for r in forget.records] == ["r1", "r2"]
    assert [r.id for r in retain.records] == ["r0", "r3"]


def test_split_empty_forget_subset_is_allowed():
    preds = _set_from_labels([0, 2, 2])
    forget, retain = split_by_forget(preds, ForgetSpec(1))
    assert len(forget) == 0 and len(retain) == 3


def test_split_forget_class_out_of_range():
    preds = _set_from_labels([0, 1, 2])
    with pytest.raises(ForgetClassOutOfRange):
        split_by_forget(preds, ForgetSpec(3))
    with pytest.raises(ForgetClassOutOfRange):
        split_by_forget(preds, ForgetSpec(-1))


@given(st.lists(st.integers(min_value=0, max_value=4), min_size=0, max_size=40))
def test_split_is_a_partition(labels):
    preds = _set_from_labels(labels, n=5)
    forget, retain = split_by_forget(preds, ForgetSpec(2))
    assert len(forget) + len(retain) == len(preds)
    assert all(r.true_label == 2 for r in forget.records)
    assert all(r.true_label != 2 for r in retain.records)
    merged = sorted(forget.ids + retain.ids)
    assert merged == sorted(preds.ids)


def test_prediction_set_rejects_duplicate_ids():
    v = validate_confidence([0.5, 0.5])
    records = (PredictionRecord("a", 0, v), PredictionRecord("a", 1, v))
    with pytest.raises(DuplicateId):
        PredictionSet(n_labels=2, records=records, label_space=(0, 1))


def test_prediction_set_rejects_label_out_of_range():
    v = validate_confidence([0.5, 0.5])
    records = (PredictionRecord("a", 5, v),)
    with pytest.raises(ValidationError):
        PredictionSet(n_labels=2, records=records, label_space=(0, 1))


def test_prediction_set_rejects_dim_mismatch():
    records = (
        PredictionRecord("a", 0, validate_confidence([0.5, 0.5])),
        PredictionRecord("b", 0, validate_confidence([0.2, 0.3, 0.5])),
    )
    with pytest.raises(DimensionMismatch):
        PredictionSet(n_labels=3, records=records, label_space=(0, 1, 2))


def test_prediction_set_retained_space_allows_foreign_true_label():
    # forget-set records keep true_label 2 after filtering to space (0, 1)
    v = validate_confidence([0.5, 0.5])
    ps = PredictionSet(
        n_labels=3,
        records=(PredictionRecord("a", 2, v),),
        label_space=(0, 1),
    )
    assert ps.records[0].true_label == 2


def test_forget_spec_requires_class_in_label_space():
    v = validate_confidence([0.5, 0.5])
    ps = PredictionSet(
        n_labels=3, records=(PredictionRecord("a", 0, v),), label_space=(0, 2)
    )
    assert ForgetSpec(2).validate_for(ps) == 1
    with pytest.raises(ForgetClassOutOfRange):
        ForgetSpec(1).validate_for(ps)


def test_from_arrays_matches_per_record_validation(rng):
    probs = rng.dirichlet(np.ones(4), size=10)
    ps = PredictionSet.from_arrays(
        ids=[str(i) for i in range(10)],
        true_labels=[i % 4 for i in range(10)],
        probs=probs,
        label_space=range(4),
        n_labels=4,
    )
    for row, rec in zip(probs, ps.records):
        expected = validate_confidence(row)
        assert np.array_equal(expected.entries, rec.confidence.entries)
