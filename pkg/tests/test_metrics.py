import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpru.core import ForgetSpec, PredictionSet, validate_confidence
from mpru.errors import DimensionMismatch, EmptyRestriction, IdMismatch, ValidationError
from mpru.metrics import (
    KLReport,
    MSEReport,
    accuracy,
    accuracy_differences,
    align_set_to_retained,
    align_to_retained,
    argmax_label,
    check_statistical_closeness,
    evaluate,
    kl_per_sample,
    mean_kl,
    mse_stats,
    prediction_histogram,
)
from conftest import random_simplex


def _set(rows, labels, space, n_labels=None):
    space = tuple(space)
    return PredictionSet.from_arrays(
        ids=[f"r{i}" for i in range(len(labels))],
        true_labels=labels,
        probs=np.array(rows, dtype=float),
        label_space=space,
        n_labels=n_labels if n_labels is not None else max(space) + 1,
    )


# --- argmax -------------------------------------------------------------


def test_argmax_unique_max():
    assert argmax_label(validate_confidence([0.2, 0.5, 0.3]), (0, 1, 2)) == 1


def test_argmax_tie_lowest_position():
    assert argmax_label(validate_confidence([0.5, 0.5]), (0, 2)) == 0


def test_argmax_singleton():
    assert argmax_label(validate_confidence([1.0]), (7,)) == 7


# --- accuracy -----------------------------------------------------------


def test_accuracy_all_correct():
    preds = _set([[0.9, 0.1], [0.2, 0.8]], [0, 1], (0, 1))
    assert accuracy(preds, [0, 1]) == 1.0


def test_accuracy_forget_class_scored_against_retained_model_is_zero():
    # true label 2 cannot be predicted in space (0, 1)
    preds = _set([[0.9, 0.1], [0.1, 0.9]], [2, 2], (0, 1), n_labels=3)
    assert accuracy(preds, [2]) == 0.0


def test_accuracy_empty_restriction():
    preds = _set([[0.9, 0.1]], [0], (0, 1))
    with pytest.raises(EmptyRestriction):
        accuracy(preds, [1])


def test_accuracy_is_permutation_invariant(rng):
    rows = random_simplex(rng, 3, 30)
    labels = rng.integers(0, 3, 30)
    preds = _set(rows, labels, (0, 1, 2))
    perm = rng.permutation(30)
    shuffled = PredictionSet.from_arrays(
        [f"r{i}" for i in perm], labels[perm], rows[perm], (0, 1, 2), 3
    )
    assert accuracy(preds, [0, 1, 2]) == accuracy(shuffled, [0, 1, 2])


# --- accuracy differences (reported-table rows) ---------------------------


def test_accuracy_differences_reported_row():
    eps_p, eps_r = accuracy_differences(0.9364, 0.9310, 0.9224)
    assert eps_p == pytest.approx(0.0054, abs=1e-12)
    assert eps_r == pytest.approx(0.0140, abs=1e-12)


def test_accuracy_differences_rounded_row_compares_at_1e3():
    eps_p, eps_r = accuracy_differences(0.7358, 0.7347, 0.7325)
    assert eps_p == pytest.approx(0.0010, abs=5e-4)
    assert eps_r == pytest.approx(0.0033, abs=1e-3)


def test_accuracy_differences_identity():
    assert accuracy_differences(0.5, 0.5, 0.5) == (0.0, 0.0)


# --- alignment ----------------------------------------------------------


def test_align_removed_entry_is_zero():
    out = align_to_retained(validate_confidence([0.2, 0.8, 0.0]), ForgetSpec(2))
    assert out.entries == pytest.approx([0.2, 0.8], abs=1e-15)


def test_align_renormalizes():
    out = align_to_retained(validate_confidence([0.25, 0.25, 0.5]), ForgetSpec(2))
    assert out.entries == pytest.approx([0.5, 0.5], abs=1e-15)


def test_align_zero_remainder_uniform():
    out = align_to_retained(validate_confidence([0.0, 0.0, 1.0]), ForgetSpec(2))
    assert out.entries == pytest.approx([0.5, 0.5], abs=1e-15)


def test_align_set_matches_per_record(rng):
    rows = random_simplex(rng, 4, 20)
    preds = _set(rows, rng.integers(0, 4, 20), (0, 1, 2, 3))
    aligned = align_set_to_retained(preds, ForgetSpec(1))
    assert aligned.label_space == (0, 2, 3)
    for rec_in, rec_out in zip(preds.records, aligned.records):
        single = align_to_retained(rec_in.confidence, ForgetSpec(1))
        assert np.array_equal(single.entries, rec_out.confidence.entries)


# --- KL -----------------------------------------------------------------


def test_kl_identity_is_exactly_zero():
    p = validate_confidence([0.3, 0.7])
    assert kl_per_sample(p, p) == 0.0


def test_kl_closed_form():
    p = validate_confidence([0.5, 0.5])
    q = validate_confidence([0.25, 0.75])
    expected = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    assert kl_per_sample(p, q) == pytest.approx(expected, abs=1e-12)
    assert kl_per_sample(p, q) == pytest.approx(0.143841, abs=1e-6)


def test_kl_zero_entries_clamped():
    p = validate_confidence([1.0, 0.0])
    q = validate_confidence([0.5, 0.5])
    assert kl_per_sample(p, q) == pytest.approx(math.log(2.0), abs=1e-6)


def test_kl_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        kl_per_sample(validate_confidence([1.0]), validate_confidence([0.5, 0.5]))


@settings(max_examples=80, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    n=st.integers(min_value=1, max_value=8),
)
def test_kl_nonnegative_gibbs(seed, n):
    rng = np.random.default_rng(seed)
    p = validate_confidence(random_simplex(rng, n, None))
    q = validate_confidence(random_simplex(rng, n, None))
    assert kl_per_sample(p, q) >= 0.0


def test_mean_kl_identical_sets(rng):
    rows = random_simplex(rng, 3, 10)
    preds = _set(rows, [0] * 10, (0, 1, 2))
    assert mean_kl(preds, preds) == 0.0


def test_mean_kl_is_mean_of_per_sample():
    a = _set([[0.5, 0.5], [0.9, 0.1]], [0, 0], (0, 1))
    b = _set([[0.25, 0.75], [0.6, 0.4]], [0, 0], (0, 1))
    samples = [
        kl_per_sample(ra.confidence, rb.confidence)
        for ra, rb in zip(a.records, b.records)
    ]
    assert mean_kl(a, b) == pytest.approx(sum(samples) / 2.0, abs=1e-15)


def test_mean_kl_matches_naive_accumulation(rng):
    rows_a = random_simplex(rng, 6, 500)
    rows_b = random_simplex(rng, 6, 500)
    a = _set(rows_a, [0] * 500, range(6))
    b = _set(rows_b, [0] * 500, range(6))
    total = 0.0
    for ra, rb in zip(a.records, b.records):
        total += kl_per_sample(ra.confidence, rb.confidence)
    assert mean_kl(a, b) == pytest.approx(total / 500.0, abs=1e-12)


def test_mean_kl_id_mismatch():
    a = _set([[0.5, 0.5]], [0], (0, 1))
    b = PredictionSet.from_arrays(["other"], [0], np.array([[0.5, 0.5]]), (0, 1), 2)
    with pytest.raises(IdMismatch):
        mean_kl(a, b)


def test_mean_kl_dimension_mismatch():
    a = _set([[0.5, 0.5]], [0], (0, 1))
    b = _set([[0.2, 0.3, 0.5]], [0], (0, 1, 2))
    with pytest.raises(DimensionMismatch):
        mean_kl(a, b)


# --- MSE ----------------------------------------------------------------


def test_mse_identical_sets_all_zero(rng):
    rows = random_simplex(rng, 4, 8)
    preds = _set(rows, [0] * 8, range(4))
    r = mse_stats(preds, preds)
    assert (r.mean, r.std, r.max, r.pct_below_mean) == (0.0, 0.0, 0.0, 0.0)


def test_mse_single_pair():
    a = _set([[0.5, 0.5]], [0], (0, 1))
    b = _set([[0.3, 0.7]], [0], (0, 1))
    r = mse_stats(a, b)
    assert r.mean == r.max
    assert r.std == 0.0
    assert r.mean == pytest.approx(0.08, abs=1e-15)
    assert r.pct_below_mean == 0.0


def test_mse_pct_matches_sort_oracle(rng):
    rows_a = random_simplex(rng, 5, 400, alpha=0.3)
    rows_b = random_simplex(rng, 5, 400, alpha=0.3)
    a = _set(rows_a, [0] * 400, range(5))
    b = _set(rows_b, [0] * 400, range(5))
    r = mse_stats(a, b)
    d = sorted(float(np.sum((ra - rb) ** 2)) for ra, rb in zip(rows_a, rows_b))
    import bisect

    below = bisect.bisect_left(d, r.mean)
    assert r.pct_below_mean == pytest.approx(100.0 * below / 400.0, abs=1e-9)
    assert r.max == pytest.approx(d[-1], abs=1e-15)
    assert r.max <= 2.0  # simplex diameter bound


def test_mse_report_validation():
    with pytest.raises(ValidationError):
        MSEReport(mean=0.5, std=0.1, max=0.4, pct_below_mean=50.0)


# --- histogram ----------------------------------------------------------


def test_histogram_empty_set_zero_counts():
    preds = _set([[0.5, 0.5]], [0], (0, 1)).select([False])
    assert prediction_histogram(preds) == {0: 0, 1: 0}


def test_histogram_counts_argmax():
    preds = _set([[0.1, 0.9]] * 3, [5, 5, 5], (4, 5), n_labels=6)
    assert prediction_histogram(preds) == {4: 0, 5: 3}


def test_histogram_mass_conservation(rng):
    rows = random_simplex(rng, 4, 37)
    preds = _set(rows, [0] * 37, range(4))
    assert sum(prediction_histogram(preds).values()) == 37


# --- statistical closeness -----------------------------------------------


def test_closeness_reported_row():
    kl = KLReport(pair_name="retrain-mpru", retain_kl_mean=0.2051, forget_kl_mean=0.7853)
    assert check_statistical_closeness(kl, 0.3595, 1.2823)


def test_closeness_first_bound_violated():
    kl = KLReport(pair_name="x", retain_kl_mean=0.5, forget_kl_mean=0.5)
    assert not check_statistical_closeness(kl, 0.4, 1.0)


def test_closeness_zero_within_anything():
    kl = KLReport(pair_name="x", retain_kl_mean=0.0, forget_kl_mean=0.0)
    assert check_statistical_closeness(kl, 0.0, 0.0)


# --- evaluate -----------------------------------------------------------


def _paired_eval_inputs(rng, n=4, count=40, j=1):
    labels = rng.integers(0, n, count)
    labels[:6] = j  # guarantee forget records
    labels[6:12] = (j + 1) % n
    pre = PredictionSet.from_arrays(
        [f"r{i}" for i in range(count)], labels, random_simplex(rng, n, count), range(n), n
    )
    retained = [c for c in range(n) if c != j]
    unl = PredictionSet.from_arrays(
        [f"r{i}" for i in range(count)], labels, random_simplex(rng, n - 1, count), retained, n
    )
    ret = PredictionSet.from_arrays(
        [f"r{i}" for i in range(count)], labels, random_simplex(rng, n - 1, count), retained, n
    )
    return unl, ret, pre


def test_evaluate_report_shape(rng):
    unl, ret, pre = _paired_eval_inputs(rng)
    report = evaluate(unl, ret, pre, ForgetSpec(1), runtimes={"fit_s": 0.1})
    assert report.forget_class == 1
    assert report.n_retain + report.n_forget == 40
    assert [k.pair_name for k in report.kl] == [
        "pretrained-mpru",
        "pretrained-retrain",
        "retrain-mpru",
    ]
    assert set(report.histograms) == {"mpru", "retrain"}
    for hist in report.histograms.values():
        assert sum(hist.values()) == report.n_forget
    assert report.accuracy.forget_accuracy == 0.0


def test_evaluate_self_comparison_zero(rng):
    unl, _, pre = _paired_eval_inputs(rng)
    report = evaluate(unl, unl, pre, ForgetSpec(1))
    rm = report.kl[2]
    assert rm.pair_name == "retrain-mpru"
    assert rm.retain_kl_mean == 0.0 and rm.forget_kl_mean == 0.0
    assert report.mse.mean == 0.0 and report.mse.max == 0.0
    assert report.accuracy.epsilon_r == 0.0


def test_evaluate_rejects_label_disagreement(rng):
    unl, ret, pre = _paired_eval_inputs(rng)
    bad_labels = pre.true_labels.copy()
    bad_labels[0] = (bad_labels[0] + 1) % 4
    bad = PredictionSet.from_arrays(pre.ids, bad_labels, pre.matrix, pre.label_space, 4)
    with pytest.raises(IdMismatch):
        evaluate(unl, ret, bad, ForgetSpec(1))
