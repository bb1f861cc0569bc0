import io as stdio
import json

import numpy as np
import pytest

from mpru.core import ForgetSpec, PredictionSet
from mpru.errors import (
    InconsistentDimensions,
    ParseError,
    SchemaError,
    ValidationError,
    VersionMismatch,
)
from mpru.filtering import fit
from mpru.io import (
    filter_artifact_document,
    load_filter,
    read_predictions,
    save_filter,
    write_predictions,
)
from conftest import make_set


def roundtrip(preds, format):
    buf = stdio.StringIO()
    write_predictions(preds, buf, format)
    return buf.getvalue(), read_predictions(stdio.StringIO(buf.getvalue()), format)


def assert_sets_equal(a, b):
    assert a.n_labels == b.n_labels
    assert a.label_space == b.label_space
    assert a.ids == b.ids
    assert np.array_equal(a.true_labels, b.true_labels)
    assert np.array_equal(a.matrix, b.matrix)


def test_jsonl_roundtrip_exact(rng):
    preds = make_set(rng, 4, 25, forget_class=1)
    text, back = roundtrip(preds, "jsonl")
    assert_sets_equal(preds, back)
    buf = stdio.StringIO()
    write_predictions(back, buf, "jsonl")
    assert buf.getvalue() == text  # byte-identical rewrite


def test_csv_jsonl_equivalence(rng):
    preds = make_set(rng, 3, 10)
    _, from_jsonl = roundtrip(preds, "jsonl")
    _, from_csv = roundtrip(preds, "csv")
    assert_sets_equal(from_jsonl, from_csv)


def test_csv_roundtrip_quoted_ids(rng):
    probs = rng.dirichlet(np.ones(3), size=3)
    preds = PredictionSet.from_arrays(
        ['plain', 'with,comma', 'with"quote'], [0, 1, 2], probs, range(3), 3
    )
    text, back = roundtrip(preds, "csv")
    assert_sets_equal(preds, back)
    buf = stdio.StringIO()
    write_predictions(back, buf, "csv")
    assert buf.getvalue() == text


def test_jsonl_retained_space_roundtrip(rng):
    full = make_set(rng, 4, 20, forget_class=2)
    filtered = __import__("mpru.filtering", fromlist=["apply_batch"]).apply_batch(
        fit(full, ForgetSpec(2)), full
    )
    assert filtered.label_space == (0, 1, 3)
    _, back = roundtrip(filtered, "jsonl")
    assert_sets_equal(filtered, back)
    assert back.n_labels == 4


def test_empty_set_header_only(rng):
    preds = make_set(rng, 3, 4).select([False] * 4)
    text, back = roundtrip(preds, "jsonl")
    assert text.count("\n") == 1  # header line only
    assert len(back) == 0
    assert back.label_space == (0, 1, 2)
    assert back.n_labels == 3


def test_headerless_jsonl_identity_space():
    text = '{"id":"a","label":0,"probs":[0.25,0.75]}\n{"id":"b","label":1,"probs":[1.0,0.0]}\n'
    preds = read_predictions(stdio.StringIO(text))
    assert preds.label_space == (0, 1)
    assert preds.n_labels == 2
    assert len(preds) == 2


def test_jsonl_validation_error_names_line():
    text = '{"id":"a","label":0,"probs":[0.5,0.5]}\n{"id":"b","label":0,"probs":[0.5,0.4]}\n'
    with pytest.raises(ValidationError) as err:
        read_predictions(stdio.StringIO(text))
    assert "line 2" in str(err.value)


def test_jsonl_parse_error_names_line():
    text = '{"id":"a","label":0,"probs":[0.5,0.5]}\nnot json\n'
    with pytest.raises(ParseError) as err:
        read_predictions(stdio.StringIO(text))
    assert err.value.line_no == 2


def test_jsonl_inconsistent_dimensions():
    text = '{"id":"a","label":0,"probs":[0.5,0.5]}\n{"id":"b","label":0,"probs":[0.2,0.3,0.5]}\n'
    with pytest.raises(InconsistentDimensions):
        read_predictions(stdio.StringIO(text))


def test_jsonl_header_version_mismatch():
    text = '{"format":"mpru-preds","version":2,"n_labels":2,"label_space":[0,1]}\n'
    with pytest.raises(VersionMismatch):
        read_predictions(stdio.StringIO(text))


def test_csv_missing_header():
    with pytest.raises(ParseError):
        read_predictions(stdio.StringIO(""), "csv")
    with pytest.raises(ParseError):
        read_predictions(stdio.StringIO("a,b\n"), "csv")


def test_csv_non_numeric_field():
    text = "id,label,p0,p1\nա,0,0.5,oops\n"
    with pytest.raises(ParseError) as err:
        read_predictions(stdio.StringIO(text), "csv")
    assert err.value.line_no == 2


def test_write_is_streaming_100k(rng):
    preds = make_set(rng, 3, 100_000)

    class SpySink:
        def __init__(self):
            self.writes = 0
            self.largest = 0

        def write(self, chunk):
            self.writes += 1
            self.largest = max(self.largest, len(chunk))

    sink = SpySink()
    write_predictions(preds, sink, "jsonl")
    assert sink.writes >= 100_001  # header + one write per record
    assert sink.largest < 4096  # bounded by one record, not the whole file


# --- filter artifacts ---------------------------------------------------


def test_filter_artifact_roundtrip_bit_exact(rng):
    preds = make_set(rng, 5, 120, forget_class=3)
    model = fit(preds, ForgetSpec(3))
    buf = stdio.StringIO()
    save_filter(model, buf)
    loaded = load_filter(stdio.StringIO(buf.getvalue()))
    assert loaded.forget_class == model.forget_class
    assert loaded.n == model.n
    assert loaded.label_space == model.label_space
    assert loaded.retained_label_space == model.retained_label_space
    assert np.array_equal(loaded.centroid.values, model.centroid.values)
    assert np.array_equal(loaded.distribution_ratio, model.distribution_ratio)
    assert np.array_equal(
        loaded.projector.unit_direction, model.projector.unit_direction
    )
    assert loaded.diagnostics == model.diagnostics

    buf2 = stdio.StringIO()
    save_filter(loaded, buf2)
    assert buf2.getvalue() == buf.getvalue()  # byte-identical re-save


def test_filter_artifact_17_digit_floats(rng):
    preds = make_set(rng, 3, 30, forget_class=0)
    model = fit(preds, ForgetSpec(0))
    doc = json.loads(filter_artifact_document(model))
    assert doc["format"] == "mpru-filter" and doc["version"] == 1
    for value, original in zip(doc["centroid"], model.centroid.values):
        assert float(value) == original  # lossless round-trip


def test_filter_artifact_version_mismatch(rng):
    preds = make_set(rng, 3, 30)
    model = fit(preds, ForgetSpec(0))
    doc = json.loads(filter_artifact_document(model))
    doc["version"] = 2
    with pytest.raises(VersionMismatch):
        load_filter(stdio.StringIO(json.dumps(doc)))


def test_filter_artifact_bad_ratio_sum(rng):
    preds = make_set(rng, 3, 30)
    model = fit(preds, ForgetSpec(0))
    doc = json.loads(filter_artifact_document(model))
    doc["distribution_ratio"] = [0.6, 0.5]
    with pytest.raises(SchemaError):
        load_filter(stdio.StringIO(json.dumps(doc)))


def test_filter_artifact_inconsistent_diagnostics(rng):
    preds = make_set(rng, 3, 30)
    model = fit(preds, ForgetSpec(0))
    doc = json.loads(filter_artifact_document(model))
    doc["diagnostics"]["assumption_met"] = not doc["diagnostics"]["assumption_met"]
    with pytest.raises(SchemaError):
        load_filter(stdio.StringIO(json.dumps(doc)))


def test_filter_artifact_not_json():
    with pytest.raises(SchemaError):
        load_filter(stdio.StringIO("nope{"))


def test_filter_artifact_wrong_format_key():
    with pytest.raises(SchemaError):
        load_filter(stdio.StringIO('{"format":"other","version":1}'))
