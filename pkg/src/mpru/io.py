"""Interchange formats: prediction files, filter artifacts, reports.

Any external model can feed the filter by emitting one of two prediction
formats:

JSONL (canonical)
    Optional header line, then one record per line::

        {"format":"mpru-preds","version":1,"n_labels":6,"label_space":[0,1,2,3,4,5]}
        {"id":"a","label":0,"probs":[0.9,0.02,0.02,0.02,0.02,0.02]}

    `n_labels` is the size of the original label space; `label_space` lists
    the original ids of the probability columns (shorter than n_labels for
    filtered outputs). Without a header both default to the identity over
    the observed columns (n_labels grows to cover any larger true label).

CSV (tabular convenience)
    Header ``id,label,p0,...,p{k-1}`` where the column suffixes are the
    label-space ids. CSV carries no separate n_labels field; reading
    reconstructs it as max(label space, true labels) + 1, so a class that
    appears nowhere in the file does not survive a CSV round-trip. Use
    JSONL when that matters.

Prediction floats use the shortest round-trip decimal representation;
filter artifacts print 17 significant digits. Both parse back to the exact
double, and writing what was loaded reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
import sys
from typing import IO, Mapping

import numpy as np

from .core import (
    PredictionRecord,
    PredictionSet,
    INGEST_TOL,
    validate_confidence,
    _as_readonly,
)
from .errors import (
    InconsistentDimensions,
    ParseError,
    SchemaError,
    ValidationError,
    VersionMismatch,
)
from .filtering import Centroid, Diagnostics, FilterModel, build_projector
from .metrics import EvaluationReport

PREDS_FORMAT = "mpru-preds"
FILTER_FORMAT = "mpru-filter"
REPORT_FORMAT = "mpru-report"
FORMAT_VERSION = 1


def _open_for_read(source) -> tuple[IO[str], bool]:
    if source == "-":
        return sys.stdin, False
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _open_for_write(sink) -> tuple[IO[str], bool]:
    if sink == "-":
        return sys.stdout, False
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        return open(sink, "w", encoding="utf-8", newline=""), True
    return sink, False


# --- prediction files -------------------------------------------------


def parse_prediction_line(line: str, line_no: int, expect_dim: int | None) -> PredictionRecord:
    """Parse and validate one JSONL record line."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(line_no, f"invalid JSON: {e.msg}") from e
    if not isinstance(obj, dict):
        raise ParseError(line_no, "record must be a JSON object")
    try:
        rec_id = obj["id"]
        label = obj["label"]
        probs = obj["probs"]
    except KeyError as e:
        raise ParseError(line_no, f"missing key {e.args[0]!r}") from e
    if not isinstance(rec_id, str):
        raise ParseError(line_no, "id must be a string")
    if not isinstance(label, int) or isinstance(label, bool):
        raise ParseError(line_no, "label must be an integer")
    if not isinstance(probs, list) or not all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
    ):
        raise ParseError(line_no, "probs must be a list of numbers")
    if expect_dim is not None and len(probs) != expect_dim:
        raise InconsistentDimensions(
            line_no, f"expected {expect_dim} probabilities, got {len(probs)}"
        )
    try:
        confidence = validate_confidence(probs, INGEST_TOL)
    except ValidationError as e:
        raise ValidationError(f"line {line_no}: {e}") from e
    return PredictionRecord(rec_id, label, confidence)


def _read_jsonl(stream: IO[str]) -> PredictionSet:
    records: list[PredictionRecord] = []
    header: dict | None = None
    dim: int | None = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if header is None and not records and '"format"' in line:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(line_no, f"invalid JSON: {e.msg}") from e
            if isinstance(obj, dict) and "format" in obj:
                if obj.get("format") != PREDS_FORMAT:
                    raise SchemaError(f"unexpected format {obj.get('format')!r}")
                if obj.get("version") != FORMAT_VERSION:
                    raise VersionMismatch(
                        f"prediction format version {obj.get('version')!r}, "
                        f"supported: {FORMAT_VERSION}"
                    )
                header = obj
                if "label_space" in obj:
                    dim = len(obj["label_space"])
                continue
        record = parse_prediction_line(line, line_no, dim)
        if dim is None:
            dim = len(record.confidence)
        records.append(record)

    if dim is None and header is None:
        raise ParseError(0, "empty input: no header and no records")
    if header is not None:
        if "label_space" in header:
            label_space = tuple(int(c) for c in header["label_space"])
        elif dim is not None:
            label_space = tuple(range(dim))
        else:
            raise SchemaError("header has no label_space and file has no records")
        n_labels = int(header.get("n_labels", len(label_space)))
    else:
        label_space = tuple(range(dim))
        n_labels = dim
    if records:
        n_labels = max(n_labels, max(r.true_label for r in records) + 1)
    try:
        return PredictionSet(n_labels=n_labels, records=tuple(records), label_space=label_space)
    except ValidationError:
        raise
    except Exception as e:  # dimension mismatches against the header, etc.
        raise SchemaError(str(e)) from e


def _read_csv(stream: IO[str]) -> PredictionSet:
    reader = csv.reader(stream)
    try:
        head = next(reader)
    except StopIteration:
        raise ParseError(0, "empty input: no CSV header") from None
    if len(head) < 3 or head[0] != "id" or head[1] != "label":
        raise ParseError(1, "CSV header must start with id,label,p...")
    label_space = []
    for col in head[2:]:
        if not col.startswith("p"):
            raise ParseError(1, f"probability column {col!r} must look like p<id>")
        try:
            label_space.append(int(col[1:]))
        except ValueError:
            raise ParseError(1, f"probability column {col!r} must look like p<id>") from None
    dim = len(label_space)
    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2 + dim:
            raise InconsistentDimensions(
                line_no, f"expected {2 + dim} fields, got {len(row)}"
            )
        try:
            label = int(row[1])
            probs = [float(v) for v in row[2:]]
        except ValueError as e:
            raise ParseError(line_no, str(e)) from e
        try:
            confidence = validate_confidence(probs, INGEST_TOL)
        except ValidationError as e:
            raise ValidationError(f"line {line_no}: {e}") from e
        records.append(PredictionRecord(row[0], label, confidence))
    n_labels = max(label_space) + 1
    if records:
        n_labels = max(n_labels, max(r.true_label for r in records) + 1)
    return PredictionSet(
        n_labels=n_labels, records=tuple(records), label_space=tuple(label_space)
    )


def read_predictions(source, format: str = "jsonl") -> PredictionSet:
    """Read and validate a prediction file (path, stream, or '-')."""
    stream, owned = _open_for_read(source)
    try:
        if format == "jsonl":
            return _read_jsonl(stream)
        if format == "csv":
            return _read_csv(stream)
        raise ValidationError(f"unknown prediction format {format!r}")
    finally:
        if owned:
            stream.close()


def prediction_header_line(preds: PredictionSet) -> str:
    return json.dumps(
        {
            "format": PREDS_FORMAT,
            "version": FORMAT_VERSION,
            "n_labels": preds.n_labels,
            "label_space": list(preds.label_space),
        },
        separators=(",", ":"),
    )


def prediction_record_line(rec: PredictionRecord) -> str:
    return json.dumps(
        {"id": rec.id, "label": rec.true_label, "probs": rec.confidence.to_list()},
        separators=(",", ":"),
        allow_nan=False,
    )


def write_predictions(preds: PredictionSet, sink, format: str = "jsonl") -> None:
    """Write a prediction file record by record (path, stream, or '-')."""
    stream, owned = _open_for_write(sink)
    try:
        if format == "jsonl":
            stream.write(prediction_header_line(preds) + "\n")
            for rec in preds.records:
                stream.write(prediction_record_line(rec) + "\n")
        elif format == "csv":
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(["id", "label"] + [f"p{c}" for c in preds.label_space])
            for rec in preds.records:
                writer.writerow(
                    [rec.id, rec.true_label] + [repr(p) for p in rec.confidence.to_list()]
                )
        else:
            raise ValidationError(f"unknown prediction format {format!r}")
    finally:
        if owned:
            stream.close()


# --- filter artifacts -------------------------------------------------


def _dump_canonical(value) -> str:
    """Canonical JSON: insertion-ordered keys, floats at 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(_dump_canonical(v) for v in value) + "]"
    if isinstance(value, Mapping):
        return (
            "{"
            + ",".join(f"{json.dumps(str(k))}:{_dump_canonical(v)}" for k, v in value.items())
            + "}"
        )
    raise TypeError(f"cannot serialize {type(value).__name__}")


def filter_artifact_document(model: FilterModel) -> str:
    """The persisted form of a fitted filter, as a canonical JSON string.

    Only the centroid is stored; the projection direction is recomputed on
    load, so an artifact can never carry an inconsistent projector.
    """
    doc = {
        "format": FILTER_FORMAT,
        "version": FORMAT_VERSION,
        "forget_class": model.forget_class,
        "n": model.n,
        "label_space": list(model.label_space),
        "retained_label_space": list(model.retained_label_space),
        "centroid": model.centroid.values,
        "distribution_ratio": model.distribution_ratio,
        "diagnostics": {
            "forget_accuracy": model.diagnostics.forget_accuracy,
            "mean_top_confidence": model.diagnostics.mean_top_confidence,
            "n_samples": model.diagnostics.n_samples,
            "assumption_met": model.diagnostics.assumption_met,
        },
    }
    return _dump_canonical(doc)


def save_filter(model: FilterModel, sink) -> None:
    stream, owned = _open_for_write(sink)
    try:
        stream.write(filter_artifact_document(model) + "\n")
    finally:
        if owned:
            stream.close()


def _require(doc: Mapping, key: str, kind) -> object:
    if key not in doc:
        raise SchemaError(f"artifact missing key {key!r}")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"artifact key {key!r} has wrong type {type(value).__name__}")
    return value


def _float_array(doc: Mapping, key: str) -> np.ndarray:
    raw = _require(doc, key, list)
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
        raise SchemaError(f"artifact key {key!r} must be a list of numbers")
    return np.array([float(v) for v in raw])


def load_filter(source) -> FilterModel:
    """Load an artifact, recompute the projector, and re-validate everything."""
    stream, owned = _open_for_read(source)
    try:
        text = stream.read()
    finally:
        if owned:
            stream.close()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"artifact is not valid JSON: {e.msg}") from e
    if not isinstance(doc, dict):
        raise SchemaError("artifact must be a JSON object")
    if doc.get("format") != FILTER_FORMAT:
        raise SchemaError(f"unexpected format {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(
            f"filter artifact version {doc.get('version')!r}, supported: {FORMAT_VERSION}"
        )
    forget_class = _require(doc, "forget_class", int)
    n = _require(doc, "n", int)
    label_space = tuple(int(c) for c in _require(doc, "label_space", list))
    retained = tuple(int(c) for c in _require(doc, "retained_label_space", list))
    centroid_values = _float_array(doc, "centroid")
    ratio = _float_array(doc, "distribution_ratio")
    if abs(float(ratio.sum()) - 1.0) > 1e-9:
        raise SchemaError(
            f"distribution_ratio sums to {float(ratio.sum())!r}, expected 1 within 1e-9"
        )
    diag_doc = _require(doc, "diagnostics", dict)
    try:
        diagnostics = Diagnostics(
            forget_accuracy=float(_require(diag_doc, "forget_accuracy", float)),
            mean_top_confidence=float(_require(diag_doc, "mean_top_confidence", float)),
            n_samples=_require(diag_doc, "n_samples", int),
            assumption_met=_require(diag_doc, "assumption_met", bool),
        )
        centroid = Centroid(values=_as_readonly(centroid_values), n_samples=diagnostics.n_samples)
        projector = build_projector(centroid)
        return FilterModel(
            forget_class=forget_class,
            n=n,
            centroid=centroid,
            projector=projector,
            distribution_ratio=_as_readonly(ratio),
            label_space=label_space,
            retained_label_space=retained,
            diagnostics=diagnostics,
        )
    except (ValidationError, ValueError) as e:
        raise SchemaError(f"artifact fails model validation: {e}") from e


# --- evaluation reports -----------------------------------------------


def report_to_dict(report: EvaluationReport) -> dict:
    """Plain nested dict in the report's canonical key order."""
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "forget_class": report.forget_class,
        "n_labels": report.n_labels,
        "n_retain": report.n_retain,
        "n_forget": report.n_forget,
        "accuracy": {
            "retain_accuracy": report.accuracy.retain_accuracy,
            "forget_accuracy": report.accuracy.forget_accuracy,
            "epsilon_p": report.accuracy.epsilon_p,
            "epsilon_r": report.accuracy.epsilon_r,
            "pretrained_retain_accuracy": report.accuracy.pretrained_retain_accuracy,
            "retrained_retain_accuracy": report.accuracy.retrained_retain_accuracy,
        },
        "kl": [
            {
                "pair": k.pair_name,
                "retain_kl": k.retain_kl_mean,
                "forget_kl": k.forget_kl_mean,
            }
            for k in report.kl
        ],
        "mse": {
            "mean": report.mse.mean,
            "std": report.mse.std,
            "max": report.mse.max,
            "pct_below_mean": report.mse.pct_below_mean,
        },
        "histograms": {
            model: {str(c): int(v) for c, v in hist.items()}
            for model, hist in report.histograms.items()
        },
        "runtimes": {k: float(v) for k, v in report.runtimes.items()},
    }


def save_report(report: EvaluationReport, sink) -> None:
    stream, owned = _open_for_write(sink)
    try:
        json.dump(report_to_dict(report), stream, indent=2, allow_nan=False)
        stream.write("\n")
    finally:
        if owned:
            stream.close()
