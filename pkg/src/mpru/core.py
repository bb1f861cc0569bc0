"""Domain types for classifier confidence vectors and labeled prediction sets.

Everything downstream (filter fitting, metrics, interchange formats) moves
probability vectors around in these containers. Class ids are 0-based in the
original label space; a set that has had classes filtered out keeps the
original `n_labels` and records which original ids its columns refer to in
`label_space`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    EntryAboveOne,
    ForgetClassOutOfRange,
    NegativeEntry,
    SumOutOfTolerance,
    ValidationError,
)

# Raw model exporters emit float32 probabilities that sum to 1 only
# approximately; accept those, then renormalize so internal code can rely
# on the tighter bound.
INGEST_TOL = 1e-6
INTERNAL_TOL = 1e-12


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ConfidenceVector:
    """A point on the probability simplex: entries in [0, 1] summing to 1.

    Construct through :func:`validate_confidence` (external data, ingest
    tolerance) or :meth:`from_normalized` (outputs of internal operations
    that already guarantee a simplex result analytically).
    """

    entries: np.ndarray

    def __len__(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def to_list(self) -> list[float]:
        return self.entries.tolist()

    @staticmethod
    def from_normalized(entries: np.ndarray) -> "ConfidenceVector":
        """Wrap entries produced by an operation that promises a simplex.

        The vector is renormalized by its sum so the internal invariant
        |sum - 1| <= 1e-12 holds regardless of accumulated float drift.
        Vectors already within that tolerance are stored bit-for-bit, which
        keeps repeated normalization idempotent.
        """
        arr = np.asarray(entries, dtype=np.float64)
        total = float(arr.sum())
        if not np.isfinite(total) or total <= 0.0:
            raise ValidationError(f"cannot renormalize entries with sum {total!r}")
        if abs(total - 1.0) > INTERNAL_TOL:
            arr = arr / total
        return ConfidenceVector(_as_readonly(arr))


def validate_confidence(
    entries: Sequence[float] | np.ndarray, tolerance: float = INGEST_TOL
) -> ConfidenceVector:
    """Validate external probabilities and return a renormalized vector.

    Accepts entries in [0, 1] whose sum is within `tolerance` of 1; the
    stored vector is divided by its sum (skipped when the sum is already
    within the internal tolerance, so re-reading stored vectors is
    bit-stable). Raises NegativeEntry / EntryAboveOne / SumOutOfTolerance
    naming the first offending entry.
    """
    arr = np.asarray(entries, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValidationError("confidence entries must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        idx = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValidationError(f"entry {idx} is not finite: {arr[idx]!r}")
    if np.any(arr < 0.0):
        idx = int(np.flatnonzero(arr < 0.0)[0])
        raise NegativeEntry(idx, float(arr[idx]))
    if np.any(arr > 1.0):
        idx = int(np.flatnonzero(arr > 1.0)[0])
        raise EntryAboveOne(idx, float(arr[idx]))
    total = float(arr.sum())
    if abs(total - 1.0) > tolerance:
        raise SumOutOfTolerance(total, tolerance)
    if abs(total - 1.0) > INTERNAL_TOL:
        arr = arr / total
    return ConfidenceVector(_as_readonly(arr))


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """One model output: an opaque id, the true class, and the confidences."""

    id: str
    true_label: int
    confidence: ConfidenceVector


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """An ordered collection of records over a consistent label space.

    `n_labels` is the size of the original label space; `label_space` lists
    the original ids the confidence columns refer to, in ascending order.
    For unfiltered model outputs this is the identity (0..n-1); after
    filtering one class out it is the retained ids. True labels may name
    classes absent from `label_space` (forget-set records keep their label).
    """

    n_labels: int
    records: tuple[PredictionRecord, ...]
    label_space: tuple[int, ...]

    def __post_init__(self):
        if self.n_labels < 1:
            raise ValidationError(f"n_labels must be >= 1, got {self.n_labels}")
        space = self.label_space
        if len(space) == 0:
            raise ValidationError("label_space must be nonempty")
        if any(space[i] >= space[i + 1] for i in range(len(space) - 1)):
            raise ValidationError(f"label_space must be strictly ascending: {space}")
        if space[0] < 0 or space[-1] >= self.n_labels:
            raise ValidationError(
                f"label_space {space} not contained in 0..{self.n_labels - 1}"
            )
        k = len(space)
        seen: set[str] = set()
        for rec in self.records:
            if len(rec.confidence) != k:
                raise DimensionMismatch(
                    f"record {rec.id!r} has {len(rec.confidence)} entries, "
                    f"label space has {k}"
                )
            if not 0 <= rec.true_label < self.n_labels:
                raise ValidationError(
                    f"record {rec.id!r} true_label {rec.true_label} outside "
                    f"0..{self.n_labels - 1}"
                )
            if rec.id in seen:
                raise DuplicateId(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dim(self) -> int:
        return len(self.label_space)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.records)

    @cached_property
    def true_labels(self) -> np.ndarray:
        arr = np.fromiter(
            (rec.true_label for rec in self.records), dtype=np.int64, count=len(self)
        )
        arr.flags.writeable = False
        return arr

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense (N, dim) float64 view of all confidence vectors."""
        if not self.records:
            out = np.empty((0, self.dim), dtype=np.float64)
        else:
            out = np.stack([rec.confidence.entries for rec in self.records])
        out.flags.writeable = False
        return out

    @staticmethod
    def from_arrays(
        ids: Sequence[str],
        true_labels: Sequence[int] | np.ndarray,
        probs: np.ndarray,
        label_space: Sequence[int],
        n_labels: int,
        tolerance: float = INGEST_TOL,
    ) -> "PredictionSet":
        """Build a set from columnar data, validating all rows at once."""
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 2:
            raise ValidationError("probs must be a 2-d array")
        if not (len(ids) == len(true_labels) == probs.shape[0]):
            raise ValidationError("ids, true_labels and probs rows must align")
        if probs.shape[0]:
            if not np.all(np.isfinite(probs)):
                r, c = map(int, np.argwhere(~np.isfinite(probs))[0])
                raise ValidationError(f"row {r} entry {c} is not finite")
            if np.any(probs < 0.0):
                r, c = map(int, np.argwhere(probs < 0.0)[0])
                raise NegativeEntry(c, float(probs[r, c]))
            if np.any(probs > 1.0):
                r, c = map(int, np.argwhere(probs > 1.0)[0])
                raise EntryAboveOne(c, float(probs[r, c]))
            sums = probs.sum(axis=1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > tolerance)
            if bad.size:
                raise SumOutOfTolerance(float(sums[bad[0]]), tolerance)
            need = np.abs(sums - 1.0) > INTERNAL_TOL
            if need.any():
                probs = probs.copy()
                probs[need] /= sums[need, None]
        probs = _as_readonly(probs)
        records = tuple(
            PredictionRecord(str(i), int(t), ConfidenceVector(row))
            for i, t, row in zip(ids, true_labels, probs)
        )
        out = PredictionSet(
            n_labels=n_labels, records=records, label_space=tuple(int(c) for c in label_space)
        )
        out.__dict__["matrix"] = probs
        return out

    def select(self, keep: Iterable[bool]) -> "PredictionSet":
        recs = tuple(rec for rec, flag in zip(self.records, keep) if flag)
        return PredictionSet(self.n_labels, recs, self.label_space)


@dataclass(frozen=True)
class ForgetSpec:
    """Identifies the single original class id to remove."""

    forget_class: int

    def validate_for(self, preds: PredictionSet) -> int:
        """Check the class is addressable in `preds` and return its column."""
        j = self.forget_class
        if not 0 <= j < preds.n_labels:
            raise ForgetClassOutOfRange(
                f"forget class {j} outside label range 0..{preds.n_labels - 1}"
            )
        try:
            return preds.label_space.index(j)
        except ValueError:
            raise ForgetClassOutOfRange(
                f"forget class {j} not present in label space {preds.label_space}"
            ) from None


def split_by_forget(
    preds: PredictionSet, spec: ForgetSpec
) -> tuple[PredictionSet, PredictionSet]:
    """Partition records into (forget subset, retain subset) by true label.

    Order is preserved in both parts and every record lands in exactly one.
    """
    spec.validate_for(preds)
    j = spec.forget_class
    forget = preds.select(rec.true_label == j for rec in preds.records)
    retain = preds.select(rec.true_label != j for rec in preds.records)
    return forget, retain
