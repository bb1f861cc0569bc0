"""Projection-redistribution unlearning filter.

Fits a post-hoc filter from the forget-class predictions of an existing
classifier and applies it to confidence vectors, producing outputs over the
retained label space. The filter never touches the upstream model: it is a
pure function on probability vectors.

Geometry: let c-bar be the mean confidence vector over the forget set and
u its L2 normalization. Projecting an input onto the hyperplane orthogonal
to u removes the component explained by "this looks like the forget class";
the projected forget-class coordinate then tells how much of the input's
forget mass survives that removal. The forget-class probability is spread
over the retained classes proportionally to the centroid's retained
entries, and the retained probabilities are rescaled so the result sums
to one.

All models here are immutable after construction and safe to share across
threads; `apply` and `apply_batch` are pure and deterministic (batch output
is bit-identical to record-by-record application).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ConfidenceVector,
    ForgetSpec,
    PredictionRecord,
    PredictionSet,
    split_by_forget,
    _as_readonly,
)
from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    EmptyForgetSet,
    RankDeficiency,
    ValidationError,
    ZeroCentroid,
)

# Confidence thresholds the upstream model is assumed to meet on the
# forget class: prediction accuracy and mean winning probability.
MIN_FORGET_ACCURACY = 0.8
MIN_TOP_CONFIDENCE = 0.7

# Below this L2 norm a centroid has no usable direction.
ZERO_NORM_TOL = 1e-12
# Below this L1 mass the retained centroid entries carry no signal and the
# distribution ratio falls back to uniform.
DEGENERATE_RATIO_TOL = 1e-12
# Inputs with forget-class probability this close to 1 take the limit
# branch: the retained part is numerically zero and the formula's limit is
# the distribution ratio alone.
UNIT_MASS_TOL = 1e-9

_GS_DROP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Centroid:
    """Mean confidence vector over the forget-set predictions."""

    values: np.ndarray
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("centroid needs at least one sample")
        total = float(self.values.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(
                f"centroid entries sum to {total!r}; a mean of simplex points must sum to 1"
            )


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Orthogonal projection onto the hyperplane orthogonal to a unit vector.

    Only the unit direction u is stored; the implied matrix is
    P = I - u u^T. Applying the operator costs O(n) per vector, and the
    dense matrix never materializes on the hot path.
    """

    unit_direction: np.ndarray
    n: int

    def __post_init__(self):
        norm = float(np.linalg.norm(self.unit_direction))
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError(f"direction has norm {norm!r}, expected 1")
        if self.unit_direction.shape != (self.n,):
            raise DimensionMismatch("direction length disagrees with n")

    def project(self, v: np.ndarray) -> np.ndarray:
        u = self.unit_direction
        return v - u * float(np.dot(u, v))

    def project_rows(self, rows: np.ndarray) -> np.ndarray:
        u = self.unit_direction
        return rows - u * np.sum(rows * u, axis=1)[:, None]

    def dense(self) -> np.ndarray:
        """The full n-by-n matrix I - u u^T (diagnostics and tests only)."""
        u = self.unit_direction
        return np.eye(self.n) - np.outer(u, u)


@dataclass(frozen=True)
class Diagnostics:
    """How well the upstream model meets the fit assumptions on the forget set."""

    forget_accuracy: float
    mean_top_confidence: float
    n_samples: int
    assumption_met: bool

    def __post_init__(self):
        expected = (
            self.forget_accuracy >= MIN_FORGET_ACCURACY
            and self.mean_top_confidence >= MIN_TOP_CONFIDENCE
        )
        if self.assumption_met != expected:
            raise ValidationError(
                "assumption_met must equal (forget_accuracy >= "
                f"{MIN_FORGET_ACCURACY}) and (mean_top_confidence >= {MIN_TOP_CONFIDENCE})"
            )

    @staticmethod
    def from_measurements(
        forget_accuracy: float, mean_top_confidence: float, n_samples: int
    ) -> "Diagnostics":
        return Diagnostics(
            forget_accuracy=forget_accuracy,
            mean_top_confidence=mean_top_confidence,
            n_samples=n_samples,
            assumption_met=(
                forget_accuracy >= MIN_FORGET_ACCURACY
                and mean_top_confidence >= MIN_TOP_CONFIDENCE
            ),
        )


@dataclass(frozen=True, eq=False)
class FilterModel:
    """A fitted unlearning filter for one forget class.

    `label_space` lists the original ids of the input columns (identity for
    unfiltered model outputs); `retained_label_space` is the same minus the
    forget class. `n` is the input dimension.
    """

    forget_class: int
    n: int
    centroid: Centroid
    projector: ProjectionOperator
    distribution_ratio: np.ndarray
    label_space: tuple[int, ...]
    retained_label_space: tuple[int, ...]
    diagnostics: Diagnostics

    def __post_init__(self):
        if self.n != len(self.label_space) or self.n < 2:
            raise DimensionMismatch("label space size must equal n and be >= 2")
        ratio = self.distribution_ratio
        if ratio.shape != (self.n - 1,):
            raise DimensionMismatch("distribution ratio must have length n - 1")
        if np.any(ratio < 0.0) or abs(float(ratio.sum()) - 1.0) > 1e-12:
            raise ValidationError("distribution ratio must lie on the simplex")
        expected_retained = tuple(
            c for c in self.label_space if c != self.forget_class
        )
        if self.retained_label_space != expected_retained:
            raise ValidationError("retained label space must be label space minus forget class")
        if not np.allclose(
            self.projector.unit_direction,
            self.centroid.values / np.linalg.norm(self.centroid.values),
            rtol=0.0,
            atol=1e-12,
        ):
            raise ValidationError("projector direction must be the normalized centroid")

    @property
    def forget_position(self) -> int:
        return self.label_space.index(self.forget_class)


def compute_centroid(forget_preds: PredictionSet) -> Centroid:
    """Entrywise mean of all confidence vectors in the forget subset."""
    if len(forget_preds) == 0:
        raise EmptyForgetSet("cannot average an empty forget set")
    values = forget_preds.matrix.mean(axis=0)
    return Centroid(values=_as_readonly(values), n_samples=len(forget_preds))


def build_projector(centroid: Centroid) -> ProjectionOperator:
    """Projection onto the hyperplane orthogonal to the centroid direction."""
    values = centroid.values
    norm = float(np.linalg.norm(values))
    if norm <= ZERO_NORM_TOL:
        raise ZeroCentroid(f"centroid norm {norm!r} too small to define a direction")
    return ProjectionOperator(unit_direction=_as_readonly(values / norm), n=values.shape[0])


def build_projector_gram_schmidt(centroid: Centroid) -> np.ndarray:
    """Dense projection matrix built from an explicit orthonormal basis.

    Orthonormalizes the standard basis against the centroid direction
    (two modified Gram-Schmidt passes per vector), drops the one vector
    that collapses, and returns P = A A^T where A's columns are the n-1
    survivors. O(n^3); used only as a test oracle and for cost
    measurements. The fast path in :func:`build_projector` realizes the
    identical operator as a rank-one update.
    """
    values = centroid.values
    n = values.shape[0]
    norm = float(np.linalg.norm(values))
    if norm <= ZERO_NORM_TOL:
        raise ZeroCentroid(f"centroid norm {norm!r} too small to define a direction")
    q = np.empty((n, n), dtype=np.float64)
    q[:, 0] = values / norm
    k = 1
    for i in range(n):
        v = np.zeros(n, dtype=np.float64)
        v[i] = 1.0
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            v -= q[:, :k] @ (q[:, :k].T @ v)
        residual = float(np.linalg.norm(v))
        if residual > _GS_DROP_TOL:
            if k == n:
                raise RankDeficiency("more than n orthonormal vectors survived")
            q[:, k] = v / residual
            k += 1
    if k != n:
        raise RankDeficiency(
            f"only {k - 1} of {n - 1} basis vectors survived the drop tolerance"
        )
    basis = q[:, 1:]
    return basis @ basis.T


def compute_distribution_ratio(
    centroid: Centroid,
    spec: ForgetSpec,
    label_space: Sequence[int] | None = None,
) -> np.ndarray:
    """How the forget class's probability mass spreads over retained classes.

    The centroid's retained entries are exactly the forget set's average
    confusion with each retained class, so their L1 normalization is the
    redistribution proportion. Negative entries (impossible for true means,
    possible for hand-built centroids) are clamped to zero first. A
    numerically zero retained part (one-hot centroid) falls back to the
    uniform vector: with no observed confusion, maximum entropy is the only
    defensible split.
    """
    values = centroid.values
    if label_space is None:
        pos = spec.forget_class
        if not 0 <= pos < values.shape[0]:
            raise ValidationError(f"forget class {pos} outside centroid of length {values.shape[0]}")
    else:
        pos = tuple(label_space).index(spec.forget_class)
    retained = np.delete(values, pos)
    clamped = np.maximum(retained, 0.0)
    mass = float(clamped.sum())
    if mass < DEGENERATE_RATIO_TOL:
        ratio = np.full(retained.shape[0], 1.0 / retained.shape[0])
        ratio /= ratio.sum()
    else:
        ratio = clamped / mass
    return _as_readonly(ratio)


def diagnose(forget_preds: PredictionSet, spec: ForgetSpec) -> Diagnostics:
    """Measure the upstream model's behavior on the forget subset.

    forget_accuracy is the fraction of records whose argmax falls on the
    forget class (ties break to the lowest column); mean_top_confidence
    averages the winning probability over exactly those records, 0 if none.
    """
    if len(forget_preds) == 0:
        raise EmptyForgetSet("cannot diagnose an empty forget set")
    spec.validate_for(forget_preds)
    m = forget_preds.matrix
    space = np.asarray(forget_preds.label_space)
    predicted = space[np.argmax(m, axis=1)]
    hit = predicted == spec.forget_class
    forget_accuracy = float(hit.mean())
    if hit.any():
        mean_top = float(m.max(axis=1)[hit].mean())
    else:
        mean_top = 0.0
    return Diagnostics.from_measurements(forget_accuracy, mean_top, len(forget_preds))


def fit(
    full_preds: PredictionSet,
    spec: ForgetSpec,
    require_assumptions: bool = False,
) -> FilterModel:
    """Fit the filter from the forget-class predictions in `full_preds`.

    Held-out (test-time) predictions of the upstream model are the
    recommended source. With `require_assumptions` the fit aborts when the
    diagnostics fall below the confidence thresholds; otherwise the
    violation is only recorded in the returned diagnostics.
    """
    if full_preds.dim < 2:
        raise ValidationError("need at least 2 classes to remove one")
    spec.validate_for(full_preds)
    forget_preds, _ = split_by_forget(full_preds, spec)
    if len(forget_preds) == 0:
        raise EmptyForgetSet(
            f"no records with true label {spec.forget_class} to fit on"
        )
    centroid = compute_centroid(forget_preds)
    projector = build_projector(centroid)
    ratio = compute_distribution_ratio(centroid, spec, full_preds.label_space)
    diagnostics = diagnose(forget_preds, spec)
    if require_assumptions and not diagnostics.assumption_met:
        raise AssumptionViolated(
            f"forget accuracy {diagnostics.forget_accuracy:.4f} "
            f"(need >= {MIN_FORGET_ACCURACY}) and mean top confidence "
            f"{diagnostics.mean_top_confidence:.4f} (need >= {MIN_TOP_CONFIDENCE})"
        )
    retained = tuple(c for c in full_preds.label_space if c != spec.forget_class)
    return FilterModel(
        forget_class=spec.forget_class,
        n=full_preds.dim,
        centroid=centroid,
        projector=projector,
        distribution_ratio=ratio,
        label_space=full_preds.label_space,
        retained_label_space=retained,
        diagnostics=diagnostics,
    )


def _redistribute_rows(model: FilterModel, rows: np.ndarray) -> np.ndarray:
    """Filter a C-contiguous (N, n) block of simplex rows to (N, n-1).

    Every step is elementwise or a per-row reduction over the contiguous
    last axis, so each output row depends only on its input row: a batch
    call is bit-identical to N single-row calls.
    """
    u = model.projector.unit_direction
    pos = model.forget_position
    ratio = model.distribution_ratio
    dots = np.sum(rows * u, axis=1)
    forget_mass = rows[:, pos].copy()
    projected_mass = np.clip(forget_mass - u[pos] * dots, 0.0, 1.0)
    retained = np.delete(rows, pos, axis=1)
    at_limit = forget_mass >= 1.0 - UNIT_MASS_TOL
    safe_mass = np.where(at_limit, 0.0, forget_mass)
    reduction = (1.0 - projected_mass) / (1.0 - safe_mass)
    denom = forget_mass + 1.0 - projected_mass
    out = (forget_mass[:, None] * ratio + reduction[:, None] * retained) / denom[:, None]
    out /= np.sum(out, axis=1)[:, None]
    if at_limit.any():
        # The formula's limit as the forget mass reaches 1: the retained
        # part vanishes and only the redistribution term survives.
        out[at_limit] = ratio
    return out


def apply(model: FilterModel, c: ConfidenceVector) -> ConfidenceVector:
    """Filter one confidence vector to the retained label space."""
    if len(c) != model.n:
        raise DimensionMismatch(f"expected length {model.n}, got {len(c)}")
    out = _redistribute_rows(model, c.entries[None, :])
    out.flags.writeable = False
    return ConfidenceVector(out[0])


def apply_batch(model: FilterModel, preds: PredictionSet) -> PredictionSet:
    """Filter every record, preserving ids, labels, and order."""
    if preds.dim != model.n:
        raise DimensionMismatch(
            f"model expects {model.n} columns, set has {preds.dim}"
        )
    if preds.label_space != model.label_space:
        raise DimensionMismatch(
            f"model fitted on label space {model.label_space}, "
            f"set has {preds.label_space}"
        )
    out = _redistribute_rows(model, preds.matrix)
    out.flags.writeable = False
    records = tuple(
        PredictionRecord(rec.id, rec.true_label, ConfidenceVector(row))
        for rec, row in zip(preds.records, out)
    )
    result = PredictionSet(
        n_labels=preds.n_labels,
        records=records,
        label_space=model.retained_label_space,
    )
    result.__dict__["matrix"] = out
    return result
