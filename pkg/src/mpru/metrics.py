"""Evaluation metrics comparing unlearned outputs against baselines.

Covers per-set accuracy and the two accuracy gaps (to the pretrained and to
the retrained model), paired mean KL divergence in nats, squared-L2 error
statistics on the forget set, and prediction histograms. All reductions use
numpy's fixed-shape pairwise summation so repeated runs produce bit-equal
reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import ConfidenceVector, ForgetSpec, PredictionSet
from .errors import (
    DimensionMismatch,
    EmptyRestriction,
    IdMismatch,
    ValidationError,
)

# Probabilities are clamped into [KL_CLAMP, 1] and renormalized before
# taking logs: keeps KL(p, p) exactly 0 and bounds any single term by
# ln(1/KL_CLAMP) ~ 27.6 nats.
KL_CLAMP = 1e-12

ZERO_REMAINDER_TOL = 1e-12

PAIR_PRETRAINED_MPRU = "pretrained-mpru"
PAIR_PRETRAINED_RETRAIN = "pretrained-retrain"
PAIR_RETRAIN_MPRU = "retrain-mpru"


@dataclass(frozen=True)
class AccuracyReport:
    """Retain/forget accuracy of the unlearned outputs and both gaps.

    epsilon_p gaps against the pretrained model, epsilon_r against the
    retrained baseline, both on the retain set. The two baseline retain
    accuracies are carried along for table-shaped reporting.
    """

    retain_accuracy: float
    forget_accuracy: float
    epsilon_p: float
    epsilon_r: float
    pretrained_retain_accuracy: float
    retrained_retain_accuracy: float

    def __post_init__(self):
        for name in (
            "retain_accuracy",
            "forget_accuracy",
            "epsilon_p",
            "epsilon_r",
            "pretrained_retain_accuracy",
            "retrained_retain_accuracy",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value!r}")


@dataclass(frozen=True)
class KLReport:
    """Mean KL divergence (nats) of one model pair on retain and forget sets."""

    pair_name: str
    retain_kl_mean: float
    forget_kl_mean: float

    def __post_init__(self):
        if self.retain_kl_mean < 0.0 or self.forget_kl_mean < 0.0:
            raise ValidationError("mean KL divergences cannot be negative")


@dataclass(frozen=True)
class MSEReport:
    """Statistics of per-sample squared L2 distances between paired outputs."""

    mean: float
    std: float
    max: float
    pct_below_mean: float

    def __post_init__(self):
        if not (self.max >= self.mean >= 0.0 and self.std >= 0.0):
            raise ValidationError("need max >= mean >= 0 and std >= 0")
        if not 0.0 <= self.pct_below_mean <= 100.0:
            raise ValidationError("pct_below_mean is a percentage")


@dataclass(frozen=True)
class EvaluationReport:
    """Full comparison of unlearned outputs against both baselines."""

    forget_class: int
    n_labels: int
    n_retain: int
    n_forget: int
    accuracy: AccuracyReport
    kl: tuple[KLReport, ...]
    mse: MSEReport
    histograms: Mapping[str, Mapping[int, int]]
    runtimes: Mapping[str, float]

    def __post_init__(self):
        for model_name, hist in self.histograms.items():
            total = sum(hist.values())
            if total != self.n_forget:
                raise ValidationError(
                    f"{model_name} histogram sums to {total}, expected {self.n_forget}"
                )


def argmax_label(c: ConfidenceVector, label_space: Sequence[int]) -> int:
    """Original id at the maximum entry; ties break to the lowest position."""
    return int(label_space[int(np.argmax(c.entries))])


def _predicted_ids(preds: PredictionSet) -> np.ndarray:
    space = np.asarray(preds.label_space, dtype=np.int64)
    if len(preds) == 0:
        return np.empty(0, dtype=np.int64)
    return space[np.argmax(preds.matrix, axis=1)]


def accuracy(preds: PredictionSet, restrict_to: Iterable[int]) -> float:
    """Fraction of records with true label in `restrict_to` predicted correctly.

    A record whose true label is absent from the set's label space can never
    be predicted and scores 0.
    """
    wanted = set(int(c) for c in restrict_to)
    mask = np.fromiter(
        (rec.true_label in wanted for rec in preds.records),
        dtype=bool,
        count=len(preds),
    )
    if not mask.any():
        raise EmptyRestriction(f"no records with true label in {sorted(wanted)}")
    predicted = _predicted_ids(preds)
    correct = predicted[mask] == preds.true_labels[mask]
    return float(correct.mean())


def accuracy_differences(
    acc_unlearned: float, acc_pretrained: float, acc_retrained: float
) -> tuple[float, float]:
    """Absolute retain-accuracy gaps (to pretrained, to retrained)."""
    return abs(acc_unlearned - acc_pretrained), abs(acc_unlearned - acc_retrained)


def _align_rows(rows: np.ndarray, pos: int) -> np.ndarray:
    """Drop column `pos` and renormalize rows; zero remainders become uniform."""
    remainder = np.delete(rows, pos, axis=1)
    sums = np.sum(remainder, axis=1)
    degenerate = sums < ZERO_REMAINDER_TOL
    safe = np.where(degenerate, 1.0, sums)
    out = remainder / safe[:, None]
    if degenerate.any():
        k = remainder.shape[1]
        uniform = np.full(k, 1.0 / k)
        uniform /= uniform.sum()
        out[degenerate] = uniform
    return out


def align_to_retained(
    c: ConfidenceVector,
    spec: ForgetSpec,
    label_space: Sequence[int] | None = None,
) -> ConfidenceVector:
    """Drop the forget-class entry and renormalize to the retained simplex.

    Needed to compare full-dimensional pretrained outputs against models
    that never emit the forget class. A numerically zero remainder (the
    input put everything on the forget class) maps to uniform.
    """
    if label_space is None:
        pos = spec.forget_class
        if not 0 <= pos < len(c):
            raise ValidationError(f"forget class {pos} outside vector of length {len(c)}")
    else:
        pos = tuple(label_space).index(spec.forget_class)
    out = _align_rows(c.entries[None, :], pos)
    out.flags.writeable = False
    return ConfidenceVector(out[0])


def align_set_to_retained(preds: PredictionSet, spec: ForgetSpec) -> PredictionSet:
    """Apply :func:`align_to_retained` to every record of a set."""
    from .core import PredictionRecord  # local import to avoid cycle noise

    pos = spec.validate_for(preds)
    out = _align_rows(preds.matrix, pos)
    out.flags.writeable = False
    retained = tuple(c for c in preds.label_space if c != spec.forget_class)
    records = tuple(
        PredictionRecord(rec.id, rec.true_label, ConfidenceVector(row))
        for rec, row in zip(preds.records, out)
    )
    result = PredictionSet(preds.n_labels, records, retained)
    result.__dict__["matrix"] = out
    return result


def _kl_rows(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    p = np.clip(p_rows, KL_CLAMP, 1.0)
    p = p / np.sum(p, axis=1)[:, None]
    q = np.clip(q_rows, KL_CLAMP, 1.0)
    q = q / np.sum(q, axis=1)[:, None]
    kl = np.sum(p * (np.log(p) - np.log(q)), axis=1)
    return np.maximum(kl, 0.0)


def kl_per_sample(p: ConfidenceVector, q: ConfidenceVector) -> float:
    """KL(p || q) in nats, clamped and floored as described at module top."""
    if len(p) != len(q):
        raise DimensionMismatch(f"KL needs equal lengths, got {len(p)} and {len(q)}")
    return float(_kl_rows(p.entries[None, :], q.entries[None, :])[0])


def _check_paired(a: PredictionSet, b: PredictionSet) -> None:
    if a.dim != b.dim or a.label_space != b.label_space:
        raise DimensionMismatch(
            f"paired sets must share a label space, got {a.label_space} "
            f"and {b.label_space}"
        )
    if a.ids != b.ids:
        raise IdMismatch("paired sets must contain the same ids in the same order")


def mean_kl(a: PredictionSet, b: PredictionSet) -> float:
    """Arithmetic mean of per-record KL(a_i || b_i) over paired records."""
    _check_paired(a, b)
    if len(a) == 0:
        return 0.0
    return float(np.mean(_kl_rows(a.matrix, b.matrix)))


def mse_stats(a: PredictionSet, b: PredictionSet) -> MSEReport:
    """Per-record squared L2 distance statistics between paired outputs.

    Std is the population standard deviation; pct_below_mean counts strictly
    below, so all-equal distances report 0. Empty pairings report all zeros.
    """
    _check_paired(a, b)
    if len(a) == 0:
        return MSEReport(mean=0.0, std=0.0, max=0.0, pct_below_mean=0.0)
    d = np.sum((a.matrix - b.matrix) ** 2, axis=1)
    mx = float(np.max(d))
    mean = min(float(np.mean(d)), mx)
    return MSEReport(
        mean=mean,
        std=float(np.std(d)),
        max=mx,
        pct_below_mean=float(100.0 * np.mean(d < mean)),
    )


def prediction_histogram(preds: PredictionSet) -> dict[int, int]:
    """Count of argmax predictions per label-space id (zero-filled)."""
    positions = (
        np.argmax(preds.matrix, axis=1) if len(preds) else np.empty(0, dtype=np.int64)
    )
    counts = np.bincount(positions, minlength=preds.dim)
    return {int(c): int(k) for c, k in zip(preds.label_space, counts)}


def check_statistical_closeness(
    kl: KLReport, delta_r: float, delta_u: float
) -> bool:
    """Whether both mean KLs fall within the (retain, forget) bounds."""
    if delta_r < 0.0 or delta_u < 0.0:
        raise ValidationError("closeness bounds must be nonnegative")
    return kl.retain_kl_mean <= delta_r and kl.forget_kl_mean <= delta_u


def evaluate(
    unlearned: PredictionSet,
    retrained: PredictionSet,
    pretrained: PredictionSet,
    spec: ForgetSpec,
    runtimes: Mapping[str, float] | None = None,
) -> EvaluationReport:
    """Assemble the full report for one unlearning run.

    `unlearned` and `retrained` live on the retained label space;
    `pretrained` is full-dimensional and is aligned (forget column dropped,
    renormalized) for the KL pairings. Requires at least one forget and one
    retain record.
    """
    spec.validate_for(pretrained)
    j = spec.forget_class
    aligned_pre = align_set_to_retained(pretrained, spec)
    _check_paired(unlearned, retrained)
    _check_paired(unlearned, aligned_pre)
    if not (
        np.array_equal(unlearned.true_labels, retrained.true_labels)
        and np.array_equal(unlearned.true_labels, pretrained.true_labels)
    ):
        raise IdMismatch("paired sets disagree on true labels")

    retain_ids = [c for c in pretrained.label_space if c != j]
    labels = pretrained.true_labels
    retain_mask = labels != j
    forget_mask = labels == j
    if not forget_mask.any() or not retain_mask.any():
        raise ValidationError("evaluation needs at least one forget and one retain record")

    acc_u = accuracy(unlearned, retain_ids)
    acc_p = accuracy(pretrained, retain_ids)
    acc_r = accuracy(retrained, retain_ids)
    eps_p, eps_r = accuracy_differences(acc_u, acc_p, acc_r)
    acc_report = AccuracyReport(
        retain_accuracy=acc_u,
        forget_accuracy=accuracy(unlearned, [j]),
        epsilon_p=eps_p,
        epsilon_r=eps_r,
        pretrained_retain_accuracy=acc_p,
        retrained_retain_accuracy=acc_r,
    )

    subsets = {}
    for name, s in (("u", unlearned), ("r", retrained), ("p", aligned_pre)):
        subsets[name] = (s.select(retain_mask), s.select(forget_mask))
    kl_reports = tuple(
        KLReport(
            pair_name=pair,
            retain_kl_mean=mean_kl(subsets[first][0], subsets[second][0]),
            forget_kl_mean=mean_kl(subsets[first][1], subsets[second][1]),
        )
        for pair, first, second in (
            (PAIR_PRETRAINED_MPRU, "p", "u"),
            (PAIR_PRETRAINED_RETRAIN, "p", "r"),
            (PAIR_RETRAIN_MPRU, "r", "u"),
        )
    )

    mse = mse_stats(subsets["u"][1], subsets["r"][1])
    histograms = {
        "mpru": prediction_histogram(subsets["u"][1]),
        "retrain": prediction_histogram(subsets["r"][1]),
    }
    return EvaluationReport(
        forget_class=j,
        n_labels=pretrained.n_labels,
        n_retain=int(retain_mask.sum()),
        n_forget=int(forget_mask.sum()),
        accuracy=acc_report,
        kl=kl_reports,
        mse=mse,
        histograms=histograms,
        runtimes=dict(runtimes or {}),
    )
