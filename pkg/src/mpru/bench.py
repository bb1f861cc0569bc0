"""Microbenchmark harness for the filter's cost paths.

Measures, per label count n, the rank-one fit path, the dense
Gram-Schmidt construction, and both apply paths (rank-one O(n) per sample
vs dense matrix O(n^2) per sample), then estimates log-log scaling slopes.
Medians over repetitions keep single-machine noise out of the slopes;
acceptance is order-of-growth, not constants.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ForgetSpec, PredictionSet
from .errors import ValidationError
from .filtering import (
    FilterModel,
    _redistribute_rows,
    apply_batch,
    build_projector_gram_schmidt,
    fit,
)
from .synth import SynthConfig, TrainerParams, generate_blobs, predict_set, train_softmax

# Two-sided 95% t critical values by degrees of freedom (normal beyond).
_T_95 = {1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365, 8: 2.306}


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    ci_low: float
    ci_high: float
    n_points: int


@dataclass(frozen=True)
class PathTimings:
    n: int
    fit_fast_s: float
    fit_gs_s: float
    apply_per_sample_ns: float
    dense_apply_per_sample_ns: float


@dataclass(frozen=True)
class BenchReport:
    per_n: tuple[PathTimings, ...]
    slopes: Mapping[str, SlopeEstimate]
    environment: Mapping[str, str]
    retrain_s: float | None = None
    fit_apply_s: float | None = None
    speedup: float | None = None

    def __post_init__(self):
        if len(self.per_n) < 5:
            raise ValidationError("scaling slopes need at least 5 size points")
        for t in self.per_n:
            for v in (t.fit_fast_s, t.fit_gs_s, t.apply_per_sample_ns, t.dense_apply_per_sample_ns):
                if not np.isnan(v) and v <= 0:
                    raise ValidationError("all measured timings must be positive")


def loglog_slope(ns: Sequence[int], times: Sequence[float]) -> SlopeEstimate:
    """Least-squares slope of log(time) against log(n), with a 95% CI."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    k = x.shape[0]
    if k < 3:
        raise ValidationError("need at least 3 points for a slope interval")
    x_centered = x - x.mean()
    sxx = float(np.sum(x_centered**2))
    slope = float(np.sum(x_centered * y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    residuals = y - (slope * x + intercept)
    dof = k - 2
    se = float(np.sqrt(np.sum(residuals**2) / dof / sxx))
    t_crit = _T_95.get(dof, 1.96)
    return SlopeEstimate(
        slope=slope, ci_low=slope - t_crit * se, ci_high=slope + t_crit * se, n_points=k
    )


def _median_time(fn: Callable[[], object], repetitions: int, warmup: int = 2) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _random_fit_inputs(rng: np.random.Generator, n: int, n_forget: int) -> PredictionSet:
    probs = rng.dirichlet(np.full(n, 0.4), size=n_forget)
    # Bias toward the forget class so fits look like real forget sets.
    probs[:, 0] += 2.0
    probs /= probs.sum(axis=1)[:, None]
    return PredictionSet.from_arrays(
        ids=[f"b{i}" for i in range(n_forget)],
        true_labels=np.zeros(n_forget, dtype=np.int64),
        probs=probs,
        label_space=range(n),
        n_labels=n,
    )


def _dense_apply_rows(model: FilterModel, dense_p: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Apply path using the materialized projection matrix: O(n^2) a sample.

    The contraction deliberately avoids BLAS (einsum without optimize) so
    the measurement stays on one thread and the quadratic arithmetic is
    what the clock sees, not a thread pool.
    """
    pos = model.forget_position
    ratio = model.distribution_ratio
    projected = np.einsum("ij,kj->ik", rows, dense_p, optimize=False)
    forget_mass = rows[:, pos].copy()
    projected_mass = np.clip(projected[:, pos], 0.0, 1.0)
    retained = np.delete(rows, pos, axis=1)
    at_limit = forget_mass >= 1.0 - 1e-9
    safe = np.where(at_limit, 0.0, forget_mass)
    reduction = (1.0 - projected_mass) / (1.0 - safe)
    denom = forget_mass + 1.0 - projected_mass
    out = (forget_mass[:, None] * ratio + reduction[:, None] * retained) / denom[:, None]
    out /= np.sum(out, axis=1)[:, None]
    if at_limit.any():
        out[at_limit] = ratio
    return out


def environment_descriptor() -> dict[str, str]:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    governor = "unknown"
    try:
        with open("/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor") as f:
            governor = f.read().strip()
    except OSError:
        pass
    return {
        "cpu": cpu,
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpufreq_governor": governor,
        "build_profile": "cpython-numpy",
    }


ALL_PATHS = ("fit_fast", "fit_gram_schmidt", "apply_fast", "apply_dense")


def measure_scaling(
    n_list: Sequence[int],
    samples: int = 4096,
    repetitions: int = 10,
    seed: int = 0,
    fit_samples: int = 256,
    paths: Sequence[str] = ALL_PATHS,
) -> BenchReport:
    """Median timings over random simplex inputs and their log-log slopes.

    Timings cover arithmetic only; building the inputs, validation, and
    I/O stay outside the clock. `paths` restricts which cost paths are
    measured: the cubic Gram-Schmidt path wants larger n (where arithmetic
    dominates interpreter overhead) than the per-sample paths can afford.
    Unmeasured paths report NaN timings and no slope.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 5 or any(a >= b for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be ascending with at least 5 entries")
    if repetitions < 10:
        raise ValidationError("need at least 10 repetitions")
    unknown = set(paths) - set(ALL_PATHS)
    if unknown or not paths:
        raise ValidationError(f"unknown bench paths: {sorted(unknown)}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))

    per_n = []
    for n in n_list:
        preds = _random_fit_inputs(rng, n, fit_samples)
        spec = ForgetSpec(0)
        model = fit(preds, spec)
        timings = {path: float("nan") for path in ALL_PATHS}
        if "fit_fast" in paths:
            timings["fit_fast"] = _median_time(lambda: fit(preds, spec), repetitions)
        if "fit_gram_schmidt" in paths:
            timings["fit_gram_schmidt"] = _median_time(
                lambda: build_projector_gram_schmidt(model.centroid), repetitions
            )
        if "apply_fast" in paths or "apply_dense" in paths:
            rows = rng.dirichlet(np.ones(n), size=samples)
            if "apply_fast" in paths:
                timings["apply_fast"] = (
                    _median_time(lambda: _redistribute_rows(model, rows), repetitions)
                    / samples
                )
            if "apply_dense" in paths:
                dense_p = build_projector_gram_schmidt(model.centroid)
                timings["apply_dense"] = (
                    _median_time(
                        lambda: _dense_apply_rows(model, dense_p, rows), repetitions
                    )
                    / samples
                )
        per_n.append(
            PathTimings(
                n=n,
                fit_fast_s=timings["fit_fast"],
                fit_gs_s=timings["fit_gram_schmidt"],
                apply_per_sample_ns=timings["apply_fast"] * 1e9,
                dense_apply_per_sample_ns=timings["apply_dense"] * 1e9,
            )
        )

    ns = [t.n for t in per_n]
    series = {
        "fit_fast": [t.fit_fast_s for t in per_n],
        "fit_gram_schmidt": [t.fit_gs_s for t in per_n],
        "apply_fast": [t.apply_per_sample_ns for t in per_n],
        "apply_dense": [t.dense_apply_per_sample_ns for t in per_n],
    }
    slopes = {path: loglog_slope(ns, series[path]) for path in paths}
    return BenchReport(
        per_n=tuple(per_n), slopes=slopes, environment=environment_descriptor()
    )


def measure_retrain_comparison(
    config: SynthConfig = SynthConfig(),
    forget_class: int = 0,
    trainer: TrainerParams = TrainerParams(),
    repetitions: int = 3,
) -> dict[str, float]:
    """Wall-clock retraining vs fit-plus-apply on the same experiment inputs.

    Producing the upstream model's predictions is excluded from both sides:
    every unlearning route needs those.
    """
    data = generate_blobs(config)
    spec = ForgetSpec(forget_class)
    retained = [c for c in range(config.n_classes) if c != forget_class]
    pretrained_model = train_softmax(
        data.train, range(config.n_classes), trainer.epochs, trainer.learning_rate
    )
    preds = predict_set(pretrained_model, data.test, n_labels=config.n_classes)

    retrain_s = _median_time(
        lambda: train_softmax(data.train, retained, trainer.epochs, trainer.learning_rate),
        repetitions,
        warmup=1,
    )

    def fit_and_apply():
        model = fit(preds, spec)
        return apply_batch(model, preds)

    fit_apply_s = _median_time(fit_and_apply, max(repetitions, 10), warmup=1)
    return {
        "retrain_s": retrain_s,
        "fit_apply_s": fit_apply_s,
        "speedup": retrain_s / fit_apply_s,
    }


def bench_report_to_dict(report: BenchReport) -> dict:
    doc: dict = {
        "format": "mpru-bench",
        "version": 1,
        "per_n": [
            {
                "n": t.n,
                "fit_fast_s": t.fit_fast_s,
                "fit_gs_s": t.fit_gs_s,
                "apply_per_sample_ns": t.apply_per_sample_ns,
                "dense_apply_per_sample_ns": t.dense_apply_per_sample_ns,
            }
            for t in report.per_n
        ],
        "slopes": {
            name: {
                "slope": s.slope,
                "ci_low": s.ci_low,
                "ci_high": s.ci_high,
                "n_points": s.n_points,
            }
            for name, s in report.slopes.items()
        },
        "environment": dict(report.environment),
    }
    if report.retrain_s is not None:
        doc["retrain_s"] = report.retrain_s
        doc["fit_apply_s"] = report.fit_apply_s
        doc["speedup"] = report.speedup
    return doc
