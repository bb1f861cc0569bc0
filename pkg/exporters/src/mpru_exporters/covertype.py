"""Covertype exporter: gradient-boosted trees on the forest-cover data.

Configured for 200 trees, maximum depth 6, learning rate 0.1, row
subsample 0.8, column subsample 0.8, softprob objective, on a stratified
80/20 split. Numeric features are standardized; the 44 soil/wilderness
indicator columns are already one-hot and pass through unchanged.

Backend: xgboost when importable; otherwise scikit-learn's
HistGradientBoostingClassifier with the matching tree count, depth, and
learning rate (it has no row/column subsampling knobs; the substitution
is reported in the manifest-facing `backend_name`).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from .jobs import ExportJob, JobFailure
from .writer import write_predictions_jsonl

N_NUMERIC = 10  # leading Covertype columns are numeric; the rest are 0/1


@dataclass(frozen=True)
class TabularData:
    features: np.ndarray
    labels: np.ndarray  # 0-based class ids


@dataclass(frozen=True)
class BoostParams:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    subsample: float = 0.8
    colsample: float = 0.8


def backend_name() -> str:
    try:
        import xgboost  # noqa: F401

        return "xgboost"
    except ImportError:
        return "sklearn-hist-gradient-boosting"


def load_covertype() -> TabularData:
    """Fetch the dataset via scikit-learn; JobFailure when unavailable."""
    from sklearn.datasets import fetch_covtype

    try:
        raw = fetch_covtype()
    except Exception as e:  # network or cache failure
        raise JobFailure(f"covertype dataset unavailable: {e}") from e
    return TabularData(features=raw.data, labels=raw.target.astype(np.int64) - 1)


def _make_model(params: BoostParams, seed: int):
    try:
        from xgboost import XGBClassifier

        return XGBClassifier(
            n_estimators=params.n_trees,
            max_depth=params.max_depth,
            learning_rate=params.learning_rate,
            subsample=params.subsample,
            colsample_bytree=params.colsample,
            objective="multi:softprob",
            random_state=seed,
            n_jobs=-1,
        )
    except ImportError:
        from sklearn.ensemble import HistGradientBoostingClassifier

        return HistGradientBoostingClassifier(
            max_iter=params.n_trees,
            max_depth=params.max_depth,
            learning_rate=params.learning_rate,
            random_state=seed,
        )


def split_and_scale(
    data: TabularData, seed: int, test_fraction: float = 0.2
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stratified train/test split, numeric columns standardized.

    The split depends only on (data, seed), never on the variant, so test
    ids stay aligned between the full and class-dropped exports.
    """
    x_train, x_test, y_train, y_test = train_test_split(
        data.features,
        data.labels,
        test_size=test_fraction,
        random_state=seed,
        stratify=data.labels,
    )
    scaler = StandardScaler().fit(x_train[:, :N_NUMERIC])
    x_train = np.hstack([scaler.transform(x_train[:, :N_NUMERIC]), x_train[:, N_NUMERIC:]])
    x_test = np.hstack([scaler.transform(x_test[:, :N_NUMERIC]), x_test[:, N_NUMERIC:]])
    return x_train, x_test, y_train, y_test


def export_covertype(
    job: ExportJob,
    data: TabularData | None = None,
    params: BoostParams = BoostParams(),
) -> Path:
    """Train the job's model variant and write test-set predictions."""
    if job.dataset != "covertype":
        raise ValueError(f"not a tabular dataset: {job.dataset!r}")
    if data is None:
        data = load_covertype()
    x_train, x_test, y_train, y_test = split_and_scale(data, job.seed)

    keep = np.array(job.label_space)
    mask = np.isin(y_train, keep)
    local = {int(c): i for i, c in enumerate(sorted(keep))}
    y_local = np.array([local[int(y)] for y in y_train[mask]])

    model = _make_model(params, job.seed)
    model.fit(x_train[mask], y_local)
    probs = np.asarray(model.predict_proba(x_test), dtype=np.float64)
    probs /= probs.sum(axis=1)[:, None]

    out = job.output_file()
    out.parent.mkdir(parents=True, exist_ok=True)
    write_predictions_jsonl(
        out,
        ids=[f"test-{i:06d}" for i in range(len(y_test))],
        labels=y_test,
        probs=probs,
        label_space=job.label_space,
        n_labels=job.n_classes,
    )
    return out
