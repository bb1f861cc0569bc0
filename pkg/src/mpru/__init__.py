"""mpru: modular projection-redistribution unlearning for classifier outputs.

Removes one class from a trained classifier without touching the model:
fit a filter from the model's forget-class confidence vectors, then apply
it as a post-processing stage to map n-class outputs onto the retained
(n-1)-class simplex. Includes the evaluation metrics used to compare
filtered outputs against pretrained and retrained baselines, a synthetic
desk-scale experiment engine, interchange file formats, and a CLI.
"""

from .core import (
    ConfidenceVector,
    ForgetSpec,
    INGEST_TOL,
    INTERNAL_TOL,
    PredictionRecord,
    PredictionSet,
    split_by_forget,
    validate_confidence,
)
from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    DuplicateId,
    EmptyForgetSet,
    EmptyRestriction,
    EntryAboveOne,
    ForgetClassOutOfRange,
    IdMismatch,
    InconsistentDimensions,
    MpruError,
    NegativeEntry,
    NoDataForLabel,
    ParseError,
    RankDeficiency,
    SchemaError,
    SumOutOfTolerance,
    ValidationError,
    VersionMismatch,
    ZeroCentroid,
)
from .filtering import (
    Centroid,
    Diagnostics,
    FilterModel,
    ProjectionOperator,
    apply,
    apply_batch,
    build_projector,
    build_projector_gram_schmidt,
    compute_centroid,
    compute_distribution_ratio,
    diagnose,
    fit,
)
from .io import (
    load_filter,
    read_predictions,
    report_to_dict,
    save_filter,
    save_report,
    write_predictions,
)
from .metrics import (
    AccuracyReport,
    EvaluationReport,
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
from .synth import (
    DEFAULT_SEEDS,
    ExperimentResult,
    SynthConfig,
    TrainedSoftmax,
    TrainerParams,
    generate_blobs,
    oracle_mpru,
    predict_set,
    run_experiment,
    train_softmax,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
