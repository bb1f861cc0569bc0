"""Reference-model exporters feeding the mpru unlearning toolkit.

Trains the image (ResNet-18 on CIFAR-10/100) and tabular (gradient-boosted
trees on Covertype) models and writes their test-set confidence vectors in
the mpru JSONL prediction format, one file per (seed, variant). The
unlearning logic itself lives entirely in the `mpru` package; this side
only produces its inputs.
"""

from .cifar import ImageData, TrainSettings, build_resnet18, export_cifar
from .covertype import BoostParams, TabularData, backend_name, export_covertype
from .jobs import DATASETS, ExportJob, JobFailure, N_CLASSES, REPRODUCTION_SEEDS
from .writer import write_manifest, write_predictions_jsonl

__all__ = [
    "BoostParams",
    "DATASETS",
    "ExportJob",
    "ImageData",
    "JobFailure",
    "N_CLASSES",
    "REPRODUCTION_SEEDS",
    "TabularData",
    "TrainSettings",
    "backend_name",
    "build_resnet18",
    "export_cifar",
    "export_covertype",
    "write_manifest",
    "write_predictions_jsonl",
]
