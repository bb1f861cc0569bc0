"""Export job descriptions and their validation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

DATASETS = ("cifar10", "cifar100", "covertype")

# The ten fixed seeds every reported experiment cycles through.
REPRODUCTION_SEEDS = (42, 602, 311, 637, 800, 543, 969, 122, 336, 93)

N_CLASSES = {"cifar10": 10, "cifar100": 100, "covertype": 7}


class JobFailure(RuntimeError):
    """An export job could not run (missing dataset, resources, ...)."""


@dataclass(frozen=True)
class ExportJob:
    """One (dataset, seed, variant) export.

    `variant` is either "full" (model trained on all classes) or
    "drop-class-J" (retrained with class J removed). `strict_seeds`
    restricts seeds to the reproduction list; disable it for ad hoc runs.
    """

    dataset: str
    seed: int
    variant: str
    output_dir: Path
    strict_seeds: bool = True

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}, expected one of {DATASETS}")
        if self.strict_seeds and self.seed not in REPRODUCTION_SEEDS:
            raise ValueError(
                f"seed {self.seed} is not in the reproduction list {REPRODUCTION_SEEDS}; "
                "pass strict_seeds=False for exploratory runs"
            )
        self.drop_class  # validates the variant string

    @property
    def drop_class(self) -> int | None:
        if self.variant == "full":
            return None
        if self.variant.startswith("drop-class-"):
            try:
                j = int(self.variant.removeprefix("drop-class-"))
            except ValueError:
                raise ValueError(f"malformed variant {self.variant!r}") from None
            if not 0 <= j < N_CLASSES[self.dataset]:
                raise ValueError(
                    f"variant {self.variant!r} drops a class outside "
                    f"0..{N_CLASSES[self.dataset] - 1}"
                )
            return j
        raise ValueError(f"variant must be 'full' or 'drop-class-J', got {self.variant!r}")

    @property
    def n_classes(self) -> int:
        return N_CLASSES[self.dataset]

    @property
    def label_space(self) -> tuple[int, ...]:
        j = self.drop_class
        return tuple(c for c in range(self.n_classes) if c != j)

    def output_file(self) -> Path:
        return Path(self.output_dir) / f"{self.dataset}-seed{self.seed}-{self.variant}.jsonl"
