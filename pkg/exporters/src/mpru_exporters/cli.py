"""Command line for export jobs.

One invocation trains one or more model variants for a (dataset, seed)
pair and writes prediction files plus a manifest listing them.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cifar import TrainSettings, export_cifar, load_cifar
from .covertype import BoostParams, backend_name, export_covertype, load_covertype
from .jobs import DATASETS, ExportJob, JobFailure, N_CLASSES
from .writer import write_manifest


def _variants(args, dataset: str) -> list[str]:
    if args.variant == "all":
        return ["full"] + [f"drop-class-{j}" for j in range(N_CLASSES[dataset])]
    return [args.variant]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mpru-export",
        description="Train reference models and export confidence vectors "
        "in the mpru prediction format.",
    )
    parser.add_argument("dataset", choices=DATASETS)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument(
        "--variant",
        default="full",
        help="'full', 'drop-class-J', or 'all' (full plus every drop variant)",
    )
    parser.add_argument("--out-dir", default="exports")
    parser.add_argument("--data-root", default="data", help="image dataset location")
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--batch-size", type=int, default=512)
    parser.add_argument("--trees", type=int, default=200)
    parser.add_argument(
        "--conventional-normalization",
        action="store_true",
        help="use the common CIFAR-10 channel statistics instead of the configured ones",
    )
    parser.add_argument(
        "--allow-any-seed",
        action="store_true",
        help="permit seeds outside the ten-seed reproduction list",
    )
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    try:
        if args.dataset in ("cifar10", "cifar100"):
            data = load_cifar(args.dataset, args.data_root)
            settings = TrainSettings(epochs=args.epochs, batch_size=args.batch_size)
            for variant in _variants(args, args.dataset):
                job = ExportJob(
                    args.dataset, args.seed, variant, out_dir,
                    strict_seeds=not args.allow_any_seed,
                )
                path = export_cifar(
                    job,
                    data=data,
                    settings=settings,
                    conventional_normalization=args.conventional_normalization,
                )
                files.append({"variant": variant, "path": path.name, "backend": "resnet18"})
                print(f"wrote {path}", file=sys.stderr)
        else:
            data = load_covertype()
            params = BoostParams(n_trees=args.trees)
            for variant in _variants(args, args.dataset):
                job = ExportJob(
                    args.dataset, args.seed, variant, out_dir,
                    strict_seeds=not args.allow_any_seed,
                )
                path = export_covertype(job, data=data, params=params)
                files.append({"variant": variant, "path": path.name, "backend": backend_name()})
                print(f"wrote {path}", file=sys.stderr)
    except JobFailure as e:
        print(f"job failed: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"invalid job: {e}", file=sys.stderr)
        return 2

    manifest = out_dir / f"{args.dataset}-seed{args.seed}-manifest.json"
    write_manifest(manifest, args.dataset, args.seed, files)
    print(f"wrote {manifest}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
