"""Command-line interface: fit, apply, eval, synth, bench.

Exit codes: 0 success, 1 I/O failure, 2 validation failure (bad data,
dimension or id mismatch), 3 fit assumptions violated under
--require-assumptions. All paths accept '-' for stdin/stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import io as mio
from .bench import bench_report_to_dict, measure_retrain_comparison, measure_scaling
from .core import ForgetSpec
from .errors import AssumptionViolated, MpruError, ParseError, ValidationError
from .filtering import apply as apply_one, apply_batch, fit
from .metrics import evaluate
from .synth import SynthConfig, TrainerParams, run_experiment

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_ASSUMPTION = 3


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_fit(args) -> int:
    preds = mio.read_predictions(args.input, args.format)
    model = fit(preds, ForgetSpec(args.forget_class), args.require_assumptions)
    mio.save_filter(model, args.out)
    d = model.diagnostics
    print(
        f"fitted filter for class {model.forget_class}: "
        f"forget_accuracy={d.forget_accuracy:.4f} "
        f"mean_top_confidence={d.mean_top_confidence:.4f} "
        f"n_samples={d.n_samples} assumption_met={d.assumption_met}",
        file=sys.stderr,
    )
    return EXIT_OK


def _stream_apply(model, in_stream, out_stream) -> int:
    """Filter one JSONL record per input line, flushing after each.

    Malformed lines are reported on stderr and skipped; the stream keeps
    flowing and the exit stays 0 with the error count reported at the end.
    """
    errors = 0
    for line_no, raw in enumerate(in_stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if '"format"' in line:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                obj = None
            if isinstance(obj, dict) and obj.get("format") == mio.PREDS_FORMAT:
                header_space = obj.get("label_space")
                if header_space is not None and tuple(header_space) != model.label_space:
                    raise ValidationError(
                        f"stream header label space {header_space} does not match "
                        f"filter label space {list(model.label_space)}"
                    )
                out_stream.write(
                    json.dumps(
                        {
                            "format": mio.PREDS_FORMAT,
                            "version": mio.FORMAT_VERSION,
                            "n_labels": obj.get("n_labels", model.n),
                            "label_space": list(model.retained_label_space),
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
                out_stream.flush()
                continue
        try:
            rec = mio.parse_prediction_line(line, line_no, model.n)
            filtered = apply_one(model, rec.confidence)
        except (ParseError, ValidationError, MpruError) as e:
            errors += 1
            print(
                json.dumps({"line": line_no, "error": str(e)}, separators=(",", ":")),
                file=sys.stderr,
            )
            continue
        out_stream.write(
            json.dumps(
                {"id": rec.id, "label": rec.true_label, "probs": filtered.to_list()},
                separators=(",", ":"),
            )
            + "\n"
        )
        out_stream.flush()
    if errors:
        print(f"skipped {errors} malformed record(s)", file=sys.stderr)
    return EXIT_OK


def cmd_apply(args) -> int:
    model = mio.load_filter(args.filter)
    if args.stream:
        in_stream, owned_in = mio._open_for_read(args.input)
        out_stream, owned_out = mio._open_for_write(args.out)
        try:
            return _stream_apply(model, in_stream, out_stream)
        finally:
            if owned_in:
                in_stream.close()
            if owned_out:
                out_stream.close()
    preds = mio.read_predictions(args.input, args.format)
    filtered = apply_batch(model, preds)
    mio.write_predictions(filtered, args.out, args.format)
    return EXIT_OK


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    unlearned = mio.read_predictions(args.unlearned)
    retrained = mio.read_predictions(args.retrained)
    pretrained = mio.read_predictions(args.pretrained)
    t1 = time.perf_counter()
    report = evaluate(
        unlearned,
        retrained,
        pretrained,
        ForgetSpec(args.forget_class),
        runtimes={"load_s": t1 - t0},
    )
    t2 = time.perf_counter()
    report = dataclasses.replace(
        report, runtimes={"load_s": t1 - t0, "metrics_s": t2 - t1}
    )
    mio.save_report(report, args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    config = SynthConfig(
        n_classes=args.classes,
        dim=args.dim,
        per_class_train=args.per_class,
        per_class_test=args.per_class_test,
        class_separation=args.separation,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    trainer = TrainerParams(epochs=args.epochs, learning_rate=args.lr)
    result = run_experiment(config, args.forget_class, trainer)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mio.write_predictions(result.pretrained, out_dir / "pretrained.jsonl")
    mio.write_predictions(result.retrained, out_dir / "retrained.jsonl")
    mio.write_predictions(result.unlearned, out_dir / "unlearned.jsonl")
    mio.save_filter(result.filter, out_dir / "filter.json")
    mio.save_report(result.report, out_dir / "report.json")
    print(f"wrote 5 files to {out_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    n_list = [int(v) for v in args.n_list.split(",")]
    report = measure_scaling(
        n_list, samples=args.samples, repetitions=args.repetitions, seed=args.seed
    )
    if args.with_retrain:
        comparison = measure_retrain_comparison()
        report = dataclasses.replace(
            report,
            retrain_s=comparison["retrain_s"],
            fit_apply_s=comparison["fit_apply_s"],
            speedup=comparison["speedup"],
        )
    stream, owned = mio._open_for_write(args.out)
    try:
        json.dump(bench_report_to_dict(report), stream, indent=2)
        stream.write("\n")
    finally:
        if owned:
            stream.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpru",
        description="Class-unlearning output filter: fit from predictions, "
        "apply to confidence vectors, evaluate against baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a filter from prediction files")
    p.add_argument("--input", required=True, help="predictions (path or -)")
    p.add_argument("--forget-class", type=int, required=True)
    p.add_argument("--out", required=True, help="filter artifact (path or -)")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--require-assumptions", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("apply", help="apply a fitted filter to predictions")
    p.add_argument("--filter", required=True)
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument(
        "--stream",
        action="store_true",
        help="filter one JSONL record per line, flushing each (pipeline stage)",
    )
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="compare unlearned outputs against baselines")
    p.add_argument("--unlearned", required=True)
    p.add_argument("--retrained", required=True)
    p.add_argument("--pretrained", required=True)
    p.add_argument("--forget-class", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="run the synthetic end-to-end experiment")
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--per-class", type=int, default=500)
    p.add_argument("--per-class-test", type=int, default=100)
    p.add_argument("--separation", type=float, default=6.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--forget-class", type=int, default=0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=2.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="measure scaling slopes of the cost paths")
    p.add_argument("--n-list", default="16,32,64,128,256")
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-retrain", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AssumptionViolated as e:
        return _fail(str(e), EXIT_ASSUMPTION)
    except MpruError as e:
        return _fail(str(e), EXIT_VALIDATION)
    except OSError as e:
        return _fail(str(e), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
