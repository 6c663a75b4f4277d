"""Command-line surface: generate, train, eval, predict, inspect.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O
error. Every successful run prints a single machine-parsable summary
line. All flags are long-named and defaults appear in --help.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import detect, synth
from .data import AugmentationConfig, decode_image, load_dataset
from .errors import CheckpointError, CornspectError
from .model import ModelConfig, classify
from .train import (
    Checkpoint,
    TrainConfig,
    evaluate,
    export_metrics,
    load_checkpoint,
    save_checkpoint,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract (usage errors exit 1, not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _counts(text: str) -> dict[str, tuple[int, int]]:
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(
            "--counts needs 6 comma-separated integers: "
            "train-normal,train-abnormal,val-normal,val-abnormal,test-normal,test-abnormal"
        )
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--counts values must be integers, got {text!r}") from None
    if min(values) < 0:
        raise argparse.ArgumentTypeError("--counts values must be non-negative")
    return {
        "train": (values[0], values[1]),
        "validate": (values[2], values[3]),
        "test": (values[4], values[5]),
    }


def build_parser() -> _Parser:
    parser = _Parser(
        prog="cornspect",
        description="Corn-kernel quality inspection toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("generate", help="write a synthetic dataset tree", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--counts", required=True, type=_counts,
                   help="per split/class counts, e.g. 500,500,300,300,100,100")
    p.add_argument("--seed", required=True, type=int, help="generator seed")
    p.add_argument("--size", type=int, default=64, help="square image size in pixels")

    p = sub.add_parser("train", help="train the classifier on a dataset tree", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--model", required=True, help="checkpoint output path")
    p.add_argument("--seed", required=True, type=int, help="training seed")
    p.add_argument("--epochs", type=int, default=30, help="training epochs")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--batch", type=int, default=32, help="batch size")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam", help="update rule")
    p.add_argument("--size", type=int, default=64, help="model input size (pixels, multiple of 8)")
    p.add_argument("--augment", choices=("off", "on"), default="off",
                   help="online training augmentation (flips, 90-degree rotations, brightness)")
    p.add_argument("--metrics", default=None,
                   help="metrics CSV path (default: checkpoint path with .csv suffix)")

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split", formatter_class=fmt)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--report", default=None,
                   help="per-image report path (default: checkpoint path with .report.jsonl suffix)")

    p = sub.add_parser("predict", help="classify one kernel image", formatter_class=fmt)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--image", required=True, help="image file to classify")

    p = sub.add_parser("inspect", help="detect and classify every seed in a scene", formatter_class=fmt)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--image", required=True, help="scene image file")
    p.add_argument("--out", default=None,
                   help="annotated PNG path (default: input name + .annotated.png)")
    p.add_argument("--report", default=None,
                   help="report path (default: input name + .report.jsonl)")
    p.add_argument("--min-area", type=int, default=64, help="discard components smaller than this")

    return parser


def _cmd_generate(args) -> int:
    written = synth.generate_dataset(args.counts, args.seed, args.out, size=args.size)
    total = sum(sum(v.values()) for v in written.values())
    manifest = Path(args.out) / "manifest.jsonl"
    print(f"OK generate files={total} out={args.out} manifest={manifest} seed={args.seed}")
    return EXIT_OK


def _cmd_train(args) -> int:
    splits = load_dataset(args.data)
    model_config = ModelConfig(input_height=args.size, input_width=args.size, seed=args.seed)
    augment = None
    if args.augment == "on":
        augment = AugmentationConfig(
            horizontal_flip=True, vertical_flip=True, rotate90=True, brightness=0.1, seed=args.seed
        )
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch,
        optimizer=args.optimizer,
        augment=augment,
        seed=args.seed,
    )
    result = train(splits, model_config, config)
    final_metrics = result.metrics[-1] if result.metrics else None
    checkpoint = Checkpoint(model_config, result.best_params, final_metrics, args.seed)
    save_checkpoint(checkpoint, args.model)
    metrics_path = args.metrics or str(Path(args.model).with_suffix(".csv"))
    if result.metrics:
        export_metrics(result.metrics, metrics_path)
    best_acc = result.metrics[result.best_epoch].val_accuracy if result.metrics else float("nan")
    print(
        f"OK train epochs={args.epochs} best_epoch={result.best_epoch} "
        f"val_accuracy={best_acc:.6f} model={args.model} metrics={metrics_path}"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    checkpoint = load_checkpoint(args.model)
    splits = load_dataset(args.data)
    result = evaluate(checkpoint.params, splits.test, checkpoint.model_config)
    report_path = args.report or str(Path(args.model).with_suffix(".report.jsonl"))
    Path(report_path).write_text(result.to_jsonl(), encoding="utf-8")
    print(
        f"OK eval split=test images={len(result.rows)} accuracy={result.accuracy:.6f} "
        f"loss={result.loss:.6f} report={report_path}"
    )
    return EXIT_OK


def _cmd_predict(args) -> int:
    checkpoint = load_checkpoint(args.model)
    pixels = decode_image(Path(args.image))
    calculation = round(
        detect.score_crop(pixels, checkpoint.params, checkpoint.model_config), 3
    )
    label = classify(calculation)
    print(f"{args.image} {calculation:.3f} {label.value}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    checkpoint = load_checkpoint(args.model)
    pixels = decode_image(Path(args.image))
    report, annotated, _ = detect.inspect_scene(
        pixels, checkpoint.params, checkpoint.model_config, min_area=args.min_area
    )
    out_path = args.out or args.image + ".annotated.png"
    report_path = args.report or args.image + ".report.jsonl"
    Image.fromarray(np.asarray(annotated)).save(out_path)
    detect.write_report(report, report_path)
    print(
        f"OK inspect seeds={len(report.rows)} normal={report.normal_count} "
        f"abnormal={report.abnormal_count} annotated={out_path} report={report_path}"
    )
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "inspect": _cmd_inspect,
}


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CheckpointError as exc:
        print(f"cornspect: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        name = exc.filename or exc
        print(f"cornspect: error: file not found: {name}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"cornspect: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CornspectError as exc:
        print(f"cornspect: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
