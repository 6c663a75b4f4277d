"""Training loop, evaluation reports, metrics export, and checkpointing.

Runs are fully deterministic for a fixed seed: batch order, augmentation
draws, and parameter initialization all derive from named PRNG streams.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import AugmentationConfig, DatasetSplit, LabeledImage, batch_iter, preprocess
from .errors import IntegrityError, ValidationError, VersionError
from .model import (
    KernelLabel,
    ModelConfig,
    OptimizerConfig,
    OptimizerState,
    backward,
    bce_loss,
    build_model,
    classify,
    forward,
    optimizer_step,
)

CHECKPOINT_MAGIC = b"GSCK"
CHECKPOINT_VERSION = 1

METRICS_HEADER = "epoch,train_loss,train_accuracy,val_loss,val_accuracy"


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run (desk-scale defaults)."""

    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adam"
    augment: AugmentationConfig | None = None
    seed: int = 42

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class MetricsRecord:
    """Per-epoch curve point; values rounded to 6 decimals at creation."""

    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


@dataclass(frozen=True)
class EvalRow:
    identifier: str
    actual: KernelLabel
    calculation: float
    predict: KernelLabel


@dataclass
class EvalResult:
    loss: float
    accuracy: float
    rows: list[EvalRow]

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "seed": r.identifier,
                    "actual": r.actual.value,
                    "calculation": r.calculation,
                    "predict": r.predict.value,
                }
            )
            for r in self.rows
        ]
        normal = sum(1 for r in self.rows if r.predict is KernelLabel.NORMAL)
        lines.append(
            json.dumps(
                {
                    "rows": len(self.rows),
                    "normal": normal,
                    "abnormal": len(self.rows) - normal,
                    "accuracy": self.accuracy,
                    "loss": self.loss,
                }
            )
        )
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    final_params: dict[str, np.ndarray]
    best_params: dict[str, np.ndarray]
    best_epoch: int
    metrics: list[MetricsRecord] = field(default_factory=list)


def evaluate(
    params: dict[str, np.ndarray],
    images: list[LabeledImage],
    config: ModelConfig,
    batch_size: int = 32,
) -> EvalResult:
    """Per-image report rows plus aggregate loss and accuracy.

    Each row's predict comes from classify() applied to the 3-decimal
    calculation, so the report is self-consistent with the threshold rule.
    """
    if not images:
        raise ValidationError("cannot evaluate an empty image list")
    rows: list[EvalRow] = []
    loss_sum = 0.0
    for start in range(0, len(images), batch_size):
        chunk = images[start : start + batch_size]
        batch = np.stack([preprocess(im, config.input_height, config.input_width) for im in chunk])
        targets = np.array([im.label.encode() for im in chunk])
        probs, _ = forward(params, batch, config)
        loss, _ = bce_loss(probs, targets)
        loss_sum += loss * len(chunk)
        for im, p in zip(chunk, probs):
            calculation = round(float(p), 3)
            rows.append(EvalRow(im.identifier, im.label, calculation, classify(calculation)))
    accuracy = sum(1 for r in rows if r.predict is r.actual) / len(rows)
    return EvalResult(loss=loss_sum / len(images), accuracy=accuracy, rows=rows)


def train(splits: DatasetSplit, model_config: ModelConfig, config: TrainConfig) -> TrainResult:
    """Run the full loop; keeps the best-validation-accuracy parameters.

    Ties on validation accuracy resolve to the earlier epoch.
    """
    if not splits.train or not splits.validate:
        raise ValidationError("train and validate splits must be non-empty")
    params = build_model(model_config)
    state = OptimizerState()
    opt = OptimizerConfig(kind=config.optimizer, learning_rate=config.learning_rate)
    metrics: list[MetricsRecord] = []
    best_params = {k: v.copy() for k, v in params.items()}
    best_epoch = -1
    best_acc = -1.0
    h, w = model_config.input_height, model_config.input_width

    for epoch in range(config.epochs):
        loss_sum = 0.0
        hits = 0
        seen = 0
        batches = batch_iter(
            splits.train, config.batch_size, config.seed, epoch, h, w, config.augment
        )
        for batch, targets in batches:
            probs, cache = forward(params, batch, model_config)
            loss, loss_grad = bce_loss(probs, targets)
            grads = backward(params, cache, loss_grad)
            optimizer_step(params, grads, state, opt)
            n = len(targets)
            loss_sum += loss * n
            seen += n
            hits += sum(
                1 for p, t in zip(probs, targets) if classify(float(p)) is KernelLabel.decode(t)
            )
        val = evaluate(params, splits.validate, model_config, config.batch_size)
        record = MetricsRecord(
            epoch=epoch,
            train_loss=round(loss_sum / seen, 6),
            train_accuracy=round(hits / seen, 6),
            val_loss=round(val.loss, 6),
            val_accuracy=round(val.accuracy, 6),
        )
        metrics.append(record)
        if record.val_accuracy > best_acc:
            best_acc = record.val_accuracy
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
    return TrainResult(params, best_params, best_epoch, metrics)


# ---------------------------------------------------------------------------
# Checkpoint file format
#
#   magic "GSCK" | version u16 | header_len u32 | header JSON (UTF-8)
#   per parameter: byte_len u32 | little-endian float64 data
#   crc32 u32 over all preceding bytes
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: dict[str, np.ndarray]
    final_metrics: MetricsRecord | None
    seed: int
    version: int = CHECKPOINT_VERSION


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    header = {
        "model_config": checkpoint.model_config.to_dict(),
        "final_metrics": checkpoint.final_metrics.to_dict() if checkpoint.final_metrics else None,
        "seed": checkpoint.seed,
        "params": [[name, list(arr.shape)] for name, arr in checkpoint.params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<H", checkpoint.version)
    blob += struct.pack("<I", len(header_bytes))
    blob += header_bytes
    for arr in checkpoint.params.values():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        blob += struct.pack("<I", len(raw))
        blob += raw
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < 14 or data[:4] != CHECKPOINT_MAGIC:
        raise IntegrityError(f"{path} is not a checkpoint file (bad magic)")
    version = struct.unpack_from("<H", data, 4)[0]
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"{path} has checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"
        )
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise IntegrityError(f"{path} failed its checksum (corrupt or truncated)")
    offset = 6
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path} has an unreadable header: {exc}") from exc
    offset += header_len
    params: dict[str, np.ndarray] = {}
    for name, shape in header["params"]:
        if offset + 4 > len(data) - 4:
            raise IntegrityError(f"{path} is truncated inside parameter {name!r}")
        (nbytes,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + nbytes > len(data) - 4:
            raise IntegrityError(f"{path} is truncated inside parameter {name!r}")
        arr = np.frombuffer(data[offset : offset + nbytes], dtype="<f8").astype(np.float64)
        params[name] = arr.reshape(shape)
        offset += nbytes
    if offset != len(data) - 4:
        raise IntegrityError(f"{path} has {len(data) - 4 - offset} unexpected trailing bytes")
    metrics = None
    if header["final_metrics"] is not None:
        metrics = MetricsRecord(**header["final_metrics"])
    return Checkpoint(
        model_config=ModelConfig.from_dict(header["model_config"]),
        params=params,
        final_metrics=metrics,
        seed=header["seed"],
        version=version,
    )


# ---------------------------------------------------------------------------
# Metrics CSV
# ---------------------------------------------------------------------------

def export_metrics(records: list[MetricsRecord], path: str | Path) -> None:
    """Write the per-epoch curve as CSV with fixed 6-decimal formatting."""
    if not records:
        raise ValidationError("cannot export an empty metrics list")
    lines = [METRICS_HEADER]
    for r in records:
        lines.append(
            f"{r.epoch},{r.train_loss:.6f},{r.train_accuracy:.6f},{r.val_loss:.6f},{r.val_accuracy:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def parse_metrics(path: str | Path) -> list[MetricsRecord]:
    """Read back a metrics CSV written by export_metrics."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValidationError(f"{path} is not a metrics CSV (bad header)")
    records = []
    for line in lines[1:]:
        epoch, tl, ta, vl, va = line.split(",")
        records.append(MetricsRecord(int(epoch), float(tl), float(ta), float(vl), float(va)))
    return records
