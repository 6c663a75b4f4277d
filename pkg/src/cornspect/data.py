"""Dataset ingestion, preprocessing, and label-preserving augmentation.

Directory contract: root/{train,validate,test}/{normal,abnormal}/*.png|jpg.
Images decode to 8-bit RGB rasters; preprocessing resizes bilinearly and
scales channels to [0, 1] in channel-first layout (no gamma handling).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DatasetLayoutError, IngestionError, ValidationError
from .model import KernelLabel

SPLIT_NAMES = ("train", "validate", "test")
CLASS_DIRS = {"normal": KernelLabel.NORMAL, "abnormal": KernelLabel.ABNORMAL}
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass
class LabeledImage:
    """A decoded raster with its file name and ground-truth label."""

    identifier: str
    pixels: np.ndarray  # (H, W, 3) uint8
    label: KernelLabel


@dataclass
class DatasetSplit:
    """The train/validate/test partition with per-class counts."""

    train: list[LabeledImage] = field(default_factory=list)
    validate: list[LabeledImage] = field(default_factory=list)
    test: list[LabeledImage] = field(default_factory=list)

    def split(self, name: str) -> list[LabeledImage]:
        if name not in SPLIT_NAMES:
            raise ValidationError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, name)

    def counts(self) -> dict[str, dict[str, int]]:
        out = {}
        for name in SPLIT_NAMES:
            images = getattr(self, name)
            out[name] = {
                "normal": sum(1 for im in images if im.label is KernelLabel.NORMAL),
                "abnormal": sum(1 for im in images if im.label is KernelLabel.ABNORMAL),
            }
        return out


@dataclass(frozen=True)
class AugmentationConfig:
    """Label-preserving transforms applied online to training images."""

    horizontal_flip: bool = False
    vertical_flip: bool = False
    rotate90: bool = False
    brightness: float = 0.0  # max +/- fraction of jitter
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.brightness < 1.0:
            raise ValidationError(f"brightness fraction must be in [0, 1), got {self.brightness}")

    @property
    def enabled(self) -> bool:
        return self.horizontal_flip or self.vertical_flip or self.rotate90 or self.brightness > 0


def decode_image(path: Path) -> np.ndarray:
    """Decode a PNG/JPEG file to an (H, W, 3) uint8 array."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise  # missing files are I/O problems, not ingestion problems
    except (UnidentifiedImageError, OSError) as exc:
        raise IngestionError(f"cannot decode image file {path}: {exc}") from exc


def load_dataset(root: str | Path) -> DatasetSplit:
    """Load the full directory tree, lexicographically ordered by file name."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetLayoutError(f"dataset root {root} is not a directory")
    splits = DatasetSplit()
    seen: dict[str, str] = {}  # identifier -> split; identifiers are globally unique
    for split_name in SPLIT_NAMES:
        for class_dir, label in CLASS_DIRS.items():
            directory = root / split_name / class_dir
            if not directory.is_dir():
                raise DatasetLayoutError(f"missing dataset directory {directory}")
            files = sorted(
                p for p in directory.iterdir()
                if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
            )
            if not files:
                raise DatasetLayoutError(f"no images found under {directory}")
            for path in files:
                if path.name in seen:
                    raise DatasetLayoutError(
                        f"duplicate identifier {path.name!r} in splits "
                        f"{seen[path.name]!r} and {split_name!r}"
                    )
                seen[path.name] = split_name
                splits.split(split_name).append(
                    LabeledImage(path.name, decode_image(path), label)
                )
    return splits


def resize_bilinear(pixels: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W, C) array to (target_h, target_w, C), float64.

    Uses half-pixel centers; the lerp form v0 + w*(v1 - v0) keeps constant
    images exactly constant.
    """
    src = np.asarray(pixels, dtype=np.float64)
    h, w = src.shape[:2]
    if h == target_h and w == target_w:
        return src.copy()

    def axis_coords(n_src, n_dst):
        pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, pos - lo

    y0, y1, wy = axis_coords(h, target_h)
    x0, x1, wx = axis_coords(w, target_w)
    rows0 = src[y0]
    rows1 = src[y1]
    interp_y = rows0 + wy[:, None, None] * (rows1 - rows0)
    cols0 = interp_y[:, x0]
    cols1 = interp_y[:, x1]
    return cols0 + wx[None, :, None] * (cols1 - cols0)


def preprocess(image: LabeledImage, target_h: int, target_w: int) -> np.ndarray:
    """Resize and scale an image to a (3, target_h, target_w) tensor in [0, 1]."""
    if target_h < 1 or target_w < 1:
        raise ValidationError(f"target size must be positive, got {target_h}x{target_w}")
    px = image.pixels
    if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] == 0 or px.shape[1] == 0:
        raise ValidationError(f"image {image.identifier!r} has invalid raster shape {px.shape}")
    resized = resize_bilinear(px, target_h, target_w)
    return np.ascontiguousarray(resized.transpose(2, 0, 1) / 255.0)


def hflip(pixels: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(pixels[:, ::-1])


def vflip(pixels: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(pixels[::-1])


def rot90k(pixels: np.ndarray, k: int) -> np.ndarray:
    return np.ascontiguousarray(np.rot90(pixels, k % 4))


def adjust_brightness(pixels: np.ndarray, factor: float) -> np.ndarray:
    """Scale channels by factor, rounding to nearest and clamping to [0, 255]."""
    scaled = np.rint(pixels.astype(np.float64) * factor)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def augment(image: LabeledImage, config: AugmentationConfig, draw_index: int) -> LabeledImage:
    """Randomly transformed copy; a pure function of (config.seed, draw_index)."""
    if not config.enabled:
        return LabeledImage(image.identifier, image.pixels.copy(), image.label)
    rng = np.random.default_rng([config.seed, draw_index])
    px = image.pixels
    if config.horizontal_flip and rng.random() < 0.5:
        px = hflip(px)
    if config.vertical_flip and rng.random() < 0.5:
        px = vflip(px)
    if config.rotate90:
        px = rot90k(px, int(rng.integers(0, 4)))
    if config.brightness > 0:
        factor = 1.0 + rng.uniform(-config.brightness, config.brightness)
        px = adjust_brightness(px, factor)
    return LabeledImage(image.identifier, np.ascontiguousarray(px), image.label)


def batch_iter(
    images: list[LabeledImage],
    batch_size: int,
    shuffle_seed: int,
    epoch: int,
    target_h: int,
    target_w: int,
    augment_config: AugmentationConfig | None = None,
):
    """Yield (batch (N,3,H,W), targets (N,)) covering every image exactly once.

    The permutation is a pure function of (shuffle_seed, epoch); the last
    batch may be short.
    """
    if batch_size < 1:
        raise ValidationError(f"batch size must be >= 1, got {batch_size}")
    if not images:
        raise ValidationError("cannot iterate over an empty split")
    order = np.random.default_rng([shuffle_seed, epoch]).permutation(len(images))
    n = len(images)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        batch_images = []
        for i in idx:
            img = images[int(i)]
            if augment_config is not None and augment_config.enabled:
                img = augment(img, augment_config, epoch * n + int(i))
            batch_images.append(img)
        batch = np.stack([preprocess(img, target_h, target_w) for img in batch_images])
        targets = np.array([img.label.encode() for img in batch_images])
        yield batch, targets
