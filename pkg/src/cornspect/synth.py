"""Procedural corn-kernel renderer and dataset/scene generation.

Kernels are hard-edged ellipses (no anti-aliasing) so a fixed pixel
classifier can split every pixel into background, kernel palette
(yellow-orange body or white tip/gloss), or defect. Normal kernels
contain only palette pixels; abnormal ones carry at least one defect
(crack, missing chunk, wrinkle texture, or a green/black blotch)
covering >= 2% of the kernel area. That guarantees the classification
task is solvable, so a model that fails indicts the model, not the data.

Everything is a pure function of (inputs, seed); generated PNG bytes are
reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .data import LabeledImage
from .detect import BoundingBox
from .errors import CapacityError, ValidationError
from .model import KernelLabel

BACKGROUND_RGB = (30, 30, 30)  # uniform dark backdrop, luminance 30/255
MIN_DEFECT_FRACTION = 0.02
_PLACEMENT_ATTEMPTS = 10_000
_PATCH_PAD = 2

TABLE1_COUNTS = {"train": (500, 500), "validate": (300, 300), "test": (100, 100)}

DEFECT_KINDS = ("crack", "chunk", "wrinkle", "blotch")


# ---------------------------------------------------------------------------
# Fixed pixel-statistics discriminator
# ---------------------------------------------------------------------------

def kernel_palette_mask(pixels: np.ndarray) -> np.ndarray:
    """True where a pixel belongs to the healthy-kernel palette."""
    r = pixels[..., 0].astype(np.int64)
    g = pixels[..., 1].astype(np.int64)
    b = pixels[..., 2].astype(np.int64)
    yellow_orange = (r >= 180) & (g >= 130) & (b <= 120)
    white = pixels.min(axis=-1) >= 200
    return yellow_orange | white


def kernel_region_mask(pixels: np.ndarray) -> np.ndarray:
    """Row-span fill of all non-background pixels.

    Bridges interior defects and edge notches so missing-chunk gaps count
    as part of the kernel region.
    """
    fg = np.any(pixels != np.asarray(BACKGROUND_RGB, dtype=pixels.dtype), axis=-1)
    region = np.zeros_like(fg)
    cols = np.arange(fg.shape[1])
    for i in np.flatnonzero(fg.any(axis=1)):
        row_cols = cols[fg[i]]
        region[i, row_cols[0] : row_cols[-1] + 1] = True
    return region


def defect_fraction(pixels: np.ndarray) -> float:
    """Fraction of kernel-region pixels that fall outside the palette."""
    region = kernel_region_mask(pixels)
    total = int(region.sum())
    if total == 0:
        return 0.0
    return float((region & ~kernel_palette_mask(pixels)).sum()) / total


# ---------------------------------------------------------------------------
# Appearance sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DefectSpec:
    kind: str
    angle: float
    center: tuple[float, float]  # unit-ellipse coordinates
    size: float
    color: tuple[float, float, float]


@dataclass(frozen=True)
class KernelAppearance:
    """Drawn geometry and colors for one kernel; defects empty iff Normal."""

    rx: float
    ry: float
    body_rgb: tuple[float, float, float]
    tip_rgb: tuple[float, float, float]
    gloss_rgb: tuple[float, float, float]
    tip_angle: float
    gloss_angle: float
    defects: tuple[DefectSpec, ...]


def _sample_defect(rng: np.random.Generator, kind: str, defect_scale: float) -> DefectSpec:
    # default draw ranges are the "easy" difficulty: defects stay clearly
    # visible after a resize to desk-scale training resolution
    angle = rng.uniform(0.0, 2.0 * np.pi)
    if kind == "crack":
        center = (rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15))
        size = rng.uniform(0.07, 0.105)  # half-thickness, unit coords
        color = (34.0, 27.0, 21.0)
    elif kind == "chunk":
        center = (np.cos(angle), np.sin(angle))  # on the boundary
        size = rng.uniform(0.40, 0.52)  # bite radius
        color = (64.0, 46.0, 30.0)  # torn tissue rim around the gap
    elif kind == "wrinkle":
        center = (rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12))
        size = rng.uniform(0.05, 0.068)
        color = (96.0, 70.0, 46.0)
    else:  # blotch
        rad = rng.uniform(0.0, 0.4)
        center = (rad * np.cos(angle), rad * np.sin(angle))
        size = rng.uniform(0.30, 0.42)
        color = (62.0, 112.0, 48.0) if rng.random() < 0.5 else (40.0, 36.0, 30.0)
    shade = rng.uniform(0.9, 1.1)
    color = tuple(c * shade for c in color) if kind != "chunk" else color
    return DefectSpec(
        kind, float(angle), (float(center[0]), float(center[1])), float(size * defect_scale), color
    )


def sample_appearance(
    rng: np.random.Generator,
    label: KernelLabel,
    rx: float,
    ry: float,
    defect_scale: float = 1.0,
) -> KernelAppearance:
    body = (rng.uniform(230.0, 248.0), rng.uniform(170.0, 202.0), rng.uniform(56.0, 78.0))
    w0 = rng.uniform(234.0, 246.0)
    tip = (w0, 0.985 * w0, 0.93 * w0)
    gloss = (250.0, 250.0, 242.0)
    tip_angle = rng.uniform(0.0, 2.0 * np.pi)
    gloss_angle = tip_angle + np.pi + rng.uniform(-0.9, 0.9)
    defects: tuple[DefectSpec, ...] = ()
    if label is KernelLabel.ABNORMAL:
        n_defects = 1 + int(rng.random() < 0.35)
        kinds = rng.choice(len(DEFECT_KINDS), size=n_defects, replace=False)
        defects = tuple(_sample_defect(rng, DEFECT_KINDS[int(k)], defect_scale) for k in kinds)
    return KernelAppearance(rx, ry, body, tip, gloss, tip_angle, gloss_angle, defects)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _segment_band(u, v, p0, p1, half_thickness):
    """Pixels within half_thickness of the segment p0-p1 (unit coordinates)."""
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    length2 = dx * dx + dy * dy
    t = np.clip(((u - p0[0]) * dx + (v - p0[1]) * dy) / length2, 0.0, 1.0)
    du = u - (p0[0] + t * dx)
    dv = v - (p0[1] + t * dy)
    return du * du + dv * dv <= half_thickness * half_thickness


def _defect_masks(app: KernelAppearance, u, v, ellipse, scale: float):
    """Paint masks for each defect at the given enlargement scale.

    Returns (list of (mask, color) to paint, chunk-removal mask).
    """
    paint = []
    chunk = np.zeros_like(ellipse)
    interior = u * u + v * v <= 0.92
    for d in app.defects:
        size = min(d.size * scale, 0.55 if d.kind != "chunk" else 0.6)
        ca, sa = np.cos(d.angle), np.sin(d.angle)
        if d.kind == "crack":
            p0 = (d.center[0] - 0.55 * ca, d.center[1] - 0.55 * sa)
            p1 = (d.center[0] + 0.55 * ca, d.center[1] + 0.55 * sa)
            mask = _segment_band(u, v, p0, p1, size) & interior & ellipse
            paint.append((mask, d.color))
        elif d.kind == "chunk":
            du = u - d.center[0]
            dv = v - d.center[1]
            dist2 = du * du + dv * dv
            bite = (dist2 <= size * size) & ellipse
            rim = size + 0.75 * size
            # the gap itself may hide at a row extreme, but the torn rim is
            # painted foreground and always registers with the discriminator
            paint.append(((dist2 <= rim * rim) & ~bite & ellipse, d.color))
            chunk |= bite
        elif d.kind == "wrinkle":
            mask = np.zeros_like(ellipse)
            for offset in (-0.3, 0.0, 0.3):
                ox = d.center[0] - offset * sa
                oy = d.center[1] + offset * ca
                p0 = (ox - 0.4 * ca, oy - 0.4 * sa)
                p1 = (ox + 0.4 * ca, oy + 0.4 * sa)
                mask |= _segment_band(u, v, p0, p1, size)
            paint.append((mask & interior & ellipse, d.color))
        else:  # blotch
            du = u - d.center[0]
            dv = v - d.center[1]
            paint.append(((du * du + dv * dv <= size * size) & ellipse, d.color))
    return paint, chunk


def render_kernel_patch(rng: np.random.Generator, app: KernelAppearance):
    """Render one kernel into a tight background-filled patch.

    Returns (patch (h,w,3) uint8, mask (h,w) bool). For abnormal kernels,
    defect sizes are enlarged (deterministically) until the fixed
    discriminator sees at least the minimum defect fraction.
    """
    half_h = int(np.ceil(app.ry)) + _PATCH_PAD
    half_w = int(np.ceil(app.rx)) + _PATCH_PAD
    h, w = 2 * half_h + 1, 2 * half_w + 1
    ys = np.arange(h, dtype=np.float64)[:, None] - half_h
    xs = np.arange(w, dtype=np.float64)[None, :] - half_w
    u = np.broadcast_to(xs / app.rx, (h, w))
    v = np.broadcast_to(ys / app.ry, (h, w))
    norm2 = u * u + v * v
    ellipse = norm2 <= 1.0

    # all per-pixel randomness drawn once so retries stay deterministic
    noise = rng.uniform(0.98, 1.02, size=(h, w))

    base = np.empty((h, w, 3), dtype=np.float64)
    base[:] = BACKGROUND_RGB
    shade = 1.0 - 0.16 * np.clip(norm2, 0.0, 1.0)
    for c, value in enumerate(app.body_rgb):
        base[..., c] = np.where(ellipse, value * shade, base[..., c])

    def oval(angle, dist, fr_x, fr_y):
        cx_, cy_ = dist * np.cos(angle), dist * np.sin(angle)
        return ((u - cx_) / fr_x) ** 2 + ((v - cy_) / fr_y) ** 2 <= 1.0

    tip = oval(app.tip_angle, 0.62, 0.40, 0.40) & ellipse
    base[tip] = app.tip_rgb
    gloss = oval(app.gloss_angle, 0.38, 0.20, 0.20) & ellipse
    base[gloss] = app.gloss_rgb
    base[ellipse] *= noise[ellipse, None]

    scale = 1.0
    for _ in range(8):
        patch = base.copy()
        mask = ellipse.copy()
        paint, chunk = _defect_masks(app, u, v, ellipse, scale)
        for dmask, color in paint:
            patch[dmask] = color
        if chunk.any():
            patch[chunk] = BACKGROUND_RGB
            mask &= ~chunk
        patch = np.clip(np.rint(patch), 0, 255).astype(np.uint8)
        patch[~mask] = BACKGROUND_RGB
        if not app.defects or defect_fraction(patch) >= MIN_DEFECT_FRACTION * 1.1:
            return patch, mask
        scale *= 1.35
    return patch, mask  # pragma: no cover - sizes >= 32 converge well before this


def generate_kernel_image(
    label: KernelLabel,
    rng_seed,
    size: int,
    identifier: str | None = None,
    defect_scale: float = 1.0,
) -> LabeledImage:
    """Render a single labeled kernel image of the given square size."""
    if size < 32:
        raise ValidationError(f"kernel image size must be >= 32, got {size}")
    rng = np.random.default_rng(rng_seed)
    rx = rng.uniform(0.20, 0.40) * size
    ry = rng.uniform(0.20, 0.40) * size
    app = sample_appearance(rng, label, rx, ry, defect_scale)
    jitter = 0.05 * size
    half_h = int(np.ceil(ry)) + _PATCH_PAD
    half_w = int(np.ceil(rx)) + _PATCH_PAD
    max_dy = max(0.0, size / 2 - half_h - 1)
    max_dx = max(0.0, size / 2 - half_w - 1)
    cy = int(round(size / 2 + np.clip(rng.uniform(-jitter, jitter), -max_dy, max_dy)))
    cx = int(round(size / 2 + np.clip(rng.uniform(-jitter, jitter), -max_dx, max_dx)))

    patch, mask = render_kernel_patch(rng, app)
    canvas = np.empty((size, size, 3), dtype=np.uint8)
    canvas[:] = BACKGROUND_RGB
    y0, x0 = cy - half_h, cx - half_w
    window = canvas[y0 : y0 + patch.shape[0], x0 : x0 + patch.shape[1]]
    window[mask] = patch[mask]
    if identifier is None:
        identifier = f"{label.value.lower()}_{np.random.SeedSequence(rng_seed).entropy}.png"
    return LabeledImage(identifier, canvas, label)


# ---------------------------------------------------------------------------
# Dataset tree
# ---------------------------------------------------------------------------

def generate_dataset(
    counts: dict[str, tuple[int, int]],
    rng_seed: int,
    out_dir: str | Path,
    size: int = 64,
    defect_scale: float = 1.0,
) -> dict[str, dict[str, int]]:
    """Write a dataset tree (plus manifest.jsonl) matching the loader layout.

    counts maps split name to (normal, abnormal) image counts; every file's
    bytes depend only on (rng_seed, split, class, index).
    """
    unknown = set(counts) - {"train", "validate", "test"}
    if unknown:
        raise ValidationError(f"unknown split names in counts: {sorted(unknown)}")
    out_dir = Path(out_dir)
    written: dict[str, dict[str, int]] = {}
    manifest_rows = []
    for split_idx, split_name in enumerate(("train", "validate", "test")):
        n_normal, n_abnormal = counts.get(split_name, (0, 0))
        written[split_name] = {"normal": 0, "abnormal": 0}
        for class_idx, (class_dir, label, n_images) in enumerate(
            (("normal", KernelLabel.NORMAL, n_normal), ("abnormal", KernelLabel.ABNORMAL, n_abnormal))
        ):
            directory = out_dir / split_name / class_dir
            directory.mkdir(parents=True, exist_ok=True)
            for i in range(n_images):
                name = f"{split_name}_{class_dir}_{i:04d}.png"
                image = generate_kernel_image(
                    label,
                    [rng_seed, split_idx, class_idx, i],
                    size,
                    identifier=name,
                    defect_scale=defect_scale,
                )
                Image.fromarray(image.pixels).save(directory / name)
                manifest_rows.append(
                    {"identifier": name, "split": split_name, "label": label.value}
                )
                written[split_name][class_dir] += 1
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for row in manifest_rows:
            fh.write(json.dumps(row) + "\n")
    return written


# ---------------------------------------------------------------------------
# Multi-seed scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneSpec:
    """Canvas layout for a multi-kernel scene."""

    canvas_height: int = 640
    canvas_width: int = 640
    labels: tuple[KernelLabel, ...] = ()
    kernel_radius: tuple[float, float] = (16.0, 26.0)
    margin: int = 4
    defect_scale: float = 1.0

    def __post_init__(self):
        if self.margin < 0 or self.kernel_radius[0] < 8 or self.kernel_radius[1] < self.kernel_radius[0]:
            raise ValidationError(f"invalid scene spec: {self}")
        needed = 2 * (self.kernel_radius[1] + _PATCH_PAD + 1)
        if self.canvas_height < needed or self.canvas_width < needed:
            raise ValidationError(
                f"canvas {self.canvas_height}x{self.canvas_width} too small for "
                f"kernels of radius {self.kernel_radius[1]}"
            )

    @staticmethod
    def for_counts(n_normal: int, n_abnormal: int, **kwargs) -> "SceneSpec":
        labels = (KernelLabel.NORMAL,) * n_normal + (KernelLabel.ABNORMAL,) * n_abnormal
        return SceneSpec(labels=labels, **kwargs)


@dataclass(frozen=True)
class SeedTruth:
    """Ground truth for one placed kernel."""

    box: BoundingBox
    label: KernelLabel
    mask_area: int


def generate_scene(spec: SceneSpec, rng_seed: int) -> tuple[np.ndarray, list[SeedTruth]]:
    """Render a scene; returns (canvas (H,W,3) uint8, per-kernel ground truth).

    Placement is rejection-sampled with inflated-box separation of at least
    spec.margin pixels, bounded at 10,000 attempts per scene.
    """
    canvas = np.empty((spec.canvas_height, spec.canvas_width, 3), dtype=np.uint8)
    canvas[:] = BACKGROUND_RGB
    placer = np.random.default_rng([rng_seed])
    placed: list[tuple[int, int, int, int]] = []  # y0, x0, y1, x1 (exclusive)
    placements = []
    attempts = 0
    for k in range(len(spec.labels)):
        while True:
            attempts += 1
            if attempts > _PLACEMENT_ATTEMPTS:
                raise CapacityError(
                    f"could not place kernel {k + 1}/{len(spec.labels)} after "
                    f"{_PLACEMENT_ATTEMPTS} attempts; use a larger canvas"
                )
            rx = placer.uniform(*spec.kernel_radius)
            ry = placer.uniform(*spec.kernel_radius)
            half_h = int(np.ceil(ry)) + _PATCH_PAD
            half_w = int(np.ceil(rx)) + _PATCH_PAD
            cy = int(placer.integers(half_h, spec.canvas_height - half_h))
            cx = int(placer.integers(half_w, spec.canvas_width - half_w))
            y0, y1 = cy - half_h, cy + half_h + 1
            x0, x1 = cx - half_w, cx + half_w + 1
            m = spec.margin
            if all(
                y1 + m <= py0 or py1 + m <= y0 or x1 + m <= px0 or px1 + m <= x0
                for py0, px0, py1, px1 in placed
            ):
                placed.append((y0, x0, y1, x1))
                placements.append((cy, cx, rx, ry))
                break

    truths: list[SeedTruth] = []
    for k, (label, (cy, cx, rx, ry)) in enumerate(zip(spec.labels, placements)):
        rng = np.random.default_rng([rng_seed, k])
        app = sample_appearance(rng, label, rx, ry, spec.defect_scale)
        patch, mask = render_kernel_patch(rng, app)
        y0 = cy - (patch.shape[0] - 1) // 2
        x0 = cx - (patch.shape[1] - 1) // 2
        window = canvas[y0 : y0 + patch.shape[0], x0 : x0 + patch.shape[1]]
        window[mask] = patch[mask]
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        box = BoundingBox(
            x=x0 + int(cols[0]),
            y=y0 + int(rows[0]),
            width=int(cols[-1] - cols[0] + 1),
            height=int(rows[-1] - rows[0] + 1),
        )
        truths.append(SeedTruth(box, label, int(mask.sum())))
    return canvas, truths


def write_scene(path: str | Path, canvas: np.ndarray, truths: list[SeedTruth]) -> None:
    """Save a scene PNG next to a JSONL manifest of its ground truth."""
    path = Path(path)
    Image.fromarray(canvas).save(path)
    with open(path.with_suffix(".jsonl"), "w", encoding="utf-8") as fh:
        for t in truths:
            fh.write(
                json.dumps(
                    {
                        "label": t.label.value,
                        "box": [t.box.x, t.box.y, t.box.width, t.box.height],
                        "mask_area": t.mask_area,
                    }
                )
                + "\n"
            )
