"""cornspect: corn-kernel quality inspection toolkit.

Synthetic labeled-kernel image generation, a from-scratch convolutional
binary classifier (probability <= 0.5 means Abnormal), and a multi-seed
scene inspector, tied together by the ``cornspect`` CLI.
"""

from .data import AugmentationConfig, DatasetSplit, LabeledImage, load_dataset, preprocess
from .detect import BoundingBox, InspectionReport, inspect_scene, segment_foreground
from .model import KernelLabel, ModelConfig, accuracy, build_model, classify, forward
from .synth import SceneSpec, generate_dataset, generate_kernel_image, generate_scene
from .train import (
    Checkpoint,
    MetricsRecord,
    TrainConfig,
    TrainResult,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "BoundingBox",
    "Checkpoint",
    "DatasetSplit",
    "InspectionReport",
    "KernelLabel",
    "LabeledImage",
    "MetricsRecord",
    "ModelConfig",
    "SceneSpec",
    "TrainConfig",
    "TrainResult",
    "accuracy",
    "build_model",
    "classify",
    "evaluate",
    "forward",
    "generate_dataset",
    "generate_kernel_image",
    "generate_scene",
    "inspect_scene",
    "load_checkpoint",
    "load_dataset",
    "preprocess",
    "save_checkpoint",
    "segment_foreground",
    "train",
]
