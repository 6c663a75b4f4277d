import numpy as np
import pytest

from cornspect.data import DatasetSplit
from cornspect.model import KernelLabel, ModelConfig
from cornspect.synth import generate_kernel_image

# toy shape used by the gradient checks and fast training tests
TOY_CONFIG = ModelConfig(
    input_height=16, input_width=16, conv_filters=(4, 8, 8), dense_units=16, seed=11
)


def make_images(n_normal, n_abnormal, size, seed_base=0):
    images = []
    for i in range(n_normal):
        images.append(
            generate_kernel_image(
                KernelLabel.NORMAL, [seed_base, 0, i], size, f"b{seed_base}_normal_{i:04d}.png"
            )
        )
    for i in range(n_abnormal):
        images.append(
            generate_kernel_image(
                KernelLabel.ABNORMAL, [seed_base, 1, i], size, f"b{seed_base}_abnormal_{i:04d}.png"
            )
        )
    return images


@pytest.fixture(scope="session")
def tiny_splits():
    """Small balanced splits at 32x32 for fast training tests."""
    return DatasetSplit(
        train=make_images(8, 8, 32, seed_base=1),
        validate=make_images(4, 4, 32, seed_base=2),
        test=make_images(3, 3, 32, seed_base=3),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
