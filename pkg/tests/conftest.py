from __future__ import annotations

import numpy as np
import pytest

from neuraCrypt.discrete import DatasetPrior, DiscreteInstance, EncoderFamily, validate_permutation
from neuraCrypt.encoder import ArchConfig, EncoderKey
from neuraCrypt.instance_io import load_instance

TOY_FAMILY = (
    (2, 1, 5, 4, 3),
    (2, 1, 3, 5, 4),
    (1, 2, 3, 5, 4),
    (4, 3, 1, 2, 5),
    (3, 4, 2, 1, 5),
    (5, 2, 4, 3, 1),
)

SIXTEEN_T = (12, 2, 11, 4, 6, 8, 16, 15, 13, 7, 9, 5, 3, 14, 1, 10)

# a seed above 2**32 so that the secrecy audit scans for it
LARGE_SEED = 0x1234_5678_9ABC_DEF0


@pytest.fixture
def sixteen_samples():
    samples = tuple(range(1, 17))
    positives = {1, 2, 5, 6}
    labels = tuple("+" if x in positives else "-" for x in samples)
    return DiscreteInstance(samples, labels, ("+", "-"))


@pytest.fixture
def toy_instance():
    return DiscreteInstance((1, 2, 3, 4, 5), ("+", "+", "-", "-", "-"), ("+", "-"))


@pytest.fixture
def toy_family(toy_instance):
    return EncoderFamily.uniform(
        validate_permutation(toy_instance, image) for image in TOY_FAMILY
    )


@pytest.fixture
def toy_prior(toy_instance):
    return DatasetPrior.uniform_subsets(toy_instance, 3)


@pytest.fixture
def toy_spec():
    return load_instance("six_encoders.json")


@pytest.fixture
def small_arch():
    return ArchConfig(
        image_height=8, image_width=8, channels_in=1, patch_size=2, depth=4, hidden_dim=6
    )


@pytest.fixture
def small_key(small_arch):
    return EncoderKey(LARGE_SEED, small_arch)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def uniform_images(rng):
    def make(count: int, height: int = 8, width: int = 8, channels: int = 1) -> list:
        return [
            rng.uniform(0.0, 1.0, size=(channels, height, width)).astype(np.float32)
            for _ in range(count)
        ]

    return make
