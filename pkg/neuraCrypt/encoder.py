from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from cachetools import LRUCache, cached
from pathos.pools import ProcessPool

from neuraCrypt.bundled_data import format_version as FORMAT_VERSION
from neuraCrypt.config import (
    CHANNELS_IN,
    DEPTH,
    HIDDEN_DIM,
    IMAGE_HEIGHT,
    IMAGE_WIDTH,
    PATCH_SIZE,
    WORKERS,
)
from neuraCrypt.errors import InvalidArch, NonFiniteOutput, PixelRangeError, ShapeMismatch
from neuraCrypt.prng import MASK64, GaussianStream, derive_nonce, fisher_yates

logger = logging.getLogger("neuraCrypt.Encoder")

NORM_EPSILON = 1e-5

WEIGHT_CACHE = LRUCache(maxsize=4)


@dataclass(frozen=True)
class ArchConfig:
    image_height: int = IMAGE_HEIGHT
    image_width: int = IMAGE_WIDTH
    channels_in: int = CHANNELS_IN
    patch_size: int = PATCH_SIZE
    depth: int = DEPTH
    hidden_dim: int = HIDDEN_DIM

    def __post_init__(self):
        for name in (
            "image_height",
            "image_width",
            "channels_in",
            "patch_size",
            "depth",
            "hidden_dim",
        ):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidArch(f"{name} must be an integer, got {value!r}")
            if not 1 <= value <= 0xFFFFFFFF:
                raise InvalidArch(f"{name}={value} is outside 1..2**32-1")
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            raise InvalidArch(
                f"Patch size {self.patch_size} does not divide "
                f"{self.image_height}x{self.image_width}"
            )
        if self.depth < 2:
            raise InvalidArch(f"Depth must be at least 2, got {self.depth}")

    @property
    def grid(self) -> tuple[int, int]:
        return self.image_height // self.patch_size, self.image_width // self.patch_size

    @property
    def num_patches(self) -> int:
        rows, cols = self.grid
        return rows * cols

    @property
    def patch_dim(self) -> int:
        return self.channels_in * self.patch_size * self.patch_size

    @property
    def blocks(self) -> int:
        return self.depth - 2

    @property
    def positional_dim(self) -> int:
        return self.hidden_dim if self.blocks else self.patch_dim

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.channels_in, self.image_height, self.image_width

    def conv_shapes(self) -> list[tuple[int, int]]:
        """(out, in) of every convolution in layer order; the last one is the final conv."""
        return [(self.hidden_dim, self.patch_dim)] + [
            (self.hidden_dim, self.hidden_dim)
        ] * self.blocks

    def parameter_count(self) -> int:
        convs = sum(o * i for o, i in self.conv_shapes())
        norms = 2 * self.hidden_dim * self.blocks
        return convs + norms + self.num_patches * self.positional_dim

    def to_dict(self) -> dict:
        return {
            "image_height": self.image_height,
            "image_width": self.image_width,
            "channels_in": self.channels_in,
            "patch_size": self.patch_size,
            "depth": self.depth,
            "hidden_dim": self.hidden_dim,
        }


@dataclass(frozen=True)
class EncoderKey:
    """The private key: every weight is regenerated from ``seed``."""

    seed: int
    arch: ArchConfig
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise InvalidArch(f"Seed must be an unsigned 64-bit integer, got {self.seed}")

    def __repr__(self) -> str:
        return (
            f"EncoderKey(seed=<hidden>, arch={self.arch!r}, "
            f"format_version={self.format_version})"
        )


@dataclass(frozen=True, repr=False)
class WeightStack:
    arch: ArchConfig
    convs: tuple
    norm_scales: tuple
    norm_shifts: tuple
    positional: np.ndarray

    @property
    def parameter_count(self) -> int:
        arrays = [*self.convs, *self.norm_scales, *self.norm_shifts, self.positional]
        return int(sum(a.size for a in arrays))

    def __repr__(self) -> str:
        return f"WeightStack(arch={self.arch!r}, parameters={self.parameter_count})"


def _he(stream: GaussianStream, shape: tuple[int, int]) -> np.ndarray:
    out_dim, in_dim = shape
    draws = stream.take(out_dim * in_dim).reshape(shape)
    return (draws * np.sqrt(2.0 / in_dim)).astype(np.float32)


@cached(cache=WEIGHT_CACHE, key=lambda key: (key.seed, key.arch, key.format_version))
def sample_encoder(key: EncoderKey) -> WeightStack:
    """Materialize the weights of ``key``.

    Stream order: every convolution kernel except the final one in layer order, the
    normalization (scale, shift) pairs in layer order, the positional embeddings, then
    the final convolution kernel.
    """
    arch = key.arch
    stream = GaussianStream(key.seed)
    shapes = arch.conv_shapes()
    convs = [_he(stream, shape) for shape in shapes[:-1]]
    scales, shifts = [], []
    for _ in range(arch.blocks):
        scales.append(stream.take(arch.hidden_dim).astype(np.float32))
        shifts.append(stream.take(arch.hidden_dim).astype(np.float32))
    positional = (
        stream.take(arch.num_patches * arch.positional_dim)
        .reshape(arch.num_patches, arch.positional_dim)
        .astype(np.float32)
    )
    convs.append(_he(stream, shapes[-1]))
    stack = WeightStack(arch, tuple(convs), tuple(scales), tuple(shifts), positional)
    logger.debug("Materialized encoder weights: %s parameters", stack.parameter_count)
    return stack


def as_image(image: np.ndarray, arch: ArchConfig) -> np.ndarray:
    """Validate an image and return it as float64 (C, H, W)."""
    image = np.asarray(image)
    if image.ndim == 2 and arch.channels_in == 1:
        image = image[np.newaxis]
    if image.shape != arch.image_shape:
        raise ShapeMismatch(f"Image has shape {image.shape}, expected {arch.image_shape}")
    image = image.astype(np.float64)
    if not np.all(np.isfinite(image)) or image.min() < 0.0 or image.max() > 1.0:
        raise PixelRangeError("Pixel values must lie in [0, 1]")
    return image


def image_to_patches(image: np.ndarray, patch_size: int) -> np.ndarray:
    """(C, H, W) -> (num_patches, C*p*p), grid in row-major order, each patch as (c, i, j)."""
    channels, height, width = image.shape
    if height % patch_size or width % patch_size:
        raise ShapeMismatch(f"{height}x{width} is not divisible by patch size {patch_size}")
    rows, cols = height // patch_size, width // patch_size
    blocks = image.reshape(channels, rows, patch_size, cols, patch_size)
    return blocks.transpose(1, 3, 0, 2, 4).reshape(rows * cols, channels * patch_size**2)


def patchify_conv(image: np.ndarray, kernel: np.ndarray, patch_size: int) -> np.ndarray:
    """Convolution with stride = kernel = ``patch_size``; returns (H/p, W/p, C_out)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[np.newaxis]
    kernel = np.asarray(kernel, dtype=np.float64)
    channels, height, width = image.shape
    if kernel.ndim == 4:
        if kernel.shape[1:] != (channels, patch_size, patch_size):
            raise ShapeMismatch(
                f"Kernel {kernel.shape} does not match {channels} channels "
                f"with patch {patch_size}"
            )
        kernel = kernel.reshape(kernel.shape[0], -1)
    elif kernel.ndim != 2 or kernel.shape[1] != channels * patch_size**2:
        raise ShapeMismatch(f"Kernel {kernel.shape} does not match the patch dimension")
    patches = image_to_patches(image, patch_size)
    return (patches @ kernel.T).reshape(height // patch_size, width // patch_size, -1)


def pointwise_conv(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """1x1 convolution over patch positions: (..., C_in) -> (..., C_out)."""
    if x.shape[-1] != kernel.shape[1]:
        raise ShapeMismatch(f"Input has {x.shape[-1]} channels, kernel expects {kernel.shape[1]}")
    return x @ np.asarray(kernel, dtype=np.float64).T


def channel_norm(
    x: np.ndarray, scale: np.ndarray, shift: np.ndarray, epsilon: float = NORM_EPSILON
) -> np.ndarray:
    """Per channel, standardize over the patch positions of one sample, then apply the affine."""
    flat = x.reshape(-1, x.shape[-1])
    mean = flat.mean(axis=0)
    var = flat.var(axis=0)
    out = (flat - mean) / np.sqrt(var + epsilon) * np.asarray(scale, dtype=np.float64)
    return (out + np.asarray(shift, dtype=np.float64)).reshape(x.shape)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def add_positional(x: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    if x.shape != embeddings.shape:
        raise ShapeMismatch(
            f"Positional embeddings {embeddings.shape} do not match activations {x.shape}"
        )
    return x + np.asarray(embeddings, dtype=np.float64)


def shuffle_patches(patches: np.ndarray, seed: int, nonce: int) -> np.ndarray:
    """Fisher-Yates over the rows, driven by splitmix64(seed ^ nonce)."""
    order = fisher_yates(len(patches), (seed ^ nonce) & MASK64)
    return patches[order]


def forward(
    stack: WeightStack,
    image: np.ndarray,
    positional: bool = True,
    normalize: bool = True,
) -> np.ndarray:
    """Unshuffled encoder output, one row per patch in grid order (float64)."""
    arch = stack.arch
    x = image_to_patches(as_image(image, arch), arch.patch_size)
    if not arch.blocks:
        if positional:
            x = add_positional(x, stack.positional)
        return relu(pointwise_conv(x, stack.convs[0]))
    x = pointwise_conv(x, stack.convs[0])
    for block in range(arch.blocks):
        if normalize:
            x = channel_norm(x, stack.norm_scales[block], stack.norm_shifts[block])
        x = relu(x)
        if positional and block == arch.blocks - 1:
            x = add_positional(x, stack.positional)
        x = pointwise_conv(x, stack.convs[block + 1])
    return relu(x)


def encode(
    key: EncoderKey,
    image: np.ndarray,
    nonce: int,
    positional: bool = True,
    normalize: bool = True,
    shuffle: bool = True,
) -> np.ndarray:
    """Encode one image into its published patch set, (num_patches, hidden_dim) float32."""
    out = forward(sample_encoder(key), image, positional=positional, normalize=normalize)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput("The encoder produced a non-finite activation")
    out = out.astype(np.float32)
    if shuffle:
        out = shuffle_patches(out, key.seed, nonce)
    return out


def _encode_job(job: tuple) -> np.ndarray:
    key, image, nonce = job
    return encode(key, image, nonce)


def encode_batch(
    key: EncoderKey,
    images: Sequence[np.ndarray],
    nonces: Iterable[int] | None = None,
    workers: int | None = None,
    start: int = 0,
) -> tuple[list[np.ndarray], list[int]]:
    """Encode ``images`` in order; nonces default to derive_nonce(seed, start + i)."""
    images = list(images)
    if nonces is None:
        nonces = [derive_nonce(key.seed, start + i) for i in range(len(images))]
    nonces = list(nonces)
    if len(nonces) != len(images):
        raise ShapeMismatch(f"{len(nonces)} nonces given for {len(images)} images")
    workers = WORKERS if workers is None else workers
    jobs = [(key, image, nonce) for image, nonce in zip(images, nonces)]
    if workers > 1 and len(jobs) > 1:
        logger.debug("Encoding %s images on %s workers", len(jobs), workers)
        pool = ProcessPool(nodes=workers)
        try:
            outputs = pool.map(_encode_job, jobs)
        finally:
            pool.close()
            pool.join()
            pool.clear()
    else:
        outputs = [_encode_job(job) for job in jobs]
    return list(outputs), nonces


class LinearEncoder:
    """The linear baseline: the key's patchify convolution alone, patches in grid order."""

    def __init__(self, key: EncoderKey):
        self.key = key
        self.arch = key.arch
        self.weight = sample_encoder(key).convs[0].astype(np.float64)

    def encode_patches(self, patches: np.ndarray) -> np.ndarray:
        return (np.asarray(patches, dtype=np.float64) @ self.weight.T).astype(np.float32)

    def encode(self, image: np.ndarray, nonce: int | None = None) -> np.ndarray:
        patches = image_to_patches(as_image(image, self.arch), self.arch.patch_size)
        return self.encode_patches(patches)

    def __call__(self, image: np.ndarray, nonce: int | None = None) -> np.ndarray:
        return self.encode(image, nonce)
