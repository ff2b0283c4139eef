"""Two-class synthetic images standing in for the private imaging corpora.

Class 0 draws a narrow blob in the left half of the image, class 1 a wider blob in the
right half, over faint uniform background noise.
"""
from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass

import numpy as np

from neuraCrypt.errors import EmptySet, FormatError, MissingLabel, UsageError
from neuraCrypt.tensor_io import PGM_SUFFIX, TENSOR_SUFFIX, load_image, write_tensor
from neuraCrypt.utils import absolute_file_paths, read_json, write_json

logger = logging.getLogger("neuraCrypt.Synth")

LABELS_FILE = "labels.json"


@dataclass(frozen=True)
class SyntheticDatasetConfig:
    image_height: int = 16
    image_width: int = 16
    samples: int = 64
    seed: int = 0
    class_count: int = 2
    # blob centers as fractions of (height, width), one per class
    centers: tuple = ((0.5, 0.25), (0.5, 0.75))
    # blob standard deviations as fractions of the shorter side
    radii: tuple = (1 / 16, 1 / 8)
    center_jitter: float = 0.05
    amplitude: float = 0.9
    noise: float = 0.05

    def __post_init__(self):
        if self.samples < 1:
            raise EmptySet("A synthetic dataset needs at least one sample")
        if self.class_count != 2 or len(self.centers) != 2 or len(self.radii) != 2:
            raise UsageError("Synthetic datasets have exactly two classes")
        if self.image_height < 1 or self.image_width < 1:
            raise UsageError(f"Invalid image size {self.image_height}x{self.image_width}")


def synth_generate(config: SyntheticDatasetConfig) -> tuple[np.ndarray, np.ndarray]:
    """Images (N, 1, H, W) float32 in [0, 1] and balanced labels (N,), reproducible from seed."""
    rng = np.random.default_rng(config.seed)
    height, width = config.image_height, config.image_width
    labels = rng.permutation(np.arange(config.samples) % 2).astype(np.int64)
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    images = np.empty((config.samples, 1, height, width), dtype=np.float32)
    side = min(height, width)
    for i, label in enumerate(labels):
        cy, cx = config.centers[label]
        cy = (cy + rng.uniform(-config.center_jitter, config.center_jitter)) * (height - 1)
        cx = (cx + rng.uniform(-config.center_jitter, config.center_jitter)) * (width - 1)
        sigma = config.radii[label] * side
        blob = np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * sigma**2))
        image = config.amplitude * blob + rng.uniform(0.0, config.noise, size=(height, width))
        images[i, 0] = np.clip(image, 0.0, 1.0)
    logger.debug("Generated %s synthetic %sx%s images", config.samples, height, width)
    return images, labels


def write_dataset(
    out_dir: pathlib.Path | str, images: np.ndarray, labels: np.ndarray
) -> pathlib.Path:
    """One NCT1 file per image plus ``labels.json`` mapping file name to label."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = {}
    width = max(4, len(str(len(images) - 1)))
    for i, (image, label) in enumerate(zip(images, labels)):
        name = f"sample_{i:0{width}d}{TENSOR_SUFFIX}"
        write_tensor(out_dir.joinpath(name), image)
        mapping[name] = int(label)
    write_json(out_dir.joinpath(LABELS_FILE), mapping)
    return out_dir


def read_labels(path: pathlib.Path | str) -> dict:
    """``{file name: label}``, either at top level or under ``"labels"``."""
    if not pathlib.Path(path).exists():
        raise MissingLabel(f"Label file {path} does not exist")
    document = read_json(path)
    if isinstance(document, dict) and isinstance(document.get("labels"), dict):
        document = document["labels"]
    if not isinstance(document, dict):
        raise FormatError(f"{path}: labels must map file names to labels")
    return document


def read_dataset(
    directory: pathlib.Path | str, labels_file: pathlib.Path | str | None = None
) -> tuple[list[pathlib.Path], list[np.ndarray], list]:
    """Image files (.pgm and .nct) of a raw directory, their pixels and their labels."""
    directory = pathlib.Path(directory)
    labels = read_labels(labels_file or directory.joinpath(LABELS_FILE))
    files = list(absolute_file_paths(directory, suffixes=(PGM_SUFFIX, TENSOR_SUFFIX)))
    if not files:
        raise EmptySet(f"No .pgm or .nct images found in {directory}")
    missing = [f.name for f in files if f.name not in labels]
    if missing:
        raise MissingLabel(f"No label for {missing}")
    return files, [load_image(f) for f in files], [labels[f.name] for f in files]
