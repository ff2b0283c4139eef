"""Multi-owner publication workflow: encode a shard, audit it, and pool shards.

What an owner publishes is a directory of NCT1 patch sets plus ``manifest.json``
pairing every file with its label. The key and the per-sample nonces stay private;
nonces are kept in a sidecar next to the key file.
"""
from __future__ import annotations

import logging
import pathlib
import struct
import tempfile
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from neuraCrypt.bundled_data import format_version as FORMAT_VERSION
from neuraCrypt.encoder import EncoderKey, encode_batch
from neuraCrypt.errors import (
    DimMismatch,
    FormatError,
    SecrecyViolation,
    ShapeMismatch,
    VocabMismatch,
)
from neuraCrypt.prng import derive_nonce
from neuraCrypt.synth import read_dataset
from neuraCrypt.tensor_io import (
    KEY_MAGIC,
    KEY_SUFFIX,
    TENSOR_DIM,
    TENSOR_HEADER,
    TENSOR_SUFFIX,
    read_tensor,
    write_tensor,
)
from neuraCrypt.utils import absolute_file_paths, dumps, read_json, write_json

logger = logging.getLogger("neuraCrypt.Publication")

MANIFEST_FILE = "manifest.json"
FORBIDDEN_FIELDS = ("seed", "nonce", "nonces", "key", "weights")
AUDIT_FLOOR = 1 << 32


@dataclass(frozen=True)
class PublicationManifest:
    owner_id: str
    task: str
    samples: tuple
    num_patches: int
    hidden_dim: int
    format_version: int = FORMAT_VERSION

    @property
    def labels(self) -> tuple:
        return tuple(label for _, label in self.samples)

    @property
    def vocabulary(self) -> tuple:
        return tuple(sorted({str(label) for label in self.labels}))

    def to_dict(self) -> dict:
        return {
            "kind": "publication",
            "format_version": self.format_version,
            "owner_id": self.owner_id,
            "task": self.task,
            "num_patches": self.num_patches,
            "hidden_dim": self.hidden_dim,
            "labels": list(self.vocabulary),
            "samples": [{"file": name, "label": label} for name, label in self.samples],
        }

    @classmethod
    def from_dict(cls, document: dict) -> PublicationManifest:
        leaked = _forbidden_keys(document)
        if leaked:
            raise SecrecyViolation(f"Manifest carries private fields {leaked}")
        try:
            return cls(
                owner_id=str(document["owner_id"]),
                task=str(document["task"]),
                samples=tuple((s["file"], s["label"]) for s in document["samples"]),
                num_patches=int(document["num_patches"]),
                hidden_dim=int(document["hidden_dim"]),
                format_version=int(document["format_version"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Malformed publication manifest: {e!r}") from e


def _forbidden_keys(document: Any, prefix: str = "") -> list[str]:
    found = []
    if isinstance(document, dict):
        for key, value in document.items():
            if str(key).lower() in FORBIDDEN_FIELDS:
                found.append(prefix + str(key))
            found.extend(_forbidden_keys(value, f"{prefix}{key}."))
    elif isinstance(document, list):
        for i, value in enumerate(document):
            found.extend(_forbidden_keys(value, f"{prefix}{i}."))
    return found


def read_manifest(directory: pathlib.Path | str) -> PublicationManifest:
    path = pathlib.Path(directory).joinpath(MANIFEST_FILE)
    if not path.exists():
        raise FormatError(f"{directory} holds no {MANIFEST_FILE}")
    return PublicationManifest.from_dict(read_json(path))


def nonce_sidecar(key_path: pathlib.Path | str) -> pathlib.Path:
    key_path = pathlib.Path(key_path)
    return key_path.with_name(key_path.name + ".nonces.json")


def _is_within(path: pathlib.Path, directory: pathlib.Path) -> bool:
    path, directory = path.resolve(), directory.resolve()
    return path == directory or directory in path.parents


def _load_sidecar(path: pathlib.Path) -> dict:
    if path.exists():
        return read_json(path)
    return {"next_counter": 0, "samples": {}}


def encode_dataset(
    key: EncoderKey,
    input_dir: pathlib.Path | str,
    labels_file: pathlib.Path | str | None,
    out_dir: pathlib.Path | str,
    owner_id: str = "owner",
    task: str = "task",
    key_path: pathlib.Path | str | None = None,
    workers: int | None = None,
) -> PublicationManifest:
    """Encode every image under ``input_dir`` with a fresh nonce and publish the shard.

    The shard is written to a staging directory next to ``out_dir`` and audited there;
    only an audited shard is moved into ``out_dir``, and only then is the sidecar updated.
    """
    out_dir = pathlib.Path(out_dir)
    if key_path and _is_within(pathlib.Path(key_path), out_dir):
        raise SecrecyViolation(f"The key {key_path} and its nonces would land in {out_dir}")
    if out_dir.exists():
        audit_publication(out_dir, key)
    files, images, labels = read_dataset(input_dir, labels_file)

    sidecar_path = nonce_sidecar(key_path) if key_path else None
    sidecar = _load_sidecar(sidecar_path) if sidecar_path else {"next_counter": 0, "samples": {}}
    start = int(sidecar["next_counter"])
    nonces = [derive_nonce(key.seed, start + i) for i in range(len(images))]
    logger.info("Encoding %s images for owner %s", len(images), owner_id)
    outputs, nonces = encode_batch(key, images, nonces, workers=workers)

    samples = [(source.stem + TENSOR_SUFFIX, label) for source, label in zip(files, labels)]
    manifest = PublicationManifest(
        owner_id=owner_id,
        task=task,
        samples=tuple(samples),
        num_patches=key.arch.num_patches,
        hidden_dim=key.arch.hidden_dim,
        format_version=key.format_version,
    )
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix=f".{out_dir.name}.", dir=out_dir.parent) as tmp:
        staging = pathlib.Path(tmp)
        for (name, _), patches in zip(samples, outputs):
            write_tensor(staging.joinpath(name), patches)
        write_json(staging.joinpath(MANIFEST_FILE), manifest.to_dict())
        audit_publication(staging, key, nonces)
        out_dir.mkdir(exist_ok=True)
        for path in staging.iterdir():
            path.replace(out_dir.joinpath(path.name))

    if sidecar_path:
        sidecar["next_counter"] = start + len(images)
        for (name, _), nonce in zip(samples, nonces):
            sidecar["samples"][f"{out_dir.name}/{name}"] = str(nonce)
        write_json(sidecar_path, sidecar)
    logger.success("Published %s encoded samples to %s", len(samples), out_dir)
    return manifest


def _secret_patterns(key: EncoderKey, nonces: Iterable[int]) -> list[tuple[str, bytes]]:
    patterns = []
    for what, value in [("seed", key.seed), *(("nonce", n) for n in nonces)]:
        # small values collide with tensor dims and JSON numbers
        if value < AUDIT_FLOOR:
            continue
        patterns.append((what, struct.pack("<Q", value)))
        patterns.append((what, struct.pack(">Q", value)))
        patterns.append((what, str(value).encode()))
        patterns.append((what, f"{value:x}".encode()))
    return patterns


def audit_publication(
    out_dir: pathlib.Path | str, key: EncoderKey, nonces: Sequence[int] = ()
) -> None:
    """Reject a published directory that leaks key material.

    Manifests and NCT1 headers must not contain the seed or a nonce (binary or text),
    no file may be an NCK1 key, and manifests must not carry private fields.
    """
    out_dir = pathlib.Path(out_dir)
    patterns = _secret_patterns(key, nonces)
    for path in absolute_file_paths(out_dir):
        data = path.read_bytes()
        if data.startswith(KEY_MAGIC) or path.suffix == KEY_SUFFIX:
            raise SecrecyViolation(f"{path.name} is a key file")
        if path.name.endswith(".nonces.json"):
            raise SecrecyViolation(f"{path.name} is a nonce sidecar")
        if path.suffix == TENSOR_SUFFIX:
            ndim = data[5] if len(data) > 5 else 0
            scanned = data[: TENSOR_HEADER.size + ndim * TENSOR_DIM.size]
        else:
            scanned = data
            if path.suffix == ".json":
                leaked = _forbidden_keys(read_json(path))
                if leaked:
                    raise SecrecyViolation(f"{path.name} carries private fields {leaked}")
        for what, pattern in patterns:
            if pattern in scanned:
                raise SecrecyViolation(f"{path.name} contains the {what}")
    logger.debug("Secrecy audit passed for %s", out_dir)


@dataclass(frozen=True)
class PoolManifest:
    task: str
    owners: tuple
    samples: tuple
    num_patches: int
    hidden_dim: int
    vocabulary: tuple

    def to_dict(self) -> dict:
        return {
            "kind": "pool",
            "task": self.task,
            "owners": [{"owner_id": o, "directory": d} for o, d in self.owners],
            "num_patches": self.num_patches,
            "hidden_dim": self.hidden_dim,
            "labels": list(self.vocabulary),
            "samples": [
                {"owner_id": o, "file": f, "label": label} for o, f, label in self.samples
            ],
        }

    @classmethod
    def from_dict(cls, document: dict) -> PoolManifest:
        try:
            return cls(
                task=document["task"],
                owners=tuple((o["owner_id"], o["directory"]) for o in document["owners"]),
                samples=tuple(
                    (s["owner_id"], s["file"], s["label"]) for s in document["samples"]
                ),
                num_patches=int(document["num_patches"]),
                hidden_dim=int(document["hidden_dim"]),
                vocabulary=tuple(document["labels"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Malformed pool manifest: {e!r}") from e


def pool_merge(shards: Sequence[tuple]) -> PoolManifest:
    """Merge ``(directory, PublicationManifest)`` shards with owner provenance."""
    if not shards:
        raise VocabMismatch("Nothing to pool")
    first = shards[0][1]
    owners, samples, seen = [], [], set()
    for directory, manifest in shards:
        if manifest.task != first.task:
            raise VocabMismatch(f"Task {manifest.task!r} does not match {first.task!r}")
        if manifest.vocabulary != first.vocabulary:
            raise VocabMismatch(
                f"Owner {manifest.owner_id} labels {manifest.vocabulary} differ from "
                f"{first.vocabulary}"
            )
        if manifest.hidden_dim != first.hidden_dim:
            raise DimMismatch(
                f"Owner {manifest.owner_id} has hidden_dim {manifest.hidden_dim}, "
                f"expected {first.hidden_dim}"
            )
        if manifest.num_patches != first.num_patches:
            raise DimMismatch(
                f"Owner {manifest.owner_id} has {manifest.num_patches} patches per sample, "
                f"expected {first.num_patches}"
            )
        if manifest.owner_id in seen:
            raise VocabMismatch(f"Owner {manifest.owner_id} appears twice")
        seen.add(manifest.owner_id)
        owners.append((manifest.owner_id, str(directory)))
        samples.extend((manifest.owner_id, name, label) for name, label in manifest.samples)
    logger.debug("Pooled %s samples from %s owners", len(samples), len(owners))
    return PoolManifest(
        task=first.task,
        owners=tuple(owners),
        samples=tuple(samples),
        num_patches=first.num_patches,
        hidden_dim=first.hidden_dim,
        vocabulary=first.vocabulary,
    )


def load_shard(directory: pathlib.Path | str) -> tuple[PublicationManifest, list, list]:
    """Manifest, patch sets and labels of one published directory."""
    directory = pathlib.Path(directory)
    manifest = read_manifest(directory)
    patch_sets, labels = [], []
    for name, label in manifest.samples:
        patches = read_tensor(directory.joinpath(name))
        if patches.shape != (manifest.num_patches, manifest.hidden_dim):
            raise ShapeMismatch(
                f"{name} has shape {patches.shape}, expected "
                f"{(manifest.num_patches, manifest.hidden_dim)}"
            )
        patch_sets.append(patches)
        labels.append(label)
    return manifest, patch_sets, labels


def binary_labels(labels: Sequence, vocabulary: Sequence) -> np.ndarray:
    """Map labels to {0, 1} by their rank in the (sorted) vocabulary."""
    if len(vocabulary) != 2:
        raise VocabMismatch(f"Binary tasks need exactly two labels, got {list(vocabulary)}")
    ranks = {str(label): i for i, label in enumerate(vocabulary)}
    return np.asarray([ranks[str(label)] for label in labels], dtype=np.int64)


def manifest_text(manifest: PublicationManifest | PoolManifest) -> str:
    return dumps(manifest.to_dict())
