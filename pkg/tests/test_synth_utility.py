from __future__ import annotations

import logging

import numpy as np
import pytest

from conftest import LARGE_SEED
from neuraCrypt.encoder import ArchConfig, EncoderKey, encode_batch
from neuraCrypt.errors import (
    DimMismatch,
    EmptySet,
    FormatError,
    MissingLabel,
    SingleClassData,
    UsageError,
)
from neuraCrypt.synth import (
    LABELS_FILE,
    SyntheticDatasetConfig,
    read_dataset,
    read_labels,
    synth_generate,
    write_dataset,
)
from neuraCrypt.utility import OwnerShard, raw_pixel_shards, stratified_split, utility_proxy
from neuraCrypt.utils import write_json


def test_synthetic_data_is_reproducible_and_balanced():
    config = SyntheticDatasetConfig(samples=20, seed=4)
    images, labels = synth_generate(config)
    assert images.shape == (20, 1, 16, 16)
    assert images.dtype == np.float32
    assert images.min() >= 0.0 and images.max() <= 1.0
    assert labels.sum() == 10
    again, again_labels = synth_generate(config)
    np.testing.assert_array_equal(images, again)
    np.testing.assert_array_equal(labels, again_labels)


def test_synthetic_classes_differ_in_blob_mass():
    images, labels = synth_generate(SyntheticDatasetConfig(samples=40, seed=1))
    mass = images.reshape(40, -1).sum(axis=1)
    assert mass[labels == 1].min() > mass[labels == 0].max()


def test_synthetic_config_validation():
    with pytest.raises(EmptySet):
        SyntheticDatasetConfig(samples=0)
    with pytest.raises(UsageError):
        SyntheticDatasetConfig(class_count=3)
    with pytest.raises(UsageError):
        SyntheticDatasetConfig(image_height=0)


def test_dataset_directory_round_trip(tmp_path):
    images, labels = synth_generate(SyntheticDatasetConfig(samples=6, seed=2))
    write_dataset(tmp_path, images, labels)
    files, loaded, loaded_labels = read_dataset(tmp_path)
    assert [f.name for f in files] == [f"sample_{i:04d}.nct" for i in range(6)]
    np.testing.assert_array_equal(np.stack(loaded), images)
    assert loaded_labels == labels.tolist()


def test_labels_file_variants(tmp_path):
    write_json(tmp_path / "nested.json", {"labels": {"a.pgm": "cat"}})
    assert read_labels(tmp_path / "nested.json") == {"a.pgm": "cat"}
    write_json(tmp_path / "list.json", ["a.pgm"])
    with pytest.raises(FormatError):
        read_labels(tmp_path / "list.json")
    with pytest.raises(MissingLabel):
        read_labels(tmp_path / "absent.json")


def test_read_dataset_errors(tmp_path):
    write_json(tmp_path / LABELS_FILE, {})
    with pytest.raises(EmptySet):
        read_dataset(tmp_path)
    (tmp_path / "x.pgm").write_bytes(b"P5 1 1 255\n" + bytes([7]))
    with pytest.raises(MissingLabel):
        read_dataset(tmp_path)


def test_stratified_split_keeps_groups_apart():
    groups = np.column_stack([np.repeat([0, 1], 50), np.tile([0, 1], 50)])
    train, dev, test = stratified_split(groups, seed=0)
    assert len(train) + len(dev) + len(test) == 100
    assert not set(train) & set(dev) and not set(dev) & set(test) and not set(train) & set(test)
    assert len(test) == 4 * 5
    assert len(dev) == 4 * 5


def _encoded_shard(images, labels, owner, key, start):
    Z, _ = encode_batch(key, images, workers=1, start=start)
    return OwnerShard(owner, Z, labels)


def test_utility_of_neuracrypt_encodings():
    images, labels = synth_generate(SyntheticDatasetConfig(samples=160, seed=11))
    key = EncoderKey(LARGE_SEED, ArchConfig(16, 16, 1, 4, 4, 16))
    report = utility_proxy([_encoded_shard(images, labels, "solo", key, 0)])
    assert report.accuracy >= 0.9
    assert report.train_size + report.dev_size + report.test_size == 160
    assert report.per_owner == {}
    assert report.to_dict()["kind"] == "utility"


def test_raw_pixel_oracle():
    images, labels = synth_generate(SyntheticDatasetConfig(samples=160, seed=12))
    report = utility_proxy([OwnerShard("raw", raw_pixel_shards(images), labels)])
    assert report.accuracy >= 0.95
    assert report.auc >= 0.95


def test_two_owner_pool_reports_each_owner():
    images, labels = synth_generate(SyntheticDatasetConfig(samples=160, seed=13))
    arch = ArchConfig(16, 16, 1, 4, 4, 16)
    shards = [
        _encoded_shard(images[:80], labels[:80], "alice", EncoderKey(LARGE_SEED, arch), 0),
        _encoded_shard(images[80:], labels[80:], "bob", EncoderKey(LARGE_SEED + 1, arch), 0),
    ]
    report = utility_proxy(shards)
    assert set(report.per_owner) == {"alice", "bob"}
    for scores in report.per_owner.values():
        assert 0.0 <= scores["accuracy"] <= 1.0


def test_utility_errors():
    patches = [np.ones((2, 3))] * 4
    with pytest.raises(EmptySet):
        utility_proxy([])
    with pytest.raises(DimMismatch):
        utility_proxy([OwnerShard("a", patches, [0, 1])])
    with pytest.raises(SingleClassData):
        utility_proxy([OwnerShard("a", patches, [1, 1, 1, 1])])
    with pytest.raises(DimMismatch):
        utility_proxy(
            [OwnerShard("a", patches, [0, 1, 0, 1]), OwnerShard("b", [np.ones((2, 4))], [1])]
        )


def test_stratified_split_trains_on_single_member_groups():
    groups = np.array([[0, 0]] * 5 + [[0, 1]] * 5 + [[1, 0], [1, 1]])
    train, dev, test = stratified_split(groups, seed=0)
    assert {10, 11} <= set(train)
    assert not {10, 11} & (set(dev) | set(test))
    only_singletons = stratified_split(np.array([[0, 0], [0, 1]]), seed=0)
    assert list(only_singletons[0]) == [0, 1]
    assert only_singletons[2].dtype == np.int64 and len(only_singletons[2]) == 0


def test_single_class_owner_gets_no_auc(caplog):
    images, labels = synth_generate(SyntheticDatasetConfig(samples=60, seed=14))
    positives = images[labels == 1][:10]
    shards = [
        OwnerShard("alice", raw_pixel_shards(images), labels),
        OwnerShard("bob", raw_pixel_shards(positives), [1] * len(positives)),
    ]
    with caplog.at_level(logging.WARNING, logger="neuraCrypt.Utility"):
        report = utility_proxy(shards, steps=100)
    assert report.per_owner["bob"]["auc"] is None
    assert 0.0 <= report.per_owner["bob"]["accuracy"] <= 1.0
    assert report.per_owner["alice"]["auc"] is not None
    assert "test split of bob holds a single class" in caplog.text
