from __future__ import annotations

import numpy as np
import pytest

from neuraCrypt.encoder import ArchConfig, EncoderKey
from neuraCrypt.errors import FormatError, VersionError
from neuraCrypt.tensor_io import (
    KEY_STRUCT,
    deserialize_key,
    ingest_pgm,
    load_image,
    parse_pgm,
    read_key,
    read_tensor,
    serialize_key,
    tensor_from_bytes,
    tensor_to_bytes,
    to_pgm_bytes,
    write_key,
    write_tensor,
)


def test_key_file_layout(small_key):
    data = serialize_key(small_key)
    assert data[:4] == b"NCK1"
    assert len(data) == KEY_STRUCT.size == 40
    assert deserialize_key(data) == small_key


def test_key_file_on_disk(tmp_path, small_key):
    path = write_key(tmp_path / "owner.nck", small_key)
    assert read_key(path) == small_key


def test_key_rejections(small_key):
    data = serialize_key(small_key)
    with pytest.raises(FormatError):
        deserialize_key(b"NCT1" + data[4:])
    with pytest.raises(FormatError):
        deserialize_key(data[:-1])
    bumped = KEY_STRUCT.pack(b"NCK1", 9, 0, 1, 8, 8, 1, 2, 4, 6)
    with pytest.raises(VersionError) as info:
        deserialize_key(bumped)
    assert info.value.found == 9


def test_tensor_layout():
    array = np.arange(6, dtype=np.float32).reshape(2, 3)
    data = tensor_to_bytes(array)
    assert data[:4] == b"NCT1"
    assert data[4] == 1
    assert data[5] == 2
    assert len(data) == 8 + 2 * 8 + 6 * 4
    np.testing.assert_array_equal(tensor_from_bytes(data), array)


def test_tensor_on_disk(tmp_path, rng):
    array = rng.normal(size=(16, 6)).astype(np.float32)
    path = write_tensor(tmp_path / "sample.nct", array)
    np.testing.assert_array_equal(read_tensor(path), array)
    np.testing.assert_array_equal(load_image(path), array)


@pytest.mark.parametrize(
    "data",
    [
        b"NCT",
        b"XXXX\x01\x02\x00\x00" + b"\x00" * 16,
        b"NCT1\x02\x01\x00\x00" + b"\x01" + b"\x00" * 7 + b"\x00" * 4,
        b"NCT1\x01\x02\x00\x00" + b"\x02" + b"\x00" * 7,
        tensor_to_bytes(np.zeros((2, 2), dtype=np.float32))[:-1],
    ],
    ids=["short-header", "bad-magic", "bad-dtype", "short-dims", "short-payload"],
)
def test_tensor_rejections(data):
    with pytest.raises(FormatError):
        tensor_from_bytes(data)


def test_parse_pgm():
    data = b"P5\n# a comment\n2 2\n255\n" + bytes([0, 255, 128, 64])
    image = parse_pgm(data)
    assert image.shape == (2, 2)
    assert image.dtype == np.float32
    np.testing.assert_allclose(image.ravel(), [0.0, 1.0, 128 / 255, 64 / 255], rtol=1e-6)


def test_pgm_writer_round_trips_pixels():
    image = np.array([[0.0, 1.0], [128 / 255, 64 / 255]], dtype=np.float32)
    np.testing.assert_allclose(parse_pgm(to_pgm_bytes(image)), image, rtol=1e-6)


@pytest.mark.parametrize(
    "data",
    [
        b"P2\n2 2\n255\n0 255 128 64\n",
        b"JUNK",
        b"P5\n2 2\n65535\n" + bytes(8),
        b"P5\n2 2\n255\n" + bytes(3),
        b"P5\n2",
    ],
    ids=["ascii-pgm", "bad-magic", "sixteen-bit", "short-payload", "short-header"],
)
def test_pgm_rejections(data):
    with pytest.raises(FormatError):
        parse_pgm(data)


def test_load_image_dispatches_on_suffix(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_bytes(b"P5 1 1 255\n" + bytes([255]))
    assert load_image(path).tolist() == [[1.0]]
    with pytest.raises(FormatError):
        load_image(tmp_path / "tiny.png")


def test_arch_survives_the_key_file():
    key = EncoderKey(2**63 + 5, ArchConfig(32, 16, 3, 4, 3, 10))
    restored = deserialize_key(serialize_key(key))
    assert restored.arch.to_dict() == key.arch.to_dict()
    assert restored.seed == 2**63 + 5


def test_ingest_pgm_reads_and_rejects_files(tmp_path):
    path = tmp_path / "scan.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    np.testing.assert_allclose(ingest_pgm(path).ravel(), [0.0, 1.0, 0.50196, 0.25098], atol=1e-5)
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255]))
    with pytest.raises(FormatError):
        ingest_pgm(path)
