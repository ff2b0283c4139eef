from __future__ import annotations

import json

import pytest

from neuraCrypt.main import build_parser, run
from neuraCrypt.synth import SyntheticDatasetConfig, synth_generate, write_dataset
from neuraCrypt.tensor_io import read_key
from neuraCrypt.utils import read_json


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as info:
        run(argv)
    return info.value.code


def test_no_command_is_a_usage_error():
    assert _exit_code([]) == 2


def test_analyze_bundled_instance(tmp_path):
    out = tmp_path / "report.json"
    assert _exit_code(["analyze", "six_encoders.json", "--out", str(out)]) == 0
    document = read_json(out)
    assert document["kind"] == "privacy"
    assert document["queries"][0]["membership"]["2"] == "2/3"


def test_analyze_malformed_instance(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"samples": [1, 2,', encoding="utf8")
    assert _exit_code(["analyze", str(path)]) == 3


def test_analyze_over_the_cap(tmp_path):
    path = tmp_path / "big.json"
    document = {
        "samples": list(range(9)),
        "labels": ["+"] * 4 + ["-"] * 5,
        "family": "sym",
        "dataset_prior": {"uniform_subsets": 2},
    }
    path.write_text(json.dumps(document), encoding="utf8")
    assert _exit_code(["analyze", str(path), "--cap", "8"]) == 4


def test_keygen_is_reproducible_and_prints_no_seed(tmp_path, capsys):
    flags = ["--seed", "77", "--height", "8", "--width", "8", "--patch", "2", "--depth", "3"]
    assert _exit_code(["keygen", *flags, "--hidden", "6", "--out", str(tmp_path / "a.nck")]) == 0
    printed = capsys.readouterr().out
    assert json.loads(printed)["num_patches"] == 16
    assert "77" not in printed.replace('"', " ").split()
    assert _exit_code(["keygen", *flags, "--hidden", "6", "--out", str(tmp_path / "b.nck")]) == 0
    assert (tmp_path / "a.nck").read_bytes() == (tmp_path / "b.nck").read_bytes()
    assert read_key(tmp_path / "a.nck").seed == 77


def test_keygen_rejects_bad_architectures(tmp_path):
    argv = ["keygen", "--seed", "1", "--height", "8", "--width", "8", "--patch", "3"]
    assert _exit_code([*argv, "--out", str(tmp_path / "k.nck")]) == 3


def test_publish_pool_and_utility(tmp_path):
    images, labels = synth_generate(SyntheticDatasetConfig(samples=40, seed=8))
    write_dataset(tmp_path / "raw_a", images[:20], labels[:20])
    write_dataset(tmp_path / "raw_b", images[20:], labels[20:])
    arch = ["--height", "16", "--width", "16", "--patch", "4", "--depth", "3", "--hidden", "8"]
    for owner, seed in (("a", 2**40 + 1), ("b", 2**40 + 2)):
        key = str(tmp_path / f"{owner}.nck")
        assert _exit_code(["keygen", "--seed", str(seed), *arch, "--out", key]) == 0
        argv = ["encode", "--key", key, "--input", str(tmp_path / f"raw_{owner}")]
        assert _exit_code([*argv, "--out", str(tmp_path / f"pub_{owner}"), "--owner", owner]) == 0
    shards = [str(tmp_path / "pub_a"), str(tmp_path / "pub_b")]
    assert _exit_code(["pool", *shards, "--out", str(tmp_path / "pool.json")]) == 0
    assert len(read_json(tmp_path / "pool.json")["samples"]) == 40
    out = tmp_path / "utility.json"
    assert _exit_code(["utility", *shards, "--steps", "50", "--out", str(out)]) == 0
    assert set(read_json(out)["per_owner"]) == {"a", "b"}
    assert _exit_code(["report", str(out), "--format", "csv"]) == 0


def test_utility_needs_exactly_one_source(tmp_path):
    assert _exit_code(["utility"]) == 2


def test_attack_commands_on_synthetic_data(tmp_path):
    data = tmp_path / "raw"
    assert _exit_code(["synth", "--out", str(data), "--samples", "20", "--seed", "3"]) == 0
    arch = ["--patch", "4", "--depth", "3", "--hidden", "8", "--seed", str(2**40)]
    saved = tmp_path / "attacker.npz"
    mmd = ["attack", "mmd", str(data), *arch, "--steps", "5", "--lr", "0.01"]
    mmd += ["--save-attacker", str(saved), "--out", str(tmp_path / "m.json")]
    assert _exit_code(mmd) == 0
    assert read_json(tmp_path / "m.json")["attack"] == "mmd"
    argv = ["attack", "plaintext", str(data), "--target", "linear", *arch]
    assert _exit_code([*argv, "--out", str(tmp_path / "p.json")]) == 0
    assert read_json(tmp_path / "p.json")["mse_ratio"] < 1e-6
    argv = ["attack", "transfer", str(data), *arch, "--attacker-file", str(saved)]
    assert _exit_code([*argv, "--steps", "20"]) == 0
    argv = ["attack", "permfit", str(data), *arch, "--steps", "3", "--lr", "0.01"]
    assert _exit_code(argv) == 0


def test_parser_lists_every_command():
    parser = build_parser()
    args = parser.parse_args(["report", "r.json", "--format", "csv"])
    assert args.fmt == "csv"
    assert args.handler.__name__ == "cmd_report"


def test_source_flag_prints_and_exits(capsys):
    assert _exit_code(["--source"]) == 0
    assert "github.com/neuracrypt/neuraCrypt" in capsys.readouterr().out
