from __future__ import annotations

import argparse
import functools
import logging
import pathlib
import secrets
import sys
from multiprocessing import freeze_support

import numpy as np

from neuraCrypt.attacks import (
    KINDS,
    LINEAR,
    TWO_LAYER,
    AttackerModel,
    permutation_fit,
    plaintext_attack,
    train_mmd_attack,
    transfer_attack,
)
from neuraCrypt.bundled_data import patched_version
from neuraCrypt.config import (
    ARITHMETIC,
    ATTACK_LEARNING_RATE,
    ATTACK_MOMENTUM,
    ATTACK_SEED,
    ATTACK_STEPS,
    BANDWIDTH_MULTIPLIERS,
    MAX_GRAD_NORM,
    UTILITY_LEARNING_RATE,
    UTILITY_SEED,
    UTILITY_STEPS,
    add_global_flags,
    process_flags,
)
from neuraCrypt.encoder import ArchConfig, EncoderKey, LinearEncoder, encode, encode_batch
from neuraCrypt.env_config import ENVIRO_CONFIG
from neuraCrypt.errors import EXIT_USAGE, NeuraCryptException, UsageError
from neuraCrypt.instance_io import load_instance
from neuraCrypt.logger import attach_file_handler, run_logs
from neuraCrypt.mmd import MMDConfig
from neuraCrypt.prng import derive_nonce, fisher_yates
from neuraCrypt.publication import (
    binary_labels,
    encode_dataset,
    load_shard,
    pool_merge,
    read_manifest,
)
from neuraCrypt.reports import FORMATS, analyze_instance, render_report
from neuraCrypt.synth import SyntheticDatasetConfig, read_dataset, synth_generate, write_dataset
from neuraCrypt.tensor_io import read_key, write_key
from neuraCrypt.utility import OwnerShard, raw_pixel_shards, utility_proxy
from neuraCrypt.utils import atomic_write_text, dumps, read_json

logger = logging.getLogger("neuraCrypt")

NEURACRYPT = "neuracrypt"
TARGETS = (NEURACRYPT, LINEAR)
ARCH_FLAGS = (
    ("--height", "image_height", "Image height in pixels"),
    ("--width", "image_width", "Image width in pixels"),
    ("--channels", "channels_in", "Input channels"),
    ("--patch", "patch_size", "Patch size (must divide height and width)"),
    ("--depth", "depth", "Encoder depth"),
    ("--hidden", "hidden_dim", "Hidden dimension of every encoded patch"),
)


def _add_arch_flags(parser: argparse.ArgumentParser) -> None:
    for flag, dest, text in ARCH_FLAGS:
        parser.add_argument(flag, dest=dest, type=int, default=None, help=text)


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--steps", type=int, default=ATTACK_STEPS, help="Training steps")
    parser.add_argument(
        "--lr", type=float, default=ATTACK_LEARNING_RATE, help="Learning rate"
    )
    parser.add_argument(
        "--attacker-seed", type=int, default=ATTACK_SEED, help="Seed of the attacker init"
    )
    parser.add_argument(
        "--width-attacker",
        dest="attacker_width",
        type=int,
        default=None,
        help="Hidden width of a two-layer attacker (default: hidden_dim)",
    )


def _add_target_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("data", type=pathlib.Path, help="Raw dataset directory with labels")
    parser.add_argument(
        "--target", choices=TARGETS, default=NEURACRYPT, help="Encoder under attack"
    )
    parser.add_argument("--key", type=pathlib.Path, help="Key file of the target encoder")
    parser.add_argument(
        "--seed", type=int, default=None, help="Target seed when no key file is given"
    )
    _add_arch_flags(parser)
    parser.add_argument("--out", type=pathlib.Path, help="Write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuracrypt", description="Private encodings and their privacy analysis."
    )
    add_global_flags(parser)
    commands = parser.add_subparsers(dest="command", metavar="command")

    keygen = commands.add_parser("keygen", help="Create a private encoder key")
    keygen.add_argument("--seed", type=int, default=None, help="Seed (default: OS entropy)")
    _add_arch_flags(keygen)
    keygen.add_argument("--out", type=pathlib.Path, required=True, help="Key file to write")
    keygen.set_defaults(handler=cmd_keygen)

    encode_cmd = commands.add_parser("encode", help="Encode and publish a labelled dataset")
    encode_cmd.add_argument("--key", type=pathlib.Path, required=True, help="Key file")
    encode_cmd.add_argument("--input", type=pathlib.Path, required=True, help="Image directory")
    encode_cmd.add_argument("--labels", type=pathlib.Path, help="Labels file")
    encode_cmd.add_argument("--out", type=pathlib.Path, required=True, help="Publish directory")
    encode_cmd.add_argument("--owner", default="owner", help="Owner identifier")
    encode_cmd.add_argument("--task", default="task", help="Task name")
    encode_cmd.add_argument("--workers", type=int, default=None, help="Encoding processes")
    encode_cmd.set_defaults(handler=cmd_encode)

    pool = commands.add_parser("pool", help="Merge published shards of several owners")
    pool.add_argument("shards", type=pathlib.Path, nargs="+", help="Published directories")
    pool.add_argument("--out", type=pathlib.Path, help="Write the pool manifest here")
    pool.set_defaults(handler=cmd_pool)

    analyze = commands.add_parser("analyze", help="Exact privacy analysis of an instance")
    analyze.add_argument("instance", type=pathlib.Path, help="Instance JSON file")
    analyze.add_argument(
        "--arithmetic", choices=("exact", "float"), default=ARITHMETIC, help="Number type"
    )
    analyze.add_argument("--cap", type=int, default=None, help="Sample cap for 'sym'")
    analyze.add_argument(
        "--family-cap", type=int, default=None, help="Member cap for 'f0'"
    )
    analyze.add_argument("--out", type=pathlib.Path, help="Write the JSON report here")
    analyze.set_defaults(handler=cmd_analyze)

    attack = commands.add_parser("attack", help="Run an attack simulation")
    attacks = attack.add_subparsers(dest="attack", metavar="attack")
    mmd = attacks.add_parser("mmd", help="Unpaired MMD attack")
    _add_target_flags(mmd)
    _add_training_flags(mmd)
    mmd.add_argument("--attacker", choices=KINDS, default=LINEAR, help="Attacker model")
    mmd.add_argument("--momentum", type=float, default=ATTACK_MOMENTUM, help="Momentum")
    mmd.add_argument(
        "--max-grad-norm", type=float, default=MAX_GRAD_NORM, help="Gradient clip (0: off)"
    )
    mmd.add_argument(
        "--multipliers",
        type=float,
        nargs="+",
        default=list(BANDWIDTH_MULTIPLIERS),
        help="RBF bandwidth multipliers",
    )
    mmd.add_argument("--save-attacker", type=pathlib.Path, help="Save the attacker (.npz)")
    mmd.set_defaults(handler=cmd_attack_mmd)

    plaintext = attacks.add_parser("plaintext", help="Known-plaintext attack")
    _add_target_flags(plaintext)
    _add_training_flags(plaintext)
    plaintext.add_argument("--attacker", choices=KINDS, default=LINEAR, help="Attacker model")
    plaintext.set_defaults(handler=cmd_attack_plaintext)

    transfer = attacks.add_parser("transfer", help="Transfer a classifier from T*(X) to Z")
    _add_target_flags(transfer)
    transfer.add_argument(
        "--attacker-file", type=pathlib.Path, required=True, help="Attacker saved by 'mmd'"
    )
    transfer.add_argument("--steps", type=int, default=UTILITY_STEPS, help="Classifier steps")
    transfer.add_argument(
        "--lr", type=float, default=UTILITY_LEARNING_RATE, help="Classifier learning rate"
    )
    transfer.add_argument("--l2", type=float, default=0.0, help="Classifier L2 penalty")
    transfer.set_defaults(handler=cmd_attack_transfer)

    permfit = attacks.add_parser("permfit", help="Fit an encoder to permuted inputs")
    _add_target_flags(permfit)
    _add_training_flags(permfit)
    permfit.add_argument(
        "--perm-seed", type=int, default=0, help="Seed of the sample permutation"
    )
    permfit.set_defaults(handler=cmd_attack_permfit)

    synth = commands.add_parser("synth", help="Generate a two-class synthetic dataset")
    synth.add_argument("--out", type=pathlib.Path, required=True, help="Output directory")
    synth.add_argument("--samples", type=int, default=64, help="Number of images")
    synth.add_argument("--height", type=int, default=16, help="Image height")
    synth.add_argument("--width", type=int, default=16, help="Image width")
    synth.add_argument("--seed", type=int, default=0, help="Generator seed")
    synth.set_defaults(handler=cmd_synth)

    utility = commands.add_parser("utility", help="Downstream-utility proxy")
    utility.add_argument("shards", type=pathlib.Path, nargs="*", help="Published directories")
    utility.add_argument("--raw", type=pathlib.Path, help="Raw dataset for the pixel oracle")
    utility.add_argument("--seed", type=int, default=UTILITY_SEED, help="Split seed")
    utility.add_argument("--steps", type=int, default=UTILITY_STEPS, help="Training steps")
    utility.add_argument("--lr", type=float, default=UTILITY_LEARNING_RATE, help="Learning rate")
    utility.add_argument("--out", type=pathlib.Path, help="Write the JSON report here")
    utility.set_defaults(handler=cmd_utility)

    report = commands.add_parser("report", help="Render a JSON report as text or CSV")
    report.add_argument("report", type=pathlib.Path, help="Report JSON file")
    report.add_argument("--format", dest="fmt", choices=FORMATS, default="text")
    report.add_argument("--out", type=pathlib.Path, help="Write the rendering here")
    report.set_defaults(handler=cmd_report)
    return parser


def _emit(document: dict, out: pathlib.Path | None) -> None:
    text = dumps(document)
    if out is not None:
        atomic_write_text(out, text + "\n")
        logger.info("Wrote %s", out)
    else:
        print(text)


def _arch(args: argparse.Namespace, image_shape: tuple | None = None) -> ArchConfig:
    """Arch flags over defaults; the image shape of a dataset fills unset sizes."""
    values = {dest: getattr(args, dest, None) for _, dest, _ in ARCH_FLAGS}
    if image_shape is not None:
        channels, height, width = image_shape
        for dest, value in (
            ("channels_in", channels),
            ("image_height", height),
            ("image_width", width),
        ):
            if values[dest] is None:
                values[dest] = value
    return ArchConfig(**{k: v for k, v in values.items() if v is not None})


def _public_shape(key: EncoderKey) -> dict:
    return {
        "arch": key.arch.to_dict(),
        "num_patches": key.arch.num_patches,
        "hidden_dim": key.arch.hidden_dim,
        "parameters": key.arch.parameter_count(),
        "format_version": key.format_version,
    }


def cmd_keygen(args: argparse.Namespace) -> int:
    seed = secrets.randbits(64) if args.seed is None else args.seed
    key = EncoderKey(seed, _arch(args))
    write_key(args.out, key)
    logger.success("Wrote key %s", args.out)
    _emit(_public_shape(key), None)
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    key = read_key(args.key)
    manifest = encode_dataset(
        key,
        args.input,
        args.labels,
        args.out,
        owner_id=args.owner,
        task=args.task,
        key_path=args.key,
        workers=args.workers,
    )
    print(render_report(manifest.to_dict()), end="")
    return 0


def cmd_pool(args: argparse.Namespace) -> int:
    merged = pool_merge([(shard, read_manifest(shard)) for shard in args.shards])
    _emit(merged.to_dict(), args.out)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    spec = load_instance(args.instance, sym_cap=args.cap, family_cap=args.family_cap)
    _emit(analyze_instance(spec, args.arithmetic), args.out)
    return 0


def _as_chw(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float32)
    return image[np.newaxis] if image.ndim == 2 else image


class _Simulation:
    """Attack setting: the first half of the data is the attacker's own X; the second
    half B is private and only the target's encodings Z = target(B) are published."""

    def __init__(self, args: argparse.Namespace):
        _, images, labels = read_dataset(args.data)
        self.images = [_as_chw(image) for image in images]
        if len(self.images) < 2:
            raise UsageError("An attack simulation needs at least two images")
        self.labels = np.asarray([int(y) for y in labels], dtype=np.int64)
        if args.key is not None:
            self.key = read_key(args.key)
            if self.key.arch.image_shape != self.images[0].shape:
                raise UsageError(
                    f"The key encodes {self.key.arch.image_shape} images, "
                    f"the data holds {self.images[0].shape}"
                )
        else:
            seed = secrets.randbits(64) if args.seed is None else args.seed
            self.key = EncoderKey(seed, _arch(args, self.images[0].shape))
        half = len(self.images) // 2
        self.X, self.B = self.images[:half], self.images[half:]
        self.X_labels, self.B_labels = self.labels[:half], self.labels[half:]
        self.kind = args.target
        if self.kind == LINEAR:
            linear = LinearEncoder(self.key)
            self.target = linear
            self.Z = [linear(b) for b in self.B]
        else:
            self.target = functools.partial(encode, self.key, nonce=derive_nonce(self.key.seed, 0))
            self.Z, _ = encode_batch(self.key, self.B, start=half)
        logger.debug(
            "Attack simulation against %s: %s attacker images, %s published encodings",
            self.kind,
            len(self.X),
            len(self.Z),
        )

    @property
    def eval_pairs(self) -> list[tuple]:
        return list(zip(self.B, self.Z))


def _report(report, args: argparse.Namespace, extra: dict | None = None) -> int:
    document = report.to_dict()
    document["target"] = args.target
    document.update(extra or {})
    _emit(document, args.out)
    logger.notice(render_report(document).strip())
    return 0


def cmd_attack_mmd(args: argparse.Namespace) -> int:
    simulation = _Simulation(args)
    arch = simulation.key.arch
    attacker = AttackerModel.initialize(
        args.attacker,
        arch.patch_dim,
        arch.hidden_dim,
        arch.patch_size,
        width=args.attacker_width,
        seed=args.attacker_seed,
    )
    report = train_mmd_attack(
        attacker,
        simulation.X,
        simulation.Z,
        steps=args.steps,
        learning_rate=args.lr,
        config=MMDConfig(tuple(args.multipliers)),
        momentum=args.momentum,
        max_grad_norm=args.max_grad_norm or None,
        eval_pairs=simulation.eval_pairs,
    )
    if args.save_attacker is not None:
        attacker.save(args.save_attacker)
        logger.info("Saved attacker to %s", args.save_attacker)
    return _report(report, args)


def cmd_attack_plaintext(args: argparse.Namespace) -> int:
    simulation = _Simulation(args)
    train_pairs = [(x, simulation.target(x)) for x in simulation.X]
    _, report = plaintext_attack(
        train_pairs,
        simulation.key.arch.patch_size,
        kind=args.attacker,
        steps=args.steps,
        learning_rate=args.lr,
        width=args.attacker_width,
        seed=args.attacker_seed,
        eval_pairs=simulation.eval_pairs,
    )
    return _report(report, args)


def cmd_attack_transfer(args: argparse.Namespace) -> int:
    simulation = _Simulation(args)
    attacker = AttackerModel.load(args.attacker_file)
    _, report = transfer_attack(
        attacker,
        simulation.X,
        simulation.X_labels,
        simulation.Z,
        simulation.B_labels,
        steps=args.steps,
        learning_rate=args.lr,
        l2=args.l2,
    )
    return _report(report, args)


def cmd_attack_permfit(args: argparse.Namespace) -> int:
    simulation = _Simulation(args)
    permutation = fisher_yates(len(simulation.X), args.perm_seed)
    _, report = permutation_fit(
        simulation.target,
        simulation.X,
        permutation,
        steps=args.steps,
        learning_rate=args.lr,
        patch_size=simulation.key.arch.patch_size,
        width=args.attacker_width,
        seed=args.attacker_seed,
    )
    return _report(report, args, {"perm_seed": args.perm_seed})


def cmd_synth(args: argparse.Namespace) -> int:
    config = SyntheticDatasetConfig(
        image_height=args.height, image_width=args.width, samples=args.samples, seed=args.seed
    )
    images, labels = synth_generate(config)
    write_dataset(args.out, images, labels)
    logger.success("Wrote %s synthetic images to %s", len(images), args.out)
    return 0


def cmd_utility(args: argparse.Namespace) -> int:
    if bool(args.shards) == bool(args.raw):
        raise UsageError("Give either published directories or --raw, not both or neither")
    if args.raw is not None:
        _, images, labels = read_dataset(args.raw)
        owners = [
            OwnerShard("raw", raw_pixel_shards(np.stack([_as_chw(i) for i in images])), labels)
        ]
    else:
        shards = [load_shard(directory) for directory in args.shards]
        pool_merge([(d, manifest) for d, (manifest, _, _) in zip(args.shards, shards)])
        owners = [
            OwnerShard(manifest.owner_id, patch_sets, binary_labels(labels, manifest.vocabulary))
            for manifest, patch_sets, labels in shards
        ]
    report = utility_proxy(owners, seed=args.seed, steps=args.steps, learning_rate=args.lr)
    document = report.to_dict()
    document["oracle"] = args.raw is not None
    _emit(document, args.out)
    logger.notice(render_report(document).strip())
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rendered = render_report(read_json(args.report), args.fmt)
    if args.out is not None:
        atomic_write_text(args.out, rendered)
    else:
        print(rendered, end="")
    return 0


def run(argv: list[str] | None = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    if process_flags(args):
        sys.exit(0)
    run_logs(logger)
    attach_file_handler(logger)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_help(sys.stderr)
        sys.exit(EXIT_USAGE)
    logger.debug("neuraCrypt %s: %s", patched_version, args.command)
    logger.trace("Environment variables: %r", ENVIRO_CONFIG)
    try:
        code = handler(args)
    except NeuraCryptException as e:
        logger.error("%s: %s", type(e).__name__, e.message or e)
        sys.exit(e.exit_code)
    except KeyboardInterrupt:
        logger.info("Detected Ctrl+C - Terminating process")
        sys.exit(0)
    except Exception:
        logger.exception("Unexpected error while running %s", args.command)
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    freeze_support()
    run()
