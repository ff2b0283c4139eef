from __future__ import annotations

import argparse

from neuraCrypt.bundled_data import license_text, patched_version
from neuraCrypt.env_config import ENVIRO_CONFIG
from neuraCrypt.gen_config import MyConfig, generate_doc, write_default_config
from neuraCrypt.home_path import HOME_PATH, LOGS_FOLDER

SOURCE_TEXT = "Source code can be found on: https://github.com/neuracrypt/neuraCrypt"


def add_global_flags(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    parser.add_argument(
        "--gen-config",
        "-gc",
        dest="gen_config",
        action="store_true",
        help=f"Write a default config.toml to {HOME_PATH}",
    )
    parser.add_argument(
        "-v", "--version", action="version", version=f"neuraCrypt version: {patched_version}"
    )
    info = parser.add_mutually_exclusive_group()
    info.add_argument(
        "-l",
        "--license",
        dest="info",
        action="store_const",
        const=license_text,
        help="Show neuraCrypt's licence",
    )
    info.add_argument(
        "-s",
        "--source",
        dest="info",
        action="store_const",
        const=SOURCE_TEXT,
        help="Shows a link to neuraCrypt's source",
    )
    return parser


def process_flags(args: argparse.Namespace) -> bool:
    """Handle the informational flags, returns True when the process should exit."""
    if args.gen_config:
        write_default_config()
        return True
    if args.info:
        print(args.info)
        return True
    return False


CONFIG_FILE = HOME_PATH.joinpath("config.toml")
CONFIG = MyConfig(CONFIG_FILE, config=None if CONFIG_FILE.exists() else generate_doc())


def env_or_config(env_value, dotted: str, fallback, config: MyConfig = CONFIG):
    """An NCK_* value when one is set, even a falsy one, else the config file's value."""
    return config.get(dotted, fallback=fallback) if env_value is None else env_value


CONSOLE_LOGGING_LEVEL_STRING = env_or_config(
    ENVIRO_CONFIG.settings.console_level, "Settings.ConsoleLevel", "INFO"
)
ENABLE_LOGS = env_or_config(ENVIRO_CONFIG.settings.logging, "Settings.Logging", False)

# Analysis Config Values
SYM_CAP = env_or_config(ENVIRO_CONFIG.cap, "Analysis.SymCap", 8)
FAMILY_CAP = env_or_config(ENVIRO_CONFIG.analysis.family_cap, "Analysis.FamilyCap", 1_000_000)
PAIR_CAP = env_or_config(ENVIRO_CONFIG.analysis.pair_cap, "Analysis.PairCap", 10_000_000)
ARITHMETIC = CONFIG.get("Analysis.Arithmetic", fallback="exact")

# Encoder Config Values
IMAGE_HEIGHT = CONFIG.get("Encoder.ImageHeight", fallback=256)
IMAGE_WIDTH = CONFIG.get("Encoder.ImageWidth", fallback=256)
CHANNELS_IN = CONFIG.get("Encoder.ChannelsIn", fallback=1)
PATCH_SIZE = CONFIG.get("Encoder.PatchSize", fallback=16)
DEPTH = CONFIG.get("Encoder.Depth", fallback=7)
HIDDEN_DIM = CONFIG.get("Encoder.HiddenDim", fallback=2048)

# Attack Config Values
BANDWIDTH_MULTIPLIERS = tuple(
    float(m) for m in CONFIG.get("Attack.BandwidthMultipliers", fallback=[0.5, 1, 2, 4, 8])
)
ATTACK_STEPS = CONFIG.get("Attack.Steps", fallback=500)
ATTACK_LEARNING_RATE = CONFIG.get("Attack.LearningRate", fallback=0.5)
ATTACK_MOMENTUM = CONFIG.get("Attack.Momentum", fallback=0.9)
ATTACKER_WIDTH = CONFIG.get("Attack.AttackerWidth", fallback=0)
MAX_GRAD_NORM = CONFIG.get("Attack.MaxGradNorm", fallback=10.0)
ATTACK_SEED = CONFIG.get("Attack.Seed", fallback=0)

# Utility Config Values
UTILITY_STEPS = CONFIG.get("Utility.Steps", fallback=500)
UTILITY_LEARNING_RATE = CONFIG.get("Utility.LearningRate", fallback=0.5)
UTILITY_SEED = CONFIG.get("Utility.Seed", fallback=0)

WORKERS = env_or_config(ENVIRO_CONFIG.settings.workers, "Workers.Count", 1)
