"""Default config document and the TOML-backed ``MyConfig`` reader."""
from __future__ import annotations

import pathlib
from typing import Any, NamedTuple

import tomlkit
from tomlkit import comment, document, nl, table
from tomlkit.exceptions import TOMLKitError
from tomlkit.items import Table
from tomlkit.toml_document import TOMLDocument

from neuraCrypt.env_config import ENVIRO_CONFIG
from neuraCrypt.home_path import HOME_PATH

MISSING = object()


class Option(NamedTuple):
    key: str
    default: Any
    help: tuple[str, ...]


def _env_default(value: Any, fallback: Any) -> Any:
    return fallback if value is None else value


SECTIONS: dict[str, tuple[Option, ...]] = {
    "Settings": (
        Option(
            "ConsoleLevel",
            _env_default(ENVIRO_CONFIG.settings.console_level, "INFO"),
            ("Level of logging; One of CRITICAL, ERROR, WARNING, NOTICE, INFO, DEBUG, TRACE",),
        ),
        Option(
            "Logging",
            bool(_env_default(ENVIRO_CONFIG.settings.logging, False)),
            ("Also write logs to <home>/logs/neuraCrypt.log",),
        ),
    ),
    "Analysis": (
        Option(
            "SymCap",
            _env_default(ENVIRO_CONFIG.cap, 8),
            (
                "Largest sample space (number of samples) for which Sym(X) is enumerated",
                "The NCK_CAP environment variable overrides this value",
            ),
        ),
        Option(
            "FamilyCap",
            _env_default(ENVIRO_CONFIG.analysis.family_cap, 1_000_000),
            ("Largest label-preserving family (number of members) that will be enumerated",),
        ),
        Option(
            "PairCap",
            _env_default(ENVIRO_CONFIG.analysis.pair_cap, 10_000_000),
            ("Largest number of (dataset, encoder) pairs enumerated for a privacy report",),
        ),
        Option(
            "Arithmetic",
            "exact",
            ('Probability arithmetic; One of "exact" (rationals) or "float"',),
        ),
    ),
    "Encoder": (
        Option("ImageHeight", 256, ("Input image height in pixels",)),
        Option("ImageWidth", 256, ("Input image width in pixels",)),
        Option("ChannelsIn", 1, ("Number of input channels (1 for grayscale)",)),
        Option("PatchSize", 16, ("Side of the square patches; must divide both image dims",)),
        Option("Depth", 7, ("Number of encoder layers (>= 2)",)),
        Option("HiddenDim", 2048, ("Channels of every encoded patch vector",)),
    ),
    "Attack": (
        Option(
            "BandwidthMultipliers",
            [0.5, 1.0, 2.0, 4.0, 8.0],
            ("Multipliers applied to the median-heuristic bandwidth, one RBF kernel each",),
        ),
        Option("Steps", 500, ("Gradient descent steps",)),
        Option("LearningRate", 0.5, ("Gradient descent learning rate",)),
        Option("Momentum", 0.9, ("Momentum coefficient (0 disables momentum)",)),
        Option(
            "AttackerWidth",
            0,
            ("Hidden width of the two-layer attacker (0 means the encoder's hidden dim)",),
        ),
        Option("MaxGradNorm", 10.0, ("Clip gradients to this global norm (0 disables clipping)",)),
        Option("Seed", 0, ("Seed for attacker initialisation",)),
    ),
    "Utility": (
        Option("Steps", 500, ("Logistic regression gradient descent steps",)),
        Option("LearningRate", 0.5, ("Logistic regression learning rate",)),
        Option("Seed", 0, ("Seed of the 60-20-20 split",)),
    ),
    "Workers": (
        Option(
            "Count",
            _env_default(ENVIRO_CONFIG.settings.workers, 1),
            ("Number of processes used to encode datasets (1 encodes in-process)",),
        ),
    ),
}


def _section(options: tuple[Option, ...]) -> Table:
    section = table()
    for option in options:
        for line in option.help:
            section.add(comment(line))
        section.add(option.key, option.default)
    return section


def generate_doc() -> TOMLDocument:
    doc = document()
    doc.add(comment("neuraCrypt configuration."))
    doc.add(comment(f'Read from "{HOME_PATH}"; NCK_* environment variables take precedence.'))
    doc.add(nl())
    for name, options in SECTIONS.items():
        doc.add(name, _section(options))
    return doc


def _walk(node: Any, keys: list[str]) -> Any:
    for key in keys:
        if not isinstance(node, dict) or key not in node:
            return MISSING
        node = node[key]
    return node


class MyConfig:
    """A TOML file layered over the generated defaults; lookups use dotted keys."""

    def __init__(self, path: pathlib.Path | str, config: TOMLDocument | None = None):
        self.path = pathlib.Path(path)
        self.defaults = generate_doc()
        self.error: Exception | None = None
        self.config = config if config is not None else self._read()

    def __str__(self):
        return tomlkit.dumps(self.config)

    def _read(self) -> TOMLDocument:
        try:
            return tomlkit.parse(self.path.read_text(encoding="utf8"))
        except (OSError, TOMLKitError) as err:
            # unreadable or malformed files fall back to the defaults
            self.error = err
            return document()

    def save(self) -> MyConfig:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(tomlkit.dumps(self.config), encoding="utf8")
        except OSError as err:
            self.error = err
            raise ValueError(f"Could not write the config file {self.path}: {err}") from err
        return self

    def get(self, dotted: str, fallback: Any = None) -> Any:
        value = self._lookup(dotted)
        return fallback if value is MISSING else value

    def get_or_raise(self, dotted: str) -> Any:
        value = self._lookup(dotted)
        if value is MISSING:
            raise KeyError(f"{dotted} does not exist")
        return value

    def sections(self) -> list[str]:
        return list(dict.fromkeys([*self.config.keys(), *self.defaults.keys()]))

    def _lookup(self, dotted: str) -> Any:
        keys = dotted.split(".")
        for source in (self.config, self.defaults):
            value = _walk(source, keys)
            if value is not MISSING:
                return value
        return MISSING


def write_default_config() -> pathlib.Path:
    path = HOME_PATH.joinpath("config.toml")
    if path.exists():
        print(f"{path} already exists, File is not being replaced.")
        path = pathlib.Path.cwd().joinpath("config_new.toml")
    MyConfig(path, config=generate_doc()).save()
    print(f'New config file has been saved to "{path}"')
    return path
