"""Reader for instance JSON documents.

An instance document looks like::

    {
      "samples": [1, 2, 3, 4, 5],
      "labels": ["+", "+", "-", "-", "-"],
      "label_alphabet": ["+", "-"],
      "family": [[2, 1, 5, 4, 3], ...] | "sym" | "f0",
      "encoder_prior": ["1/6", ...],
      "outer_family": [[...], ...],
      "outer_prior": [...],
      "dataset_prior": [{"tuple": [2, 3, 4], "p": "1/10"}, ...] | {"uniform_subsets": 3},
      "observations": [{"encoded_samples": [1, 4, 5], "label_config": ["+", ...]}],
      "membership": [1, 2, 4]
    }

Decimal literals are read as exact fractions, so ``0.1`` means 1/10.
"""
from __future__ import annotations

import json
import logging
import pathlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from neuraCrypt.analyzer import compose_families
from neuraCrypt.discrete import (
    DatasetPrior,
    DiscreteInstance,
    EncoderFamily,
    Observation,
    enumerate_sym,
    f0_family,
    validate_permutation,
)
from neuraCrypt.errors import DiscreteException, InstanceFormatError, TooLarge

logger = logging.getLogger("neuraCrypt.InstanceIO")

DATA_FOLDER = pathlib.Path(__file__).parent.joinpath("data")

REQUIRED_KEYS = ("samples", "labels", "family", "dataset_prior")


@dataclass(frozen=True)
class InstanceSpec:
    instance: DiscreteInstance
    family: EncoderFamily
    dataset_prior: DatasetPrior
    name: str = ""
    observations: tuple = ()
    membership: tuple = ()
    base_family: EncoderFamily | None = field(default=None, repr=False)


def _locate(text: str, key: str) -> tuple[int | None, int | None]:
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if match is None:
        return None, None
    line = text.count("\n", 0, match.start()) + 1
    column = match.start() - (text.rfind("\n", 0, match.start()) + 1) + 1
    return line, column


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _family(
    instance: DiscreteInstance, raw: Any, weights: Any, caps: tuple = (None, None)
) -> EncoderFamily:
    if isinstance(raw, str):
        kind = raw.lower()
        if kind == "sym":
            family = enumerate_sym(instance, caps[0])
        elif kind == "f0":
            family = f0_family(instance, caps[1])
        else:
            raise InstanceFormatError(f"Unknown family {raw!r}, expected 'sym', 'f0' or a list")
        if weights is not None:
            return EncoderFamily(family.members, weights)
        return family
    if not isinstance(raw, list) or not raw:
        raise InstanceFormatError("A family must be a non-empty list of permutation vectors")
    members = [validate_permutation(instance, _freeze(image)) for image in raw]
    if weights is None:
        return EncoderFamily.uniform(members)
    return EncoderFamily(members, weights)


def _prior(instance: DiscreteInstance, raw: Any) -> DatasetPrior:
    if isinstance(raw, dict) and "uniform_subsets" in raw:
        return DatasetPrior.uniform_subsets(instance, int(raw["uniform_subsets"]))
    if not isinstance(raw, list):
        raise InstanceFormatError(
            "dataset_prior must be a list of {tuple, p} entries or {uniform_subsets: k}"
        )
    pairs = []
    for entry in raw:
        if not isinstance(entry, dict) or "tuple" not in entry or "p" not in entry:
            raise InstanceFormatError(f"Malformed dataset_prior entry {entry!r}")
        pairs.append((_freeze(entry["tuple"]), entry["p"]))
    prior = DatasetPrior.from_pairs(pairs)
    prior.check_instance(instance)
    return prior


def parse_instance(
    text: str,
    source: str = "<string>",
    sym_cap: int | None = None,
    family_cap: int | None = None,
) -> InstanceSpec:
    """Parse an instance document; ``sym_cap`` and ``family_cap`` bound the named families."""
    caps = (sym_cap, family_cap)
    try:
        document = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"{source}: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(document, dict):
        raise InstanceFormatError(f"{source}: the document must be a JSON object", 1, 1)
    missing = [key for key in REQUIRED_KEYS if key not in document]
    if missing:
        raise InstanceFormatError(f"{source}: missing keys {missing}")

    section = "samples"
    try:
        instance = DiscreteInstance.from_labels(
            _freeze(document["samples"]),
            _freeze(document["labels"]),
            _freeze(document.get("label_alphabet")),
        )
        section = "family"
        family = _family(instance, document["family"], document.get("encoder_prior"), caps)
        base_family = None
        if "outer_family" in document:
            section = "outer_family"
            outer = _family(
                instance, document["outer_family"], document.get("outer_prior"), caps
            )
            base_family, family = family, compose_families(outer, family)
        section = "dataset_prior"
        prior = _prior(instance, document["dataset_prior"])
        section = "observations"
        observations = tuple(
            Observation.build(
                instance, _freeze(o["encoded_samples"]), _freeze(o["label_config"])
            )
            for o in document.get("observations", [])
        )
        section = "membership"
        membership = _freeze(document.get("membership", []))
        for x in membership:
            instance.position(x)
    except TooLarge:
        raise
    except (DiscreteException, KeyError, TypeError, ValueError) as e:
        line, column = _locate(text, section)
        message = e.message if isinstance(e, DiscreteException) else repr(e)
        raise InstanceFormatError(
            f"{source}: {section}: {type(e).__name__}: {message}", line, column
        ) from e
    except InstanceFormatError as e:
        line, column = _locate(text, section)
        raise InstanceFormatError(f"{source}: {section}: {e.message}", line, column) from e

    logger.debug(
        "Loaded instance %s: |X|=%s, |F|=%s, |prior|=%s",
        document.get("name", source),
        instance.size,
        len(family),
        len(prior),
    )
    return InstanceSpec(
        instance=instance,
        family=family,
        dataset_prior=prior,
        name=str(document.get("name", "")),
        observations=observations,
        membership=membership,
        base_family=base_family,
    )


def load_instance(
    path: pathlib.Path | str, sym_cap: int | None = None, family_cap: int | None = None
) -> InstanceSpec:
    path = pathlib.Path(path)
    if not path.exists() and DATA_FOLDER.joinpath(path.name).exists():
        path = DATA_FOLDER.joinpath(path.name)
    try:
        text = path.read_text(encoding="utf8")
    except FileNotFoundError as e:
        raise InstanceFormatError(f"{path}: no such file") from e
    return parse_instance(text, str(path), sym_cap, family_cap)
