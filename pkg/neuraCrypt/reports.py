"""Report documents: the analyze pipeline output and its text/CSV rendering."""
from __future__ import annotations

import csv
import io
import logging
from typing import Any

from neuraCrypt.analyzer import (
    dataset_posterior,
    format_probability,
    guessing_probability,
    is_perfectly_private,
    membership_probability,
    partition_by_lc,
    possible_datasets,
)
from neuraCrypt.errors import UsageError
from neuraCrypt.instance_io import InstanceSpec

logger = logging.getLogger("neuraCrypt.Reports")

FORMATS = ("text", "csv")


def analyze_instance(spec: InstanceSpec, arithmetic: str | None = None) -> dict:
    """Run the full privacy analysis of an instance file into a JSON-ready document."""
    instance = spec.instance
    report = is_perfectly_private(instance, spec.family, spec.dataset_prior, arithmetic)
    document = {"kind": "privacy", "name": spec.name, "arithmetic": arithmetic or "exact"}
    document.update(report.to_dict(instance))
    document["guessing_probability"] = format_probability(
        guessing_probability(instance, spec.family, spec.dataset_prior)
    )
    document["min_anonymity"] = report.partition.min_size
    if spec.base_family is not None:
        document["base_lc_classes"] = partition_by_lc(instance, spec.base_family).to_dict()

    queries = []
    for observation in spec.observations:
        posterior = dataset_posterior(instance, spec.family, spec.dataset_prior, observation)
        queries.append(
            {
                "encoded_samples": list(observation.encoded_samples),
                "label_config": [str(y) for y in observation.label_config],
                "possible_datasets": [
                    list(t) for t in possible_datasets(instance, spec.family, observation)
                ],
                "posterior": posterior.to_dict(),
                "membership": {
                    str(x): format_probability(membership_probability(posterior, x))
                    for x in spec.membership
                },
            }
        )
    document["queries"] = queries
    logger.debug("Analyzed %s with %s queries", spec.name or "instance", len(queries))
    return document


def _privacy_text(document: dict) -> list[str]:
    lines = [f"Privacy report {document.get('name') or ''}".rstrip()]
    lines.append(f"  mutual information (bits): {document['mutual_information_bits']:.6f}")
    if "label_mutual_information_bits" in document:
        lines.append(
            "  label-only information (bits): "
            f"{document['label_mutual_information_bits']:.6f}"
        )
    lines.append(f"  guessing probability: {document.get('guessing_probability')}")
    lines.append(f"  perfectly private: {'yes' if document['perfectly_private'] else 'no'}")
    for title, key in (("LC classes", "lc_classes"), ("Base LC classes", "base_lc_classes")):
        if key not in document:
            continue
        classes = document[key]
        width = max([19] + [len(c["label_configuration"]) for c in classes])
        lines.append("")
        lines.append(f"{title}:")
        lines.append(f"  {'label configuration':<{width}}  size")
        for c in classes:
            lines.append(f"  {c['label_configuration']:<{width}}  {c['size']}")
    lines.append("")
    observations = document.get("observations", [])
    if not observations:
        lines.append("no observations")
    else:
        lines.append(f"Observations: {len(observations)}")
        for o in observations:
            lines.append(
                f"  Z={o['encoded_samples']} C=({''.join(o['label_config'])}) "
                f"p={o['probability']} tv={o['tv_distance']}"
            )
    for query in document.get("queries", []):
        lines.append("")
        lines.append(
            f"Query Z={query['encoded_samples']} C=({''.join(query['label_config'])}):"
        )
        lines.append(f"  Pos = {[tuple(t) for t in query['possible_datasets']]}")
        for entry in query["posterior"]:
            lines.append(f"  Pr[X_A = {tuple(entry['tuple'])}] = {entry['p']}")
        for x, p in query["membership"].items():
            lines.append(f"  Pr[{x} in X_A] = {p}")
    return lines


def _number(value: Any, spec: str = ".6g") -> str:
    return "n/a" if value is None else format(value, spec)


def _attack_text(document: dict) -> list[str]:
    line = f"attack {document['attack']}: "
    if document.get("mse_ratio") is not None:
        line += (
            f"mse_ratio={_number(document['mse_ratio'])} "
            f"(initial {_number(document.get('initial_mse_ratio'))}) "
        )
    line += f"after {document['epochs_run']} steps"
    if document.get("transfer_auc_on_z") is not None:
        line += (
            f", auc on Z*={document['transfer_auc_on_zstar']:.4f}"
            f", auc on Z={document['transfer_auc_on_z']:.4f}"
        )
    if document.get("rank_deficient"):
        line += ", rank deficient"
    return [line]


def _score(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _utility_text(document: dict) -> list[str]:
    lines = [
        f"utility: accuracy={_score(document['accuracy'])} auc={_score(document['auc'])} "
        f"l2={document['l2']} (train {document['train_size']}, dev {document['dev_size']}, "
        f"test {document['test_size']})"
    ]
    for owner, scores in document.get("per_owner", {}).items():
        lines.append(
            f"  {owner}: accuracy={_score(scores['accuracy'])} auc={_score(scores['auc'])}"
        )
    return lines


def _listing_text(document: dict) -> list[str]:
    samples = document.get("samples", [])
    if not samples:
        return [f"{document['kind']}: no samples"]
    owners = {s.get("owner_id", document.get("owner_id")) for s in samples}
    return [
        f"{document['kind']} {document.get('task', '')}: {len(samples)} samples from "
        f"{len(owners)} owner(s), {document['num_patches']} x {document['hidden_dim']} "
        f"patches, labels {document.get('labels', [])}"
    ]


def _rows(document: dict) -> list[list[Any]]:
    kind = document.get("kind")
    if kind == "privacy":
        rows = [["section", "label_configuration", "size"]]
        for key in ("lc_classes", "base_lc_classes"):
            rows.extend([key, c["label_configuration"], c["size"]] for c in document.get(key, []))
        return rows
    if kind == "attack":
        fields = [
            "attack",
            "mse_ratio",
            "initial_mse_ratio",
            "epochs_run",
            "final_loss",
            "transfer_auc_on_zstar",
            "transfer_auc_on_z",
        ]
        return [fields, [document.get(f) for f in fields]]
    if kind == "utility":
        rows = [["owner", "accuracy", "auc"], ["pooled", document["accuracy"], document["auc"]]]
        rows.extend([o, s["accuracy"], s["auc"]] for o, s in document.get("per_owner", {}).items())
        return rows
    if kind in ("publication", "pool"):
        rows = [["owner_id", "file", "label"]]
        rows.extend(
            [s.get("owner_id", document.get("owner_id")), s["file"], s["label"]]
            for s in document.get("samples", [])
        )
        return rows
    raise UsageError(f"Cannot render a report of kind {kind!r}")


def render_report(document: dict, fmt: str = "text") -> str:
    if fmt not in FORMATS:
        raise UsageError(f"Unknown report format {fmt!r}, expected one of {FORMATS}")
    if not isinstance(document, dict) or "kind" not in document:
        raise UsageError("Not a neuraCrypt report document")
    if fmt == "csv":
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerows(_rows(document))
        return buffer.getvalue()
    kind = document["kind"]
    if kind == "privacy":
        lines = _privacy_text(document)
    elif kind == "attack":
        lines = _attack_text(document)
    elif kind == "utility":
        lines = _utility_text(document)
    elif kind in ("publication", "pool"):
        lines = _listing_text(document)
    else:
        raise UsageError(f"Cannot render a report of kind {kind!r}")
    return "\n".join(lines) + "\n"
