from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from cachetools import LRUCache, cached
from cachetools.keys import hashkey

from neuraCrypt.config import ARITHMETIC, PAIR_CAP
from neuraCrypt.discrete import (
    FLOAT_TOLERANCE,
    DatasetPrior,
    DiscreteInstance,
    EncoderFamily,
    LCVector,
    Observation,
    Permutation,
    Probability,
    label_preserving_count,
)
from neuraCrypt.errors import (
    InconsistentObservation,
    InstanceMismatch,
    LengthMismatch,
    TooLarge,
    UsageError,
    ZeroEvidence,
)

logger = logging.getLogger("neuraCrypt.Analyzer")

CONFIG_CACHE = LRUCache(maxsize=64)


def label_configuration(instance: DiscreteInstance, T: Permutation) -> LCVector:
    """LC(T): entry i is L(T⁻¹(x_i))."""
    return LCVector(tuple(instance.label(T.preimage(x)) for x in instance.samples))


@cached(cache=CONFIG_CACHE, key=lambda instance, family: hashkey(instance, family.members))
def _member_configurations(instance: DiscreteInstance, family: EncoderFamily) -> tuple:
    if family.domain != instance.samples:
        raise InstanceMismatch("The family acts on a different sample space")
    return tuple(label_configuration(instance, T) for T in family.members)


@dataclass(frozen=True)
class AnonymityPartition:
    """LC-anonymity lists of a family, in lexicographic order of their LC vector."""

    classes: tuple

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(members) for _, members in self.classes)

    @property
    def min_size(self) -> int:
        return min(self.sizes)

    def class_of(self, index: int) -> tuple:
        for config, members in self.classes:
            if index in members:
                return config, members
        raise KeyError(index)

    def to_dict(self) -> list[dict]:
        return [
            {"label_configuration": str(config), "size": len(members), "members": list(members)}
            for config, members in self.classes
        ]


def partition_by_lc(instance: DiscreteInstance, family: EncoderFamily) -> AnonymityPartition:
    groups: dict = {}
    for i, config in enumerate(_member_configurations(instance, family)):
        groups.setdefault(config, []).append(i)
    ordered = sorted(groups.items(), key=lambda item: item[0].sort_key(instance))
    return AnonymityPartition(tuple((config, tuple(members)) for config, members in ordered))


def lc_anonymity_summary(instance: DiscreteInstance, family: EncoderFamily) -> list[tuple]:
    return [(str(c), len(m)) for c, m in partition_by_lc(instance, family).classes]


def anonymity_list(
    instance: DiscreteInstance, family: EncoderFamily, T: Permutation
) -> list[Permutation]:
    """𝓕_T, in family order."""
    index = family.index(T)
    configs = _member_configurations(instance, family)
    target = configs[index]
    return [m for m, c in zip(family.members, configs) if c == target]


def anonymity_list_size(
    instance: DiscreteInstance, family: EncoderFamily | None, T: Permutation
) -> int:
    """|𝓕_T|; ``family=None`` stands for Sym(X) and is counted, not enumerated."""
    if family is None:
        if T.domain != instance.samples:
            raise InstanceMismatch("The permutation acts on a different sample space")
        return label_preserving_count(instance)
    return len(anonymity_list(instance, family, T))


def observe(instance: DiscreteInstance, T: Permutation, X: Sequence) -> Observation:
    encoded = tuple(T(x) for x in X)
    return Observation.build(instance, encoded, label_configuration(instance, T))


def _matching_members(
    instance: DiscreteInstance, family: EncoderFamily, observation: Observation
) -> list[tuple[Permutation, Probability]]:
    if len(observation.label_config) != instance.size:
        raise LengthMismatch(
            f"Label configuration has {len(observation.label_config)} entries, "
            f"expected {instance.size}"
        )
    for z in observation.encoded_samples:
        instance.position(z)
    configs = _member_configurations(instance, family)
    return [
        (T, w)
        for (T, w), c in zip(family, configs)
        if c == observation.label_config and w != 0
    ]


def possible_datasets(
    instance: DiscreteInstance, family: EncoderFamily, observation: Observation
) -> list[tuple]:
    members = _matching_members(instance, family, observation)
    if not members:
        raise InconsistentObservation(
            f"No family member has label configuration {observation.label_config}"
        )
    candidates = dict.fromkeys(
        tuple(T.preimage(z) for z in observation.encoded_samples) for T, _ in members
    )
    return list(candidates)


def _zero_like(values: Iterable[Probability]) -> Probability:
    return Fraction(0) if all(isinstance(v, Fraction) for v in values) else 0.0


def _normalise(masses: dict, what: str) -> dict:
    total = sum(masses.values(), _zero_like(masses.values()))
    if not masses or total == 0:
        raise ZeroEvidence(f"{what} has zero probability")
    return {key: mass / total for key, mass in masses.items()}


def format_probability(p: Probability) -> Any:
    if isinstance(p, Fraction):
        return str(p)
    return float(p)


@dataclass(frozen=True)
class PosteriorTable:
    entries: tuple
    conditioning: Any = None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def support(self) -> tuple:
        return tuple(t for t, _ in self.entries)

    @property
    def exact(self) -> bool:
        return all(isinstance(p, Fraction) for _, p in self.entries)

    def probability(self, t: Sequence) -> Probability:
        return dict(self.entries).get(tuple(t), _zero_like(p for _, p in self.entries))

    def total_variation(self, other: PosteriorTable) -> Probability:
        mine, theirs = dict(self.entries), dict(other.entries)
        zero = _zero_like([*mine.values(), *theirs.values()])
        keys = dict.fromkeys([*mine, *theirs])
        return sum((abs(mine.get(k, zero) - theirs.get(k, zero)) for k in keys), zero) / 2

    def as_float(self) -> PosteriorTable:
        return PosteriorTable(tuple((t, float(p)) for t, p in self.entries), self.conditioning)

    def to_dict(self) -> list[dict]:
        return [{"tuple": list(t), "p": format_probability(p)} for t, p in self.entries]


@dataclass(frozen=True)
class JointPosterior:
    entries: tuple
    conditioning: Observation

    def __len__(self) -> int:
        return len(self.entries)

    def marginal(self) -> PosteriorTable:
        masses: dict = {}
        for (t, _), p in self.entries:
            masses[t] = masses.get(t, 0) + p
        return PosteriorTable(tuple(masses.items()), self.conditioning)


def joint_posterior(
    instance: DiscreteInstance,
    family: EncoderFamily,
    dataset_prior: DatasetPrior,
    observation: Observation,
) -> JointPosterior:
    """Pr[X_A, T_A | Z, C], proportional to 𝟙(T(X̄)=Z)·𝟙(LC(T)=C)·Pr[X̄]·Pr[T]."""
    dataset_prior.check_instance(instance)
    z_set = frozenset(observation.encoded_samples)
    masses: dict = {}
    for T, w in _matching_members(instance, family, observation):
        preimage = frozenset(T.preimage(z) for z in z_set)
        for t, p in dataset_prior.by_set.get(preimage, ()):
            if len(t) == len(z_set) and p != 0:
                masses[(t, T)] = p * w
    order = {t: i for i, t in enumerate(dataset_prior.tuples)}
    ranked = sorted(masses.items(), key=lambda item: (order[item[0][0]], family.index(item[0][1])))
    normalised = _normalise(dict(ranked), "The observation")
    return JointPosterior(tuple(normalised.items()), observation)


def dataset_posterior(
    instance: DiscreteInstance,
    family: EncoderFamily,
    dataset_prior: DatasetPrior,
    observation: Observation,
) -> PosteriorTable:
    return joint_posterior(instance, family, dataset_prior, observation).marginal()


def label_only_posterior(
    instance: DiscreteInstance, dataset_prior: DatasetPrior, labels: Iterable | Counter
) -> PosteriorTable:
    """Pr[X_A | Y_A]: the prior restricted to tuples with label multiset Y_A."""
    wanted = labels if isinstance(labels, Counter) else Counter(labels)
    if sum(wanted.values()) == 0:
        raise LengthMismatch("The label multiset is empty")
    masses = {
        t: p
        for t, p in dataset_prior
        if p != 0 and Counter(instance.label(x) for x in t) == wanted
    }
    normalised = _normalise(masses, f"Label multiset {dict(wanted)}")
    return PosteriorTable(tuple(normalised.items()), wanted)


def membership_probability(posterior: PosteriorTable, x: Any) -> Probability:
    zero = _zero_like(p for _, p in posterior.entries)
    return sum((p for t, p in posterior.entries if x in t), zero)


def _observation_joint(
    instance: DiscreteInstance, family: EncoderFamily, dataset_prior: DatasetPrior
) -> dict:
    """Map each realizable observation to its unnormalised masses Pr[X̄, O]."""
    pairs = len(family) * len(dataset_prior)
    if pairs > PAIR_CAP:
        raise TooLarge("(dataset, encoder) enumeration", pairs, PAIR_CAP)
    dataset_prior.check_instance(instance)
    configs = _member_configurations(instance, family)
    joint: dict = {}
    for t, p in dataset_prior:
        if p == 0:
            continue
        for (T, w), config in zip(family, configs):
            if w == 0:
                continue
            key = (instance.sort_samples(T(x) for x in t), config)
            masses = joint.setdefault(key, {})
            masses[t] = masses.get(t, 0) + p * w
    logger.trace("Enumerated %s pairs into %s observations", pairs, len(joint))
    ordered = sorted(
        joint.items(),
        key=lambda item: (
            item[0][1].sort_key(instance),
            tuple(instance.position(z) for z in item[0][0]),
        ),
    )
    return {Observation(z, config): masses for (z, config), masses in ordered}


def _log2_ratio(numerator: Probability, denominator: Probability) -> float:
    if isinstance(numerator, Fraction) and isinstance(denominator, Fraction):
        ratio = numerator / denominator
        return math.log2(ratio.numerator) - math.log2(ratio.denominator)
    return math.log2(numerator / denominator)


def _mutual_information(joint: dict) -> float:
    """I(X; O) in bits from the per-observation masses, summed in a fixed order."""
    prior_marginal: dict = {}
    for masses in joint.values():
        for t, p in masses.items():
            prior_marginal[t] = prior_marginal.get(t, 0) + p
    terms = []
    for masses in joint.values():
        evidence = sum(masses.values())
        for t, p in masses.items():
            if p != 0:
                terms.append(float(p) * _log2_ratio(p, evidence * prior_marginal[t]))
    return max(math.fsum(terms), 0.0)


def _guessing(joint: dict) -> Probability:
    values = [max(masses.values()) for masses in joint.values()]
    return sum(values, _zero_like(values))


def _resolve_arithmetic(
    family: EncoderFamily, dataset_prior: DatasetPrior, arithmetic: str | None
) -> tuple[EncoderFamily, DatasetPrior]:
    arithmetic = (arithmetic or ARITHMETIC).lower()
    if arithmetic == "exact":
        return family, dataset_prior
    if arithmetic == "float":
        return family.as_float(), dataset_prior.as_float()
    raise UsageError(f"Unknown arithmetic mode {arithmetic!r}, expected 'exact' or 'float'")


@dataclass(frozen=True)
class ObservationReport:
    observation: Observation
    probability: Probability
    posterior: PosteriorTable
    label_posterior: PosteriorTable
    tv_distance: Probability

    def to_dict(self, instance: DiscreteInstance) -> dict:
        return {
            "encoded_samples": list(self.observation.encoded_samples),
            "label_config": [str(y) for y in self.observation.label_config],
            "observed_labels": {
                str(y): n for y, n in self.observation.observed_labels(instance).items()
            },
            "probability": format_probability(self.probability),
            "posterior": self.posterior.to_dict(),
            "label_posterior": self.label_posterior.to_dict(),
            "tv_distance": format_probability(self.tv_distance),
        }


@dataclass(frozen=True)
class PrivacyReport:
    mutual_information_bits: float
    max_guess_probability: float
    perfectly_private: bool
    per_observation: tuple
    partition: AnonymityPartition
    label_mutual_information_bits: float = 0.0

    def to_dict(self, instance: DiscreteInstance) -> dict:
        return {
            "mutual_information_bits": self.mutual_information_bits,
            "label_mutual_information_bits": self.label_mutual_information_bits,
            "max_guess_probability": self.max_guess_probability,
            "perfectly_private": self.perfectly_private,
            "lc_classes": self.partition.to_dict(),
            "observations": [o.to_dict(instance) for o in self.per_observation],
        }


def is_perfectly_private(
    instance: DiscreteInstance,
    family: EncoderFamily,
    dataset_prior: DatasetPrior,
    arithmetic: str | None = None,
) -> PrivacyReport:
    family, dataset_prior = _resolve_arithmetic(family, dataset_prior, arithmetic)
    joint = _observation_joint(instance, family, dataset_prior)
    per_observation = []
    private = True
    order = {t: i for i, t in enumerate(dataset_prior.tuples)}
    for observation, masses in joint.items():
        evidence = sum(masses.values())
        posterior = PosteriorTable(
            tuple((t, m / evidence) for t, m in sorted(masses.items(), key=lambda i: order[i[0]])),
            observation,
        )
        label_posterior = label_only_posterior(
            instance, dataset_prior, observation.observed_labels(instance)
        )
        distance = posterior.total_variation(label_posterior)
        if isinstance(distance, Fraction):
            private = private and distance == 0
        else:
            private = private and distance < FLOAT_TOLERANCE
        per_observation.append(
            ObservationReport(observation, evidence, posterior, label_posterior, distance)
        )
    report = PrivacyReport(
        mutual_information_bits=_mutual_information(joint),
        max_guess_probability=float(_guessing(joint)),
        perfectly_private=private,
        per_observation=tuple(per_observation),
        partition=partition_by_lc(instance, family),
        label_mutual_information_bits=label_mutual_information(instance, dataset_prior),
    )
    logger.debug(
        "Privacy report: %s observations, MI=%.6f bits, perfectly private=%s",
        len(per_observation),
        report.mutual_information_bits,
        report.perfectly_private,
    )
    return report


def compose_families(Fp: EncoderFamily, F: EncoderFamily) -> EncoderFamily:
    """𝓕′∘𝓕 as a distribution over functions; equal compositions have their weights summed."""
    if Fp.domain != F.domain:
        raise InstanceMismatch("The families act on different sample spaces")
    merged: dict = {}
    for Tp, wp in Fp:
        for T, w in F:
            composed = Tp.compose(T)
            if composed.image in merged:
                first, weight = merged[composed.image]
                merged[composed.image] = (first, weight + wp * w)
            else:
                merged[composed.image] = (composed, wp * w)
    logger.trace("Composed %s x %s members into %s functions", len(Fp), len(F), len(merged))
    members, weights = zip(*merged.values())
    return EncoderFamily(members, weights)


def mutual_information(
    instance: DiscreteInstance, family: EncoderFamily, dataset_prior: DatasetPrior
) -> float:
    """I(X_A; (Z, C)) in bits."""
    return _mutual_information(_observation_joint(instance, family, dataset_prior))


def guessing_probability(
    instance: DiscreteInstance, family: EncoderFamily, dataset_prior: DatasetPrior
) -> Probability:
    return _guessing(_observation_joint(instance, family, dataset_prior))


def label_mutual_information(instance: DiscreteInstance, dataset_prior: DatasetPrior) -> float:
    """I(X_A; Y_A) in bits, the information the labels alone carry."""
    dataset_prior.check_instance(instance)
    joint: dict = {}
    for t, p in dataset_prior:
        if p == 0:
            continue
        counts = Counter(instance.label(x) for x in t)
        key = tuple(sorted(counts.items(), key=lambda item: instance.label_rank(item[0])))
        masses = joint.setdefault(key, {})
        masses[t] = p
    return _mutual_information(joint)
