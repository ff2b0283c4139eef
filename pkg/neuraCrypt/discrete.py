"""Finite sample spaces, permutation encoders, encoder families and dataset priors.

Every object here is immutable once built. Probabilities are kept as
:class:`fractions.Fraction` whenever the caller supplies exact values and as
``float`` as soon as any float is supplied; ``as_float()`` gives a float view.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Any, Hashable, Iterable, Iterator, Mapping, Sequence, Tuple, Union

from neuraCrypt.config import FAMILY_CAP, SYM_CAP
from neuraCrypt.errors import (
    DuplicateImage,
    DuplicateMember,
    InstanceMismatch,
    InvalidDistribution,
    InvalidInstance,
    LengthMismatch,
    NotInFamily,
    TooLarge,
    UnknownSample,
)

logger = logging.getLogger("neuraCrypt.Discrete")

Sample = Hashable
Label = Hashable
Probability = Union[Fraction, float]

FLOAT_TOLERANCE = 1e-12


def as_fraction(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise InvalidDistribution(f"{value!r} is not a probability")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise InvalidDistribution(f"{value!r} is not a probability") from e
    raise InvalidDistribution(f"{value!r} is not a probability")


def coerce_distribution(values: Iterable[Any], what: str = "weights") -> tuple[Probability, ...]:
    """Validate a probability vector, exact unless a float is present."""
    values = list(values)
    if not values:
        raise InvalidDistribution(f"{what} are empty")
    if any(isinstance(v, float) for v in values):
        out = tuple(float(v) for v in values)
        total = math.fsum(out)
        ok = abs(total - 1.0) <= FLOAT_TOLERANCE
    else:
        out = tuple(as_fraction(v) for v in values)
        total = sum(out, Fraction(0))
        ok = total == 1
    if any(v < 0 for v in out):
        raise InvalidDistribution(f"{what} contain a negative value")
    if not ok:
        raise InvalidDistribution(f"{what} sum to {total}, not 1")
    return out


def is_exact(values: Iterable[Probability]) -> bool:
    return all(isinstance(v, Fraction) for v in values)


@dataclass(frozen=True)
class DiscreteInstance:
    """The ordered sample space with its labeling.

    ``labels`` is parallel to ``samples``; ``label_alphabet`` fixes the order of
    labels used when label configurations are sorted.
    """

    samples: tuple
    labels: tuple
    label_alphabet: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "label_alphabet", tuple(self.label_alphabet))
        if not self.samples:
            raise InvalidInstance("The sample space is empty")
        if not self.label_alphabet:
            raise InvalidInstance("The label alphabet is empty")
        if len(set(self.samples)) != len(self.samples):
            dupes = [x for x, c in Counter(self.samples).items() if c > 1]
            raise InvalidInstance(f"Samples listed more than once: {dupes}")
        if len(set(self.label_alphabet)) != len(self.label_alphabet):
            raise InvalidInstance("The label alphabet lists a label twice")
        if len(self.labels) != len(self.samples):
            raise LengthMismatch(
                f"{len(self.labels)} labels given for {len(self.samples)} samples"
            )
        unknown = set(self.labels) - set(self.label_alphabet)
        if unknown:
            raise InvalidInstance(f"Labels {sorted(map(str, unknown))} are not in the alphabet")

    @classmethod
    def from_labels(
        cls,
        samples: Sequence[Sample],
        labels: Sequence[Label] | Mapping[Sample, Label],
        label_alphabet: Sequence[Label] | None = None,
    ) -> DiscreteInstance:
        samples = tuple(samples)
        if isinstance(labels, Mapping):
            try:
                labels = tuple(labels[x] for x in samples)
            except KeyError as e:
                raise InvalidInstance(f"Sample {e.args[0]!r} has no label") from e
        labels = tuple(labels)
        if label_alphabet is None:
            label_alphabet = tuple(dict.fromkeys(labels))
        return cls(samples, labels, tuple(label_alphabet))

    @property
    def size(self) -> int:
        return len(self.samples)

    @cached_property
    def _positions(self) -> dict:
        return {x: i for i, x in enumerate(self.samples)}

    @cached_property
    def _label_of(self) -> dict:
        return dict(zip(self.samples, self.labels))

    @cached_property
    def _label_rank(self) -> dict:
        return {y: i for i, y in enumerate(self.label_alphabet)}

    def __contains__(self, x: Sample) -> bool:
        return x in self._positions

    def position(self, x: Sample) -> int:
        try:
            return self._positions[x]
        except (KeyError, TypeError):
            raise UnknownSample(f"{x!r} is not a sample of the instance")

    def label(self, x: Sample) -> Label:
        try:
            return self._label_of[x]
        except (KeyError, TypeError):
            raise UnknownSample(f"{x!r} is not a sample of the instance")

    def label_rank(self, y: Label) -> int:
        return self._label_rank[y]

    def sort_samples(self, xs: Iterable[Sample]) -> tuple:
        return tuple(sorted(xs, key=self.position))

    @cached_property
    def lc_vector(self) -> LCVector:
        return LCVector(self.labels)


@dataclass(frozen=True)
class LCVector:
    """A label configuration: entry i is the label that lands on sample i."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Label]:
        return iter(self.entries)

    def __getitem__(self, i: int) -> Label:
        return self.entries[i]

    def sort_key(self, instance: DiscreteInstance) -> tuple[int, ...]:
        return tuple(instance.label_rank(y) for y in self.entries)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.entries)) + ")"


@dataclass(frozen=True)
class Permutation:
    """A bijection of the sample space; ``image[i]`` is T(x_i)."""

    image: tuple
    domain: tuple = field(repr=False)

    @cached_property
    def _forward(self) -> dict:
        return dict(zip(self.domain, self.image))

    @cached_property
    def _backward(self) -> dict:
        return dict(zip(self.image, self.domain))

    def __call__(self, x: Sample) -> Sample:
        try:
            return self._forward[x]
        except (KeyError, TypeError):
            raise UnknownSample(f"{x!r} is not a sample of the instance")

    def preimage(self, y: Sample) -> Sample:
        try:
            return self._backward[y]
        except (KeyError, TypeError):
            raise UnknownSample(f"{y!r} is not a sample of the instance")

    def inverse(self) -> Permutation:
        return Permutation(tuple(self._backward[x] for x in self.domain), self.domain)

    def compose(self, other: Permutation) -> Permutation:
        """self ∘ other, ``other`` is applied first."""
        if other.domain != self.domain:
            raise InstanceMismatch("Permutations act on different sample spaces")
        return Permutation(tuple(self._forward[y] for y in other.image), self.domain)

    @property
    def is_identity(self) -> bool:
        return self.image == self.domain

    @classmethod
    def identity(cls, instance: DiscreteInstance) -> Permutation:
        return cls(instance.samples, instance.samples)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.image)) + ")"


def validate_permutation(instance: DiscreteInstance, image: Sequence[Sample]) -> Permutation:
    image = tuple(image)
    if len(image) != instance.size:
        raise LengthMismatch(f"Permutation has {len(image)} entries, expected {instance.size}")
    for y in image:
        if y not in instance:
            raise UnknownSample(f"{y!r} is not a sample of the instance")
    if len(set(image)) != len(image):
        dupes = [y for y, c in Counter(image).items() if c > 1]
        raise DuplicateImage(f"Samples {dupes} appear more than once in {image}")
    return Permutation(image, instance.samples)


def apply_encoder(T: Permutation, X: Sequence[Sample]) -> tuple:
    return tuple(T(x) for x in X)


def invert(T: Permutation) -> Permutation:
    return T.inverse()


@dataclass(frozen=True)
class EncoderFamily:
    members: tuple
    weights: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise InvalidDistribution("An encoder family needs at least one member")
        if len(self.weights) != len(members):
            raise LengthMismatch(f"{len(self.weights)} weights given for {len(members)} members")
        domain = members[0].domain
        if any(m.domain != domain for m in members):
            raise InstanceMismatch("Family members act on different sample spaces")
        if len({m.image for m in members}) != len(members):
            dupes = [str(m) for m, c in Counter(members).items() if c > 1]
            raise DuplicateMember(f"Family lists {dupes} more than once")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", coerce_distribution(self.weights, "Encoder weights"))

    @classmethod
    def uniform(cls, members: Iterable[Permutation]) -> EncoderFamily:
        members = tuple(members)
        return cls(members, (Fraction(1, len(members)),) * len(members))

    @property
    def domain(self) -> tuple:
        return self.members[0].domain

    @property
    def exact(self) -> bool:
        return is_exact(self.weights)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Tuple[Permutation, Probability]]:
        return zip(self.members, self.weights)

    @cached_property
    def _index(self) -> dict:
        return {m.image: i for i, m in enumerate(self.members)}

    def index(self, T: Permutation) -> int:
        if T.domain != self.domain or T.image not in self._index:
            raise NotInFamily(f"{T} is not a member of the family")
        return self._index[T.image]

    def __contains__(self, T: Permutation) -> bool:
        return T.domain == self.domain and T.image in self._index

    def weight_of(self, T: Permutation) -> Probability:
        return self.weights[self.index(T)]

    def as_float(self) -> EncoderFamily:
        return EncoderFamily(self.members, tuple(float(w) for w in self.weights))


@dataclass(frozen=True)
class DatasetPrior:
    """Distribution over Alice's dataset, modeled as ordered tuples of distinct samples."""

    support: tuple

    def __post_init__(self):
        pairs = tuple((tuple(t), p) for t, p in self.support)
        if not pairs:
            raise InvalidDistribution("A dataset prior needs at least one tuple")
        k = len(pairs[0][0])
        if k == 0:
            raise LengthMismatch("Dataset tuples must contain at least one sample")
        for t, _ in pairs:
            if len(t) != k:
                raise LengthMismatch(f"Tuple {t} has length {len(t)}, expected {k}")
            if len(set(t)) != len(t):
                raise DuplicateImage(f"Tuple {t} repeats a sample")
        if len({t for t, _ in pairs}) != len(pairs):
            raise DuplicateMember("A tuple is listed twice in the dataset prior")
        probabilities = coerce_distribution((p for _, p in pairs), "Dataset prior")
        object.__setattr__(
            self, "support", tuple((t, p) for (t, _), p in zip(pairs, probabilities))
        )

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[Sequence[Sample], Any]]) -> DatasetPrior:
        return cls(tuple(pairs))

    @classmethod
    def uniform(cls, tuples: Iterable[Sequence[Sample]]) -> DatasetPrior:
        tuples = [tuple(t) for t in tuples]
        return cls(tuple((t, Fraction(1, len(tuples))) for t in tuples))

    @classmethod
    def uniform_subsets(cls, instance: DiscreteInstance, k: int) -> DatasetPrior:
        """Uniform over all k-subsets, each listed once in instance order."""
        if not 1 <= k <= instance.size:
            raise LengthMismatch(f"Cannot draw {k} samples from {instance.size}")
        return cls.uniform(itertools.combinations(instance.samples, k))

    @classmethod
    def point(cls, t: Sequence[Sample]) -> DatasetPrior:
        return cls(((tuple(t), Fraction(1)),))

    @property
    def k(self) -> int:
        return len(self.support[0][0])

    @property
    def tuples(self) -> tuple:
        return tuple(t for t, _ in self.support)

    @property
    def exact(self) -> bool:
        return is_exact(p for _, p in self.support)

    def __len__(self) -> int:
        return len(self.support)

    def __iter__(self) -> Iterator[Tuple[tuple, Probability]]:
        return iter(self.support)

    def probability(self, t: Sequence[Sample]) -> Probability:
        return dict(self.support).get(tuple(t), Fraction(0) if self.exact else 0.0)

    @cached_property
    def by_set(self) -> dict:
        groups: dict = {}
        for t, p in self.support:
            groups.setdefault(frozenset(t), []).append((t, p))
        return groups

    def check_instance(self, instance: DiscreteInstance) -> None:
        for t, _ in self.support:
            for x in t:
                instance.position(x)

    def as_float(self) -> DatasetPrior:
        return DatasetPrior(tuple((t, float(p)) for t, p in self.support))


@dataclass(frozen=True)
class Observation:
    """What Eve sees: the released samples in instance order and LC(T_A)."""

    encoded_samples: tuple
    label_config: LCVector

    @classmethod
    def build(
        cls,
        instance: DiscreteInstance,
        encoded_samples: Iterable[Sample],
        label_config: Sequence[Label] | LCVector,
    ) -> Observation:
        encoded = tuple(encoded_samples)
        if len(set(encoded)) != len(encoded):
            raise DuplicateImage(f"Encoded samples {encoded} repeat a sample")
        encoded = instance.sort_samples(encoded)
        config = label_config if isinstance(label_config, LCVector) else LCVector(label_config)
        if len(config) != instance.size:
            raise LengthMismatch(
                f"Label configuration has {len(config)} entries, expected {instance.size}"
            )
        unknown = set(config) - set(instance.label_alphabet)
        if unknown:
            raise InvalidInstance(f"Labels {sorted(map(str, unknown))} are not in the alphabet")
        return cls(encoded, config)

    def observed_labels(self, instance: DiscreteInstance) -> Counter:
        """Y_A, read off the label configuration at the released positions."""
        return Counter(self.label_config[instance.position(z)] for z in self.encoded_samples)


def _ordered_label_classes(instance: DiscreteInstance) -> list[tuple[Label, tuple]]:
    classes: dict = {}
    for x, y in zip(instance.samples, instance.labels):
        classes.setdefault(y, []).append(x)
    return [(y, tuple(classes[y])) for y in instance.label_alphabet if y in classes]


def label_classes(instance: DiscreteInstance) -> dict:
    return {y: frozenset(xs) for y, xs in _ordered_label_classes(instance)}


def label_preserving_count(instance: DiscreteInstance) -> int:
    """∏_y |X^y|!, the size of the label-preserving family."""
    return math.prod(math.factorial(len(xs)) for _, xs in _ordered_label_classes(instance))


def enumerate_sym(instance: DiscreteInstance, cap: int | None = None) -> EncoderFamily:
    cap = SYM_CAP if cap is None else cap
    if instance.size > cap:
        raise TooLarge("Sym(X) sample space", instance.size, cap)
    members = tuple(
        Permutation(image, instance.samples) for image in itertools.permutations(instance.samples)
    )
    logger.trace("Enumerated Sym(X) with %s members", len(members))
    return EncoderFamily.uniform(members)


def f0_family(instance: DiscreteInstance, cap: int | None = None) -> EncoderFamily:
    cap = FAMILY_CAP if cap is None else cap
    count = label_preserving_count(instance)
    if count > cap:
        raise TooLarge("Label-preserving family", count, cap)
    classes = [xs for _, xs in _ordered_label_classes(instance)]
    members = []
    for images in itertools.product(*(itertools.permutations(xs) for xs in classes)):
        mapping = {}
        for xs, ys in zip(classes, images):
            mapping.update(zip(xs, ys))
        members.append(Permutation(tuple(mapping[x] for x in instance.samples), instance.samples))
    logger.trace("Enumerated the label-preserving family with %s members", len(members))
    return EncoderFamily.uniform(members)
