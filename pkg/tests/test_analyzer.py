from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest

from conftest import SIXTEEN_T
from neuraCrypt.analyzer import (
    anonymity_list,
    anonymity_list_size,
    compose_families,
    dataset_posterior,
    guessing_probability,
    is_perfectly_private,
    joint_posterior,
    label_configuration,
    label_mutual_information,
    label_only_posterior,
    lc_anonymity_summary,
    membership_probability,
    mutual_information,
    observe,
    partition_by_lc,
    possible_datasets,
)
from neuraCrypt.discrete import (
    DatasetPrior,
    DiscreteInstance,
    EncoderFamily,
    Observation,
    Permutation,
    enumerate_sym,
    f0_family,
    validate_permutation,
)
from neuraCrypt.errors import (
    InconsistentObservation,
    LengthMismatch,
    TooLarge,
    UsageError,
    ZeroEvidence,
)
from neuraCrypt.instance_io import load_instance


def test_sixteen_sample_label_configuration_and_anonymity(sixteen_samples):
    T = validate_permutation(sixteen_samples, SIXTEEN_T)
    config = label_configuration(sixteen_samples, T)
    assert "".join(config) == "-+---+-+---+----"
    assert anonymity_list_size(sixteen_samples, None, T) == 11_496_038_400
    assert anonymity_list_size(sixteen_samples, None, T) == math.factorial(4) * math.factorial(12)


def test_toy_partition(toy_instance, toy_family):
    assert lc_anonymity_summary(toy_instance, toy_family) == [
        ("(+,+,-,-,-)", 3),
        ("(-,+,-,-,+)", 1),
        ("(-,-,+,+,-)", 2),
    ]
    partition = partition_by_lc(toy_instance, toy_family)
    assert partition.min_size == 1
    assert partition.class_of(3)[1] == (3, 4)
    T1 = toy_family.members[0]
    assert [str(T) for T in anonymity_list(toy_instance, toy_family, T1)] == [
        "(2,1,5,4,3)",
        "(2,1,3,5,4)",
        "(1,2,3,5,4)",
    ]
    assert anonymity_list_size(toy_instance, toy_family, T1) == 3


def test_toy_possible_datasets(toy_instance, toy_family):
    observation = Observation.build(toy_instance, (1, 4, 5), "++---")
    assert possible_datasets(toy_instance, toy_family, observation) == [
        (2, 4, 3),
        (2, 5, 4),
        (1, 5, 4),
    ]


def test_observe_matches_the_published_view(toy_instance, toy_family):
    T1 = toy_family.members[0]
    observation = observe(toy_instance, T1, (2, 4, 3))
    assert observation.encoded_samples == (1, 4, 5)
    assert "".join(observation.label_config) == "++---"


def test_toy_uniform_posterior(toy_instance, toy_family, toy_prior):
    observation = Observation.build(toy_instance, (1, 4, 5), "++---")
    posterior = dataset_posterior(toy_instance, toy_family, toy_prior, observation)
    assert posterior.exact
    assert dict(posterior.entries) == {
        (1, 4, 5): Fraction(1, 3),
        (2, 3, 4): Fraction(1, 3),
        (2, 4, 5): Fraction(1, 3),
    }
    assert membership_probability(posterior, 1) == Fraction(1, 3)
    assert membership_probability(posterior, 2) == Fraction(2, 3)
    assert membership_probability(posterior, 4) == 1


def test_toy_weighted_posterior(toy_instance, toy_family):
    prior = DatasetPrior.from_pairs(
        [
            ((2, 3, 4), "1/10"),
            ((2, 4, 5), "1/10"),
            ((1, 4, 5), "2/5"),
            ((1, 2, 3), "2/5"),
        ]
    )
    observation = Observation.build(toy_instance, (1, 4, 5), "++---")
    posterior = dataset_posterior(toy_instance, toy_family, prior, observation)
    assert membership_probability(posterior, 1) == Fraction(2, 3)
    assert membership_probability(posterior, 2) == Fraction(1, 3)
    assert posterior.probability((1, 2, 3)) == 0


def test_toy_branches(toy_instance, toy_family, toy_prior):
    t4 = Observation.build(toy_instance, (1, 2, 3), "--++-")
    assert possible_datasets(toy_instance, toy_family, t4) == [(3, 4, 2), (4, 3, 1)]
    posterior = dataset_posterior(toy_instance, toy_family, toy_prior, t4)
    assert membership_probability(posterior, 3) == 1
    assert membership_probability(posterior, 4) == 1

    t6 = Observation.build(toy_instance, (2, 3, 4), "-+--+")
    assert possible_datasets(toy_instance, toy_family, t6) == [(2, 4, 3)]
    posterior = dataset_posterior(toy_instance, toy_family, toy_prior, t6)
    assert posterior.entries == (((2, 3, 4), Fraction(1)),)


def test_inconsistent_and_zero_evidence(toy_instance, toy_family, toy_prior):
    impossible = Observation.build(toy_instance, (1, 2, 3), "+-+--")
    with pytest.raises(InconsistentObservation):
        possible_datasets(toy_instance, toy_family, impossible)
    point = DatasetPrior.point((1, 2, 3))
    observation = Observation.build(toy_instance, (1, 4, 5), "++---")
    with pytest.raises(ZeroEvidence):
        dataset_posterior(toy_instance, toy_family, point, observation)


def test_label_only_posterior(toy_instance, toy_prior):
    posterior = label_only_posterior(toy_instance, toy_prior, ["+", "-", "-"])
    assert len(posterior) == 6
    assert set(p for _, p in posterior) == {Fraction(1, 6)}
    with pytest.raises(LengthMismatch):
        label_only_posterior(toy_instance, toy_prior, [])
    with pytest.raises(ZeroEvidence):
        label_only_posterior(toy_instance, toy_prior, ["+", "+", "+"])


def test_toy_is_not_perfectly_private(toy_instance, toy_family, toy_prior):
    report = is_perfectly_private(toy_instance, toy_family, toy_prior)
    assert not report.perfectly_private
    assert report.mutual_information_bits > 0
    assert sum(o.probability for o in report.per_observation) == 1


def test_composed_family_partition_sizes():
    spec = load_instance("composed_family.json")
    assert partition_by_lc(spec.instance, spec.base_family).sizes == (3, 2)
    assert len(spec.family) == 10
    assert sorted(partition_by_lc(spec.instance, spec.family).sizes) == [3, 3, 4]


def test_f0_is_perfectly_private_on_toy(toy_instance, toy_prior):
    family = f0_family(toy_instance)
    report = is_perfectly_private(toy_instance, family, toy_prior)
    assert report.perfectly_private
    assert all(o.tv_distance == 0 for o in report.per_observation)
    assert report.mutual_information_bits == pytest.approx(
        label_mutual_information(toy_instance, toy_prior), abs=1e-12
    )


def test_float_mode_agrees(toy_instance, toy_prior):
    family = f0_family(toy_instance)
    report = is_perfectly_private(toy_instance, family, toy_prior, arithmetic="float")
    assert report.perfectly_private
    assert all(isinstance(o.tv_distance, float) for o in report.per_observation)
    with pytest.raises(UsageError):
        is_perfectly_private(toy_instance, family, toy_prior, arithmetic="decimal")


def test_proposition2_counterexample():
    f0 = load_instance("label_preserving.json")
    fprime = load_instance("label_swap.json")
    mi_f0 = mutual_information(f0.instance, f0.family, f0.dataset_prior)
    mi_fprime = mutual_information(fprime.instance, fprime.family, fprime.dataset_prior)
    assert set(fprime.family.members[:4]) == set(f0.family.members)
    assert mi_f0 == pytest.approx(1.2516291673878228, abs=1e-9)
    assert mi_fprime == pytest.approx(1.5182958340544896, abs=1e-9)
    assert mi_fprime > mi_f0
    partition = partition_by_lc(fprime.instance, fprime.family)
    singletons = [config for config, members in partition.classes if len(members) == 1]
    assert ["".join(config) for config in singletons] == ["--++"]


def test_guessing_probability_is_exact(toy_instance, toy_family, toy_prior):
    # LC classes of sizes 3, 2 and 1 contribute 15, 12 and 10 sixtieths
    guess = guessing_probability(toy_instance, toy_family, toy_prior)
    assert isinstance(guess, Fraction)
    assert guess == Fraction(37, 60)


def test_identity_family_reveals_the_dataset(toy_instance, toy_prior):
    identity = EncoderFamily.uniform([Permutation.identity(toy_instance)])
    assert guessing_probability(toy_instance, identity, toy_prior) == 1
    assert mutual_information(toy_instance, identity, toy_prior) == pytest.approx(
        math.log2(10), abs=1e-12
    )
    rand = random.Random(11)
    for _ in range(30):
        instance = _random_instance(rand, 5)
        prior = _random_prior(rand, instance)
        identity = EncoderFamily.uniform([Permutation.identity(instance)])
        entropy = -math.fsum(float(p) * math.log2(p) for _, p in prior)
        assert guessing_probability(instance, identity, prior) == 1
        assert mutual_information(instance, identity, prior) == pytest.approx(entropy, abs=1e-9)


@pytest.mark.parametrize("k", [2, 3])
def test_label_preserving_guess_over_disjoint_candidates(k):
    instance = DiscreteInstance(tuple(range(1, 7)), tuple("+-+-+-"), ("+", "-"))
    prior = DatasetPrior.uniform([(1, 2), (3, 4), (5, 6)][:k])
    guess = guessing_probability(instance, f0_family(instance), prior)
    assert guess == Fraction(1, k)


def test_point_prior_leaks_nothing(toy_instance, toy_family):
    prior = DatasetPrior.point((2, 3, 5))
    assert mutual_information(toy_instance, toy_family, prior) == 0
    assert guessing_probability(toy_instance, toy_family, prior) == 1
    rand = random.Random(5)
    for _ in range(30):
        instance = _random_instance(rand, 5)
        t = tuple(rand.sample(instance.samples, rand.randint(1, instance.size)))
        family = _random_family(rand, instance)
        assert mutual_information(instance, family, DatasetPrior.point(t)) == 0


def test_composition_keeps_the_smallest_anonymity_list():
    spec = load_instance("composed_family.json")
    inner = partition_by_lc(spec.instance, spec.base_family)
    assert partition_by_lc(spec.instance, spec.family).min_size >= inner.min_size
    rand = random.Random(31)
    for _ in range(100):
        instance = _random_instance(rand, 5)
        inner = _random_family(rand, instance)
        composed = compose_families(_random_family(rand, instance), inner)
        assert (
            partition_by_lc(instance, composed).min_size
            >= partition_by_lc(instance, inner).min_size
        )


def test_symmetric_group_composed_with_itself_is_uniform(toy_instance):
    sym = enumerate_sym(toy_instance)
    composed = compose_families(sym, sym)
    assert len(composed) == 120
    assert set(composed.members) == set(sym.members)
    assert set(composed.weights) == {Fraction(1, 120)}


def test_pair_cap(monkeypatch, toy_instance, toy_family, toy_prior):
    monkeypatch.setattr("neuraCrypt.analyzer.PAIR_CAP", 10)
    with pytest.raises(TooLarge):
        mutual_information(toy_instance, toy_family, toy_prior)


def _random_prior(rand: random.Random, instance: DiscreteInstance) -> DatasetPrior:
    k = rand.randint(1, instance.size - 1)
    subsets = list(itertools.combinations(instance.samples, k))
    chosen = rand.sample(subsets, rand.randint(1, len(subsets)))
    weights = [rand.randint(1, 9) for _ in chosen]
    total = sum(weights)
    pairs = []
    for subset, weight in zip(chosen, weights):
        order = list(subset)
        rand.shuffle(order)
        pairs.append((tuple(order), Fraction(weight, total)))
    return DatasetPrior.from_pairs(pairs)


def _random_instance(rand: random.Random, max_size: int) -> DiscreteInstance:
    size = rand.randint(2, max_size)
    labels = tuple(rand.choice("ab") for _ in range(size))
    return DiscreteInstance(tuple(range(size)), labels, ("a", "b"))


def _random_family(rand: random.Random, instance: DiscreteInstance) -> EncoderFamily:
    images = list(itertools.permutations(instance.samples))
    chosen = rand.sample(images, rand.randint(1, min(6, len(images))))
    weights = [rand.randint(1, 5) for _ in chosen]
    total = sum(weights)
    return EncoderFamily(
        [Permutation(image, instance.samples) for image in chosen],
        [Fraction(w, total) for w in weights],
    )


def test_label_preserving_family_is_perfectly_private_on_random_instances():
    rand = random.Random(2022)
    for _ in range(50):
        instance = _random_instance(rand, 6)
        prior = _random_prior(rand, instance)
        report = is_perfectly_private(instance, f0_family(instance), prior)
        assert report.perfectly_private
        assert all(o.tv_distance == 0 for o in report.per_observation)


def test_composition_never_increases_information():
    rand = random.Random(7)
    for _ in range(100):
        instance = _random_instance(rand, 5)
        prior = _random_prior(rand, instance)
        inner = _random_family(rand, instance)
        outer = _random_family(rand, instance)
        composed = compose_families(outer, inner)
        assert sum(composed.weights) == 1
        assert mutual_information(instance, composed, prior) <= mutual_information(
            instance, inner, prior
        ) + 1e-9


def test_joint_posterior_pairs_and_marginal(toy_instance, toy_family, toy_prior):
    observation = Observation.build(toy_instance, (1, 4, 5), "++---")
    joint = joint_posterior(toy_instance, toy_family, toy_prior, observation)
    assert len(joint) == 3
    assert all(p == Fraction(1, 3) for _, p in joint.entries)
    assert len({T for (_, T), _ in joint.entries}) == 3
    marginal = joint.marginal()
    assert dict(marginal.entries) == dict(
        dataset_posterior(toy_instance, toy_family, toy_prior, observation).entries
    )


def test_joint_posterior_single_pair(toy_instance):
    family = EncoderFamily.uniform([Permutation.identity(toy_instance)])
    observation = Observation.build(toy_instance, (1, 2, 3), "++---")
    joint = joint_posterior(toy_instance, family, DatasetPrior.point((1, 2, 3)), observation)
    assert joint.entries == ((((1, 2, 3), family.members[0]), 1),)
