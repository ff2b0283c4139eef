from __future__ import annotations

import math

import numpy as np
import pytest

from neuraCrypt.attacks import LINEAR, TWO_LAYER, AttackerModel, mmd2_gradient
from neuraCrypt.errors import DimMismatch, EmptySet, UsageError
from neuraCrypt.mmd import (
    MMDConfig,
    median_bandwidth,
    mmd2,
    mmd2_and_output_gradient,
    rbf_kernel,
)


def test_rbf_kernel_values():
    five = MMDConfig((0.5, 1, 2, 4, 8), base_bandwidth=1.0)
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], five) == pytest.approx(5.0)
    one = MMDConfig((1.0,), base_bandwidth=1.0)
    assert rbf_kernel([0.0, 0.0], [1.0, 1.0], one) == pytest.approx(math.exp(-1.0))
    with pytest.raises(DimMismatch):
        rbf_kernel([0.0], [0.0, 1.0], one)


def test_mmd_of_a_set_with_itself_vanishes(rng):
    Z = rng.normal(size=(20, 3))
    assert mmd2(Z, Z, MMDConfig()) == pytest.approx(0.0, abs=1e-12)


def test_single_point_sets():
    config = MMDConfig((1.0,), base_bandwidth=1.0)
    assert mmd2([[0.0]], [[2.0]], config) == pytest.approx(2.0 - 2.0 * math.exp(-2.0))


def test_mmd_grows_with_separation(rng):
    config = MMDConfig(base_bandwidth=1.0)
    Z = rng.normal(size=(30, 2))
    near = mmd2(Z, rng.normal(size=(30, 2)) + 0.5, config)
    far = mmd2(Z, rng.normal(size=(30, 2)) + 3.0, config)
    assert 0 < near < far


def test_mmd_input_errors():
    config = MMDConfig()
    with pytest.raises(EmptySet):
        mmd2([], [[1.0]], config)
    with pytest.raises(DimMismatch):
        mmd2([[1.0, 2.0]], [[1.0]], config)


def test_config_validation():
    with pytest.raises(UsageError):
        MMDConfig(())
    with pytest.raises(UsageError):
        MMDConfig((1.0, -2.0))
    with pytest.raises(UsageError):
        MMDConfig(base_bandwidth=0.0)
    with pytest.raises(UsageError):
        MMDConfig(estimator="unbiased-U")
    assert MMDConfig((1, 2)).bandwidth_multipliers == (1.0, 2.0)


def test_median_bandwidth_falls_back_to_one():
    assert median_bandwidth(np.zeros((4, 2))) == 1.0
    assert median_bandwidth(np.array([[0.0], [2.0]])) == pytest.approx(4.0)


def test_output_gradient_matches_finite_differences(rng):
    Z = rng.normal(size=(6, 2))
    Y = rng.normal(size=(5, 2))
    sigmas = np.array([0.5, 1.0, 2.0])
    _, grad = mmd2_and_output_gradient(Z, Y, sigmas)
    eps = 1e-6
    for i in range(len(Y)):
        for j in range(Y.shape[1]):
            up, down = Y.copy(), Y.copy()
            up[i, j] += eps
            down[i, j] -= eps
            numeric = (
                mmd2_and_output_gradient(Z, up, sigmas)[0]
                - mmd2_and_output_gradient(Z, down, sigmas)[0]
            ) / (2 * eps)
            assert grad[i, j] == pytest.approx(numeric, rel=1e-4, abs=1e-7)


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("kind", [LINEAR, TWO_LAYER])
def test_attacker_gradient_matches_finite_differences(kind, seed):
    rng = np.random.default_rng(seed)
    attacker = AttackerModel.initialize(kind, 8, 8, patch_size=1, width=8, seed=seed + 11)
    if kind == TWO_LAYER:
        attacker.params["b1"] = rng.normal(scale=0.1, size=8)
        attacker.params["b2"] = rng.normal(scale=0.1, size=8)
    X = rng.uniform(size=(7, 8))
    Z = rng.normal(size=(6, 8))
    config = MMDConfig((1.0, 4.0, 16.0), base_bandwidth=1.0)
    _, grads = mmd2_gradient(attacker, X, Z, config)
    eps = 1e-6
    for name, param in attacker.params.items():
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + eps
            up, _ = mmd2_gradient(attacker, X, Z, config)
            param[index] = original - eps
            down, _ = mmd2_gradient(attacker, X, Z, config)
            param[index] = original
            assert grads[name][index] == pytest.approx((up - down) / (2 * eps), rel=1e-4, abs=1e-7)
