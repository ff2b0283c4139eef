"""Multi-bandwidth RBF kernel and the biased MMD² estimator with its closed-form gradient."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from neuraCrypt.config import BANDWIDTH_MULTIPLIERS
from neuraCrypt.errors import DimMismatch, EmptySet, UsageError

logger = logging.getLogger("neuraCrypt.MMD")

MEDIAN_HEURISTIC = "median-heuristic"
BIASED_V = "biased-V"


@dataclass(frozen=True)
class MMDConfig:
    bandwidth_multipliers: tuple = BANDWIDTH_MULTIPLIERS
    base_bandwidth: Union[float, str] = MEDIAN_HEURISTIC
    estimator: str = BIASED_V

    def __post_init__(self):
        multipliers = tuple(float(m) for m in self.bandwidth_multipliers)
        if not multipliers:
            raise UsageError("At least one kernel bandwidth is required")
        if any(not np.isfinite(m) or m <= 0 for m in multipliers):
            raise UsageError(f"Bandwidth multipliers must be positive, got {multipliers}")
        object.__setattr__(self, "bandwidth_multipliers", multipliers)
        if self.base_bandwidth != MEDIAN_HEURISTIC:
            base = float(self.base_bandwidth)
            if not np.isfinite(base) or base <= 0:
                raise UsageError(f"Base bandwidth must be positive, got {self.base_bandwidth}")
            object.__setattr__(self, "base_bandwidth", base)
        if self.estimator != BIASED_V:
            raise UsageError(f"Unsupported estimator {self.estimator!r}")

    def sigmas(self, base: float) -> np.ndarray:
        return np.asarray(self.bandwidth_multipliers) * base

    def resolve_base(self, *sets: np.ndarray) -> float:
        if self.base_bandwidth == MEDIAN_HEURISTIC:
            return median_bandwidth(*sets)
        return float(self.base_bandwidth)


def _as_rows(vectors: Sequence, what: str) -> np.ndarray:
    array = np.asarray(vectors, dtype=np.float64)
    if array.size == 0:
        raise EmptySet(f"{what} is empty")
    if array.ndim == 1:
        array = array[:, np.newaxis]
    elif array.ndim > 2:
        array = array.reshape(-1, array.shape[-1])
    return array


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] != B.shape[1]:
        raise DimMismatch(f"Vectors of dimension {A.shape[1]} and {B.shape[1]} were compared")
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    return np.maximum(a2[:, np.newaxis] + b2[np.newaxis, :] - 2.0 * A @ B.T, 0.0)


def median_bandwidth(*sets: np.ndarray) -> float:
    """Median of the pooled pairwise squared distances, 1.0 when they all vanish."""
    pooled = np.concatenate([_as_rows(s, "Bandwidth sample") for s in sets])
    d = pairwise_sq_dists(pooled, pooled)
    upper = d[np.triu_indices(len(pooled), k=1)]
    if upper.size == 0:
        return 1.0
    median = float(np.median(upper))
    return median if median > 0 else 1.0


def kernel_terms(D: np.ndarray, sigmas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kernel matrix Σ_s exp(-D/2σ_s) and its weight matrix Σ_s exp(-D/2σ_s)/σ_s."""
    K = np.zeros_like(D)
    G = np.zeros_like(D)
    for sigma in sigmas:
        k = np.exp(-D / (2.0 * sigma))
        K += k
        G += k / sigma
    return K, G


def rbf_kernel(z_i: Sequence, z_j: Sequence, config: MMDConfig, base: float = 1.0) -> float:
    a = np.asarray(z_i, dtype=np.float64).ravel()
    b = np.asarray(z_j, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimMismatch(f"Vectors of dimension {a.size} and {b.size} were compared")
    d = float(np.sum((a - b) ** 2))
    return float(sum(np.exp(-d / (2.0 * s)) for s in config.sigmas(base)))


def mmd2(Z: Sequence, Zs: Sequence, config: MMDConfig, base: float | None = None) -> float:
    """Biased V-statistic MMD² between two vector sets, diagonals included."""
    Z = _as_rows(Z, "Z")
    Zs = _as_rows(Zs, "Z*")
    if Z.shape[1] != Zs.shape[1]:
        raise DimMismatch(f"Vectors of dimension {Z.shape[1]} and {Zs.shape[1]} were compared")
    base = config.resolve_base(Z, Zs) if base is None else base
    loss, _ = mmd2_and_output_gradient(Z, Zs, config.sigmas(base))
    return loss


def mmd2_and_output_gradient(
    Z: np.ndarray, Y: np.ndarray, sigmas: np.ndarray
) -> tuple[float, np.ndarray]:
    """MMD²(Z, Y) and its gradient with respect to the rows of Y."""
    n, m = len(Z), len(Y)
    K_zz, _ = kernel_terms(pairwise_sq_dists(Z, Z), sigmas)
    K_yy, G = kernel_terms(pairwise_sq_dists(Y, Y), sigmas)
    K_zy, H = kernel_terms(pairwise_sq_dists(Z, Y), sigmas)
    loss = K_zz.mean() + K_yy.mean() - 2.0 * K_zy.mean()
    grad = -(2.0 / m**2) * (G.sum(axis=1)[:, np.newaxis] * Y - G @ Y)
    grad += (2.0 / (n * m)) * (H.sum(axis=0)[:, np.newaxis] * Y - H.T @ Z)
    return float(loss), grad
