"""Counter-based splitmix64 and the Gaussian stream every key derives its weights from.

Output ``k`` (0-based) of a generator seeded with ``s`` is ``mix(s + (k + 1) * GAMMA)``
modulo 2**64, so any block of the stream can be produced independently of the
others. Uniforms are ``((x >> 11) + 1) * 2**-53`` in (0, 1]; normals come from
Box-Muller on consecutive uniform pairs, cosine branch first.
"""
from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB
NONCE_DOMAIN = 0xD1B54A32D192ED03

_GAMMA = np.uint64(GAMMA)
_MIX_A = np.uint64(MIX_A)
_MIX_B = np.uint64(MIX_B)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def to_unit(x: int) -> float:
    return ((x >> 11) + 1) * _INV_2_53


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def next_unit(self) -> float:
        return to_unit(self.next_u64())

    def below(self, bound: int) -> int:
        return self.next_u64() % bound


def splitmix64_block(seed: int, start: int, count: int) -> np.ndarray:
    """Raw outputs ``start .. start + count - 1`` as uint64."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + counters * _GAMMA
        z = (z ^ (z >> _S30)) * _MIX_A
        z = (z ^ (z >> _S27)) * _MIX_B
    return z ^ (z >> _S31)


def uniform_block(seed: int, start: int, count: int) -> np.ndarray:
    raw = splitmix64_block(seed, start, count)
    return ((raw >> _S11) + np.uint64(1)).astype(np.float64) * _INV_2_53


def gaussian_block(seed: int, start: int, count: int) -> np.ndarray:
    """Standard normals with global indices ``start .. start + count - 1``."""
    if count <= 0:
        return np.zeros(0, dtype=np.float64)
    first_pair = start // 2
    last_pair = (start + count - 1) // 2
    u = uniform_block(seed, 2 * first_pair, 2 * (last_pair - first_pair + 1))
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = _TWO_PI * u2
    z = np.empty(2 * len(u1), dtype=np.float64)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    offset = start - 2 * first_pair
    return z[offset : offset + count]


class GaussianStream:
    """Sequential reader over the Gaussian stream of one seed."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.cursor = 0

    def take(self, count: int) -> np.ndarray:
        out = gaussian_block(self.seed, self.cursor, count)
        self.cursor += count
        return out


def derive_nonce(seed: int, counter: int) -> int:
    """Default per-sample shuffle nonce for the ``counter``-th encoded sample."""
    return mix64(((seed ^ NONCE_DOMAIN) + (counter + 1) * GAMMA) & MASK64)


def fisher_yates(n: int, seed: int) -> list[int]:
    order = list(range(n))
    rng = SplitMix64(seed)
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return order
