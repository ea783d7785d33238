"""Portable counter-based random number generation.

Every source of randomness in this package (bootstrap sampling, split-feature
subsampling, synthetic data generation, anomaly injection) is driven by
SplitMix64, a counter-based 64-bit generator: the state is a Weyl sequence
``s_i = seed + i * GAMMA (mod 2**64)`` and the i-th output is ``mix64(s_i)``,
where ``mix64`` is the usual xor-shift/multiply finalizer. Because the i-th
output depends only on ``seed`` and ``i``, draws can be produced sequentially
or vectorised with identical results, and streams are reproducible across
platforms and processes.

Independent sub-streams are derived with :func:`mix_seed`, which folds integer
parts (tree index, row id, feature index, trial index, ...) into a parent seed
one at a time:

    mix_seed(seed, p1, p2, ...) = fold(seed) where
    fold step: s <- mix64(s + GAMMA * (p + 1) mod 2**64)

The numba kernels in ``_treekernels`` re-implement the same advance/finalize
steps; parity between the two implementations is covered by tests.
"""

from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

_U = np.uint64


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    z &= MASK
    z = ((z ^ (z >> 30)) * _MULT1) & MASK
    z = ((z ^ (z >> 27)) * _MULT2) & MASK
    return z ^ (z >> 31)


def mix_seed(seed: int, *parts: int) -> int:
    """Derive a sub-seed by folding integer parts into ``seed``.

    Deterministic, order-sensitive, and well dispersed; used to key
    per-tree, per-object, per-feature, and per-trial random streams.
    """
    s = seed & MASK
    for p in parts:
        if p < 0:
            raise ValueError(f"seed parts must be non-negative, got {p}")
        s = mix64((s + GAMMA * ((p & MASK) + 1)) & MASK)
    return s


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(_MULT1)
    z = (z ^ (z >> _U(27))) * _U(_MULT2)
    return z ^ (z >> _U(31))


class SplitMix64:
    """Sequential SplitMix64 stream with vectorised bulk draws.

    Bulk methods consume exactly as many counter steps as scalar draws
    would, so mixing scalar and vector calls keeps the stream aligned.
    """

    def __init__(self, seed: int) -> None:
        self._state = seed & MASK

    def next_uint64(self) -> int:
        self._state = (self._state + GAMMA) & MASK
        return mix64(self._state)

    def _raw(self, n: int) -> np.ndarray:
        """n raw 64-bit outputs, advancing the state by n steps."""
        steps = _U(self._state) + _U(GAMMA) * np.arange(1, n + 1, dtype=np.uint64)
        self._state = (self._state + GAMMA * n) & MASK
        return _mix64_vec(steps)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1) using the top 53 bits."""
        return (self._raw(n) >> _U(11)) * (2.0 ** -53)

    def normal(self, n: int) -> np.ndarray:
        """n standard normal doubles via Box-Muller on uniform pairs."""
        pairs = (n + 1) // 2
        u1 = (self._raw(pairs) >> _U(11)).astype(np.float64)
        u2 = self.uniform(pairs)
        # shift u1 into (0, 1] so log never sees zero
        u1 = (u1 + 1.0) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers_below(self, bound: int, n: int) -> np.ndarray:
        """n integers uniform on {0, ..., bound-1} by modulo reduction.

        The modulo bias is negligible for the small bounds used here
        (bound <= a few thousand versus 2**64).
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self._raw(n) % _U(bound)).astype(np.int64)

    def choice_without_replacement(self, population: int, k: int) -> np.ndarray:
        """k distinct integers from {0, ..., population-1}, partial Fisher-Yates."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} from population of {population}")
        pool = np.arange(population, dtype=np.int64)
        for t in range(k):
            j = t + int(self.next_uint64() % (population - t))
            pool[t], pool[j] = pool[j], pool[t]
        return pool[:k].copy()
