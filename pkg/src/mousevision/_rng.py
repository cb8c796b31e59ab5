"""Counter-based deterministic random number generator.

All randomness in this package (weight initialization, shuffling, frame
synthesis) flows through this one generator so that every result is a pure
function of a 64-bit seed. The generator is splitmix64 used in counter mode:

    value(seed, i) = mix64((seed + (i + 1) * GOLDEN) mod 2**64)

where ``GOLDEN = 0x9E3779B97F4A7C15`` and ``mix64`` is the splitmix64
finalizer

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

(all arithmetic mod 2**64). Uniform doubles take the top 53 bits of a value,
so ``uniform()`` lies in [0, 1). Substreams are derived with :func:`derive`,
which folds a sequence of integer or string tags into a new seed:

    s_0 = seed;  s_{k+1} = mix64((s_k ^ tag_k) + GOLDEN mod 2**64)

String tags are hashed with FNV-1a (64-bit) first. Both the scalar and the
numpy-vectorized paths produce identical streams.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """Splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return h


def derive(seed: int, *tags: int | str) -> int:
    """Derive a substream seed by folding tags into ``seed``."""
    s = seed & MASK64
    for tag in tags:
        t = fnv1a64(tag.encode("utf-8")) if isinstance(tag, str) else tag & MASK64
        s = mix64(((s ^ t) + GOLDEN) & MASK64)
    return s


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2**64, matching the scalar path
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Stateful view over the counter stream for one seed.

    The k-th draw (0-based) of ``Rng(seed)`` is ``mix64(seed + (k+1)*GOLDEN)``
    regardless of whether draws were made one at a time or in bulk.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * GOLDEN) & MASK64)

    def _bulk_u64(self, n: int) -> np.ndarray:
        counters = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix64_vec(np.uint64(self.seed) + counters * np.uint64(GOLDEN))

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        return low + u * (high - low)

    def uniforms(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self._bulk_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + u * (high - low)

    def normals(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """Standard Box-Muller on consecutive uniform pairs."""
        m = (n + 1) // 2
        u = self._bulk_u64(2 * m)
        # +1 keeps u1 strictly positive for the log
        u1 = ((u[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (u[m:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out * sigma

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        order = list(range(n))
        self.shuffle(order)
        return order
