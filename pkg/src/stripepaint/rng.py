"""Deterministic, portable random number generation.

Everything random in this package (weight init, mask strokes, batch order)
is drawn from counter-based SplitMix64 streams.  SplitMix64 is the 64-bit
mixing generator from Steele, Lea & Flood, "Fast splittable pseudorandom
number generators" (OOPSLA 2014); it is the standard seeding companion of
the xorshift/xoshiro family.  The i-th output of a stream with key `k` is

    mix64(k + (i + 1) * GAMMA)        GAMMA = 0x9E3779B97F4A7C15

with mix64 the SplitMix64 finalizer:

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

All arithmetic is modulo 2**64.  Because outputs are a pure function of
(key, counter), streams never need serialized state: a training run at
step t regenerates exactly the draws of any resumed run.  Uniforms take
the top 53 bits of an output; normals come from the Box-Muller transform
on consecutive uniform pairs.  The u64 stream is bit-portable across
platforms; float outputs are deterministic for a fixed libm.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, modulo 2**64."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _fnv1a(tag: str) -> int:
    h = _FNV_OFFSET
    for b in tag.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return h


def derive_key(key: int, tag: str | int) -> int:
    """Derive an independent child stream key from a parent key and a tag."""
    if isinstance(tag, str):
        t = _fnv1a(tag)
    else:
        t = tag & MASK64
    return mix64((key ^ t) & MASK64)


class Stream:
    """Stateful view over a counter-based SplitMix64 output sequence."""

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK64
        self.counter = counter

    def child(self, tag: str | int) -> "Stream":
        return Stream(derive_key(self.key, tag))

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.key) + idx * np.uint64(GAMMA)
            return _mix64_vec(state)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles in [0, 1), from the top 53 bits of each output."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int, stddev: float = 1.0) -> np.ndarray:
        """n standard-normal doubles scaled by stddev, via Box-Muller pairs."""
        m = (n + 1) // 2
        # u1 shifted into (0, 1] so log never sees zero
        u1 = ((self.next_u64(m) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z * stddev

    def randint(self, lo: int, hi: int, n: int = 1) -> np.ndarray:
        """n ints uniform in [lo, hi); modulo reduction (bias < 2**-53 here)."""
        if hi <= lo:
            raise ValueError(f"empty randint range [{lo}, {hi})")
        span = np.uint64(hi - lo)
        return (self.next_u64(n) % span).astype(np.int64) + lo

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        if n > 1:
            draws = self.next_u64(n - 1)
            for i in range(n - 1, 0, -1):
                j = int(draws[n - 1 - i] % np.uint64(i + 1))
                perm[i], perm[j] = perm[j], perm[i]
        return perm
