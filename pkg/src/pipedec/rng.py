"""Deterministic counter-based random streams built on SplitMix64.

``mix64`` is the SplitMix64 step (advance by the golden-gamma increment,
then the Stafford variant-13 finalizer) from Steele, Lea & Vigna's
splittable-generator construction, also used as the seeding mixer in
several mainstream RNG libraries.  A stream is identified by a 64-bit
key derived from ``(seed, stream_index)``; its i-th draw is
``mix64(key + i * GOLDEN)``, so any draw can be produced independently
of the others (pure counter mode).  Serial and parallel consumers of
the same (seed, index) pair therefore agree bit for bit, which is what
the Monte Carlo driver relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_U = np.uint64


def mix64(z: int) -> int:
    """One SplitMix64 step on a Python integer (wraps at 64 bits)."""
    z = (z + GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64_np(z: np.ndarray) -> np.ndarray:
    """Vectorized ``mix64`` over a uint64 array; bit-identical to the scalar."""
    z = z + _U(GOLDEN)
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def stream_key(seed: int, stream: int = 0) -> int:
    """Derive the 64-bit key of stream ``stream`` under ``seed``."""
    return mix64(mix64(seed & _MASK64) ^ mix64(stream & _MASK64))


def stream_keys(seed: int, n: int) -> np.ndarray:
    """Keys of streams 0..n-1, equal elementwise to ``stream_key(seed, i)``."""
    idx = np.arange(n, dtype=np.uint64)
    base = np.full(n, mix64(seed & _MASK64), dtype=np.uint64)
    return mix64_np(base ^ mix64_np(idx))


def counter_uniforms(key: int | np.ndarray, n: int) -> np.ndarray:
    """Draws 0..n-1 of the stream(s) with the given key(s), as float64 in [0, 1).

    ``key`` may be a scalar or an array of stream keys; an array key of
    shape (m,) yields an (m, n) matrix whose row j is stream j's draws.
    """
    ctr = np.arange(1, n + 1, dtype=np.uint64) * _U(GOLDEN)
    if np.isscalar(key) or isinstance(key, int):
        words = mix64_np(_U(int(key) & _MASK64) + ctr)
    else:
        words = mix64_np(np.asarray(key, dtype=np.uint64)[:, None] + ctr[None, :])
    return (words >> _U(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True)
class Stream:
    """A reproducible random stream; the key fully determines every draw."""

    key: int

    @classmethod
    def from_seed(cls, seed: int, stream: int = 0) -> "Stream":
        return cls(stream_key(seed, stream))

    def uniforms(self, n: int) -> np.ndarray:
        return counter_uniforms(self.key, n)
