"""Deterministic counter-based word stream shared by all backends.

The stream is splitmix64 in counter mode: word k of a stream with base b
is ``mix64(b + (k+1)*GOLDEN mod 2^64)``.  Because each word is a pure
function of (base, counter), the stream can be generated sequentially
(compiled kernel) or in vectorized slices (numpy kernel) with identical
results, and per-trial substreams are derived by mixing the trial index
into the base.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    """Finalizer of splitmix64 (pure-integer reference)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * _MIX1) & MASK64
    z ^= z >> 27
    z = (z * _MIX2) & MASK64
    return z ^ (z >> 31)


def word(base: int, k: int) -> int:
    """k-th 64-bit word of the stream with the given base."""
    return mix64((base + ((k + 1) * GOLDEN)) & MASK64)


def trial_base(seed: int, trial: int = 0) -> int:
    """Base of the substream for one trial of a seeded experiment."""
    return mix64(((seed & MASK64) ^ _STREAM_SALT) + ((trial + 1) * GOLDEN))


def uniform01(w: int) -> float:
    """Map a 64-bit word to a double in [0, 1) using its top 53 bits."""
    return (w >> 11) * (1.0 / 9007199254740992.0)
