"""Seeded Toeplitz hashing of raw bits into near-uniform output.

The matrix T is constant along diagonals, T[i, j] = seed[i - j + n_in - 1]
for a seed bit string of length n_in + m_out - 1; output bit i is the
GF(2) inner product of row i with the input.  Output length follows the
leftover-hash sizing m_out = floor(certified - 2*log2(1/eps)).

The production path is the bit-packed row multiply from the kernel
backend; ``extract_dense`` is the straightforward boolean-matrix form
kept for cross-checking (the two must agree bit for bit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

#: Default extractor error; reported separately from the smoothing
#: parameter, total failure budget is their sum.
DEFAULT_EPS_EXT = 2.0 ** -64


class ExtractorError(ValueError):
    """Dimension mismatch or malformed extractor input."""


@dataclass(frozen=True)
class ToeplitzSeed:
    bits: np.ndarray
    n_in: int
    m_out: int

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.m_out < 0 or self.n_in < 1:
            raise ExtractorError("need n_in >= 1 and m_out >= 0")
        expected = self.n_in + self.m_out - 1 if self.m_out > 0 else 0
        if self.m_out > 0 and bits.size != expected:
            raise ExtractorError(
                f"seed length {bits.size} != n_in + m_out - 1 = {expected}")
        if bits.size and bits.max() > 1:
            raise ExtractorError("seed must be a 0/1 bit array")
        object.__setattr__(self, "bits", bits)

    @staticmethod
    def generate(n_in: int, m_out: int, seed: int) -> "ToeplitzSeed":
        """Deterministic seed material from the shared word stream."""
        length = n_in + m_out - 1 if m_out > 0 else 0
        return ToeplitzSeed(random_bits(length, seed), n_in, m_out)


def random_bits(count: int, seed: int) -> np.ndarray:
    """count deterministic bits from the counter-based stream (each word
    emitted most-significant bit first)."""
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    n_words = (count + 63) // 64
    golden = np.uint64(0x9E3779B97F4A7C15)
    k = np.arange(n_words, dtype=np.uint64)
    z = np.uint64(seed) + (k + np.uint64(1)) * golden
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    bits = np.unpackbits(z.astype(">u8").view(np.uint8))
    return bits[:count]


def output_length(certified_bits: float, eps_ext: float) -> int:
    """Leftover-hash output size; never negative."""
    if not 0.0 < eps_ext <= 1.0:
        raise ExtractorError(f"eps_ext must be in (0, 1], got {eps_ext}")
    return max(0, math.floor(certified_bits - 2.0 * math.log2(1.0 / eps_ext)))


def _pack_lsb(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array into uint64 words, bit j -> word j//64, bit j%64.

    Relies on the host being little-endian (bytes of each word in
    ascending significance), which holds on every supported platform.
    """
    n_words = (bits.size + 63) // 64
    padded = np.zeros(n_words * 64, dtype=np.uint8)
    padded[:bits.size] = bits
    b = np.packbits(padded, bitorder="little")
    return b.view(np.uint64) if b.size else np.zeros(0, dtype=np.uint64)


def extract(raw_bits: np.ndarray, seed: ToeplitzSeed) -> np.ndarray:
    """Toeplitz product over GF(2): m_out output bits from n_in input bits."""
    raw = np.ascontiguousarray(raw_bits, dtype=np.uint8)
    if raw.size != seed.n_in:
        raise ExtractorError(f"input has {raw.size} bits, seed expects {seed.n_in}")
    if raw.size and raw.max() > 1:
        raise ExtractorError("input must be a 0/1 bit array")
    if seed.m_out == 0:
        return np.zeros(0, dtype=np.uint8)
    # out_i = parity(seed[i : i+n_in] AND reversed(raw))
    seed_words = _pack_lsb(seed.bits)
    raw_rev_words = _pack_lsb(raw[::-1])
    return np.asarray(_kernels.toeplitz_multiply(
        seed_words, raw_rev_words, seed.n_in, seed.m_out), dtype=np.uint8)


def extract_dense(raw_bits: np.ndarray, seed: ToeplitzSeed) -> np.ndarray:
    """Dense boolean-matrix form of the same product (cross-check path)."""
    raw = np.ascontiguousarray(raw_bits, dtype=np.uint8)
    if raw.size != seed.n_in:
        raise ExtractorError(f"input has {raw.size} bits, seed expects {seed.n_in}")
    if seed.m_out == 0:
        return np.zeros(0, dtype=np.uint8)
    i = np.arange(seed.m_out)[:, None]
    j = np.arange(seed.n_in)[None, :]
    matrix = seed.bits[i - j + seed.n_in - 1]
    return (matrix.astype(np.int64) @ raw.astype(np.int64) % 2).astype(np.uint8)


def pack_bits(bits: np.ndarray) -> bytes:
    """MSB-first byte packing (the on-disk format for bit files)."""
    return np.packbits(np.ascontiguousarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, bit_count: int | None = None) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bit_count is not None:
        if bit_count > bits.size:
            raise ExtractorError(f"file holds {bits.size} bits, need {bit_count}")
        bits = bits[:bit_count]
    return bits
