"""numpy implementations of the hot kernels (fallback backend).

Must stay bit-identical to the compiled backend: same word stream, same
word-per-round budget, same float64 comparisons, integer accumulation
only.  Rounds are processed in fixed-size slices to bound memory.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

_CHUNK_ROUNDS = 1 << 20
_COL_BLOCK = 1 << 12
_ROW_BLOCK = 1 << 10


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _words(base: np.uint64, start: int, count: int) -> np.ndarray:
    k = np.arange(start, start + count, dtype=np.uint64)
    return _mix(base + (k + np.uint64(1)) * _GOLDEN)


class _BitPacker:
    """Accumulates bits (uint8 0/1 arrays) into MSB-first packed bytes."""

    def __init__(self):
        self._pending = np.empty(0, dtype=np.uint8)
        self._chunks: list[bytes] = []
        self.bit_count = 0

    def append(self, bits: np.ndarray) -> None:
        self.bit_count += bits.size
        buf = np.concatenate([self._pending, bits]) if self._pending.size else bits
        whole = (buf.size // 8) * 8
        if whole:
            self._chunks.append(np.packbits(buf[:whole]).tobytes())
        self._pending = buf[whole:]

    def finish(self) -> bytes:
        if self._pending.size:
            self._chunks.append(np.packbits(self._pending).tobytes())
            self._pending = np.empty(0, dtype=np.uint8)
        return b"".join(self._chunks)


def simulate_rounds(base: int, n: int, gamma: float, thresholds: np.ndarray,
                    gen_setting: int):
    """See dirng._kernels for the contract."""
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    if thresholds.shape != (4, 3):
        raise ValueError("thresholds must be a 4x3 array of cumulative probabilities")
    base_u = np.uint64(base)
    counts = np.zeros(32, dtype=np.int64)   # [test*16 + setting*4 + outcome]
    switches = 0
    prev_setting = -1
    packer = _BitPacker()

    for start in range(0, n, _CHUNK_ROUNDS):
        count = min(_CHUNK_ROUNDS, n - start)
        w = _words(base_u, 3 * start, 3 * count)
        w0 = w[0::3]
        w1 = w[1::3]
        w2 = w[2::3]

        u_test = (w0 >> np.uint64(11)).astype(np.float64) * _INV53
        is_test = u_test < gamma
        s = np.where(is_test, (w1 & np.uint64(3)).astype(np.int64),
                     np.int64(gen_setting))

        u_out = (w2 >> np.uint64(11)).astype(np.float64) * _INV53
        t = thresholds[s]
        o = ((u_out >= t[:, 0]).astype(np.int64)
             + (u_out >= t[:, 1])
             + (u_out >= t[:, 2]))

        idx = np.where(is_test, 16, 0) + s * 4 + o
        counts += np.bincount(idx, minlength=32)

        if prev_setting >= 0:
            switches += int(s[0] != prev_setting)
        switches += int(np.count_nonzero(s[1:] != s[:-1]))
        prev_setting = int(s[-1])

        o_gen = o[~is_test]
        if o_gen.size:
            bits = np.empty(2 * o_gen.size, dtype=np.uint8)
            bits[0::2] = (o_gen >> 1).astype(np.uint8)
            bits[1::2] = (o_gen & 1).astype(np.uint8)
            packer.append(bits)

    counts_all = counts[:16] + counts[16:]
    counts_test = counts[16:].copy()
    raw = packer.finish()
    return counts_all, counts_test, switches, raw, packer.bit_count


def _shift_words(words: np.ndarray, shift: int) -> np.ndarray:
    """Word array whose bit j equals bit j+shift of the input stream
    (little-bit-order words, 0 <= shift < 64)."""
    if shift == 0:
        return words.copy()
    out = words >> np.uint64(shift)
    out[:-1] |= words[1:] << np.uint64(64 - shift)
    return out


def toeplitz_multiply(seed_words: np.ndarray, raw_rev_words: np.ndarray,
                      n_in: int, m_out: int) -> np.ndarray:
    """See dirng._kernels for the contract."""
    L = int(raw_rev_words.size)
    out = np.zeros(m_out, dtype=np.uint8)
    # pad so every window of L words starting at any row word is in range
    need = (m_out - 1 + 63) // 64 + 1 + L
    seed_padded = np.zeros(max(need, seed_words.size + 1), dtype=np.uint64)
    seed_padded[:seed_words.size] = seed_words

    for a in range(64):
        m_a = (m_out - 1 - a) // 64 + 1 if a < m_out else 0
        if m_a <= 0:
            continue
        shifted = _shift_words(seed_padded, a)
        windows = np.lib.stride_tricks.sliding_window_view(shifted, L)[:m_a]
        for r0 in range(0, m_a, _ROW_BLOCK):
            r1 = min(r0 + _ROW_BLOCK, m_a)
            acc = np.zeros(r1 - r0, dtype=np.uint64)
            for c0 in range(0, L, _COL_BLOCK):
                c1 = min(c0 + _COL_BLOCK, L)
                block = windows[r0:r1, c0:c1] & raw_rev_words[c0:c1]
                acc ^= np.bitwise_xor.reduce(block, axis=1)
            # parity fold of each accumulator word
            acc ^= acc >> np.uint64(32)
            acc ^= acc >> np.uint64(16)
            acc ^= acc >> np.uint64(8)
            acc ^= acc >> np.uint64(4)
            acc ^= acc >> np.uint64(2)
            acc ^= acc >> np.uint64(1)
            rows = a + 64 * np.arange(r0, r1)
            out[rows] = (acc & np.uint64(1)).astype(np.uint8)
    return out
