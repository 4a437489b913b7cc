# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Bit-identical to dirng._kernels._backend_py; see dirng._kernels for the
contract shared by both backends.
"""

import numpy as np

from libc.stdint cimport int64_t, uint8_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15UL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9UL
cdef uint64_t MIX2 = 0x94D049BB133111EBUL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z ^= z >> 30
    z *= MIX1
    z ^= z >> 27
    z *= MIX2
    return z ^ (z >> 31)


def simulate_rounds(object base, long long n, double gamma, object thresholds,
                    int gen_setting):
    """See dirng._kernels for the contract."""
    cdef double[:, ::1] thresh = np.ascontiguousarray(thresholds, dtype=np.float64)
    if thresh.shape[0] != 4 or thresh.shape[1] != 3:
        raise ValueError("thresholds must be a 4x3 array of cumulative probabilities")

    counts_all_arr = np.zeros(16, dtype=np.int64)
    counts_test_arr = np.zeros(16, dtype=np.int64)
    cdef int64_t[::1] counts_all = counts_all_arr
    cdef int64_t[::1] counts_test = counts_test_arr

    cdef uint64_t state = <uint64_t> (int(base) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t w0, w1, w2
    cdef double u
    cdef long long i
    cdef long long switches = 0
    cdef long long n_gen = 0
    cdef int prev = -1
    cdef int s, o, is_test, a, b

    cdef bytearray raw = bytearray()
    cdef int cur = 0
    cdef int nbits = 0

    for i in range(n):
        state += GOLDEN
        w0 = mix64(state)
        state += GOLDEN
        w1 = mix64(state)
        state += GOLDEN
        w2 = mix64(state)

        u = <double> (w0 >> 11) * INV53
        is_test = u < gamma
        if is_test:
            s = <int> (w1 & 3)
        else:
            s = gen_setting

        u = <double> (w2 >> 11) * INV53
        o = 0
        if u >= thresh[s, 0]:
            o += 1
        if u >= thresh[s, 1]:
            o += 1
        if u >= thresh[s, 2]:
            o += 1

        counts_all[s * 4 + o] += 1
        if is_test:
            counts_test[s * 4 + o] += 1
        else:
            n_gen += 1
            a = o >> 1
            b = o & 1
            cur = (cur << 2) | (a << 1) | b
            nbits += 2
            if nbits == 8:
                raw.append(cur)
                cur = 0
                nbits = 0

        if prev >= 0 and s != prev:
            switches += 1
        prev = s

    if nbits > 0:
        raw.append(cur << (8 - nbits))

    return counts_all_arr, counts_test_arr, int(switches), bytes(raw), int(2 * n_gen)


def toeplitz_multiply(object seed_words, object raw_rev_words,
                      Py_ssize_t n_in, Py_ssize_t m_out):
    """See dirng._kernels for the contract."""
    cdef uint64_t[::1] raw_w = np.ascontiguousarray(raw_rev_words, dtype=np.uint64)
    cdef Py_ssize_t L = raw_w.shape[0]

    seed_arr = np.ascontiguousarray(seed_words, dtype=np.uint64)
    cdef Py_ssize_t need = (m_out - 1 + 63) // 64 + 1 + L if m_out > 0 else L + 1
    if need < seed_arr.size + 1:
        need = seed_arr.size + 1
    padded = np.zeros(need, dtype=np.uint64)
    padded[:seed_arr.size] = seed_arr
    cdef uint64_t[::1] seed = padded

    out_arr = np.zeros(m_out, dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr

    cdef Py_ssize_t i, k, w0
    cdef int sh
    cdef uint64_t acc, v

    with nogil:
        for i in range(m_out):
            w0 = i >> 6
            sh = <int> (i & 63)
            acc = 0
            if sh == 0:
                for k in range(L):
                    acc ^= seed[w0 + k] & raw_w[k]
            else:
                for k in range(L):
                    v = (seed[w0 + k] >> sh) | (seed[w0 + k + 1] << (64 - sh))
                    acc ^= v & raw_w[k]
            acc ^= acc >> 32
            acc ^= acc >> 16
            acc ^= acc >> 8
            acc ^= acc >> 4
            acc ^= acc >> 2
            acc ^= acc >> 1
            out[i] = <uint8_t> (acc & 1)

    return out_arr
