"""Hot-loop kernels: compiled core with a pure-Python fallback.

Both backends implement the identical contract and are bit-for-bit
interchangeable:

``simulate_rounds(base, n, gamma, thresholds, gen_setting)``
    One spot-checking chunk.  Consumes exactly three pseudo-random words
    per round from the counter-based splitmix64 stream seeded by
    ``base``: round-type draw, settings draw (drawn but unused in
    generation rounds), outcome draw.  Returns
    ``(counts_all, counts_test, switches, raw_bytes, raw_bitlen)`` where
    the count arrays are int64[16] indexed by ``settings*4 + outcome``
    (settings = 2x+y, outcome = 2a+b) and ``raw_bytes`` packs the
    generation-round outcome pairs MSB-first.

``toeplitz_multiply(seed_words, raw_rev_words, n_in, m_out)``
    GF(2) product of the diagonal-constant matrix defined by a seed bit
    string with an input bit string; operates on little-bit-order packed
    uint64 words of the seed and the *reversed* input.  Returns the
    output bits as uint8[m_out].

Selection: the compiled extension is used when importable unless the
environment variable ``DIRNG_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _backend_py

_FORCED = os.environ.get("DIRNG_BACKEND", "").strip().lower()

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

if _FORCED == "python":
    _active = _backend_py
elif _FORCED in ("compiled", "c", "cython"):
    if _compiled is None:
        raise ImportError("DIRNG_BACKEND requested the compiled backend, "
                          "but dirng._kernels._core is not built")
    _active = _compiled
else:
    _active = _compiled if _compiled is not None else _backend_py

BACKEND = "compiled" if _active is _compiled else "python"
HAVE_COMPILED = _compiled is not None

simulate_rounds = _active.simulate_rounds
toeplitz_multiply = _active.toeplitz_multiply


def get_backend(name: str):
    """Explicit backend module lookup (used by equivalence tests and the
    benchmark)."""
    if name == "python":
        return _backend_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled backend not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
