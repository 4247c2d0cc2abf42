"""Counter-based random number generation.

Every stochastic step in the engine draws from a Philox generator keyed by a
hash of string-able parts (seed, purpose tag, indices). Philox is
counter-based, so a stream is fully determined by its key: regenerating a
projection matrix column or a resample row needs no stored state, and results
are identical regardless of execution order or thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Field separator that cannot appear in identifiers read from CSV headers.
_SEP = "\x1f"


def philox_key(*parts: object) -> np.ndarray:
    """Derive a 128-bit Philox key from arbitrary parts.

    Parts are joined by an unprintable separator and hashed, so ("a", "bc")
    and ("ab", "c") produce different keys.
    """
    data = _SEP.join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(data).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def keyed_rng(*parts: object) -> np.random.Generator:
    """Return a Generator whose stream depends only on the given parts."""
    return np.random.Generator(np.random.Philox(key=philox_key(*parts)))
