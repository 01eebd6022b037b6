"""Counter-based normal increments.

The k-th standard normal of replicate ``r`` under base seed ``s`` depends
only on ``(s, r, k)``: it is the inverse normal CDF of the k-th 64-bit
output of a Philox generator keyed by ``(s, r)``. Any block of steps can be
regenerated without replaying the stream, and replicates share no state.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
# Philox emits four 64-bit words per counter increment
_WORDS_PER_COUNTER = 4


def _key(seed: int, replicate_id: int) -> int:
    if not 0 <= seed <= _MASK64 or not 0 <= replicate_id <= _MASK64:
        raise ValueError("seed and replicate_id must fit in 64 unsigned bits")
    return (replicate_id << 64) | seed


def uniform_block(seed: int, replicate_id: int, start: int, n: int) -> np.ndarray:
    """Uniforms in (0, 1) for steps ``start .. start + n - 1``."""
    counter, skip = divmod(start, _WORDS_PER_COUNTER)
    bitgen = np.random.Philox(key=_key(seed, replicate_id), counter=counter)
    raw = bitgen.random_raw(n + skip)[skip:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def normal_block(seed: int, replicate_id: int, start: int, n: int) -> np.ndarray:
    """Standard normals for steps ``start .. start + n - 1``."""
    return ndtri(uniform_block(seed, replicate_id, start, n))


def normal_matrix(seed: int, replicate_ids, start: int, n: int) -> np.ndarray:
    """``(n, len(replicate_ids))`` block, one column per replicate."""
    out = np.empty((n, len(replicate_ids)))
    for j, r in enumerate(replicate_ids):
        out[:, j] = normal_block(seed, int(r), start, n)
    return out
