"""Counter-based random streams keyed by (seed, chain index).

Every chain owns a Philox stream derived from ``SeedSequence(seed,
spawn_key=(chain,))``, so draws never depend on how chains are batched or
scheduled across threads.  Stream layout per chain: one draw of z_N, then one
row of step noise per backward step i = N, ..., 1.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def chain_normals(seed: int, chain: int, rows: int, dim: int) -> np.ndarray:
    """Standard normals of shape (rows, dim) from the stream of one chain."""
    return stream(seed, chain).standard_normal((rows, dim))


def block_normals(seed: int, chains: range, rows: int, dim: int) -> np.ndarray:
    """Stack :func:`chain_normals` for several chains into (rows, n, dim)."""
    out = np.empty((rows, len(chains), dim))
    for k, c in enumerate(chains):
        out[:, k, :] = chain_normals(seed, c, rows, dim)
    return out
