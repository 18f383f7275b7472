"""Deterministic substream seeds.

One master 64-bit seed feeds every random draw in a run.  A substream is
identified by a tuple of non-negative integer keys (setting index, chunk
index, restart index, ...).  Its seed is the first 64 bits produced by
``numpy.random.SeedSequence(master, spawn_key=keys)``, which hashes the
master entropy together with the keys.  Results therefore depend only on
(master, keys) and never on the order in which substreams are consumed.
"""

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(master: int, *keys: int) -> int:
    ss = np.random.SeedSequence(int(master) & MASK64, spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def substream(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
