"""Deterministic seed derivation.

Every random choice in the toolkit is driven by a single 64-bit master
seed. Child seeds are derived with splitmix64 over (master, label), so a
run is fully reproducible from the master seed alone and independent
components never share a stream.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step: a bijective 64-bit mix with good avalanche."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def derive_seed(master: int, *labels: int | str) -> int:
    """Derive a child seed from a master seed and a label path.

    Strings are folded bytewise so that textual labels ("scene", "traj")
    produce distinct streams; integer labels index repeated structures.
    """
    state = splitmix64(master & _MASK)
    for label in labels:
        if isinstance(label, str):
            for b in label.encode("utf-8"):
                state = splitmix64(state ^ b)
        else:
            state = splitmix64(state ^ (int(label) & _MASK))
    return state


def generator(master: int, *labels: int | str) -> np.random.Generator:
    """NumPy generator seeded from the derived child seed."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))
