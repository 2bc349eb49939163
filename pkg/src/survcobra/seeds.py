"""Deterministic seed derivation.

Every command derives all of its RNG seeds from one master seed through
`derive_seed`, so re-running with the same configuration reproduces every
split, bootstrap, and draw byte for byte.
"""

from __future__ import annotations

_MULT = 6364136223846793005
_INC = 1442695040888963407
_MASK = (1 << 63) - 1


def derive_seed(master: int, *indices: int) -> int:
    """Mix a master seed with a path of integer indices into a new seed.

    The mixing is a fixed LCG step per index; collisions between distinct
    index paths are as unlikely as for any 63-bit hash.
    """
    state = (int(master) * _MULT + _INC) & _MASK
    for idx in indices:
        state = ((state ^ (int(idx) & _MASK)) * _MULT + _INC) & _MASK
    return state
