"""Deterministic seed derivation for nested experiment loops."""

import numpy as np


def derive_seed(*parts: int) -> int:
    """Mix integer parts into one reproducible 64-bit seed."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])
