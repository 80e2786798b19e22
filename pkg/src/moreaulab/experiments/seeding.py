"""Deterministic seed derivation.

Seeds are mixed with SplitMix64, so ``derive_seed(root, trial)`` is stable
across platforms and Python versions.
"""

import hashlib

MASK = (1 << 64) - 1


def splitmix64(x):
    """One SplitMix64 output for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _key(k):
    if isinstance(k, str):
        # strings fold in through a stable 64-bit digest
        return int.from_bytes(hashlib.blake2b(k.encode(), digest_size=8).digest(), "little")
    return int(k) & MASK


def derive_seed(root, *keys):
    """Fold integer or string ``keys`` into ``root`` one at a time.

    >>> derive_seed(1, 2) == derive_seed(1, 2)
    True
    """
    s = splitmix64(int(root) & MASK)
    for k in keys:
        s = splitmix64(s ^ _key(k))
    return s


def trial_seed(root, trial, m=0):
    return derive_seed(root, trial, m)


# the mega-sample oracle is always drawn from this seed on its own stream
POPULATION_SEED = 0
