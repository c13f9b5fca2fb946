import hashlib

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return the numpy generator every seeded component draws from."""
    return np.random.default_rng(seed)


def stable_hash(*parts: object) -> int:
    """32-bit hash of the parts' string forms, identical across processes and runs."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=4).digest(), "little")


def derive_seed(seed: int, *parts: object) -> int:
    """Sub-seed for one run of a sweep: seed XOR a stable hash of the run's identity."""
    return int(seed) ^ stable_hash(*parts)
