"""Labeled seed derivation so every stage draws from its own stream."""
import zlib

import numpy as np


def derive_seed(root, label):
    """Return a ``SeedSequence`` derived from ``root`` and a text label.

    The same (root, label) pair always yields the same stream, and distinct
    labels give statistically independent streams.
    """
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.SeedSequence(int(root), spawn_key=(key,))


def make_rng(seed, label=None):
    """Build a ``numpy.random.Generator`` from an int, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if label is not None:
        seed = derive_seed(seed, label)
    return np.random.default_rng(seed)
