"""Labeled seed splitting.

A single master seed fans out to independent, reproducible streams keyed by a
string label such as ``"train/CA"`` or ``"sim/WL/CA"``. The label is hashed into
the spawn key of a :class:`numpy.random.SeedSequence`, so a stream depends only
on ``(master_seed, label)`` and never on the order streams are requested in.
"""

import hashlib

import numpy as np


def _label_key(label):
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def seed_sequence(master_seed, label=""):
    return np.random.SeedSequence(int(master_seed), spawn_key=_label_key(label))


def derive_rng(master_seed, label=""):
    """Return a Generator for the stream ``label`` under ``master_seed``."""
    return np.random.default_rng(seed_sequence(master_seed, label))


def derive_seed(master_seed, label=""):
    """A 63-bit integer seed for the stream ``label`` (for APIs that take ints)."""
    lo, hi = seed_sequence(master_seed, label).generate_state(2, np.uint32)
    return (int(hi) << 32 | int(lo)) >> 1


def as_rng(rng):
    """Coerce ``None``, an int seed or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
