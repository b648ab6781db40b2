"""Derivation of independent random streams from one master seed.

A stream is identified by ``(seed, label, *index)``. The label is hashed with
SHA-256 and its first 8 bytes, together with the integer indices, form the
``spawn_key`` of a :class:`numpy.random.SeedSequence` whose entropy is the
master seed. Distinct labels or indices give statistically independent,
non-overlapping PCG64 streams, and the mapping does not depend on thread
count or call order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def substream(seed: int, label: str, *index: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(label_key(label), *map(int, index)))
    return np.random.default_rng(ss)
