"""Stable seed derivation so every pipeline stage is independently seeded."""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(root: int, *labels: str) -> int:
    """Derive a 63-bit seed from a root seed and a label path.

    Hash-based so adding stages never shifts the seeds of existing ones.
    """
    text = ":".join([str(int(root)), *labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(root: int, *labels: str) -> np.random.Generator:
    return np.random.default_rng(stable_seed(root, *labels))
