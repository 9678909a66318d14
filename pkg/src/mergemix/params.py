"""Flat parameter vectors and the arithmetic shared by merging and theory probes.

Every model in this package is a single flat float64 vector. All operations
validate dimensions and reject non-finite values, since downstream theory
checks need clean 64-bit arithmetic.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence

import numpy as np

from .errors import DimensionError, NumericError


def as_params(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Coerce to a 1-D float64 vector, rejecting empty or non-finite input."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"parameter vector must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise DimensionError("parameter vector must have length >= 1")
    if not np.all(np.isfinite(arr)):
        raise NumericError("parameter vector contains NaN or Inf")
    return arr


def check_same_dim(*vectors: np.ndarray) -> int:
    """Return the shared length of the given vectors, or raise DimensionError."""
    sizes = {v.shape[0] for v in vectors}
    if len(sizes) != 1:
        raise DimensionError(f"mismatched parameter lengths: {sorted(sizes)}")
    return sizes.pop()


def linear_combine(
    base: np.ndarray, terms: Sequence[tuple[float, np.ndarray]]
) -> np.ndarray:
    """Return base + sum(c_i * v_i), the shared kernel of merging and Taylor sums."""
    base = as_params(base)
    out = base.copy()
    with np.errstate(over="ignore", invalid="ignore"):  # checked below
        for coeff, vec in terms:
            vec = np.asarray(vec, dtype=np.float64)
            check_same_dim(base, vec)
            out += float(coeff) * vec
    if not np.all(np.isfinite(out)):
        raise NumericError("linear combination produced non-finite values")
    return out


def encode_value(x: float) -> str:
    """Decimal text with 17 significant digits; round-trips float64 exactly."""
    return format(float(x), ".17g")


def encode_params(theta: np.ndarray) -> list[str]:
    return [encode_value(x) for x in np.asarray(theta, dtype=np.float64)]


def decode_params(texts: Sequence[str]) -> np.ndarray:
    return as_params([float(t) for t in texts])


def params_digest(theta: np.ndarray) -> str:
    """Content digest of a parameter vector (sha256 over its decimal text)."""
    payload = "\n".join(encode_params(theta)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
