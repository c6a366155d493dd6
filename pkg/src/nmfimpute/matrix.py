"""Dense nonnegative matrices, the squared-error objective and row partitioning.

Matrices are plain ``float64`` numpy arrays. Functions that need a
nonnegative operand validate it with :func:`as_nonneg` at entry, so shape
and sign problems surface before any arithmetic happens.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


def as_nonneg(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a 2-D float64 array, checking finiteness and sign."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(A < 0):
        raise ValueError(f"{name} contains negative entries (min {A.min():g})")
    return A


def as_mask(mask, d: int | None = None) -> np.ndarray:
    """Boolean attribute mask, ``True`` meaning observed."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 1:
        raise DimensionError(f"mask must be 1-D, got shape {m.shape}")
    if d is not None and m.shape[0] != d:
        raise DimensionError(f"mask length {m.shape[0]} does not match dimension {d}")
    return m


def frobenius_error(target, approx) -> float:
    """Half the squared Frobenius norm of ``target - approx``."""
    A = np.asarray(target, dtype=np.float64)
    B = np.asarray(approx, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch: target {A.shape} vs approx {B.shape}")
    D = A - B
    return 0.5 * float(np.sum(D * D))


def clamp_nonneg(M) -> np.ndarray:
    return np.maximum(np.asarray(M, dtype=np.float64), 0.0)


@dataclass(frozen=True)
class MaskedPartition:
    """Rows of a dictionary split into observed and missing blocks."""

    observed_rows: np.ndarray
    missing_rows: np.ndarray
    observed_index: np.ndarray
    missing_index: np.ndarray

    def reassemble(self) -> np.ndarray:
        d = len(self.observed_index) + len(self.missing_index)
        out = np.empty((d, self.observed_rows.shape[1]), dtype=np.float64)
        out[self.observed_index] = self.observed_rows
        out[self.missing_index] = self.missing_rows
        return out


def partition_rows(W, mask) -> MaskedPartition:
    """Split the rows of ``W`` by ``mask``, preserving ascending row order.

    >>> p = partition_rows(np.arange(6.0).reshape(3, 2), [True, True, False])
    >>> p.missing_rows
    array([[4., 5.]])
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise DimensionError(f"W must be 2-D, got shape {W.shape}")
    m = as_mask(mask, W.shape[0])
    obs = np.flatnonzero(m)
    mis = np.flatnonzero(~m)
    return MaskedPartition(W[obs], W[mis], obs, mis)
