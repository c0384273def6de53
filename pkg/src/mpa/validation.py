"""Input validation helpers shared across modules.

Vectors are plain 1-D float64 numpy arrays throughout the engine; these
helpers normalize arbitrary array-likes into that form and enforce the
finiteness and dimension invariants at the boundaries.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import DimMismatchError, LabelRangeError, ZeroNormVectorError


def as_vector(values, *, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, optionally checking its length."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    if dim is not None and v.shape[0] != dim:
        raise DimMismatchError(f"{name} has dim {v.shape[0]}, expected {dim}")
    return v


def as_matrix(values, *, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array with at least one row."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValueError(f"{name} must have at least one row")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def check_labels(labels, n_classes: int | None = None) -> np.ndarray:
    """Coerce labels to int64 and check the [0, n_classes) range."""
    y = np.asarray(labels)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("labels must be a nonempty 1-D sequence")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.rint(np.asarray(y, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(y, dtype=np.float64)):
            raise LabelRangeError("labels must be integers")
        y = rounded
    y = y.astype(np.int64)
    if np.any(y < 0):
        raise LabelRangeError("labels must be non-negative")
    if n_classes is not None and np.any(y >= n_classes):
        raise LabelRangeError(
            f"label {int(y.max())} out of range for {n_classes} classes"
        )
    return y


def nonzero_norm(v: np.ndarray, *, name: str = "vector") -> float:
    """Euclidean norm, rejecting zero-norm input."""
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroNormVectorError(f"{name} has zero norm")
    return n


def common_dim(vectors: Sequence[np.ndarray], *, name: str = "vectors") -> int:
    """Shared dimensionality of a nonempty collection of vectors."""
    if len(vectors) == 0:
        raise ValueError(f"{name} must be nonempty")
    dim = int(vectors[0].shape[0])
    for i, v in enumerate(vectors):
        if v.shape[0] != dim:
            raise DimMismatchError(
                f"{name}[{i}] has dim {v.shape[0]}, expected {dim}"
            )
    return dim
