"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .errors import NonFinite


def as_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return v


def as_matrix(a, name: str = "a") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return m


def check_square_symmetric(a: np.ndarray, rtol: float = 1e-10, name: str = "a") -> np.ndarray:
    """Validate a square symmetric matrix within relative tolerance."""
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    scale = max(float(np.max(np.abs(a))), 1.0)
    if float(np.max(np.abs(a - a.T))) > rtol * scale:
        raise ValueError(f"{name} is not symmetric within rtol={rtol}")
    return a
