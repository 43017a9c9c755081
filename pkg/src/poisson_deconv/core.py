"""Nonnegative array primitives shared by the solvers and operators.

Images are 2-D float64 arrays of event-count intensities; 1-D signals are
stored as N-by-1 images so a single code path serves both. Representation
coefficients keep whatever shape their dictionary defines (flat vector,
per-level planes, or per-patch rows) and the helpers here are
shape-agnostic. Everything is treated as an immutable value: no function
in this module mutates its arguments.
"""

from __future__ import annotations

import math

import numpy as np

#: Floor substituted for an exactly-zero denominator in pointwise ratios.
#: Zero numerators still map to zero, so 0/0 -> 0 and x/0 -> x/EPS_DIV.
EPS_DIV = 1e-12


def as_image(a, name: str = "image") -> np.ndarray:
    """Validate and return `a` as a 2-D nonnegative float64 array.

    1-D input is reshaped to a single column. Raises ValueError on
    negative or non-finite entries, or on more than two dimensions.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} contains negative entries")
    return arr


def require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def safe_div(num: np.ndarray, den: np.ndarray, eps: float = EPS_DIV) -> np.ndarray:
    """Pointwise num/den with exact zeros in `den` floored to `eps`.

    A zero numerator over a zero denominator yields 0; a positive
    numerator over a zero denominator yields num/eps. Nonzero
    denominators are never altered.
    """
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    require_same_shape(num, den)
    return num / np.where(den == 0.0, eps, den)


def log_inner(g: np.ndarray, x: np.ndarray) -> float:
    """Sum of g * log(x) under the 0*log(0) = 0 convention.

    Entries where g == 0 contribute nothing regardless of x. If any
    entry has g > 0 while x <= 0 the sum is -inf (reported, not raised),
    which makes the objectives that subtract this term come out +inf.
    """
    g = np.asarray(g, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    require_same_shape(g, x)
    mask = g > 0.0
    if np.any(x[mask] <= 0.0):
        return -math.inf
    return float(np.sum(g[mask] * np.log(x[mask])))


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Standard inner product: sum of the elementwise products."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    require_same_shape(a, b)
    return float(np.dot(a.ravel(), b.ravel()))


def l1_norm(c) -> float:
    """l1 norm of a nonnegative array: the plain sum of its entries."""
    c = np.asarray(c, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("l1_norm expects nonnegative coefficients")
    return float(np.sum(c))


def weighted_l1(c, w) -> float:
    """Weighted l1 norm sum(w_i * c_i) of nonnegative c with weights w >= 0."""
    c = np.asarray(c, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    require_same_shape(c, w)
    if np.any(c < 0) or np.any(w < 0):
        raise ValueError("weighted_l1 expects nonnegative inputs")
    # Same pairwise summation as l1_norm so unit weights reproduce it exactly.
    return float(np.sum(w * c))
