"""Univariate, component-wise and point-wise quantiles of finite samples.

The univariate quantile averages two order statistics::

    q_alpha(x) = (x~[ceil(k*alpha)] + x~[floor(k*alpha + 1)]) / 2

with ``x~`` the sorted sample and 1-based indexing. When ``k*alpha`` is an
integer the two indices differ by one, otherwise they coincide. No other
interpolation is performed.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "as_alpha_vector",
    "as_real_vector",
    "componentwise_quantile",
    "order_indices",
    "pointwise_path_quantile",
    "univariate_quantile",
    "univariate_quantile_lower",
]

# k*alpha closer than this (relative) to an integer is treated as that integer,
# so that e.g. alpha=0.3, k=10 selects the 3rd and 4th order statistics.
_INTEGER_SNAP = 1e-9


def _snap(t: float) -> float:
    r = round(t)
    if abs(t - r) <= _INTEGER_SNAP * max(1.0, abs(t)):
        return float(r)
    return t


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in the open interval (0, 1), got {alpha!r}")
    return alpha


def as_real_vector(x: ArrayLike, name: str = "x") -> NDArray[np.float64]:
    """Validate a nonempty one-dimensional vector of finite reals."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_alpha_vector(alpha: ArrayLike, d: int) -> NDArray[np.float64]:
    """Broadcast a scalar alpha to length ``d`` or validate a length-``d`` vector."""
    arr = np.asarray(alpha, dtype=float)
    if arr.ndim == 0:
        arr = np.full(d, float(arr))
    elif arr.shape != (d,):
        raise ValueError(f"alpha has length {arr.size}, expected {d}")
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise ValueError("every alpha must lie in the open interval (0, 1)")
    return arr


def order_indices(k: int, alpha: float) -> tuple[int, int]:
    """Return the 1-based order-statistic indices averaged by ``q_alpha``."""
    alpha = _check_alpha(alpha)
    t = _snap(k * alpha)
    lo = math.ceil(t)
    hi = math.floor(t + 1.0)
    assert 1 <= lo <= hi <= k, (k, alpha, lo, hi)
    return lo, hi


def univariate_quantile(x: ArrayLike, alpha: float) -> float:
    """Average of the two order statistics ``ceil(k*alpha)`` and ``floor(k*alpha+1)``.

    >>> univariate_quantile([1, 2, 3, 4], 0.5)
    2.5
    """
    arr = np.sort(as_real_vector(x), kind="stable")
    lo, hi = order_indices(arr.size, alpha)
    return 0.5 * (float(arr[lo - 1]) + float(arr[hi - 1]))


def univariate_quantile_lower(x: ArrayLike, alpha: float) -> float:
    """Smallest data point with at least ``k*alpha`` points at or below it
    and at least ``k*(1-alpha)`` points at or above it."""
    alpha = _check_alpha(alpha)
    arr = np.sort(as_real_vector(x), kind="stable")
    k = arr.size
    need_below = _snap(k * alpha)
    need_above = _snap(k * (1.0 - alpha))
    at_or_below = np.searchsorted(arr, arr, side="right")
    at_or_above = k - np.searchsorted(arr, arr, side="left")
    ok = (at_or_below >= need_below) & (at_or_above >= need_above)
    # a qualifying point always exists: the ceil(k*alpha)-th order statistic
    return float(arr[np.argmax(ok)])


def componentwise_quantile(points: ArrayLike, alpha: ArrayLike) -> NDArray[np.float64]:
    """Coordinate-by-coordinate ``q_alpha`` of ``k`` points in ``R^d``.

    ``points`` has shape ``(k, d)``; ``alpha`` is a scalar or a length-``d``
    vector with one level per coordinate.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError(f"points must be a nonempty (k, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite entries")
    k, d = pts.shape
    alphas = as_alpha_vector(alpha, d)
    ordered = np.sort(pts, axis=0, kind="stable")
    idx = np.array([order_indices(k, a) for a in alphas]) - 1
    cols = np.arange(d)
    return 0.5 * (ordered[idx[:, 0], cols] + ordered[idx[:, 1], cols])


def pointwise_path_quantile(
    paths: ArrayLike, alpha: ArrayLike, grid: ArrayLike | None = None
) -> NDArray[np.float64]:
    """Point-wise quantile of ``k`` discretized paths of shape ``(k, m)``.

    At every grid point the output is ``q_alpha`` of the ``k`` path values
    there. ``grid``, when given, must be strictly increasing with length ``m``.
    """
    arr = np.asarray(paths, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"paths must have shape (k, m), got {arr.shape}")
    m = arr.shape[1]
    if grid is not None:
        g = as_real_vector(grid, "grid")
        if g.size != m:
            raise ValueError(f"grid has {g.size} points but paths have length {m}")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
    return componentwise_quantile(arr, alpha)
