"""One-sample Kolmogorov-Smirnov statistic."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import kolmogi, ndtr

__all__ = ["KS_1PCT", "ks_critical", "ks_statistic", "normal_cdf"]

# asymptotic Kolmogorov 99% quantile; sqrt(m) * D above this rejects at 1%
KS_1PCT = 1.628


def ks_critical(m: int, level: float = 0.01) -> float:
    """Asymptotic critical value of ``D_m`` at significance ``level``."""
    if m < 1:
        raise ValueError("need at least one sample")
    return float(kolmogi(level)) / math.sqrt(m)


def normal_cdf(mean: float = 0.0, sd: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    if sd <= 0:
        raise ValueError(f"sd must be positive, got {sd}")
    return lambda x: ndtr((np.asarray(x, dtype=float) - mean) / sd)


def ks_statistic(samples: ArrayLike, cdf: Callable) -> float:
    """``sup_x |F_m(x) - F(x)|`` for the empirical cdf ``F_m`` of ``samples``.

    ``cdf`` may be vectorised or scalar-only.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("samples must be nonempty")
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise TypeError
    except TypeError:
        f = np.array([cdf(float(v)) for v in x])
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
