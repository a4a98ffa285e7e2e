"""Quantile-of-estimators pipeline: blocks, base estimators, contamination."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .geometry import GeoStatus, SolverOptions, geometric_quantile
from .quantiles import as_alpha_vector, componentwise_quantile, order_indices

__all__ = [
    "Amplitude",
    "BlockCountClamped",
    "BlockPartition",
    "ComponentWise",
    "ContaminationSpec",
    "Dependent",
    "FixedValue",
    "Geometric",
    "Mean",
    "OLS",
    "Placement",
    "QoEConfig",
    "QoEResult",
    "SampleQuantile",
    "Variance",
    "admissible_beta",
    "as_dataset",
    "block_count",
    "block_estimates",
    "contaminate",
    "partition",
    "qoe_estimate",
    "raw_estimate",
]


def as_dataset(data: ArrayLike) -> NDArray[np.float64]:
    """Return ``data`` as a finite ``(n, d)`` float array; 1-D input becomes one column."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"data must be a nonempty (n, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data contain non-finite entries")
    return arr


# ---------------------------------------------------------------- blocks


@dataclass(frozen=True)
class BlockPartition:
    """``k`` contiguous blocks of ``floor(n/k)`` indices; the tail is unused."""

    n: int
    k: int
    block_size: int
    discarded: int

    @property
    def used(self) -> int:
        return self.k * self.block_size

    def bounds(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.k:
            raise IndexError(f"block {i} out of range for k={self.k}")
        return i * self.block_size, (i + 1) * self.block_size

    def slices(self) -> list[slice]:
        return [slice(*self.bounds(i)) for i in range(self.k)]

    def block_of(self, index: ArrayLike) -> NDArray[np.int64]:
        """Block number of each index, ``-1`` for discarded indices."""
        idx = np.asarray(index, dtype=np.int64)
        return np.where(idx < self.used, idx // self.block_size, -1)

    def reshape(self, data: NDArray[np.float64]) -> NDArray[np.float64]:
        """View the used rows of an ``(n, d)`` array as ``(k, block_size, d)``."""
        return data[: self.used].reshape(self.k, self.block_size, data.shape[1])


def partition(n: int, k: int) -> BlockPartition:
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    b = n // k
    return BlockPartition(n=n, k=k, block_size=b, discarded=n - k * b)


class BlockCountClamped(UserWarning):
    """``floor(c n^beta)`` fell outside ``[1, n]`` and was clamped."""


def block_count(n: int, c: float, beta: float) -> int:
    """``floor(c n^beta)`` clamped to ``[1, n]``; clamping emits :class:`BlockCountClamped`."""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    raw = c * float(n) ** beta
    # n^beta is often meant to be an integer (10^4 ** 0.5); absorb pow() rounding
    near = round(raw)
    k = near if abs(raw - near) <= 1e-9 * max(1.0, raw) else math.floor(raw)
    if k < 1 or k > n:
        clamped = min(max(k, 1), n)
        warnings.warn(f"block count {k} clamped to {clamped} for n={n}", BlockCountClamped, stacklevel=2)
        return clamped
    return k


def admissible_beta(gamma: float, beta_star: float) -> tuple[float, float] | None:
    """Open interval ``(2 gamma, beta_star)`` of block-growth exponents, or ``None`` if empty."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if not 0.0 < beta_star <= 1.0:
        raise ValueError(f"beta_star must lie in (0, 1], got {beta_star}")
    lo = 2.0 * gamma
    return (lo, beta_star) if lo < beta_star else None


# ---------------------------------------------------------------- contamination


class Placement:
    WORST_CASE = "worst_case_one_per_block"
    UNIFORM = "uniform_random"
    PREFIX = "prefix"
    ALL = (WORST_CASE, UNIFORM, PREFIX)


@dataclass(frozen=True)
class FixedValue:
    """Every replaced entry is set to ``value``."""

    value: float


@dataclass(frozen=True)
class Amplitude:
    """Replaced rows become ``magnitude * sign``; ``signs`` is ``"positive"`` or ``"alternating"``."""

    magnitude: float
    signs: str = "alternating"

    def __post_init__(self) -> None:
        if self.signs not in ("positive", "alternating"):
            raise ValueError(f"unknown sign pattern {self.signs!r}")


@dataclass(frozen=True)
class Dependent:
    """Replaced rows copy the clean mean of their own block, multiplied by ``scale``.

    Rows outside every block use the clean full-sample mean. The adversary
    sees the clean data and the block layout before choosing values.
    """

    scale: float


Adversary = Union[FixedValue, Amplitude, Dependent]


@dataclass(frozen=True)
class ContaminationSpec:
    """Give exactly one of ``count`` or ``rate``; ``rate`` means ``floor(n**rate)`` rows."""

    count: int | None = None
    rate: float | None = None
    placement: str = Placement.WORST_CASE
    adversary: Adversary = field(default_factory=lambda: FixedValue(1e9))

    def __post_init__(self) -> None:
        if (self.count is None) == (self.rate is None):
            raise ValueError("give exactly one of count and rate")
        if self.count is not None and self.count < 0:
            raise ValueError(f"count must be nonnegative, got {self.count}")
        if self.rate is not None and not 0.0 <= self.rate < 1.0:
            raise ValueError(f"rate must lie in [0, 1), got {self.rate}")
        if self.placement not in Placement.ALL:
            raise ValueError(f"unknown placement {self.placement!r}")

    def resolve_count(self, n: int) -> int:
        if self.count is not None:
            l = self.count
        else:
            raw = float(n) ** self.rate
            l = round(raw) if abs(raw - round(raw)) <= 1e-9 * raw else math.floor(raw)
        if l > n:
            raise ValueError(f"cannot contaminate {l} of {n} rows")
        return l

    @classmethod
    def clean(cls) -> ContaminationSpec:
        return cls(count=0)


def _place(l: int, spec: ContaminationSpec, part: BlockPartition, rng) -> NDArray[np.int64]:
    if spec.placement == Placement.PREFIX:
        return np.arange(l, dtype=np.int64)
    if spec.placement == Placement.UNIFORM:
        if rng is None:
            raise ValueError("uniform placement needs a random generator")
        return np.sort(rng.choice(part.n, size=l, replace=False)).astype(np.int64)
    if l > part.k:
        raise ValueError(f"worst-case placement needs count <= k, got {l} > {part.k}")
    if rng is None:
        blocks = np.arange(l)
        offsets = np.zeros(l, dtype=np.int64)
    else:
        blocks = np.sort(rng.choice(part.k, size=l, replace=False))
        offsets = rng.integers(0, part.block_size, size=l)
    return (blocks * part.block_size + offsets).astype(np.int64)


def contaminate(
    data: ArrayLike, spec: ContaminationSpec, part: BlockPartition, rng: np.random.Generator | None = None
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Return a corrupted copy of ``data`` and the sorted replaced row indices."""
    clean = as_dataset(data)
    if clean.shape[0] != part.n:
        raise ValueError(f"data have {clean.shape[0]} rows but the partition expects {part.n}")
    out = clean.copy()
    l = spec.resolve_count(part.n)
    if l == 0:
        return out, np.empty(0, dtype=np.int64)
    idx = _place(l, spec, part, rng)
    adv = spec.adversary
    if isinstance(adv, FixedValue):
        out[idx] = adv.value
    elif isinstance(adv, Amplitude):
        signs = np.ones(l) if adv.signs == "positive" else np.where(np.arange(l) % 2 == 0, 1.0, -1.0)
        out[idx] = adv.magnitude * signs[:, None]
    elif isinstance(adv, Dependent):
        block_means = part.reshape(clean).mean(axis=1)
        owner = part.block_of(idx)
        rows = np.where(owner[:, None] >= 0, block_means[np.maximum(owner, 0)], clean.mean(axis=0))
        out[idx] = adv.scale * rows
    else:
        raise TypeError(f"unknown adversary {adv!r}")
    return out, idx


# ---------------------------------------------------------------- base estimators


@dataclass(frozen=True)
class Mean:
    def output_dim(self, d: int) -> int:
        return d

    def apply(self, blocks: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
        return blocks.mean(axis=1), np.zeros(blocks.shape[0], dtype=bool)


@dataclass(frozen=True)
class Variance:
    """Per-column U-statistic with kernel ``(x1 - x2)^2 / 2``, i.e. the ``ddof=1`` variance."""

    def output_dim(self, d: int) -> int:
        return d

    def apply(self, blocks):
        if blocks.shape[1] < 2:
            raise ValueError("the variance U-statistic needs at least two observations per block")
        return blocks.var(axis=1, ddof=1), np.zeros(blocks.shape[0], dtype=bool)


@dataclass(frozen=True)
class SampleQuantile:
    alpha: float = 0.5

    def output_dim(self, d: int) -> int:
        return d

    def apply(self, blocks):
        lo, hi = order_indices(blocks.shape[1], self.alpha)
        s = np.sort(blocks, axis=1, kind="stable")
        return 0.5 * (s[:, lo - 1] + s[:, hi - 1]), np.zeros(blocks.shape[0], dtype=bool)


@dataclass(frozen=True)
class OLS:
    """Least squares of column ``p`` on columns ``0..p-1`` (no implicit intercept).

    Rank-deficient blocks get the minimum-norm solution and a degeneracy flag.
    """

    p: int

    def output_dim(self, d: int) -> int:
        if d != self.p + 1:
            raise ValueError(f"OLS with p={self.p} needs {self.p + 1} data columns, got {d}")
        return self.p

    def apply(self, blocks):
        x, y = blocks[:, :, : self.p], blocks[:, :, self.p]
        coef = np.einsum("kpb,kb->kp", np.linalg.pinv(x), y)
        degenerate = np.linalg.matrix_rank(x) < self.p
        return coef, np.atleast_1d(degenerate)


BaseEstimator = Union[Mean, Variance, SampleQuantile, OLS]


def block_estimates(
    data: ArrayLike, est: BaseEstimator, part: BlockPartition
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Apply ``est`` to every block; returns the ``(k, d_out)`` estimates and per-block degeneracy flags."""
    arr = as_dataset(data)
    if arr.shape[0] != part.n:
        raise ValueError(f"data have {arr.shape[0]} rows but the partition expects {part.n}")
    if part.block_size == 0:
        raise ValueError("empty blocks")
    est.output_dim(arr.shape[1])
    return est.apply(part.reshape(arr))


# ---------------------------------------------------------------- QoE


@dataclass(frozen=True)
class ComponentWise:
    alpha: float | tuple[float, ...] = 0.5


@dataclass(frozen=True)
class Geometric:
    u: tuple[float, ...]
    options: SolverOptions = field(default_factory=SolverOptions)


QuantileSpec = Union[ComponentWise, Geometric]


@dataclass(frozen=True)
class QoEConfig:
    """Block rule (explicit ``k`` or ``floor(c n^beta)``) plus the quantile to apply."""

    k: int | None = None
    c: float | None = None
    beta: float | None = None
    quantile: QuantileSpec = field(default_factory=ComponentWise)
    beta_star: float = 0.5
    shuffle: bool = False

    def __post_init__(self) -> None:
        if self.k is None and (self.c is None or self.beta is None):
            raise ValueError("give k or both c and beta")
        if self.k is not None and (self.c is not None or self.beta is not None):
            raise ValueError("give k or (c, beta), not both")
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.c is not None and self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0.0 < self.beta_star <= 1.0:
            raise ValueError(f"beta_star must lie in (0, 1], got {self.beta_star}")

    def blocks_for(self, n: int) -> int:
        if self.k is not None:
            return self.k
        return block_count(n, self.c, self.beta)


@dataclass
class QoEResult:
    estimate: NDArray[np.float64]
    k: int
    block_size: int
    discarded: int
    degenerate: NDArray[np.bool_]
    geo_status: GeoStatus | None = None
    unique: bool = True


def apply_quantile(z: NDArray[np.float64], spec: QuantileSpec):
    """Quantile of block estimates ``z`` (shape ``(k, d)``); returns ``(point, status, unique)``."""
    if isinstance(spec, ComponentWise):
        as_alpha_vector(spec.alpha, z.shape[1])
        return componentwise_quantile(z, spec.alpha), None, True
    if isinstance(spec, Geometric):
        res = geometric_quantile(z, np.asarray(spec.u, dtype=float), spec.options)
        return res.point, res.status, res.unique
    raise TypeError(f"unknown quantile spec {spec!r}")


def qoe_estimate(
    data: ArrayLike, est: BaseEstimator, cfg: QoEConfig, rng: np.random.Generator | None = None
) -> QoEResult:
    """Block the data, estimate on each block, return the configured quantile of the estimates."""
    arr = as_dataset(data)
    n = arr.shape[0]
    if cfg.shuffle:
        if rng is None:
            raise ValueError("shuffling needs a random generator")
        arr = arr[rng.permutation(n)]
    part = partition(n, cfg.blocks_for(n))
    z, degenerate = block_estimates(arr, est, part)
    point, status, unique = apply_quantile(z, cfg.quantile)
    return QoEResult(
        estimate=np.asarray(point, dtype=float),
        k=part.k,
        block_size=part.block_size,
        discarded=part.discarded,
        degenerate=degenerate,
        geo_status=status,
        unique=unique,
    )


def raw_estimate(data: ArrayLike, est: BaseEstimator) -> NDArray[np.float64]:
    """The base estimator on the full sample, a single block."""
    arr = as_dataset(data)
    z, _ = block_estimates(arr, est, partition(arr.shape[0], 1))
    return z[0]
