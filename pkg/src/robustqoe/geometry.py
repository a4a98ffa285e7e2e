"""Geometric (spatial) quantiles of finite point sets in Euclidean space.

The geometric ``u``-quantile of ``x_1..x_k`` minimises

    F(y) = sum_i ||x_i - y|| + <u, x_i - y>,    ||u|| < 1.

Off the data points the minimiser solves ``sum_i (x_i - y)/||x_i - y|| + k u = 0``,
which rearranges into the fixed point

    y = (sum_i x_i / ||x_i - y|| + k u) / sum_i 1/||x_i - y||.

That map is a majorise-minimise step, so it decreases ``F`` monotonically; the
solver alternates it with safeguarded Newton steps and handles iterates that
reach a data point with an exact subgradient test. Collinear samples whose
quantile is not unique fall back to the univariate ``q_alpha`` on the line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import pdist

from .quantiles import componentwise_quantile, order_indices

__all__ = [
    "GeoQuantileResult",
    "GeoStatus",
    "L1QuantileResult",
    "LineFit",
    "NonConvergenceError",
    "SolverOptions",
    "adjusted_parameter",
    "anchor_surplus",
    "collinearity_test",
    "first_order_residual",
    "geometric_quantile",
    "l1_geometric_quantile",
    "objective",
    "uniqueness_predicate",
]


class GeoStatus(enum.Enum):
    INTERIOR = "interior"
    ANCHORED = "anchored"
    COLLINEAR_FALLBACK = "collinear_fallback"


@dataclass(frozen=True)
class SolverOptions:
    residual_tol: float = 1e-10  # multiplied by k
    step_tol: float = 1e-12  # multiplied by the point-set scale
    max_iter: int = 100_000
    collinear_tol: float = 1e-10
    # the three below are relative to the distance from a data point to its
    # nearest distinct neighbour, so clusters far from outliers keep resolution
    anchor_tol: float = 1e-12  # an iterate this close has landed on the point
    escape_step: float = 1e-6  # restart displacement after a failed anchor test
    anchor_probe: float = 1e-3  # run the anchor test once this close to a point


@dataclass(frozen=True)
class GeoQuantileResult:
    point: NDArray[np.float64]
    weights: NDArray[np.float64]
    residual: float
    iterations: int
    status: GeoStatus
    anchor: int | None = None
    unique: bool = True


class NonConvergenceError(RuntimeError):
    """Raised when the iteration cap is hit; ``result`` holds the best iterate."""

    def __init__(self, message: str, result: GeoQuantileResult):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class LineFit:
    origin: NDArray[np.float64]
    direction: NDArray[np.float64]
    coordinates: NDArray[np.float64]

    def at(self, t: float) -> NDArray[np.float64]:
        return self.origin + t * self.direction


def _as_points(points: ArrayLike) -> NDArray[np.float64]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError(f"points must be a nonempty (k, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite entries")
    return pts


def _as_direction(u: ArrayLike, d: int) -> NDArray[np.float64]:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        arr = np.full(d, float(arr)) if d == 1 else None
    if arr is None or arr.shape != (d,):
        raise ValueError(f"u must be a vector of length {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("u contains non-finite entries")
    if np.linalg.norm(arr) >= 1.0:
        raise ValueError(f"u must have Euclidean norm < 1, got {np.linalg.norm(arr)}")
    return arr


def _scale(pts: NDArray[np.float64]) -> float:
    if pts.shape[0] < 2:
        return 0.0
    return float(pdist(pts).max())


def objective(points: ArrayLike, y: ArrayLike, u: ArrayLike) -> float:
    """``sum_i ||x_i - y|| + <u, x_i - y>``."""
    pts = _as_points(points)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    diff = pts - y
    return float(np.linalg.norm(diff, axis=1).sum() + (diff @ u).sum())


def collinearity_test(points: ArrayLike, tol: float = 1e-10) -> LineFit | None:
    """Fit a line through the points if they are collinear up to ``tol``.

    The points count as collinear when the summed area of all triangles with
    vertices in the set is at most ``tol * scale**2`` (``scale`` is the
    largest pairwise distance). Sets of at most two points always fit.
    """
    pts = _as_points(points)
    k, d = pts.shape
    scale = _scale(pts)
    if scale == 0.0:
        direction = np.zeros(d)
        direction[0] = 1.0
        return LineFit(pts[0].copy(), direction, np.zeros(k))
    if d > 1 and k > 2:
        threshold = tol * scale**2
        total = 0.0
        for i in range(k - 2):
            a = pts[i + 1 :] - pts[i]
            a_norm = np.linalg.norm(a, axis=1)
            base = a_norm[:-1]
            ok = base > 0
            unit = np.zeros_like(a[:-1])
            unit[ok] = a[:-1][ok] / base[ok, None]
            for j in range(a.shape[0] - 1):
                if not ok[j]:
                    continue
                b = a[j + 1 :]
                perp = b - np.outer(b @ unit[j], unit[j])
                total += 0.5 * base[j] * float(np.linalg.norm(perp, axis=1).sum())
                if total > threshold:
                    return None
    origin = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - origin, full_matrices=False)
    direction = vt[0]
    lead = np.flatnonzero(np.abs(direction) > 1e-12)[0]
    if direction[lead] < 0:
        direction = -direction
    direction = direction / np.linalg.norm(direction)
    return LineFit(origin, direction, (pts - origin) @ direction)


def _on_exception_set(k: int, u_norm: float) -> bool:
    # ||u|| = 1 - 2j/k  <=>  j = k(1 - ||u||)/2 is an integer in [1, floor(k/2)]
    t = k * (1.0 - u_norm) / 2.0
    j = round(t)
    return 1 <= j <= k // 2 and abs(t - j) <= 1e-9 * max(1.0, t)


def uniqueness_predicate(k: int, u_norm: float, collinear: bool) -> bool:
    """Whether the geometric quantile is guaranteed unique.

    Non-collinear sets always have a unique quantile; collinear ones do
    whenever ``u_norm`` avoids ``{1 - 2j/k : j = 1..floor(k/2)}``.
    """
    if not 0.0 <= u_norm < 1.0:
        raise ValueError(f"u_norm must lie in [0, 1), got {u_norm}")
    if not collinear:
        return True
    return not _on_exception_set(k, u_norm)


def first_order_residual(points: ArrayLike, y: ArrayLike, u: ArrayLike) -> float:
    """``|| sum_i (x_i - y)/||x_i - y|| + k u ||`` for ``y`` off the data points."""
    pts = _as_points(points)
    y = np.asarray(y, dtype=float)
    u = _as_direction(u, pts.shape[1])
    diff = pts - y
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist == 0.0):
        raise ValueError("y coincides with a data point; use anchor_surplus instead")
    return float(np.linalg.norm((diff / dist[:, None]).sum(axis=0) + pts.shape[0] * u))


def anchor_surplus(
    points: ArrayLike, j: int, u: ArrayLike, atol: float = 0.0
) -> tuple[NDArray[np.float64], int]:
    """Return ``(s, m)`` at data point ``x_j``.

    ``s = sum_{x_i != x_j} (x_i - x_j)/||x_i - x_j|| + k u`` and ``m`` is the
    multiplicity of ``x_j`` (points within ``atol``). ``x_j`` minimises the
    objective iff ``||s|| <= m``.
    """
    pts = _as_points(points)
    u = _as_direction(u, pts.shape[1])
    diff = pts - pts[j]
    dist = np.linalg.norm(diff, axis=1)
    same = dist <= atol
    s = (diff[~same] / dist[~same, None]).sum(axis=0) + pts.shape[0] * u
    return s, int(same.sum())


def _fixed_point_weights(dist: NDArray[np.float64], k: int) -> NDArray[np.float64]:
    inv = 1.0 / dist
    denom = inv.sum() + k
    return np.append(inv / denom, k / denom)


def _fallback(pts, u, fit: LineFit) -> GeoQuantileResult:
    k = pts.shape[0]
    alpha = (float(u @ fit.direction) + 1.0) / 2.0
    order = np.argsort(fit.coordinates, kind="stable")
    lo, hi = order_indices(k, alpha)
    weights = np.zeros(k + 1)
    weights[order[lo - 1]] += 0.5
    weights[order[hi - 1]] += 0.5
    # q_alpha of the line coordinates, taken between the two selected data points
    point = 0.5 * (pts[order[lo - 1]] + pts[order[hi - 1]])
    residual = _optimality_gap(pts, point, u, 0.0)
    return GeoQuantileResult(
        point, weights, residual, 0, GeoStatus.COLLINEAR_FALLBACK, None, not _alpha_on_grid(k, alpha)
    )


def _alpha_on_grid(k: int, alpha: float) -> bool:
    t = k * alpha
    j = round(t)
    return 1 <= j <= k - 1 and abs(t - j) <= 1e-9 * max(1.0, t)


def _optimality_gap(pts, y, u, atol: float) -> float:
    """Distance from 0 to the subdifferential of the objective at ``y``."""
    diff = pts - y
    dist = np.linalg.norm(diff, axis=1)
    same = dist <= atol
    s = (diff[~same] / dist[~same, None]).sum(axis=0) + pts.shape[0] * u
    return max(0.0, float(np.linalg.norm(s)) - int(same.sum()))


def geometric_quantile(
    points: ArrayLike, u: ArrayLike, options: SolverOptions | None = None
) -> GeoQuantileResult:
    """Geometric ``u``-quantile of the rows of ``points``.

    Collinear input is reduced to the line when the solution is known to lie
    on it (``u`` parallel to the line, or ``||u||`` in the non-uniqueness
    set); the line coordinate then uses ``q_alpha`` with
    ``alpha = (<u, h> + 1)/2``. Everything else is solved iteratively.

    Raises:
        ValueError: non-finite input or ``||u|| >= 1``.
        NonConvergenceError: ``options.max_iter`` reached.
    """
    opts = options or SolverOptions()
    pts = _as_points(points)
    k, d = pts.shape
    u = _as_direction(u, d)
    scale = _scale(pts)

    if k == 1 or scale == 0.0:
        weights = np.zeros(k + 1)
        weights[:k] = 1.0 / k
        return GeoQuantileResult(pts[0].copy(), weights, 0.0, 0, GeoStatus.COLLINEAR_FALLBACK)

    fit = collinearity_test(pts, opts.collinear_tol)
    if fit is not None:
        u_perp = u - float(u @ fit.direction) * fit.direction
        if np.linalg.norm(u_perp) <= 1e-12 or _on_exception_set(k, float(np.linalg.norm(u))):
            return _fallback(pts, u, fit)

    return _iterate(pts, u, scale, opts)


def _coincidence_tol(x: NDArray[np.float64]) -> float:
    # points closer than a few ulps of their own magnitude are the same point
    return 8.0 * np.finfo(float).eps * float(np.max(np.abs(x)))


def _iterate(pts, u, scale, opts: SolverOptions) -> GeoQuantileResult:
    k, d = pts.shape
    ku = k * u
    local: dict[int, tuple[float, float, int]] = {}

    def neighbourhood(j: int) -> tuple[float, float, int]:
        """``(coincidence tol, nearest distinct distance, multiplicity)`` of point ``j``."""
        if j not in local:
            dist = np.linalg.norm(pts - pts[j], axis=1)
            ctol = _coincidence_tol(pts[j])
            same = dist <= ctol
            nn = float(dist[~same].min()) if not same.all() else scale
            local[j] = (ctol, nn, int(same.sum()))
        return local[j]

    def try_anchor(j: int):
        ctol, _, _ = neighbourhood(j)
        s, m = anchor_surplus(pts, j, u, ctol)
        return s, m, float(np.linalg.norm(s)) <= m

    def anchored(j: int, it: int) -> GeoQuantileResult:
        same = np.linalg.norm(pts - pts[j], axis=1) <= neighbourhood(j)[0]
        weights = np.zeros(k + 1)
        weights[:k][same] = 1.0 / same.sum()
        return GeoQuantileResult(pts[j].copy(), weights, 0.0, it, GeoStatus.ANCHORED, j)

    y = componentwise_quantile(pts, 0.5)
    best_y, best_f = y.copy(), math.inf
    tol_res = opts.residual_tol * k
    tol_step = opts.step_tol * scale

    for it in range(1, opts.max_iter + 1):
        diff = pts - y
        dist = np.linalg.norm(diff, axis=1)
        j = int(np.argmin(dist))
        ctol, nn, _ = neighbourhood(j)
        if dist[j] <= opts.anchor_probe * nn:
            s, m, ok = try_anchor(j)
            if ok:
                return anchored(j, it)
            landed = max(opts.anchor_tol * nn, 2.0 * ctol)
            if dist[j] <= landed:
                # landed on a non-optimal data point: leave along the descent direction
                y = pts[j] + max(opts.escape_step * nn, 4.0 * landed) * s / np.linalg.norm(s)
                continue

        unit = diff / dist[:, None]
        grad_sum = unit.sum(axis=0) + ku
        residual = float(np.linalg.norm(grad_sum))
        f_here = float(dist.sum() - y @ ku)
        if f_here < best_f:
            best_y, best_f = y.copy(), f_here
        if residual <= tol_res:
            return GeoQuantileResult(
                y.copy(), _fixed_point_weights(dist, k), residual, it, GeoStatus.INTERIOR
            )

        inv = 1.0 / dist
        y_w = (inv @ pts + ku) / inv.sum()
        candidates = [y_w]
        hess = np.eye(d) * inv.sum() - (unit * inv[:, None]).T @ unit
        try:
            y_n = y + np.linalg.solve(hess, grad_sum)
            if np.all(np.isfinite(y_n)):
                candidates.append(y_n)
        except np.linalg.LinAlgError:
            pass
        vals = [float(np.linalg.norm(pts - c, axis=1).sum() - c @ ku) for c in candidates]
        y_new = candidates[int(np.argmin(vals))]
        step = float(np.linalg.norm(y_new - y))
        y = y_new
        if step <= tol_step:
            # stalled: accept only if the first-order condition holds at the new point
            dist = np.linalg.norm(pts - y, axis=1)
            j = int(np.argmin(dist))
            _, _, ok = try_anchor(j)
            if ok:
                return anchored(j, it)
            if dist[j] > 0:
                res = first_order_residual(pts, y, u)
                if res <= tol_res:
                    return GeoQuantileResult(
                        y.copy(), _fixed_point_weights(dist, k), res, it, GeoStatus.INTERIOR
                    )

    dist = np.linalg.norm(pts - best_y, axis=1)
    result = GeoQuantileResult(
        best_y,
        _fixed_point_weights(np.maximum(dist, 1e-300), k),
        _optimality_gap(pts, best_y, u, _coincidence_tol(best_y)),
        opts.max_iter,
        GeoStatus.INTERIOR,
    )
    raise NonConvergenceError(f"no convergence within {opts.max_iter} iterations", result)


def adjusted_parameter(
    original: ArrayLike,
    modified: ArrayLike,
    x_star: ArrayLike,
    u: ArrayLike,
    atol: float | None = None,
) -> NDArray[np.float64]:
    """Quantile parameter ``v`` under which ``x_star`` stays the quantile of ``modified``.

    ``modified`` may differ from ``original`` only in a prefix of ``p`` rows,
    where ``p`` is one past the last differing row. With ``m`` the number of
    modified points equal to ``x_star`` and ``g_j`` the unit vector from
    ``x_star`` to modified point ``j``::

        v = 2p/(2p + m) * (u m/(2p) - (1/k) sum_{j: x~_j != x*} g_j)

    and ``v = u`` when ``p = 0``. Then ``||v - u|| <= 2p/k`` and ``||v|| < 1``.
    """
    orig = _as_points(original)
    mod = _as_points(modified)
    if orig.shape != mod.shape:
        raise ValueError("original and modified sets must have the same shape")
    k, d = orig.shape
    u = _as_direction(u, d)
    x_star = np.asarray(x_star, dtype=float)
    changed = np.flatnonzero(np.any(orig != mod, axis=1))
    p = int(changed[-1]) + 1 if changed.size else 0
    if p >= k * (1.0 - np.linalg.norm(u)) / 2.0:
        raise ValueError(f"p={p} modified points is not below k(1-||u||)/2")
    if p == 0:
        return u.copy()
    if atol is None:
        atol = 1e-12 * max(_scale(mod), 1.0)
    diff = mod - x_star
    dist = np.linalg.norm(diff, axis=1)
    at_star = dist <= atol
    m = int(at_star.sum())
    g_sum = (diff[~at_star] / dist[~at_star, None]).sum(axis=0)
    v = (2.0 * p / (2.0 * p + m)) * (u * m / (2.0 * p) - g_sum / k)
    if np.linalg.norm(v) >= 1.0:
        raise ArithmeticError(f"adjusted parameter has norm {np.linalg.norm(v)} >= 1")
    return v


@dataclass(frozen=True)
class L1QuantileResult:
    point: NDArray[np.float64]
    unique: NDArray[np.bool_]


def l1_geometric_quantile(points: ArrayLike, u: ArrayLike) -> L1QuantileResult:
    """Geometric quantile under the l1 norm.

    The objective separates by coordinate, so coordinate ``l`` is the
    univariate geometric quantile with ``alpha_l = (u_l + 1)/2``; where that
    is not unique the midpoint ``q_alpha`` is returned and flagged.
    """
    pts = _as_points(points)
    k, d = pts.shape
    u = np.asarray(u, dtype=float)
    u = np.full(d, float(u)) if u.ndim == 0 else u
    if u.shape != (d,):
        raise ValueError(f"u must have length {d}")
    if not np.all(np.abs(u) < 1.0):
        raise ValueError("every |u_l| must be < 1")
    alphas = (u + 1.0) / 2.0
    point = componentwise_quantile(pts, alphas)
    unique = np.array([not _alpha_on_grid(k, a) for a in alphas])
    return L1QuantileResult(point, unique)
