import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from robustqoe.asymptotics import c_nu
from robustqoe.geometry import (
    GeoStatus,
    NonConvergenceError,
    SolverOptions,
    adjusted_parameter,
    collinearity_test,
    first_order_residual,
    geometric_quantile,
    l1_geometric_quantile,
    objective,
    uniqueness_predicate,
)
from robustqoe.quantiles import componentwise_quantile, univariate_quantile

SQUARE = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def nm_minimum(pts, u):
    """Best Nelder-Mead value of the objective, started from every data point and the centroid."""
    f = lambda y: objective(pts, y, u)
    starts = list(pts) + [pts.mean(axis=0)]
    best = min(
        (minimize(f, s, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000}) for s in starts),
        key=lambda r: r.fun,
    )
    return best.fun, best.x


def random_u(rng, d, radius):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v) * radius * rng.uniform() ** (1 / d)


# ---------------------------------------------------------------- line fits and predicates


def test_collinearity_examples():
    fit = collinearity_test([[0, 0], [1, 1], [2, 2]])
    assert fit is not None
    assert np.allclose(fit.direction, [2**-0.5, 2**-0.5])
    assert collinearity_test([[0, 0], [1, 0], [0, 1]]) is None
    # triangle area is eps; the threshold is tol * scale^2 = 4e-10
    assert collinearity_test([[0, 0], [1, 1e-12], [2, 0]]) is not None
    assert collinearity_test([[0, 0], [1, 1e-3], [2, 0]]) is None


def test_collinearity_small_sets_and_reconstruction():
    assert collinearity_test([[3.0, 4.0]]) is not None
    assert collinearity_test([[0.0, 0.0], [1.0, 5.0]]) is not None
    rng = np.random.default_rng(1)
    t = rng.normal(size=7)
    h = np.array([-0.6, 0.8])
    pts = np.array([2.0, -1.0]) + t[:, None] * h
    fit = collinearity_test(pts)
    assert np.isclose(np.linalg.norm(fit.direction), 1.0)
    assert fit.direction[np.flatnonzero(fit.direction)[0]] > 0
    recon = fit.origin + fit.coordinates[:, None] * fit.direction
    assert np.abs(recon - pts).max() < 1e-12


@pytest.mark.parametrize("k, u_norm, collinear, expected", [(5, 0.0, True, True), (4, 0.0, True, False), (4, 0.5, True, False), (4, 0.0, False, True), (4, 0.3, True, True)])
def test_uniqueness_predicate(k, u_norm, collinear, expected):
    assert uniqueness_predicate(k, u_norm, collinear) is expected


def test_first_order_residual_examples():
    assert first_order_residual(SQUARE, [0.0, 0.0], [0.0, 0.0]) == 0.0
    assert np.isclose(first_order_residual([[0.0, 0.0]], [1.0, 0.0], [0.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        first_order_residual(SQUARE, [1.0, 0.0], [0.0, 0.0])


# ---------------------------------------------------------------- solver examples


def test_symmetric_square_is_centred():
    res = geometric_quantile(SQUARE, [0.0, 0.0])
    assert np.linalg.norm(res.point) < 1e-12


def test_two_points_fall_back_to_midpoint():
    res = geometric_quantile([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0])
    assert res.status is GeoStatus.COLLINEAR_FALLBACK
    assert np.allclose(res.point, [0.5, 0.0])
    assert not res.unique


def test_single_point_for_any_u():
    res = geometric_quantile([[2.0, -3.0]], [0.5, 0.4])
    assert np.array_equal(res.point, [2.0, -3.0])


def test_generic_five_points_match_oracle():
    rng = np.random.default_rng(5)
    pts = rng.uniform(size=(5, 2))
    u = np.array([0.3, 0.0])
    res = geometric_quantile(pts, u)
    fun, x = nm_minimum(pts, u)
    assert np.linalg.norm(res.point - x) < 1e-3
    assert objective(pts, res.point, u) <= fun + 1e-12


def test_collinear_matches_line_quantile():
    t = np.array([0.0, 1.0, 3.0, 4.5, 7.0])
    h = np.array([0.6, 0.8])
    pts = t[:, None] * h
    # u off the line: solved by iteration, lands on a data point
    u = np.array([0.1, 0.2])  # <u, h> = 0.22, alpha = 0.61
    res = geometric_quantile(pts, u)
    assert res.status is GeoStatus.ANCHORED
    assert np.allclose(res.point, univariate_quantile(t, 0.61) * h)
    # u along the line: closed form on the line coordinates
    u = -0.3 * h  # alpha = 0.35
    res = geometric_quantile(pts, u)
    assert res.status is GeoStatus.COLLINEAR_FALLBACK
    assert np.allclose(res.point, univariate_quantile(t, 0.35) * h)
    # reversing the order of the points (and so any naive line orientation) changes nothing
    assert np.array_equal(geometric_quantile(pts[::-1], u).point, res.point)
    assert np.array_equal(geometric_quantile(pts[::-1], -u).point, geometric_quantile(pts, -u).point)


def test_collinear_odd_median_is_middle_point():
    rng = np.random.default_rng(11)
    for _ in range(50):
        k = 2 * rng.integers(1, 6) + 1
        t = np.sort(rng.normal(size=k))
        h = rng.normal(size=3)
        h /= np.linalg.norm(h)
        pts = rng.normal(size=3) + t[:, None] * h
        res = geometric_quantile(rng.permutation(pts), np.zeros(3))
        assert np.array_equal(res.point, pts[k // 2])


def test_anchored_solution_at_heavy_point():
    pts = np.array([[0.0, 0.0]] * 3 + [[1.0, 0.0], [0.0, 1.0], [-1.0, -0.5]])
    u = np.array([0.1, -0.2])
    res = geometric_quantile(pts, u)
    assert res.status is GeoStatus.ANCHORED
    assert np.array_equal(res.point, [0.0, 0.0])
    assert objective(pts, res.point, u) <= nm_minimum(pts, u)[0] + 1e-12


def test_wide_dynamic_range():
    rng = np.random.default_rng(3)
    cluster = rng.normal(scale=0.05, size=(45, 2))
    far = 1e9 * np.ones((5, 2)) + rng.normal(size=(5, 2))
    pts = np.vstack([cluster, far])
    res = geometric_quantile(pts, np.zeros(2))
    assert np.linalg.norm(res.point) < 0.2


def test_errors():
    with pytest.raises(ValueError):
        geometric_quantile(SQUARE, [0.8, 0.6])
    with pytest.raises(ValueError):
        geometric_quantile([[0.0, np.inf]], [0.0, 0.0])
    rng = np.random.default_rng(0)
    with pytest.raises(NonConvergenceError) as info:
        geometric_quantile(rng.normal(size=(9, 2)), [0.2, 0.1], SolverOptions(max_iter=1))
    assert np.all(np.isfinite(info.value.result.point))


# ---------------------------------------------------------------- invariants


@settings(max_examples=150, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_weights_and_reconstruction(k, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(k, 2))
    u = random_u(rng, 2, 0.9)
    res = geometric_quantile(pts, u)
    w = res.weights
    assert np.all((w >= 0) & (w <= 1)) and abs(w.sum() - 1) <= 1e-12
    assert np.all(np.isfinite(res.point))
    if res.status is GeoStatus.INTERIOR:
        assert res.residual <= 1e-10 * k
        recon = (w[:k] @ pts + w[k] * u) / (1 - w[k])
        assert np.linalg.norm(recon - res.point) <= 1e-9


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_equivariance(k, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(k, 2))
    u = random_u(rng, 2, 0.8)
    c, s = rng.exponential(3.0), rng.normal(scale=10, size=2)
    lhs = geometric_quantile(c * (pts - s), u).point
    rhs = c * (geometric_quantile(pts, u).point - s)
    assert np.linalg.norm(lhs - rhs) <= 1e-7 * c * (1 + np.abs(s).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 7), st.integers(0, 2**32 - 1))
def test_objective_not_above_oracle(k, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(k, 2))
    u = random_u(rng, 2, 0.7)
    res = geometric_quantile(pts, u)
    assert objective(pts, res.point, u) <= nm_minimum(pts, u)[0] + 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(8, 40), st.floats(0.05, 0.4), st.integers(0, 2**32 - 1))
def test_bounded_displacement(k, nu, seed):
    rng = np.random.default_rng(seed)
    u = random_u(rng, 2, 0.98 * (1 - 2 * nu))
    z, r = rng.normal(size=2), 0.1
    outside = int(np.ceil(nu * k)) - 1
    inner = rng.normal(size=(k - outside, 2))
    inner = z + r * inner / np.maximum(np.linalg.norm(inner, axis=1, keepdims=True), 1.0) * rng.uniform(size=(k - outside, 1))
    outer = z + rng.choice([-1.0, 1.0], size=(outside, 2)) * rng.uniform(10, 1e6, size=(outside, 2))
    pts = np.vstack([inner, outer])
    res = geometric_quantile(rng.permutation(pts), u)
    assert np.linalg.norm(res.point - z) <= c_nu(nu, np.linalg.norm(u)) * r * (1 + 1e-9)


# ---------------------------------------------------------------- l1 quantile


def test_l1_examples():
    pts = np.array([[0.0, 5.0], [2.0, 1.0], [1.0, 3.0]])
    res = l1_geometric_quantile(pts, [0.0, 0.0])
    assert np.array_equal(res.point, [1.0, 3.0]) and res.unique.all()
    res = l1_geometric_quantile(np.array([[0.0], [1.0], [2.0], [3.0]]), [0.0])
    assert res.point[0] == 1.5 and not res.unique[0]
    with pytest.raises(ValueError):
        l1_geometric_quantile(pts, [0.0, 1.0])


def test_l1_agrees_with_componentwise_median():
    rng = np.random.default_rng(2)
    for _ in range(100):
        k = 2 * rng.integers(0, 10) + 1
        pts = rng.normal(size=(k, 3))
        assert np.array_equal(l1_geometric_quantile(pts, np.zeros(3)).point, componentwise_quantile(pts, 0.5))


def test_l1_beats_random_search():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(8, 3))
    u = rng.uniform(-0.9, 0.9, size=3)
    f = lambda y: (np.abs(pts - y).sum(axis=-1) + (pts - y) @ u).sum(axis=-1) if y.ndim == 1 else (
        np.abs(pts[None] - y[:, None]).sum(axis=-1) + ((pts[None] - y[:, None]) @ u)
    ).sum(axis=-1)
    best = f(l1_geometric_quantile(pts, u).point)
    lo, hi = pts.min(axis=0) - 0.5, pts.max(axis=0) + 0.5
    cands = rng.uniform(lo, hi, size=(10_000, 3))
    assert best <= f(cands).min() + 1e-12


# ---------------------------------------------------------------- adjusted parameter


def test_adjusted_parameter_p0_is_exact():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(9, 2))
    u = np.array([0.12345, -0.3])
    x_star = geometric_quantile(pts, u).point
    v = adjusted_parameter(pts, pts.copy(), x_star, u)
    assert np.array_equal(v, u)


def test_adjusted_parameter_resolves():
    rng = np.random.default_rng(8)
    for _ in range(20):
        k, p = 9, 2
        pts = rng.normal(size=(k, 2))
        u = random_u(rng, 2, 0.5)
        x_star = geometric_quantile(pts, u).point
        mod = pts.copy()
        mod[:p] = rng.normal(scale=20, size=(p, 2))
        v = adjusted_parameter(pts, mod, x_star, u)
        assert np.linalg.norm(v - u) <= 2 * p / k * (1 + 1e-12)
        assert np.linalg.norm(v) < 1
        assert np.linalg.norm(geometric_quantile(mod, v).point - x_star) < 1e-6


def test_adjusted_parameter_rejects_large_p():
    pts = np.random.default_rng(1).normal(size=(8, 2))
    mod = pts.copy()
    mod[:4] += 1.0
    with pytest.raises(ValueError):
        adjusted_parameter(pts, mod, np.zeros(2), np.zeros(2))
