"""Closed-form limit covariances and concentration bounds for QoE estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "ConcentrationParams",
    "LimitLaw",
    "bivariate_normal_upper",
    "brownian_qoe_cov",
    "c_nu",
    "concentration_bound",
    "gaussian_orthant",
    "ols_gamma",
    "psi",
    "sigma_alpha",
]

_STD = NormalDist()


def c_nu(nu: float, u_norm: float) -> float:
    """Displacement constant ``2(1-nu) / (1 - 2nu - |u|)`` of the geometric quantile."""
    if not 0.0 <= u_norm < 1.0:
        raise ValueError(f"u_norm must lie in [0, 1), got {u_norm}")
    if not 0.0 < nu < (1.0 - u_norm) / 2.0:
        raise ValueError(f"nu must lie in (0, {(1.0 - u_norm) / 2.0}), got {nu}")
    return 2.0 * (1.0 - nu) / (1.0 - 2.0 * nu - u_norm)


def psi(s: float, p: float) -> float:
    """Binomial relative entropy ``(1-s)log((1-s)/(1-p)) + s log(s/p)`` for ``0<p<s<1/2``."""
    if not 0.0 < p < s < 0.5:
        raise ValueError(f"psi requires 0 < p < s < 1/2, got s={s}, p={p}")
    # log1p keeps precision when s is within rounding distance of p
    return (1.0 - s) * math.log1p((p - s) / (1.0 - p)) + s * math.log1p((s - p) / p)


@dataclass(frozen=True)
class ConcentrationParams:
    """Inputs of the geometric-QoE deviation bound.

    ``tau`` is the fraction of blocks for which the per-block tail bound
    ``P(|mu_j - mu| > eps) <= p`` is not assumed to hold.
    """

    nu: float
    p: float
    k: int
    u_norm: float = 0.0
    tau: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.u_norm < 1.0:
            raise ValueError(f"u_norm must lie in [0, 1), got {self.u_norm}")
        if not 0.0 < self.p < self.nu < (1.0 - self.u_norm) / 2.0:
            raise ValueError(
                f"need 0 < p < nu < (1-|u|)/2, got p={self.p}, nu={self.nu}, u_norm={self.u_norm}"
            )
        tau_max = (self.nu - self.p) / (1.0 - self.p)
        if not 0.0 <= self.tau <= tau_max:
            raise ValueError(f"tau must lie in [0, {tau_max}], got {self.tau}")
        if self.k < 0:
            raise ValueError(f"k must be nonnegative, got {self.k}")


def concentration_bound(cp: ConcentrationParams) -> float:
    """``exp(-k(1-tau) psi((nu-tau)/(1-tau); p))``; ``exp(-k psi(nu; p))`` when ``tau=0``."""
    if cp.k == 0:
        return 1.0
    s = (cp.nu - cp.tau) / (1.0 - cp.tau)
    if s <= cp.p:
        # tau at its upper limit: the rate function vanishes
        return 1.0
    return math.exp(-cp.k * (1.0 - cp.tau) * psi(s, cp.p))


def gaussian_orthant(rho: float) -> float:
    """``P(Z1 > 0, Z2 > 0)`` for a standard bivariate normal with correlation ``rho``."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _gauss_legendre(f, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    return half * float(np.dot(_GL_WEIGHTS, f(0.5 * (a + b) + half * _GL_NODES)))


def _adaptive_gl(f, a: float, b: float, atol: float, depth: int = 0) -> float:
    whole = _gauss_legendre(f, a, b)
    mid = 0.5 * (a + b)
    left, right = _gauss_legendre(f, a, mid), _gauss_legendre(f, mid, b)
    if abs(left + right - whole) <= atol or depth >= 40:
        return left + right
    return _adaptive_gl(f, a, mid, atol / 2, depth + 1) + _adaptive_gl(f, mid, b, atol / 2, depth + 1)


def bivariate_normal_upper(a: float, b: float, rho: float, atol: float = 1e-10) -> float:
    """``P(Z1 > a, Z2 > b)`` for a standard bivariate normal with correlation ``rho``.

    Uses Plackett's identity integrated over ``theta = asin(r)``, which turns
    the density in ``r`` into a smooth bounded integrand on
    ``[0, asin(rho)]``; the integral is evaluated by adaptive Gauss-Legendre.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    if a == 0.0 and b == 0.0:
        return gaussian_orthant(rho)
    if rho == 1.0:
        return _STD.cdf(-max(a, b))
    if rho == -1.0:
        return max(0.0, _STD.cdf(-b) - _STD.cdf(a))
    base = _STD.cdf(-a) * _STD.cdf(-b)
    if rho == 0.0:
        return base

    def integrand(theta):
        c = np.cos(theta)
        return np.exp(-(a * a - 2.0 * a * b * np.sin(theta) + b * b) / (2.0 * c * c))

    total = _adaptive_gl(integrand, 0.0, math.asin(rho), atol * 2.0 * math.pi)
    return base + total / (2.0 * math.pi)


@dataclass(frozen=True)
class LimitLaw:
    """Centred Gaussian limit ``Y`` of a normalised block estimator.

    ``kind`` is ``"gaussian"`` for a vector law with covariance
    ``covariance`` or ``"brownian"`` for Brownian motion observed at
    ``times`` (covariance ``min(t_i, t_j)``).
    """

    kind: str
    covariance: NDArray[np.float64]
    times: NDArray[np.float64] | None = field(default=None)

    @classmethod
    def gaussian(cls, cov: ArrayLike) -> LimitLaw:
        c = np.atleast_2d(np.asarray(cov, dtype=float))
        if c.shape[0] != c.shape[1]:
            raise ValueError(f"covariance must be square, got {c.shape}")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(c).min() < -1e-10 * max(1.0, float(np.abs(c).max())):
            raise ValueError("covariance must be positive semidefinite")
        return cls("gaussian", c)

    @classmethod
    def brownian(cls, times: ArrayLike) -> LimitLaw:
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("times must be positive and strictly increasing")
        return cls("brownian", np.minimum.outer(t, t), t)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def scale(self, i: int) -> float:
        return math.sqrt(self.covariance[i, i])

    def quantile(self, i: int, alpha: float) -> float:
        return self.scale(i) * _STD.inv_cdf(alpha)

    def density(self, i: int, x: float) -> float:
        s = self.scale(i)
        if s == 0.0:
            return 0.0
        return _STD.pdf(x / s) / s


def sigma_alpha(law: LimitLaw, alpha: ArrayLike) -> NDArray[np.float64]:
    """Asymptotic covariance of the normalised component-wise QoE.

    Entry ``(i, j)`` is ``(P(Y_i > F_i^-1(a_i), Y_j > F_j^-1(a_j)) - (1-a_i)(1-a_j))``
    divided by ``f_i(F_i^-1(a_i)) f_j(F_j^-1(a_j))``.
    """
    d = law.dim
    a = np.asarray(alpha, dtype=float)
    a = np.full(d, float(a)) if a.ndim == 0 else a
    if a.shape != (d,) or not np.all((a > 0) & (a < 1)):
        raise ValueError("alpha must be a scalar or length-d vector in (0, 1)")
    if any(law.covariance[i, i] <= 0.0 for i in range(d)):
        raise ValueError("zero density at a required quantile: degenerate coordinate")
    z = np.array([_STD.inv_cdf(x) for x in a])
    dens = np.array([law.density(i, law.quantile(i, a[i])) for i in range(d)])
    out = np.empty((d, d))
    for i in range(d):
        out[i, i] = a[i] * (1.0 - a[i]) / dens[i] ** 2
        for j in range(i):
            rho = law.covariance[i, j] / (law.scale(i) * law.scale(j))
            rho = min(1.0, max(-1.0, rho))
            if a[i] == 0.5 and a[j] == 0.5:
                joint = gaussian_orthant(rho)
            else:
                joint = bivariate_normal_upper(z[i], z[j], rho)
            out[i, j] = out[j, i] = (joint - (1 - a[i]) * (1 - a[j])) / (dens[i] * dens[j])
    return out


def ols_gamma(exx: ArrayLike, sigma2: float) -> NDArray[np.float64]:
    """Median-QoE covariance ``2 pi sigma^2 sqrt(E_ii E_jj) (P(Y_i>0, Y_j>0) - 1/4)``.

    ``Y ~ N(0, sigma^2 exx)``, so the diagonal is exactly ``pi sigma^2 E_ii``.
    The OLS limit law itself is ``N(0, sigma^2 Q^-1)`` with ``Q = E[x'x]``;
    pass ``exx = inv(Q)`` to obtain the limit covariance for a general design
    (for ``Q = I`` both readings coincide).
    """
    e = np.atleast_2d(np.asarray(exx, dtype=float))
    if e.shape[0] != e.shape[1]:
        raise ValueError("second-moment matrix must be square")
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    diag = np.diag(e)
    if np.any(diag <= 0):
        raise ValueError("second-moment matrix needs a positive diagonal")
    p = e.shape[0]
    out = np.empty((p, p))
    for i in range(p):
        out[i, i] = math.pi * sigma2 * diag[i]
        for j in range(i):
            rho = min(1.0, max(-1.0, e[i, j] / math.sqrt(diag[i] * diag[j])))
            g = 2.0 * math.pi * sigma2 * math.sqrt(diag[i] * diag[j]) * (gaussian_orthant(rho) - 0.25)
            out[i, j] = out[j, i] = g
    return out


def brownian_qoe_cov(t_i: float, t_j: float) -> float:
    """Limit covariance of the point-wise median of Brownian paths at two times.

    With ``s = min`` and ``t = max`` this is ``sqrt(s t) arctan(sqrt(s) / sqrt(t - s))``,
    equal to ``t pi / 2`` on the diagonal.
    """
    if t_i <= 0 or t_j <= 0:
        raise ValueError("times must be positive")
    s, t = min(t_i, t_j), max(t_i, t_j)
    if s == t:
        return t * math.pi / 2.0
    return math.sqrt(s * t) * math.atan(math.sqrt(s) / math.sqrt(t - s))
