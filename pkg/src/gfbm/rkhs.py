"""Finite-dimensional rate functional and unit ball of the local limit process.

On a grid x_1 < ... < x_m in (0, 1] the marginal quadratic form
I(z) = z' Sigma^{-1} z / 2 lower-bounds the rate functional and increases
under refinement.  Sigma is the limit covariance with the t0^{-gamma} factor
removed, i.e. the covariance of the lil-normalized increments, so every
quantity here is independent of t0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .core import GfbmParams
from .errors import SingularCovariance, ValidationError
from .kernelcov import rho_limit_matrix

JITTER_CAP = 1e-10


@dataclass(frozen=True)
class GridFunction:
    """Values of a path on offsets in [0, 1]; the value at 0 must be 0."""

    x_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise ValidationError("x_grid and values differ in length")
        if np.any(x < 0) or np.any(x > 1) or np.any(np.diff(x) <= 0):
            raise ValidationError("x_grid must be increasing in [0, 1]")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values must be finite")
        if np.any(v[x == 0] != 0):
            raise ValidationError("a grid function must vanish at x = 0")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "values", v)

    def __mul__(self, c):
        return GridFunction(self.x_grid, c * self.values)

    __rmul__ = __mul__

    def positive_part(self):
        keep = self.x_grid > 0
        return self.x_grid[keep], self.values[keep]


@dataclass
class LimitCov:
    """Sigma on the positive grid points, factored once with minimal jitter."""

    x_grid: np.ndarray
    sigma: np.ndarray
    jitter: float = field(init=False, default=0.0)

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float).reshape(-1)
        S = np.asarray(self.sigma, dtype=float)
        m = int(np.sum(x > 0))
        if S.shape == (x.size, x.size) and m < x.size:
            S = S[np.ix_(x > 0, x > 0)]
        if S.shape != (m, m):
            raise ValidationError(f"sigma shape {S.shape} does not match {m} positive grid points")
        if not np.allclose(S, S.T, rtol=1e-12, atol=0):
            raise ValidationError("sigma must be symmetric")
        self.x_grid, self.sigma = x, 0.5 * (S + S.T)
        self._factor()

    @classmethod
    def from_params(cls, params: GfbmParams, t0: float, x_grid) -> "LimitCov":
        """rho_limit(t0, x_i, x_j) * t0^gamma on the positive grid points."""
        x = np.asarray(x_grid, dtype=float)
        S = rho_limit_matrix(params, t0, x[x > 0]) * t0**params.gamma
        return cls(x, S)

    @property
    def x_pos(self) -> np.ndarray:
        return self.x_grid[self.x_grid > 0]

    def _factor(self):
        S = self.sigma
        n = S.shape[0]
        cap = JITTER_CAP * max(np.trace(S) / max(n, 1), np.finfo(float).tiny)
        jitter = 0.0
        while True:
            try:
                self._cho = cho_factor(S + jitter * np.eye(n), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = max(10 * jitter, 1e-16 * np.trace(S) / n)
                if jitter > cap:
                    raise SingularCovariance("limit covariance not factorizable") from None
        self.jitter = jitter

    def whiten(self, z) -> np.ndarray:
        """L^{-1} z, so that z' Sigma^{-1} z = |L^{-1} z|^2."""
        L = np.tril(self._cho[0])
        return solve_triangular(L, z, lower=True)

    def solve(self, z) -> np.ndarray:
        return cho_solve(self._cho, z)


def _on_grid(z, cov: LimitCov) -> np.ndarray:
    if isinstance(z, GridFunction):
        x, v = z.positive_part()
        if not np.array_equal(x, cov.x_pos):
            raise ValidationError("grid function and covariance use different grids")
        return v
    v = np.asarray(z, dtype=float).reshape(-1)
    if v.size == cov.x_grid.size and v.size != cov.x_pos.size:
        v = v[cov.x_grid > 0]
    if v.size != cov.x_pos.size:
        raise ValidationError("vector length does not match the grid")
    return v


def rate_functional(z, cov: LimitCov) -> float:
    """I_grid(z) = z' Sigma^{-1} z / 2."""
    w = cov.whiten(_on_grid(z, cov))
    return 0.5 * float(w @ w)


def in_strassen_ball(z, cov: LimitCov, tol: float = 1e-9) -> bool:
    return rate_functional(z, cov) <= 1.0 + tol


def _weights(a, cov):
    a = _on_grid(a, cov)
    if not np.any(a):
        raise ValidationError("weights must not all be zero")
    return a


def linear_sup(a, cov: LimitCov) -> float:
    """sup of a'z over the unit ball: sqrt(2 a' Sigma a)."""
    a = _weights(a, cov)
    return math.sqrt(2.0 * float(a @ cov.sigma @ a))


def extreme_path(a, cov: LimitCov) -> GridFunction:
    """Maximizer z* = Sigma a sqrt(2 / a' Sigma a), returned on the full grid."""
    a = _weights(a, cov)
    Sa = cov.sigma @ a
    zpos = Sa * math.sqrt(2.0 / float(a @ Sa))
    values = np.zeros(cov.x_grid.size)
    values[cov.x_grid > 0] = zpos
    return GridFunction(cov.x_grid, values)


def endpoint_weights(cov: LimitCov) -> np.ndarray:
    """Weights on the positive grid selecting the value at x = 1."""
    x = cov.x_pos
    if x[-1] != 1.0:
        raise ValidationError("grid does not contain x = 1")
    a = np.zeros(x.size)
    a[-1] = 1.0
    return a


def endpoint_prediction(params: GfbmParams, x_grid=None, t0: float = 1.0) -> float:
    """Predicted limsup of |U(1)|: linear_sup of the endpoint functional."""
    x = np.array([0.0, 1.0]) if x_grid is None else np.asarray(x_grid, dtype=float)
    cov = LimitCov.from_params(params, t0, x)
    return linear_sup(endpoint_weights(cov), cov)
