"""Covariance kernels of X = Y + Z, the local limit covariance and related
diagnostics.

With kernel g_o(v) = (v + o)_+^alpha - v_+^alpha, the representation of X
gives, for u = base - scale * v,

    Cov(X_i, X_j) = scale^(2 alpha + 1) * int g_{o_i}(v) g_{o_j}(v) |base - scale v|^(-gamma) dv

where the region v < base/scale is driven by noise on u > 0 (the Z part) and
v > base/scale by noise on u < 0 (the Y part).  Plain covariances use
base = 0, scale = max t, o_i = t_i / scale.  Increments at t0 use base = t0,
scale = |h| and o_i = sign(h) x_i, which yields the increment covariance
directly and avoids the cancellation of differencing Cov_X values.

Two routes are provided: scalar adaptive quadrature (:func:`cov_z`,
:func:`cov_y`, :func:`increment_variance`) and a batch Gram assembly on
graded fixed rules (:func:`cov_matrix`, :func:`rescaled_increment_cov`).
They share no code beyond the substitution idea, so each checks the other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (
    DEFAULT_SPEC,
    GfbmParams,
    QuadratureSpec,
    TimeGrid,
    graded_rule,
    integrate_singular,
    integrate_tail,
    tail_rule,
)
from .errors import ExtrapolationUnstable, ValidationError


class Kind(str, enum.Enum):
    X = "X"
    Z = "Z"
    Y = "Y"
    LIMIT = "LimitFbm"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, Kind):
            return value
        key = str(value).strip().lower()
        for k in cls:
            if key in (k.value.lower(), k.name.lower()) or (k is cls.LIMIT and key == "limit"):
                return k
        raise ValidationError(f"unknown covariance kind {value!r}")


@dataclass
class CovMatrix:
    """Dense covariance on a grid.  ``t0`` is only meaningful for LimitFbm."""

    params: GfbmParams
    grid: TimeGrid
    kind: Kind
    entries: np.ndarray
    t0: float | None = field(default=None)

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        self.entries = np.asarray(self.entries, dtype=float)
        n = len(self.grid)
        if self.entries.shape != (n, n):
            raise ValidationError(f"entries shape {self.entries.shape} != ({n}, {n})")

    @property
    def size(self) -> int:
        return len(self.grid)


# --------------------------------------------------------------------------
# Kernel helpers
# --------------------------------------------------------------------------


def _kernel_diff(alpha, left, right, gap):
    """left_+^alpha - right_+^alpha where left - right = gap exactly.

    Both positive is the cancelling case and goes through expm1/log1p.
    """
    left, right, gap = np.broadcast_arrays(
        np.asarray(left, dtype=float), np.asarray(right, dtype=float), np.asarray(gap, dtype=float)
    )
    out = np.zeros(left.shape)
    both = (left > 0) & (right > 0)
    r, ratio = right[both], gap[both] / right[both]
    near = ratio > -0.5
    lg = np.empty_like(r)
    lg[near] = np.log1p(ratio[near])
    lg[~near] = np.log(left[both][~near] / r[~near])
    out[both] = r**alpha * np.expm1(alpha * lg)
    lo = (left > 0) & ~both
    out[lo] = left[lo] ** alpha
    ro = (right > 0) & ~both
    out[ro] = -right[ro] ** alpha
    return out


def _check_time(*ts):
    for t in ts:
        if not (math.isfinite(t) and t >= 0):
            raise ValidationError(f"times must be finite and >= 0, got {t}")


# --------------------------------------------------------------------------
# Scalar adaptive route
# --------------------------------------------------------------------------


def cov_z(params: GfbmParams, s: float, t: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Cov_Z(s, t) = int_0^{s^t} (t-u)^a (s-u)^a u^-g du."""
    s, t = float(s), float(t)
    _check_time(s, t)
    m, big = min(s, t), max(s, t)
    if m == 0.0:
        return 0.0
    a, g = params.alpha, params.gamma
    gap = big - m

    def f(anchor, delta):
        # u = anchor + delta; m - u is formed without cancellation
        d = (m - anchor) - delta
        return (d + gap) ** a * d**a * (anchor + delta) ** (-g)

    q = 2 * a if gap == 0 else min(a, 0.0)
    return integrate_singular(f, 0.0, m, -g, q, spec, relative=True)


def cov_y(params: GfbmParams, s: float, t: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Cov_Y(s, t) = int_0^inf ((t+v)^a - v^a)((s+v)^a - v^a) v^-g dv."""
    s, t = float(s), float(t)
    _check_time(s, t)
    a, g = params.alpha, params.gamma
    if a == 0.0 or s == 0.0 or t == 0.0:
        return 0.0

    def f(v):
        v = np.asarray(v, dtype=float)
        return _kernel_diff(a, v + t, v, t) * _kernel_diff(a, v + s, v, s) * v ** (-g)

    c = max(s, t)
    head = integrate_singular(f, 0.0, c, min(2 * a, 0.0) - g, 0.0, spec)
    tail = integrate_tail(f, c, 2 * a - 2 - g, spec, coef=a * a * s * t)
    return head + tail


def cov_x(params: GfbmParams, s: float, t: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Cov_X = Cov_Y + Cov_Z (Y and Z are independent)."""
    return cov_y(params, s, t, spec) + cov_z(params, s, t, spec)


def increment_variance(
    params: GfbmParams, s: float, t: float, part: str = "X", spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """E[(P(t) - P(s))^2] for P in {X, Y, Z}, by adaptive quadrature of the
    difference kernels (no differencing of covariances)."""
    s, t = float(s), float(t)
    _check_time(s, t)
    if s > t:
        s, t = t, s
    part = Kind.parse(part)
    a, g = params.alpha, params.gamma
    if s == t:
        return 0.0
    if s == 0.0:
        if part is Kind.Z:
            return cov_z(params, t, t, spec)
        if part is Kind.Y:
            return cov_y(params, t, t, spec)
        return cov_x(params, t, t, spec)
    d = t - s
    total = 0.0
    if part in (Kind.Z, Kind.X):

        def f1(anchor, delta):
            r = (s - anchor) - delta  # s - u
            return _kernel_diff(a, r + d, r, d) ** 2 * (anchor + delta) ** (-g)

        def f2(anchor, delta):
            r = (t - anchor) - delta  # t - u
            return r ** (2 * a) * (anchor + delta) ** (-g)

        total += integrate_singular(f1, 0.0, s, -g, min(2 * a, 0.0), spec, relative=True)
        total += integrate_singular(f2, s, t, 0.0, 2 * a, spec, relative=True)
    if part in (Kind.Y, Kind.X) and a != 0.0:

        def f3(v):
            v = np.asarray(v, dtype=float)
            return _kernel_diff(a, v + t, v + s, d) ** 2 * v ** (-g)

        total += integrate_singular(f3, 0.0, t, -g, 0.0, spec)
        total += integrate_tail(f3, t, 2 * a - 2 - g, spec, coef=(a * d) ** 2)
    return total


# --------------------------------------------------------------------------
# Batch route: Gram matrices on graded rules
# --------------------------------------------------------------------------

_CHUNK = 16384


def _segment_plan(alpha, gamma, kpoints, V, lo, hi):
    """Breakpoints in [lo, hi] with their endpoint exponents."""
    kern = min(2 * alpha, 0.0)
    pts = sorted({p for p in kpoints | {V} if lo <= p <= hi} | {lo, hi})
    expo = []
    for p in pts:
        e = 0.0
        if p in kpoints:
            e += kern
        if p == V:
            e -= gamma
        expo.append(e)
    return pts, expo


def _gram(params: GfbmParams, base: float, scale: float, offsets, part: Kind) -> np.ndarray:
    """int g_i g_j |base - scale v|^-gamma dv over the region of ``part``."""
    a, g = params.alpha, params.gamma
    off = np.asarray(offsets, dtype=float)
    n = off.size
    gram = np.zeros((n, n))
    active = off != 0.0
    if not np.any(active):
        return gram
    o = off[active]
    V = base / scale
    kpoints = {0.0} | {float(-x) for x in o}
    lower = min(kpoints)
    wscale = scale ** (-g)

    # regions in v: Z is v < V, Y is v > V
    tail_start = None
    spans = []
    if part in (Kind.Z, Kind.X) and V > lower:
        spans.append((lower, V))
    if part in (Kind.Y, Kind.X):
        y_lo = max(V, lower)
        last = max(kpoints | {y_lo})
        width = max(last - min(kpoints | {y_lo}), abs(last), 1.0)
        c = last + width
        spans.append((y_lo, c))
        tail_start = c

    acc = np.zeros((o.size, o.size))

    def accumulate(anchor, delta, w):
        v = anchor + delta
        dist = np.abs((V - anchor) - delta)
        with np.errstate(divide="ignore"):
            wt = w * wscale * dist ** (-g) if g else w * wscale
        for k in range(0, v.size, _CHUNK):
            sl = slice(k, k + _CHUNK)
            an, de = anchor[sl], delta[sl]
            right = an + de
            left = (an[None, :] + o[:, None]) + de[None, :]
            G = _kernel_diff(a, left, right[None, :], o[:, None])
            acc[...] += (G * wt[sl]) @ G.T

    for lo, hi in spans:
        pts, expo = _segment_plan(a, g, kpoints, V, lo, hi)
        for (p0, e0), (p1, e1) in zip(zip(pts[:-1], expo[:-1]), zip(pts[1:], expo[1:])):
            if p1 <= p0:
                continue
            rule = graded_rule(p0, p1, e0, e1)
            accumulate(rule.anchor, rule.delta, rule.w)
    if tail_start is not None:
        v, w = tail_rule(tail_start, 2 * a - 2 - g)
        accumulate(v, np.zeros_like(v), w)

    acc = 0.5 * (acc + acc.T)
    idx = np.flatnonzero(active)
    gram[np.ix_(idx, idx)] = acc
    return gram


def cov_matrix(params: GfbmParams, grid, kind="X", t0: float = 1.0) -> CovMatrix:
    """Covariance matrix of X, Z or Y on ``grid`` (times >= 0), or of the
    local limit process on relative offsets in [0, 1] (kind LimitFbm)."""
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(grid)
    kind = Kind.parse(kind)
    times = grid.times
    if kind is Kind.LIMIT:
        if times[0] < 0 or times[-1] > 1:
            raise ValidationError("LimitFbm grids must lie in [0, 1]")
        x = times
        ent = rho_limit_matrix(params, t0, x)
        return CovMatrix(params, grid, kind, ent, t0=float(t0))
    if times[0] < 0:
        raise ValidationError("covariance grids need times >= 0")
    T = float(times[-1])
    if T == 0.0:
        return CovMatrix(params, grid, kind, np.zeros((len(grid), len(grid))))
    gram = _gram(params, 0.0, T, times / T, kind)
    return CovMatrix(params, grid, kind, T ** (2 * params.alpha + 1) * gram)


def _check_increment(t0, h):
    if not (t0 > 0 and math.isfinite(t0)):
        raise ValidationError(f"t0 must be positive, got {t0}")
    if not (0 < abs(h) < t0 / 2):
        raise ValidationError(f"need 0 < |h| < t0/2, got h={h}, t0={t0}")


def increment_gram(params: GfbmParams, t0: float, h: float, x) -> np.ndarray:
    """Cov of (X(t0 + h x_i) - X(t0)) divided by |h|^(2 alpha + 1)."""
    t0, h = float(t0), float(h)
    _check_increment(t0, h)
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValidationError("relative offsets must lie in [0, 1]")
    return _gram(params, t0, abs(h), math.copysign(1.0, h) * x, Kind.X)


def rescaled_increment_cov(params: GfbmParams, t0: float, h: float, x1: float, x2: float) -> float:
    """E[(X(t0+h x1) - X(t0)) (X(t0+h x2) - X(t0))] / |h|^(2 alpha + 1)."""
    return float(increment_gram(params, t0, h, [x1, x2])[0, 1])


# --------------------------------------------------------------------------
# Limit constant and limit covariance
# --------------------------------------------------------------------------

C21_LADDER = (1e-2, 1e-3, 1e-4)


def _require_lil(params):
    if not params.lil_regime:
        raise ValidationError(f"alpha={params.alpha} >= 1/2: outside the LIL regime")


@lru_cache(maxsize=256)
def _c21_cached(alpha, gamma, t0):
    params = GfbmParams(alpha, gamma)
    E = [
        rescaled_increment_cov(params, t0, h, 1.0, 1.0) / (2 * t0 ** (-gamma))
        for h in C21_LADDER
    ]
    # leading error term is O(h^p): the weight expansion contributes h, and
    # for alpha > 0 the large-v part of the kernel contributes h^(1 - 2 alpha)
    p = min(1.0, 1.0 - 2 * alpha)
    r = (C21_LADDER[0] / C21_LADDER[1]) ** p
    R1 = (r * E[1] - E[0]) / (r - 1)
    r = (C21_LADDER[1] / C21_LADDER[2]) ** p
    R2 = (r * E[2] - E[1]) / (r - 1)
    if abs(R2 - R1) > 0.01 * abs(R2):
        raise ExtrapolationUnstable(
            f"Richardson estimates {R1:.6g} and {R2:.6g} differ by more than 1%"
        )
    return R2


def c21(params: GfbmParams, t0: float = 1.0) -> float:
    """Local variance constant: E[(X(t0+h)-X(t0))^2] ~ 2 c21 t0^-gamma h^(2 alpha + 1)."""
    _require_lil(params)
    if params.alpha == 0.0:
        # the kernel is an indicator and the limit is exact
        return 0.5
    return _c21_cached(params.alpha, params.gamma, float(t0))


def rho_limit(params: GfbmParams, t0: float, x1: float, x2: float) -> float:
    """Covariance of the local limit process at base time t0."""
    _require_lil(params)
    if not t0 > 0:
        raise ValidationError("t0 must be positive")
    for x in (x1, x2):
        if not 0.0 <= x <= 1.0:
            raise ValidationError(f"offset {x} outside [0, 1]")
    e = 2 * params.alpha + 1
    bracket = x1**e + x2**e - abs(x1 - x2) ** e
    return c21(params) * t0 ** (-params.gamma) * bracket


def rho_limit_matrix(params: GfbmParams, t0: float, x) -> np.ndarray:
    _require_lil(params)
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValidationError("offsets must lie in [0, 1]")
    e = 2 * params.alpha + 1
    xe = x**e
    bracket = xe[:, None] + xe[None, :] - np.abs(x[:, None] - x[None, :]) ** e
    return c21(params) * t0 ** (-params.gamma) * bracket


# --------------------------------------------------------------------------
# Variance bounds for Z increments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceBoundReport:
    min_lower_ratio: float
    max_upper_ratio: float
    n_samples: int


def variance_bound_check(
    params: GfbmParams,
    s_range=(0.5, 4.0),
    ratio_max: float = 2.0,
    n_samples: int = 200,
    seed: int = 0,
) -> VarianceBoundReport:
    """Empirical constants of the two-sided bound on Z increments.

    Samples s uniformly in ``s_range`` and t = s (1 + U (ratio_max - 1)), then
    reports min of E[(Z(t)-Z(s))^2] t^g / (t-s)^(2a+1) and max of the same
    with s^g.
    """
    lo, hi = map(float, s_range)
    if not (0 < lo <= hi and math.isfinite(hi)):
        raise ValidationError("s_range must be a positive interval")
    if not ratio_max > 1:
        raise ValidationError("ratio_max must exceed 1")
    rng = np.random.default_rng(seed)
    s = rng.uniform(lo, hi, n_samples)
    t = s * (1 + rng.uniform(0, 1, n_samples) * (ratio_max - 1))
    keep = t > s
    s, t = s[keep], t[keep]
    a, g = params.alpha, params.gamma
    var = np.array([increment_variance(params, si, ti, "Z") for si, ti in zip(s, t)])
    scale = (t - s) ** (2 * a + 1)
    return VarianceBoundReport(
        float(np.min(var * t**g / scale)),
        float(np.max(var * s**g / scale)),
        int(s.size),
    )
