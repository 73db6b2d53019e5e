"""Stationary Lamperti transform of Z and its spectral analysis.

U(t) = e^{-tH} Z(e^t) is stationary with covariance

    r_U(t) = e^{-rho |t|} int_0^1 (1-u)^alpha (1 - u e^{-|t|})^alpha u^{-gamma} du,

rho = (1 - gamma)/2, and spectral density f_U(lambda) = (1/pi) int_0^inf
r_U(t) cos(lambda t) dt, computed by piecewise-linear Filon quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import DEFAULT_SPEC, GfbmParams, QuadratureSpec, graded_rule, integrate_singular
from .errors import BandOutOfTable, NonPositiveValues, OutOfRange, ValidationError

T_MAX_CAP = 400.0
H_MIN = 1e-6
GEOM_Q = 0.002
DT_FAR_MAX = 0.01


def decay_rate(params: GfbmParams) -> float:
    """rho = (1 - gamma)/2, the exponential decay rate of r_U."""
    return 0.5 * (1.0 - params.gamma)


# --------------------------------------------------------------------------
# Covariance r_U
# --------------------------------------------------------------------------


def r_u(params: GfbmParams, t: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """r_U(t) by adaptive quadrature; even in t."""
    tau = abs(float(t))
    a, g = params.alpha, params.gamma
    em = math.expm1(-tau)  # e^{-tau} - 1

    def f(anchor, delta):
        one_minus = (1.0 - anchor) - delta
        u = anchor + delta
        return one_minus**a * (one_minus - u * em) ** a * u ** (-g)

    q = 2 * a if tau == 0 else min(a, 0.0)
    val = integrate_singular(f, 0.0, 1.0, -g, q, spec, relative=True)
    return math.exp(-decay_rate(params) * tau) * val


def r_u_values(params: GfbmParams, t) -> np.ndarray:
    """Vectorized r_U on many lags (shared graded rule in u)."""
    tau = np.abs(np.asarray(t, dtype=float))
    shape = tau.shape
    tau = tau.reshape(-1)
    a, g = params.alpha, params.gamma
    rule = graded_rule(0.0, 1.0, -g, min(2 * a, 0.0))
    u = rule.x
    one_minus = np.where(rule.anchor == 1.0, -rule.delta, 1.0 - rule.x)
    base = rule.w * one_minus**a * u ** (-g)
    out = np.empty(tau.size)
    step = 2048
    for k in range(0, tau.size, step):
        em = np.expm1(-tau[k : k + step])[:, None]
        out[k : k + step] = ((one_minus[None, :] - u[None, :] * em) ** a) @ base
    out *= np.exp(-decay_rate(params) * tau)
    return out.reshape(shape)


def r_u_decay_check(params: GfbmParams, t_grid) -> float:
    """Least-squares slope of ln r_U(t) against t over ``t_grid`` in [5, 40]."""
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2 or t.min() < 5 or t.max() > 40:
        raise ValidationError("decay check needs at least two lags in [5, 40]")
    r = np.array([r_u(params, x) for x in t])
    if np.any(r <= 0):
        bad = t[r <= 0].tolist()
        raise NonPositiveValues(f"r_U <= 0 at t = {bad}")
    return float(np.polyfit(t, np.log(r), 1)[0])


# --------------------------------------------------------------------------
# Filon cosine transform
# --------------------------------------------------------------------------


def choose_t_max(params: GfbmParams, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Smallest T with r0 e^{-rho T}/rho < abs_tol, capped at T_MAX_CAP."""
    rho = decay_rate(params)
    r0 = _beta(params)
    T = math.log(r0 / (rho * spec.abs_tol)) / rho
    return float(min(max(T, 10.0), T_MAX_CAP))


def _beta(params):
    return math.exp(
        math.lgamma(1 - params.gamma) + math.lgamma(2 * params.alpha + 1)
        - math.lgamma(2 * params.alpha + 2 - params.gamma)
    )


def t_mesh(t_max: float, dt_far: float, h_min: float = H_MIN, q: float = GEOM_Q) -> np.ndarray:
    """Mesh on [0, t_max] made of uniform runs.

    Steps halve toward 0 so that h/t stays between q and 2q, from dt_far
    down to the first step below h_min; beyond dt_far/q the step is dt_far.
    """
    levels = max(int(math.ceil(math.log2(dt_far / h_min))), 0)
    pieces = [np.array([0.0])]
    start = 0.0
    for j in range(levels, -1, -1):
        dt = dt_far * 2.0**-j
        stop = min(dt / q, t_max) if j else t_max
        n = int(round((stop - start) / dt))
        if n > 0:
            pieces.append(start + dt * np.arange(1, n + 1))
            start = start + dt * n
        if start >= t_max:
            break
    return np.concatenate(pieces)


def _phi(theta):
    """phi0 = int_0^1 e^{i theta s} ds and phi1 = int_0^1 s e^{i theta s} ds."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 0.5
    phi0 = np.empty(theta.shape, dtype=complex)
    phi1 = np.empty(theta.shape, dtype=complex)
    th = np.where(small, 1.0, theta)
    e = np.exp(1j * th)
    phi0[:] = (e - 1) / (1j * th)
    phi1[:] = e / (1j * th) + (e - 1) / th**2
    if np.any(small):
        z = 1j * theta[small]
        s0 = np.zeros(z.shape, dtype=complex)
        s1 = np.zeros(z.shape, dtype=complex)
        term = np.ones(z.shape, dtype=complex)  # z^k / k!
        for k in range(16):
            s0 += term / (k + 1)
            s1 += term / (k + 2)
            term = term * z / (k + 1)
        phi0[small], phi1[small] = s0, s1
    return phi0, phi1


def _phase_sum(lam, t0, dt, r):
    """sum_k r_k exp(i lam (t0 + k dt)) for every lam.

    Blocked as k = B m + j so only O(sqrt(N)) exponentials per lam are
    needed and the bulk is one complex matrix product.
    """
    n = r.size
    B = int(math.ceil(math.sqrt(n)))
    nb = int(math.ceil(n / B))
    R = np.zeros(nb * B)
    R[:n] = r
    R = R.reshape(nb, B)
    inner = np.exp(1j * lam[:, None] * (dt * np.arange(B))[None, :]) @ R.T
    outer = np.exp(1j * lam[:, None] * (t0 + dt * B * np.arange(nb))[None, :])
    return (inner * outer).sum(axis=1)


def _uniform_runs(t):
    """(start, stop) point-index ranges of maximal equal-step stretches."""
    h = np.diff(t)
    brk = np.flatnonzero(~np.isclose(h[1:], h[:-1], rtol=1e-9, atol=0.0)) + 1
    edges = np.concatenate([[0], brk, [h.size]])
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def filon_cos(t, r, lambdas, chunk: int = 512) -> np.ndarray:
    """int_{t_0}^{t_N} r_lin(t) cos(lambda t) dt for the piecewise-linear
    interpolant of (t, r).

    On a run of equal panels h the Filon sum collapses to
    h [(phi0 - phi1) S_left + phi1 e^{-i theta} S_right], where S_left and
    S_right are phase sums over the run without its last and first point.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    runs = _uniform_runs(t)
    out = np.empty(lam.size)
    for k in range(0, lam.size, chunk):
        L = lam[k : k + chunk]
        total = np.zeros(L.size, dtype=complex)
        for a, b in runs:
            dt = (t[b] - t[a]) / (b - a)
            phi0, phi1 = _phi(L * dt)
            S = _phase_sum(L, t[a], dt, r[a : b + 1])
            first = r[a] * np.exp(1j * L * t[a])
            last = r[b] * np.exp(1j * L * t[b])
            total += dt * ((phi0 - phi1) * (S - last) + phi1 * np.exp(-1j * L * dt) * (S - first))
        out[k : k + chunk] = total.real
    return out


@lru_cache(maxsize=16)
def _covariance_mesh(alpha, gamma, t_max, dt_far):
    params = GfbmParams(alpha, gamma)
    t = t_mesh(t_max, dt_far)
    r = r_u_values(params, t)
    # decay rate fitted on the last stretch of the mesh
    sel = t >= max(t_max - 10.0, 0.5 * t_max)
    rate = -float(np.polyfit(t[sel], np.log(r[sel]), 1)[0])
    t.setflags(write=False)
    r.setflags(write=False)
    return t, r, rate


def _dt_for(lam_max: float) -> float:
    dt = min(0.5, DT_FAR_MAX)
    if lam_max > 0:
        dt = min(dt, math.pi / (4.0 * lam_max))
    # quantize so nearby requests share a cached mesh
    return DT_FAR_MAX * 2.0 ** -math.ceil(math.log2(DT_FAR_MAX / dt))


def spectral_density(
    params: GfbmParams, lam, t_max: float | None = None, spec: QuadratureSpec = DEFAULT_SPEC
):
    """f_U(lambda) = (1/pi) int_0^inf r_U(t) cos(lambda t) dt.

    Filon on [0, t_max] plus the exponential tail
    r(T) (rho cos(lambda T) - lambda sin(lambda T)) / (rho^2 + lambda^2)
    with rho fitted on the end of the mesh.  Accepts scalars or arrays.
    """
    lam_arr = np.abs(np.asarray(lam, dtype=float))
    if t_max is None:
        t_max = choose_t_max(params, spec)
    dt = _dt_for(float(lam_arr.max(initial=0.0)))
    t, r, rate = _covariance_mesh(params.alpha, params.gamma, float(t_max), dt)
    flat = lam_arr.reshape(-1)
    body = filon_cos(t, r, flat)
    T, rT = t[-1], r[-1]
    tail = rT * (rate * np.cos(flat * T) - flat * np.sin(flat * T)) / (rate**2 + flat**2)
    f = (body + tail) / math.pi
    if np.ndim(lam) == 0:
        return float(f[0])
    return f.reshape(lam_arr.shape)


# --------------------------------------------------------------------------
# Spectral table and tail functionals
# --------------------------------------------------------------------------


def default_lambdas(lam_max: float = 200.0, n: int = 4001, n_linear: int = 1001) -> np.ndarray:
    """Linear on [0, 1], log-spaced above (the linear part takes at most half
    of the points)."""
    if n < 3 or not lam_max > 0:
        raise ValidationError("need n >= 3 frequencies and lam_max > 0")
    n_linear = min(n_linear, (n + 1) // 2)
    if lam_max <= 1.0:
        return np.linspace(0.0, lam_max, n)
    lin = np.linspace(0.0, 1.0, n_linear)
    log = np.geomspace(1.0, lam_max, n - n_linear + 1)[1:]
    return np.concatenate([lin, log])


@dataclass
class SpectralTable:
    params: GfbmParams
    lambdas: np.ndarray
    densities: np.ndarray
    r0: float
    t_max: float
    fitted_decay_rate: float
    tail_slope: float = field(default=float("nan"))

    @property
    def lam_max(self) -> float:
        return float(self.lambdas[-1])

    def remainder(self) -> float:
        """2 int_{lam_max}^inf f from a power law matched at the table end."""
        b = self.tail_slope
        if not b < -1:
            return 0.0
        return 2.0 * self.densities[-1] * self.lam_max / (-b - 1.0)

    def mass(self) -> float:
        """2 int_0^inf f; should equal r0."""
        return 2.0 * float(np.trapezoid(self.densities, self.lambdas)) + self.remainder()


def _fit_tail_slope(lam, f):
    sel = lam >= 0.5 * lam[-1]
    if sel.sum() < 2 or np.any(f[sel] <= 0):
        return float("nan")
    return float(np.polyfit(np.log(lam[sel]), np.log(f[sel]), 1)[0])


def build_table(
    params: GfbmParams,
    lam_max: float = 200.0,
    n: int = 4001,
    t_max: float | None = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> SpectralTable:
    if t_max is None:
        t_max = choose_t_max(params, spec)
    lam = default_lambdas(lam_max, n)
    f = spectral_density(params, lam, t_max, spec)
    dt = _dt_for(lam_max)
    rate = _covariance_mesh(params.alpha, params.gamma, float(t_max), dt)[2]
    r0 = r_u(params, 0.0, spec)
    return SpectralTable(params, lam, f, r0, float(t_max), rate, _fit_tail_slope(lam, f))


def _integral_from(table, weight, lo, hi):
    """int_lo^hi weight(lam) f(lam) dlam on the table (trapezoid, endpoints
    interpolated log-log where possible)."""
    lam, f = table.lambdas, table.densities
    inside = (lam > lo) & (lam < hi)
    xs = np.concatenate([[lo], lam[inside], [hi]])
    fs = np.concatenate([[_interp(table, lo)], f[inside], [_interp(table, hi)]])
    return float(np.trapezoid(weight(xs) * fs, xs))


def _interp(table, x):
    lam, f = table.lambdas, table.densities
    i = int(np.searchsorted(lam, x))
    if i == 0:
        return float(f[0])
    if i >= lam.size:
        return float(f[-1])
    x0, x1, f0, f1 = lam[i - 1], lam[i], f[i - 1], f[i]
    if x0 > 0 and f0 > 0 and f1 > 0:
        w = math.log(x / x0) / math.log(x1 / x0)
        return float(f0 * (f1 / f0) ** w)
    return float(f0 + (f1 - f0) * (x - x0) / (x1 - x0))


def _check_u(table, u):
    if not 0.0 <= u <= table.lam_max:
        raise OutOfRange(f"u={u} outside the table range [0, {table.lam_max}]")


def tail_mass(table: SpectralTable, u: float) -> float:
    """2 int_u^inf f_U (table plus power-law remainder)."""
    u = float(u)
    _check_u(table, u)
    body = _integral_from(table, np.ones_like, u, table.lam_max) if u < table.lam_max else 0.0
    return 2.0 * body + table.remainder()


def low_second_moment(table: SpectralTable, u: float) -> float:
    """2 int_0^u lambda^2 f_U."""
    u = float(u)
    _check_u(table, u)
    if u == 0.0:
        return 0.0
    return 2.0 * _integral_from(table, np.square, 0.0, u)


# --------------------------------------------------------------------------
# Band decomposition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BandSpec:
    """Frequency band (d_lo, d_hi].  ``n`` is None for surrogate bands."""

    d_lo: float
    d_hi: float
    n: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if not (0 < self.d_lo < self.d_hi):
            raise ValidationError(f"need 0 < d_lo < d_hi, got ({self.d_lo}, {self.d_hi})")

    @staticmethod
    def cutoff(n: int, tau: float) -> float:
        return math.exp(n ** (1 + tau) + n**tau)

    @classmethod
    def from_index(cls, n: int, tau: float) -> "BandSpec":
        if n < 3:
            raise ValidationError("band index n must be >= 3")
        if not 0 < tau < 1:
            raise ValidationError("tau must be in (0, 1)")
        return cls(cls.cutoff(n - 1, tau), cls.cutoff(n, tau), n, tau)

    @classmethod
    def surrogate(cls, d_lo: float, d_hi: float) -> "BandSpec":
        return cls(float(d_lo), float(d_hi))

    @property
    def h(self) -> float | None:
        """exp(-n^(1+tau)), the time scale matched to the band."""
        return None if self.n is None else math.exp(-(self.n ** (1 + self.tau)))


@dataclass(frozen=True)
class BandResidual:
    J1_bound_part: float
    J2_part: float


def band_residual_variance(
    params: GfbmParams, band: BandSpec, t0: float, s: float, table: SpectralTable
) -> BandResidual:
    """Out-of-band increment variance of the Lamperti spectral representation.

    J1 = 2 int_0^{d_lo} |(t0+s)^H e^{i lam ln(t0+s)} - t0^H e^{i lam ln t0}|^2 f dlam
    J2 = (t0^{2H} + (t0+s)^{2H}) * tail_mass(d_hi)
    """
    if band.d_hi > table.lam_max:
        raise BandOutOfTable(f"d_hi={band.d_hi:.6g} beyond table range {table.lam_max}")
    if not t0 > 0 or not t0 + s > 0:
        raise ValidationError("need t0 > 0 and t0 + s > 0")
    if s == 0:
        return BandResidual(0.0, 0.0)
    H = params.hurst
    a, b = (t0 + s) ** H, t0**H
    delta = math.log1p(s / t0)

    def weight(lam):
        # a^2 + b^2 - 2ab cos(lam delta), written to keep precision for small s
        return (a - b) ** 2 + 4 * a * b * np.sin(0.5 * lam * delta) ** 2

    J1 = 2.0 * _integral_from(table, weight, 0.0, band.d_lo)
    J2 = (a * a + b * b) * tail_mass(table, band.d_hi)
    return BandResidual(J1, J2)
