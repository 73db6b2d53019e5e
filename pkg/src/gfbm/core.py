"""Parameters, time grids and the quadrature engine.

Two quadrature routes live here:

* :func:`integrate_singular` / :func:`integrate_tail` -- adaptive
  Gauss-Kronrod with a power substitution that flattens declared endpoint
  singularities.  Used for scalar kernel evaluations.
* :func:`graded_rule` / :func:`tail_rule` -- fixed composite Gauss-Legendre
  rules, geometrically graded toward the endpoints.  They return nodes and
  weights so that many integrands sharing the same singular points can be
  integrated with one matrix product (covariance matrices, r_U tables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    InvalidParameters,
    NonIntegrableEndpoint,
    NonIntegrableTail,
    ToleranceNotMet,
    ValidationError,
)

# e^{-e}: ln ln(1/h) > 0 requires h < 1/e, and > 1 requires h < e^{-e}.
LNLN_H_MAX = math.exp(-math.e)


@dataclass(frozen=True)
class GfbmParams:
    """The pair (alpha, gamma) of a generalized fractional Brownian motion."""

    alpha: float
    gamma: float

    def __post_init__(self):
        a, g = float(self.alpha), float(self.gamma)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "gamma", g)
        if not (math.isfinite(a) and math.isfinite(g)):
            raise InvalidParameters(f"non-finite parameters alpha={a}, gamma={g}")
        if not 0.0 <= g < 1.0:
            raise InvalidParameters(f"gamma={g} outside [0, 1)")
        lo, hi = -0.5 + g / 2.0, 0.5 + g / 2.0
        if not lo < a < hi:
            raise InvalidParameters(
                f"alpha={a} outside ({lo:g}, {hi:g}) for gamma={g}"
            )

    @property
    def hurst(self) -> float:
        return self.alpha - self.gamma / 2.0 + 0.5

    @property
    def lil_regime(self) -> bool:
        """True when the local functional LIL applies (alpha < 1/2)."""
        return self.alpha < 0.5

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "gamma": self.gamma, "hurst": self.hurst}


def is_valid_params(alpha: float, gamma: float) -> bool:
    try:
        GfbmParams(alpha, gamma)
    except InvalidParameters:
        return False
    return True


class TimeGrid:
    """Strictly increasing, finite sample times."""

    __slots__ = ("times",)

    def __init__(self, times: Sequence[float]):
        arr = np.array(times, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValidationError("empty time grid")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("time grid has non-finite entries")
        if arr.size > 1 and not np.all(np.diff(arr) > 0):
            raise ValidationError("time grid must be strictly increasing")
        arr.setflags(write=False)
        self.times = arr

    @classmethod
    def linspace(cls, start: float, stop: float, num: int) -> "TimeGrid":
        return cls(np.linspace(start, stop, num))

    @classmethod
    def parse(cls, text: str) -> "TimeGrid":
        return cls([float(tok) for tok in text.split(",") if tok.strip()])

    @property
    def min_time(self) -> float:
        return float(self.times[0])

    @property
    def max_time(self) -> float:
        return float(self.times[-1])

    @property
    def positive(self) -> bool:
        return self.min_time > 0

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.times))) if len(self) > 1 else math.inf

    def require_positive(self):
        if not self.positive:
            raise ValidationError("operation needs a grid with min_time > 0")

    def __len__(self):
        return self.times.size

    def __iter__(self):
        return iter(self.times.tolist())

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())

    def __repr__(self):
        return f"TimeGrid({self.times.tolist()!r})"


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    tail_cutoff_policy: str = "analytic_tail_bound"  # or "fixed_multiple"
    tail_multiple: float = 1e6

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("rel_tol and abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValidationError("max_subdivisions must be >= 1")
        if self.tail_cutoff_policy not in ("analytic_tail_bound", "fixed_multiple"):
            raise ValidationError(f"unknown tail policy {self.tail_cutoff_policy!r}")


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    n_intervals: int


# --------------------------------------------------------------------------
# Adaptive Gauss-Kronrod (G7/K15), vectorised over the active intervals.
# --------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG7 = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES15 = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK15 = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
# Gauss nodes are xgk[1], xgk[3], xgk[5], xgk[7]
for _i, _w in zip((1, 3, 5), _WG7[:3]):
    _WG15[_i] = _w
    _WG15[14 - _i] = _w
_WG15[7] = _WG7[3]
_EPS = np.finfo(float).eps


def _gk15(f, a, b):
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = center[:, None] + half[:, None] * _NODES15[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = fx @ _WK15
    g = fx @ _WG15
    mean = 0.5 * k
    resasc = np.abs(fx - mean[:, None]) @ _WK15
    resabs = np.abs(fx) @ _WK15
    err = np.abs(k - g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            resasc > 0, resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5), err
        )
    floor = 50.0 * _EPS * resabs
    scaled = np.where(floor > scaled, floor, scaled)
    return k * half, scaled * np.abs(half)


def _adaptive(f, a, b, spec: QuadratureSpec) -> QuadResult:
    """Globally adaptive GK15 over the initial intervals [a_i, b_i]."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    span = float(np.sum(b - a))
    done_val = 0.0
    done_err = 0.0
    val, err = _gk15(f, a, b)
    n_total = a.size
    while True:
        total = done_val + float(np.sum(val))
        total_err = done_err + float(np.sum(err))
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= tol:
            return QuadResult(total, total_err, True, n_total)
        # bisect intervals whose error density exceeds the target density
        split = err > tol * (b - a) / span
        if not np.any(split):
            split = err >= np.max(err)
        if n_total + int(np.count_nonzero(split)) > spec.max_subdivisions:
            return QuadResult(total, total_err, False, n_total)
        keep = ~split
        done_val += float(np.sum(val[keep]))
        done_err += float(np.sum(err[keep]))
        sa, sb = a[split], b[split]
        mid = 0.5 * (sa + sb)
        a = np.concatenate([sa, mid])
        b = np.concatenate([mid, sb])
        n_total += sa.size
        val, err = _gk15(f, a, b)


def _check_exponent(p: float, where: str):
    if not p > -1.0:
        raise NonIntegrableEndpoint(f"{where} exponent {p} <= -1: integral diverges")


def integrate_singular(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    p: float = 0.0,
    q: float = 0.0,
    spec: QuadratureSpec = DEFAULT_SPEC,
    full_output: bool = False,
    relative: bool = False,
):
    """Integrate ``f`` over [a, b] where f ~ (u-a)^p at a and ~ (b-u)^q at b.

    ``f`` must accept and return numpy arrays.  Negative exponents are
    flattened by ``u = a + (m-a) w^{1/(1+p)}`` on the left half (mirrored on
    the right half), after which adaptive GK15 runs on the smooth
    w-integrand.  Non-negative exponents need no substitution.

    With ``relative=True`` the integrand is called as ``f(anchor, delta)``
    where ``u = anchor + delta`` and ``anchor`` is the nearer endpoint.  This
    keeps distances to a singular endpoint exact when they fall below the
    resolution of ``u`` itself.

    Returns a float, or a :class:`QuadResult` if ``full_output``.  Without
    ``full_output`` an exhausted subdivision budget raises
    :class:`ToleranceNotMet` carrying the best estimate.
    """
    _check_exponent(p, "left")
    _check_exponent(q, "right")
    a, b = float(a), float(b)
    if not a < b:
        raise ValidationError(f"need a < b, got [{a}, {b}]")
    m = 0.5 * (a + b)
    kl = 1.0 / (1.0 + min(p, 0.0))
    kr = 1.0 / (1.0 + min(q, 0.0))
    hl, hr = m - a, b - m

    def g(w):
        # w in [0, 1] -> left half, w in [1, 2] -> right half
        left = w < 1.0
        s = np.where(left, w, w - 1.0)
        out = np.empty_like(s)
        sl, sr = s[left], s[~left]
        dl = hl * sl**kl
        dr = -hr * sr**kr
        jl = hl * kl * sl ** (kl - 1.0)
        jr = hr * kr * sr ** (kr - 1.0)
        if relative:
            out[left] = np.asarray(f(a, dl), dtype=float) * jl
            out[~left] = np.asarray(f(b, dr), dtype=float) * jr
        else:
            out[left] = np.asarray(f(a + dl), dtype=float) * jl
            out[~left] = np.asarray(f(b + dr), dtype=float) * jr
        return out

    res = _adaptive(g, [0.0, 1.0], [1.0, 2.0], spec)
    if full_output:
        return res
    if not res.converged:
        raise ToleranceNotMet(
            f"tolerance not met after {res.n_intervals} intervals "
            f"(estimate {res.value:.17g}, error {res.error:.3g})",
            estimate=res.value,
            error=res.error,
        )
    return res.value


def integrate_tail(
    f: Callable[[np.ndarray], np.ndarray],
    lower: float,
    decay: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    coef: float | None = None,
    p: float = 0.0,
    full_output: bool = False,
):
    """Integrate ``f`` over [lower, inf) where |f(v)| <= coef * v**decay.

    The cutoff T is the point where the analytic bound
    coef * T**(decay+1) / (-decay-1) drops below abs_tol/2 (or
    ``lower * tail_multiple`` under the fixed policy).  The finite part is
    mapped by v = lower * w**(-1/(-decay-1)), which turns the leading power
    law into a constant, and handed to :func:`integrate_singular`.  ``p`` is
    the exponent of a singularity sitting at ``lower``.
    """
    if not decay < -1.0:
        raise NonIntegrableTail(f"decay exponent {decay} >= -1: tail diverges")
    lower = float(lower)
    if not lower > 0:
        raise ValidationError("integrate_tail needs lower > 0")
    if coef is None:
        probe = lower * np.array([10.0, 100.0, 1000.0])
        coef = 2.0 * float(np.max(np.abs(f(probe)) * probe ** (-decay)))
    coef = abs(float(coef))
    if spec.tail_cutoff_policy == "fixed_multiple":
        cutoff = lower * spec.tail_multiple
    elif coef == 0.0:
        cutoff = 2.0 * lower
    else:
        target = 0.5 * spec.abs_tol * (-decay - 1.0) / coef
        cutoff = target ** (1.0 / (decay + 1.0))
    cutoff = max(cutoff, 2.0 * lower)
    kappa = 1.0 / (-decay - 1.0)
    w_cut = (lower / cutoff) ** (1.0 / kappa)

    def g(w):
        v = lower * w ** (-kappa)
        return np.asarray(f(v), dtype=float) * lower * kappa * w ** (-kappa - 1.0)

    return integrate_singular(g, w_cut, 1.0, 0.0, p, spec, full_output=full_output)


# --------------------------------------------------------------------------
# Graded fixed rules (batch route)
# --------------------------------------------------------------------------

RULE_ORDER = 14
RULE_RATIO = 0.25
RULE_LEVELS = 24


@lru_cache(maxsize=32)
def _graded_unit(order: int, ratio: float, levels: int):
    """Composite GL rule on [0, 1], graded toward 0 (``levels`` panels) and
    more mildly toward 1 (``levels // 3`` panels)."""
    x, w = np.polynomial.legendre.leggauss(order)
    left = 0.5 * ratio ** np.arange(levels + 1, dtype=float)
    right = 1.0 - 0.5 * ratio ** np.arange(levels // 3 + 1, dtype=float)
    edges = np.unique(np.concatenate([[0.0, 1.0], left, right]))
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    nodes, weights = nodes.ravel(), weights.ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


class Rule(NamedTuple):
    """Quadrature nodes ``x = anchor + delta`` with weights ``w``.

    ``anchor`` is the nearer interval endpoint and ``delta`` the exact signed
    offset from it, so distances to an endpoint can be formed without
    cancellation.
    """

    x: np.ndarray
    w: np.ndarray
    anchor: np.ndarray
    delta: np.ndarray


def graded_rule(a, b, p=0.0, q=0.0, order=RULE_ORDER, ratio=RULE_RATIO, levels=RULE_LEVELS):
    """Nodes and weights for integrals over [a, b] with endpoint singularities.

    Each half of the interval is mapped with the same power substitution as
    :func:`integrate_singular` and then covered by panels graded
    geometrically toward the endpoint.  Residual non-smooth terms (mixed
    powers, nearby singularities outside the interval) are resolved by the
    grading, which gives exponential convergence in ``order``.
    """
    _check_exponent(p, "left")
    _check_exponent(q, "right")
    wn, ww = _graded_unit(order, ratio, levels)
    a, b = float(a), float(b)
    m = 0.5 * (a + b)
    kl = 1.0 / (1.0 + min(p, 0.0))
    kr = 1.0 / (1.0 + min(q, 0.0))
    hl, hr = m - a, b - m
    dl = hl * wn**kl
    dr = -hr * wn**kr
    wl = hl * kl * wn ** (kl - 1.0) * ww
    wr = hr * kr * wn ** (kr - 1.0) * ww
    n = wn.size
    anchor = np.concatenate([np.full(n, a), np.full(n, b)])
    delta = np.concatenate([dl, dr])
    w = np.concatenate([wl, wr])
    # Nodes whose offset underflows carry no mass and would hit the singularity.
    keep = (delta != 0.0) & (w > 0.0) & np.isfinite(w)
    anchor, delta, w = anchor[keep], delta[keep], w[keep]
    return Rule(anchor + delta, w, anchor, delta)


def tail_rule(c, decay, order=RULE_ORDER, ratio=RULE_RATIO, levels=RULE_LEVELS):
    """Nodes and weights for [c, inf) with integrand ~ v**decay (decay < -1)."""
    if not decay < -1.0:
        raise NonIntegrableTail(f"decay exponent {decay} >= -1: tail diverges")
    wn, ww = _graded_unit(order, ratio, levels)
    kappa = 1.0 / (-decay - 1.0)
    with np.errstate(over="ignore"):
        v = c * wn ** (-kappa)
        wt = c * kappa * wn ** (-kappa - 1.0) * ww
    ok = np.isfinite(v) & np.isfinite(wt) & (v < 1e250)
    return v[ok], wt[ok]
