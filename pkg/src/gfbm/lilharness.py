"""Monte Carlo experiments on the local LIL scaling.

For every base time t0 and scale h_k = theta^-k an independent ensemble of
normalized increments U_{t0,h_k} is drawn (seed derive(master, t0_index, k)),
a path functional is evaluated, and running maxima over k serve as a
truncated limsup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .core import LNLN_H_MAX, GfbmParams
from .errors import GridTooCoarse, InsufficientTailSamples, TargetOutsideBall, ValidationError
from .pathsim import increment_ensemble
from .rkhs import GridFunction, LimitCov, endpoint_prediction, in_strassen_ball

DEFAULT_POINTS = 33
DEFAULT_DELTA = 0.25
KINDS = ("endpoint", "sup_abs", "delta_increment", "double_sup")


def default_x_grid(n: int = DEFAULT_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class ScaleLadder:
    k_min: int
    k_max: int
    theta: float = 2.0

    def __post_init__(self):
        if not self.theta > 1:
            raise ValidationError("theta must exceed 1")
        if not 1 <= self.k_min <= self.k_max:
            raise ValidationError("need 1 <= k_min <= k_max")
        if self.k_max > 60:
            raise ValidationError("k_max above 60 is not representable")

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def scales(self) -> np.ndarray:
        return self.theta ** (-self.ks.astype(float))

    def check(self, t0_list):
        h0 = self.theta ** (-self.k_min)
        for t0 in t0_list:
            if not h0 < min(t0 / 2, LNLN_H_MAX):
                raise ValidationError(f"h_kmin={h0:.4g} too large for t0={t0}")


@dataclass(frozen=True)
class LilFunctional:
    kind: str = "endpoint"
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown functional {self.kind!r}; choose from {KINDS}")
        if not 0 < self.delta < 1:
            raise ValidationError("delta must be in (0, 1)")

    @property
    def label(self) -> str:
        if self.kind in ("delta_increment", "double_sup"):
            return f"{self.kind}({self.delta:g})"
        return self.kind


def eval_functional(F: LilFunctional, paths, x_grid) -> np.ndarray:
    """Evaluate F on each row of ``paths`` (a single path gives a scalar)."""
    P = np.asarray(paths, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    x = np.asarray(x_grid, dtype=float)
    if P.shape[1] != x.size:
        raise ValidationError("path length does not match the grid")
    if F.kind == "endpoint":
        i1 = np.flatnonzero(np.isclose(x, 1.0))
        if i1.size == 0:
            raise ValidationError("grid does not contain x = 1")
        out = np.abs(P[:, i1[0]])
    elif F.kind == "sup_abs":
        out = np.abs(P).max(axis=1)
    else:
        spacing = float(np.max(np.diff(x)))
        if F.delta < 2 * spacing - 1e-12:
            raise GridTooCoarse(f"delta={F.delta} < 2 x grid spacing {spacing:g}")
        starts = np.flatnonzero(x <= 1 - F.delta + 1e-12)
        # nearest grid point to x + delta
        ends = np.abs(x[None, :] - (x[starts] + F.delta)[:, None]).argmin(axis=1)
        if F.kind == "delta_increment":
            out = np.abs(P[:, ends] - P[:, starts]).max(axis=1)
        else:
            out = np.zeros(P.shape[0])
            for i, j in zip(starts, ends):
                seg = np.abs(P[:, i + 1 : j + 1] - P[:, [i]])
                if seg.size:
                    out = np.maximum(out, seg.max(axis=1))
    return float(out[0]) if single else out


@dataclass
class LilReport:
    params: GfbmParams
    t0_list: list
    ladder: ScaleLadder
    functional: LilFunctional
    n_paths: int
    master_seed: int
    x_grid: np.ndarray
    values: np.ndarray  # (n_t0, n_k, n_paths)
    running_max: np.ndarray = field(init=False)

    def __post_init__(self):
        self.running_max = np.maximum.accumulate(self.values, axis=1)

    def medians(self, t0_index: int = 0) -> np.ndarray:
        """Median over paths of the running max, per k."""
        return np.median(self.running_max[t0_index], axis=1)

    def prediction(self) -> float | None:
        if self.functional.kind != "endpoint":
            return None
        return endpoint_prediction(self.params, self.x_grid)


def _ensemble_values(params, t0, h, x, F, n_paths, seed, workers):
    ens = increment_ensemble(params, t0, h, x, n_paths, seed, workers)
    return ens.paths, eval_functional(F, ens.paths, x)


def run_lil_experiment(
    params: GfbmParams,
    t0_list,
    ladder: ScaleLadder,
    F: LilFunctional,
    x_grid=None,
    n_paths: int = 1000,
    master_seed: int = 0,
    workers: int = 1,
) -> LilReport:
    if not params.lil_regime:
        raise ValidationError("alpha >= 1/2: the local LIL does not apply")
    t0_list = [float(t) for t in np.atleast_1d(t0_list)]
    ladder.check(t0_list)
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    values = np.empty((len(t0_list), ladder.ks.size, n_paths))
    for i, t0 in enumerate(t0_list):
        for j, (k, h) in enumerate(zip(ladder.ks, ladder.scales)):
            seed = rng.derive(master_seed, i, int(k))
            values[i, j] = _ensemble_values(params, t0, h, x, F, n_paths, seed, workers)[1]
    return LilReport(params, t0_list, ladder, F, n_paths, master_seed, x, values)


@dataclass(frozen=True)
class LimsupEstimate:
    estimate: float
    trend_slope: float
    band: tuple


def estimate_limsup(report: LilReport, t0_index: int = 0) -> LimsupEstimate:
    """Median of the running max at k_max with its 10-90% band.

    trend_slope is minus the least-squares slope of the running-max median
    against 1/ln k over the top half of the ladder.  Since 1/ln k falls as k
    grows it is >= 0, and it is 0 once the median has stopped moving.
    """
    ks = report.ladder.ks
    if ks.size < 10:
        raise ValidationError("limsup estimation needs at least 10 scales")
    last = report.running_max[t0_index, -1]
    med = report.medians(t0_index)
    top = ks >= ks[ks.size // 2]
    xs = 1.0 / np.log(ks[top])
    slope = 0.0 if np.ptp(med[top]) == 0 else float(np.polyfit(xs, med[top], 1)[0])
    lo, hi = np.quantile(last, [0.1, 0.9])
    return LimsupEstimate(float(np.median(last)), -slope + 0.0, (float(lo), float(hi)))


@dataclass(frozen=True)
class ClusterResult:
    min_distance: float
    per_k_min: np.ndarray
    ks: np.ndarray


def strassen_cluster_check(
    params: GfbmParams,
    t0: float,
    ladder: ScaleLadder,
    targets,
    n_paths: int,
    master_seed: int,
    x_grid=None,
    workers: int = 1,
) -> list:
    """Closest approach (sup norm) of sampled U_{t0,h_k} to each target.

    Draws match :func:`run_lil_experiment` with t0 at index 0, so nested
    ladders share their common scales exactly.
    """
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    cov = LimitCov.from_params(params, t0, x)
    targets = [t if isinstance(t, GridFunction) else GridFunction(x, t) for t in targets]
    for f in targets:
        if not np.array_equal(f.x_grid, x):
            raise ValidationError("target grid differs from x_grid")
        if not in_strassen_ball(f, cov, 1e-6):
            raise TargetOutsideBall("target has rate above 1")
    ladder.check([t0])
    per_k = np.empty((len(targets), ladder.ks.size))
    for j, (k, h) in enumerate(zip(ladder.ks, ladder.scales)):
        seed = rng.derive(master_seed, 0, int(k))
        paths = increment_ensemble(params, t0, h, x, n_paths, seed, workers).paths
        for i, f in enumerate(targets):
            per_k[i, j] = np.abs(paths - f.values[None, :]).max(axis=1).min()
    return [ClusterResult(float(row.min()), row, ladder.ks.copy()) for row in per_k]


@dataclass(frozen=True)
class TailFit:
    c_hat: float
    r2: float
    thresholds: np.ndarray
    probabilities: np.ndarray

    @property
    def good_fit(self) -> bool:
        return self.r2 >= 0.95


def tail_fit(samples, thresholds) -> TailFit:
    """Regress -ln P(sample >= u) on u^2."""
    s = np.asarray(samples, dtype=float)
    u = np.asarray(thresholds, dtype=float)
    counts = np.array([(s >= v).sum() for v in u])
    if np.any(counts < 10):
        raise InsufficientTailSamples(
            f"thresholds {u[counts < 10].tolist()} have fewer than 10 exceedances"
        )
    p = counts / s.size
    y = -np.log(p)
    X = u**2
    slope, icept = np.polyfit(X, y, 1)
    resid = y - (slope * X + icept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return TailFit(float(slope), r2, u, p)


def tail_diagnostic(
    params: GfbmParams,
    t0: float,
    h: float,
    n_paths: int,
    thresholds,
    master_seed: int = 0,
    x_grid=None,
    functional: LilFunctional | None = None,
    workers: int = 1,
) -> TailFit:
    """Gaussian tail check of F(U_{t0,h}) (sup |U| by default)."""
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    F = functional or LilFunctional("sup_abs")
    ens = increment_ensemble(params, t0, h, x, n_paths, master_seed, workers)
    return tail_fit(eval_functional(F, ens.paths, x), thresholds)
