"""Exact Gaussian path simulation from Cholesky factors.

Paths are L @ g with g drawn from counter-based streams seeded by
derive(master_seed, path_index), generated in fixed-size blocks so the
output does not depend on how many workers are used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .core import LNLN_H_MAX, GfbmParams, TimeGrid
from .errors import NormalizerUndefined, NotFactorizable, ValidationError
from .kernelcov import CovMatrix, cov_matrix, increment_gram

BLOCK = 256
JITTER_CAP = 1e-6


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular factor of cov + jitter * I on the non-degenerate
    rows.  Rows whose variance is exactly zero stay zero."""

    matrix: np.ndarray
    jitter_used: float
    source: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def cholesky_with_jitter(cov, base_jitter: float = 0.0) -> CholFactor:
    """Cholesky with geometric (x10) jitter escalation.

    Rows with zero diagonal (X(0) and friends) are factored out and left as
    exact zeros.  Raises NotFactorizable once the jitter would exceed
    1e-6 * trace / n.
    """
    if isinstance(cov, CovMatrix):
        C = cov.entries
        source = {"kind": cov.kind.value, "grid": cov.grid.times.tolist(), **cov.params.as_dict()}
    else:
        C = np.asarray(cov, dtype=float)
        source = {"kind": "matrix"}
    n = C.shape[0]
    if C.shape != (n, n):
        raise ValidationError("covariance must be square")
    if not np.allclose(C, C.T, rtol=1e-12, atol=0.0):
        raise ValidationError("covariance is not symmetric")
    d = np.diag(C)
    active = np.flatnonzero(d != 0.0)
    L = np.zeros((n, n))
    if active.size == 0:
        return CholFactor(L, 0.0, source)
    A = C[np.ix_(active, active)]
    trace = float(np.trace(A))
    if not trace > 0:
        raise NotFactorizable("covariance has non-positive trace")
    cap = JITTER_CAP * trace / active.size
    jitter = float(base_jitter)
    floor = 1e-14 * trace / active.size
    while True:
        try:
            La = np.linalg.cholesky(A + jitter * np.eye(active.size))
            if np.all(np.isfinite(La)):
                break
        except np.linalg.LinAlgError:
            pass
        jitter = max(10.0 * jitter, floor)
        if jitter > cap:
            raise NotFactorizable(f"Cholesky failed with jitter up to {cap:.3g}")
    L[np.ix_(active, active)] = La
    return CholFactor(L, jitter, source)


@dataclass
class PathEnsemble:
    """n_paths x n_points sample paths with their provenance.

    ``grid`` holds times for raw ensembles and relative offsets in [0, 1]
    for lil-normalized increment ensembles.
    """

    grid: np.ndarray
    paths: np.ndarray
    master_seed: int
    normalization: dict = field(default_factory=lambda: {"kind": "raw"})
    params: GfbmParams | None = None

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def n_points(self) -> int:
        return self.paths.shape[1]


def _draw_block(L, master_seed, start, stop):
    seeds = rng.derive(master_seed, np.arange(start, stop))
    g = rng.normals(np.atleast_1d(seeds), L.shape[0])
    return g @ L.T


def sample_ensemble(factor: CholFactor, n_paths: int, master_seed: int, workers: int = 1) -> np.ndarray:
    """Matrix of paths L g_i, i < n_paths.  Identical for every ``workers``."""
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    L = factor.matrix
    starts = list(range(0, n_paths, BLOCK))
    jobs = [(s, min(s + BLOCK, n_paths)) for s in starts]
    if workers == 1 or len(jobs) == 1:
        blocks = [_draw_block(L, master_seed, a, b) for a, b in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers or None) as ex:
            blocks = list(ex.map(lambda ab: _draw_block(L, master_seed, *ab), jobs))
    return np.vstack(blocks)


def lil_divisor(params: GfbmParams, t0: float, h: float) -> float:
    """t0^(-gamma/2) |h|^(alpha + 1/2) sqrt(ln ln(1/|h|))."""
    if not 0 < abs(h) < LNLN_H_MAX:
        raise NormalizerUndefined(f"|h|={abs(h)} must be in (0, e^-e)")
    return (
        t0 ** (-params.gamma / 2)
        * abs(h) ** (params.alpha + 0.5)
        * math.sqrt(math.log(math.log(1 / abs(h))))
    )


def increment_cov(params: GfbmParams, t0: float, h: float, x_grid) -> np.ndarray:
    """Covariance of U_{t0,h} on the offsets ``x_grid``."""
    if not 0 < abs(h) < LNLN_H_MAX:
        raise NormalizerUndefined(f"|h|={abs(h)} must be in (0, e^-e)")
    gram = increment_gram(params, t0, h, x_grid)
    return gram / (t0 ** (-params.gamma) * math.log(math.log(1 / abs(h))))


def increment_ensemble(
    params: GfbmParams, t0: float, h: float, x_grid, n_paths: int, master_seed: int, workers: int = 1
) -> PathEnsemble:
    """Samples of (X(t0 + h x) - X(t0)) / divisor on relative offsets x."""
    x = np.asarray(x_grid, dtype=float)
    C = increment_cov(params, t0, h, x)
    factor = cholesky_with_jitter(C)
    paths = sample_ensemble(factor, n_paths, master_seed, workers)
    norm = {
        "kind": "lil_normalized",
        "t0": float(t0),
        "h": float(h),
        "divisor": lil_divisor(params, t0, h),
        "jitter": factor.jitter_used,
    }
    return PathEnsemble(x, paths, int(master_seed), norm, params)


def x_path_ensemble(
    params: GfbmParams, grid, n_paths: int, master_seed: int, kind="X", workers: int = 1
) -> PathEnsemble:
    """Exact samples of X (or Z, Y) on a time grid."""
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(grid)
    cov = cov_matrix(params, grid, kind)
    factor = cholesky_with_jitter(cov)
    paths = sample_ensemble(factor, n_paths, master_seed, workers)
    norm = {"kind": "raw", "process": cov.kind.value, "jitter": factor.jitter_used}
    return PathEnsemble(grid.times.copy(), paths, int(master_seed), norm, params)
