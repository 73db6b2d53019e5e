"""Acceptance suite: twelve end-to-end criteria at their stated tolerances.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed in the terminal summary.
"""

import math
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats
from scipy.special import beta

from gfbm.core import GfbmParams, TimeGrid
from gfbm.kernelcov import cov_matrix, cov_x, rescaled_increment_cov, rho_limit, variance_bound_check
from gfbm.lamperti import (
    BandSpec,
    band_residual_variance,
    build_table,
    low_second_moment,
    r_u,
    r_u_decay_check,
    spectral_density,
    tail_mass,
)
from gfbm.lilharness import LilFunctional, ScaleLadder, estimate_limsup, run_lil_experiment
from gfbm.pathsim import increment_cov, increment_ensemble, x_path_ensemble
from gfbm.rkhs import LimitCov, extreme_path, linear_sup

from oracles import lorentzian

SQRT2 = math.sqrt(2)


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def test_01_closed_form_covariance(criterion):
    with criterion(1, "closed-form covariance, alpha=0 gamma=0.4", 1.0) as rec:
        p = GfbmParams(0.0, 0.4)
        s, t = np.random.default_rng(1).uniform(0.01, 5.0, (2, 100))
        got = np.array([cov_x(p, a, b) for a, b in zip(s, t)])
        exact = np.minimum(s, t) ** 0.6 / 0.6
        err = float(np.max(np.abs(got - exact) / exact))
        rec.note(f"max rel err {err:.1e}")
        assert err < 1e-6


def test_02_self_similarity(criterion):
    with criterion(2, "self-similarity of cov_x", 10.0) as rec:
        rng = np.random.default_rng(2)
        worst = 0.0
        for p in (GfbmParams(0.2, 0.3), GfbmParams(-0.1, 0.4), GfbmParams(0.3, 0.0)):
            s, t = rng.uniform(0.05, 3.0, (2, 100))
            a = rng.uniform(0.5, 2.0, 100)
            for si, ti, ai in zip(s, t, a):
                base = cov_x(p, si, ti)
                dev = abs(cov_x(p, ai * si, ai * ti) - ai ** (2 * p.hurst) * base) / (1 + abs(base))
                worst = max(worst, dev)
        rec.note(f"max scaled deviation {worst:.1e}")
        assert worst < 1e-6


def test_03_limit_covariance(criterion):
    with criterion(3, "rescaled increment covariance converges to rho_limit", 30.0) as rec:
        pairs = [(1.0, 1.0), (0.5, 1.0), (0.25, 0.75)]
        for a, g in [(0.2, 0.3), (-0.1, 0.4), (0.0, 0.4)]:
            p = GfbmParams(a, g)
            for t0 in (1.0, 4.0):
                for x1, x2 in pairs:
                    lim = rho_limit(p, t0, x1, x2)
                    e2 = abs(rescaled_increment_cov(p, t0, 1e-2, x1, x2) - lim)
                    e3 = abs(rescaled_increment_cov(p, t0, 1e-3, x1, x2) - lim)
                    assert e3 < e2, (a, g, t0, x1, x2, e2, e3)
        rec.note("18 cases, error at h=1e-3 < error at h=1e-2")


def test_04_variance_bounds(criterion):
    with criterion(4, "variance bounds for Z increments", 30.0) as rec:
        for a, g in [(0.2, 0.3), (-0.1, 0.4), (0.3, 0.2)]:
            r = variance_bound_check(GfbmParams(a, g), (0.5, 4.0), 2.0, 200, seed=4)
            rec.note(f"({a},{g}) [{r.min_lower_ratio:.3f}, {r.max_upper_ratio:.3f}]")
            assert 0.05 <= r.min_lower_ratio and r.max_upper_ratio <= 20
        r = variance_bound_check(GfbmParams(0.0, 0.4), (0.5, 4.0), 2.0, 200, seed=4)
        rng = np.random.default_rng(4)
        s = rng.uniform(0.5, 4.0, 200)
        t = s * (1 + rng.uniform(0, 1, 200))
        var = (t**0.6 - s**0.6) / 0.6
        lower, upper = var * t**0.4 / (t - s), var * s**0.4 / (t - s)
        assert np.all(lower >= 1) and np.all(upper <= 1)
        assert r.min_lower_ratio == pytest.approx(lower.min(), rel=1e-9)
        assert r.max_upper_ratio == pytest.approx(upper.max(), rel=1e-9)


def test_05_lamperti_beta(criterion):
    with criterion(5, "r_U(0) Beta identity and decay rate", 10.0) as rec:
        sets = [(0.25, 0.5), (0.0, 0.4), (-0.1, 0.4), (0.2, 0.3), (0.6, 0.5)]
        worst = 0.0
        for a, g in sets:
            p = GfbmParams(a, g)
            worst = max(worst, abs(r_u(p, 0.0) / beta(1 - g, 2 * a + 1) - 1))
            rate = r_u_decay_check(p, np.linspace(5, 40, 15))
            assert rate <= -(1 - g) / 2 + 0.05, (a, g, rate)
        rec.note(f"max Beta rel err {worst:.1e}")
        assert worst < 1e-8


def test_06_spectral_oracle(criterion):
    with criterion(6, "spectral density vs Lorentzian", 30.0) as rec:
        lam = np.linspace(0, 50, 5001)
        for g in (0.0, 0.4):
            p = GfbmParams(0.0, g)
            err = float(np.max(np.abs(spectral_density(p, lam) - lorentzian(g, lam))))
            table = build_table(p)
            mass = table.mass() / table.r0 - 1
            rec.note(f"gamma={g}: sup err {err:.1e}, mass dev {mass:.1e}")
            assert err < 1e-4 and abs(mass) < 0.01


def test_07_spectral_tails(criterion):
    with criterion(7, "spectral tail slopes", 60.0) as rec:
        u = np.geomspace(10, 100, 11)
        for a in (-0.1, 0.0, 0.2):
            table = build_table(GfbmParams(a, 0.4))
            st = loglog_slope(u, [tail_mass(table, x) for x in u])
            sl = loglog_slope(u, [low_second_moment(table, x) for x in u])
            rec.note(f"a={a}: {st:+.3f}/{sl:+.3f}")
            assert abs(st + (2 * a + 1)) <= 0.1
            assert abs(sl - (1 - 2 * a)) <= 0.1


def test_08_band_residual(criterion):
    with criterion(8, "band residual J2 scaling", 30.0) as rec:
        d = np.array([10.0, 31.6, 100.0])
        for a in (-0.1, 0.0, 0.2):
            p = GfbmParams(a, 0.4)
            table = build_table(p)
            j2 = [band_residual_variance(p, BandSpec.surrogate(1.0, x), 1.0, 1e-3, table).J2_part for x in d]
            slope = loglog_slope(d, j2)
            rec.note(f"a={a}: {slope:+.3f}")
            assert abs(slope + (2 * a + 1)) <= 0.15


def test_09_sampler(criterion):
    with criterion(9, "exact sampler covariance and marginal", 60.0) as rec:
        p = GfbmParams(0.2, 0.3)
        grid = TimeGrid.linspace(0.25, 2.0, 8)
        C = cov_matrix(p, grid, "X").entries
        e = x_path_ensemble(p, grid, 10_000, 9009)
        S = e.paths.T @ e.paths / e.n_paths
        d = np.diag(C)
        se = np.sqrt((np.outer(d, d) + C**2) / e.n_paths)
        z = float(np.max(np.abs(S - C) / se))
        pv = stats.kstest(e.paths[:, -1] / math.sqrt(C[-1, -1]), "norm").pvalue
        rec.note(f"max |z| {z:.2f}, KS p {pv:.3f}")
        assert z <= 5 and pv > 1e-3


def test_10_rkhs_duality(criterion):
    with criterion(10, "RKHS duality on a 17-point grid", 10.0) as rec:
        rng = np.random.default_rng(10)
        cov = LimitCov.from_params(GfbmParams(0.2, 0.3), 1.0, np.linspace(0, 1, 17))
        L = np.linalg.cholesky(cov.sigma)
        m = L.shape[0]
        worst_gap, worst_ratio = 0.0, 0.0
        for _ in range(20):
            a = rng.normal(size=m)
            s = linear_sup(a, cov)
            z = extreme_path(a, cov)
            worst_gap = max(worst_gap, abs(a @ z.values[1:] - s) / s)
            w = rng.normal(size=(10_000, m))
            w *= SQRT2 * rng.uniform(size=(10_000, 1)) ** (1 / m) / np.linalg.norm(w, axis=1, keepdims=True)
            worst_ratio = max(worst_ratio, float(np.max((w @ L.T) @ a)) / s)
        rec.note(f"duality gap {worst_gap:.1e}, best random/sup {worst_ratio:.3f}")
        assert worst_gap < 1e-9 and worst_ratio <= 1.0


def test_11_lil_harness(criterion):
    with criterion(11, "LIL harness", 300.0) as rec:
        ladder = ScaleLadder(10, 30)
        F = LilFunctional("endpoint")
        bm = run_lil_experiment(GfbmParams(0, 0), [1.0], ladder, F, None, 2000, 7)
        est = estimate_limsup(bm)
        rec.note(f"BM {est.estimate / SQRT2:.3f}*sqrt2, trend {est.trend_slope:+.2f}")
        assert 0.5 * SQRT2 <= est.estimate <= 1.2 * SQRT2 and est.trend_slope >= 0

        p = GfbmParams(0.2, 0.3)
        h = 2.0**-20
        x = np.linspace(0, 1, 33)
        s1 = increment_ensemble(p, 1.0, h, x, 10_000, 101).paths[:, -1]
        s4 = increment_ensemble(p, 4.0, h, x, 10_000, 404).paths[:, -1]
        ks = stats.ks_2samp(s1, s4)
        crit = math.sqrt(-math.log(1e-3 / 2) / 2) * math.sqrt(2 / 10_000)
        rec.note(f"KS D {ks.statistic:.4f} < {crit:.4f}")
        assert ks.statistic < crit

        g = run_lil_experiment(p, [1.0], ladder, F, None, 2000, 7)
        ge = estimate_limsup(g)
        pred = g.prediction()
        rec.note(f"GFBM {ge.estimate / pred:.3f}*prediction")
        assert 0.5 * pred <= ge.estimate <= 1.2 * pred and ge.trend_slope >= 0


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "gfbm", *args], capture_output=True, cwd=cwd, check=True).stdout


def test_12_determinism(criterion, tmp_path):
    with criterion(12, "byte-identical reruns", 360.0) as rec:
        lil = ["lil", "--alpha", "0", "--gamma", "0", "--t0", "1", "--functional", "endpoint",
               "--kmin", "10", "--kmax", "30", "--paths", "2000", "--seed", "7"]
        runs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            st = _cli(["selftest", "--out", str(out / "self")], tmp_path)
            lo = _cli([*lil, "--out", str(out / "lil")], tmp_path)
            files = {f.relative_to(out).as_posix(): f.read_bytes() for f in sorted(out.rglob("*")) if f.is_file()}
            runs.append((st, lo, files))
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1]
        assert runs[0][2] == runs[1][2]
        rec.note(f"{len(runs[0][2])} files identical")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
