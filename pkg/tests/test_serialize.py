import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gfbm import serialize as ser
from gfbm.core import GfbmParams
from gfbm.kernelcov import cov_matrix
from gfbm.lamperti import build_table
from gfbm.lilharness import LilFunctional, ScaleLadder, run_lil_experiment
from gfbm.pathsim import increment_ensemble, x_path_ensemble
from gfbm.rkhs import GridFunction, LimitCov

P23 = GfbmParams(0.2, 0.3)


def test_cov_round_trip(tmp_path):
    c = cov_matrix(P23, [0.0, 0.3, 1.7], "X")
    ser.cov_to_csv(c, tmp_path / "c.csv")
    back = ser.cov_from_csv(tmp_path / "c.csv", P23, "X")
    assert np.array_equal(back.entries, c.entries) and back.grid == c.grid
    d = ser.load_json(_dump(ser.cov_to_dict(c), tmp_path / "c.json"))
    back = ser.cov_from_dict(d)
    assert np.array_equal(back.entries, c.entries) and back.kind == c.kind and back.params == P23


def test_cov_csv_layout():
    c = cov_matrix(GfbmParams(0, 0), [0.5, 1.0], "X")
    assert ser.cov_to_csv(c).splitlines() == ["0.5,1", "0.5,0.5", "0.5,1"]


def _dump(obj, path):
    ser.dump_json(obj, path)
    return path


@pytest.mark.parametrize("kind", ["raw", "increment"])
def test_ensemble_round_trip(tmp_path, kind):
    if kind == "raw":
        e = x_path_ensemble(P23, [0.5, 1.0, 2.0], 17, 3)
    else:
        e = increment_ensemble(P23, 1.0, 2**-12, np.linspace(0, 1, 5), 17, 3)
    ser.ensemble_to_csv(e, tmp_path / "p.csv")
    man = ser.load_json(_dump(ser.ensemble_manifest(e), tmp_path / "p.json"))
    back = ser.ensemble_from_csv(tmp_path / "p.csv", man)
    assert np.array_equal(back.paths, e.paths) and np.array_equal(back.grid, e.grid)
    assert back.normalization == e.normalization and back.master_seed == e.master_seed
    assert back.params == P23


def test_table_round_trip(tmp_path):
    t = build_table(GfbmParams(0.0, 0.4), 20.0, 201)
    ser.table_to_csv(t, tmp_path / "t.csv")
    man = ser.load_json(_dump(ser.table_manifest(t), tmp_path / "t.json"))
    back = ser.table_from_csv(tmp_path / "t.csv", man)
    assert np.array_equal(back.densities, t.densities) and np.array_equal(back.lambdas, t.lambdas)
    assert back.r0 == t.r0 and back.mass() == t.mass()
    assert (math.isnan(back.tail_slope) and math.isnan(t.tail_slope)) or back.tail_slope == t.tail_slope


def test_rkhs_round_trip(tmp_path):
    x = np.linspace(0, 1, 9)
    z = GridFunction(x, np.sin(x))
    ser.gridfunction_to_csv(z, tmp_path / "z.csv")
    back = ser.gridfunction_from_csv(tmp_path / "z.csv")
    assert np.array_equal(back.values, z.values) and np.array_equal(back.x_grid, z.x_grid)
    cov = LimitCov.from_params(P23, 2.0, x)
    back = ser.limitcov_from_dict(ser.load_json(_dump(ser.limitcov_to_dict(cov), tmp_path / "l.json")))
    assert np.array_equal(back.sigma, cov.sigma)


def test_report_round_trip(tmp_path):
    rep = run_lil_experiment(P23, [1.0, 3.0], ScaleLadder(9, 11), LilFunctional("double_sup", 0.25), None, 7, 5)
    ser.report_to_csv(rep, tmp_path / "r.csv")
    man = ser.load_json(_dump(ser.report_manifest(rep), tmp_path / "r.json"))
    back = ser.report_from_csv(tmp_path / "r.csv", man)
    assert np.array_equal(back.values, rep.values) and np.array_equal(back.running_max, rep.running_max)
    assert back.functional == rep.functional and back.ladder == rep.ladder


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=8))
def test_float_format_lossless(vals):
    assert [float(ser.FMT % v) for v in vals] == vals


def test_json_rejects_nan():
    with pytest.raises(ValueError):
        ser.dump_json({"x": float("nan")})
