"""CSV/JSON readers and writers.

Floats go to CSV with 17 significant digits and to JSON via repr, so a
write/read cycle reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .core import GfbmParams, TimeGrid
from .kernelcov import CovMatrix, Kind
from .lamperti import SpectralTable
from .lilharness import LilFunctional, LilReport, ScaleLadder
from .pathsim import PathEnsemble
from .rkhs import GridFunction, LimitCov

FMT = "%.17g"


def _fmt(x) -> str:
    return FMT % x


def params_dict(p: GfbmParams | None):
    return None if p is None else {"alpha": p.alpha, "gamma": p.gamma}


def params_from(d) -> GfbmParams | None:
    return None if d is None else GfbmParams(d["alpha"], d["gamma"])


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _write_rows(rows, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _read_rows(path):
    text = Path(path).read_text()
    return [row for row in csv.reader(io.StringIO(text)) if row]


def load_json(path):
    return json.loads(Path(path).read_text())


# --------------------------------------------------------------------------
# CovMatrix
# --------------------------------------------------------------------------


def cov_to_csv(cov: CovMatrix, path=None) -> str:
    """First row: grid times; then one row per matrix row."""
    rows = [[_fmt(t) for t in cov.grid.times]]
    rows += [[_fmt(v) for v in row] for row in cov.entries]
    return _write_rows(rows, path)


def cov_from_csv(src, params: GfbmParams, kind, t0=None) -> CovMatrix:
    rows = _read_rows(src)
    grid = TimeGrid([float(v) for v in rows[0]])
    entries = np.array([[float(v) for v in r] for r in rows[1:]])
    return CovMatrix(params, grid, kind, entries, t0)


def cov_to_dict(cov: CovMatrix) -> dict:
    return {
        "params": params_dict(cov.params),
        "grid": cov.grid.times.tolist(),
        "kind": cov.kind.value,
        "entries": cov.entries.tolist(),
        "t0": cov.t0,
    }


def cov_from_dict(d) -> CovMatrix:
    return CovMatrix(
        params_from(d["params"]), TimeGrid(d["grid"]), Kind.parse(d["kind"]),
        np.array(d["entries"], dtype=float), d.get("t0"),
    )


# --------------------------------------------------------------------------
# PathEnsemble
# --------------------------------------------------------------------------


def ensemble_to_csv(ens: PathEnsemble, path=None) -> str:
    rows = [[_fmt(x) for x in ens.grid]]
    rows += [[_fmt(v) for v in row] for row in ens.paths]
    return _write_rows(rows, path)


def ensemble_manifest(ens: PathEnsemble) -> dict:
    norm = dict(ens.normalization)
    return {
        "params": params_dict(ens.params),
        "t0": norm.get("t0"),
        "h": norm.get("h"),
        "normalization": norm,
        "master_seed": int(ens.master_seed),
        "n_paths": ens.n_paths,
    }


def ensemble_from_csv(src, manifest: dict) -> PathEnsemble:
    rows = _read_rows(src)
    grid = np.array([float(v) for v in rows[0]])
    paths = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, grid.size)
    return PathEnsemble(
        grid, paths, int(manifest["master_seed"]), dict(manifest["normalization"]),
        params_from(manifest.get("params")),
    )


# --------------------------------------------------------------------------
# SpectralTable
# --------------------------------------------------------------------------


def table_to_csv(table: SpectralTable, path=None) -> str:
    rows = [["lambda", "density"]]
    rows += [[_fmt(l), _fmt(f)] for l, f in zip(table.lambdas, table.densities)]
    return _write_rows(rows, path)


def table_manifest(table: SpectralTable) -> dict:
    return {
        "params": params_dict(table.params),
        "t_max": table.t_max,
        "r0": table.r0,
        "fitted_decay_rate": table.fitted_decay_rate,
        "tail_slope": None if np.isnan(table.tail_slope) else table.tail_slope,
    }


def table_from_csv(src, manifest: dict) -> SpectralTable:
    rows = _read_rows(src)[1:]
    arr = np.array([[float(v) for v in r] for r in rows])
    return SpectralTable(
        params_from(manifest["params"]), arr[:, 0], arr[:, 1], float(manifest["r0"]),
        float(manifest["t_max"]), float(manifest["fitted_decay_rate"]),
        float("nan") if manifest.get("tail_slope") is None else float(manifest["tail_slope"]),
    )


# --------------------------------------------------------------------------
# rkhs objects
# --------------------------------------------------------------------------


def gridfunction_to_csv(z: GridFunction, path=None) -> str:
    rows = [[_fmt(x) for x in z.x_grid], [_fmt(v) for v in z.values]]
    return _write_rows(rows, path)


def gridfunction_from_csv(src) -> GridFunction:
    rows = _read_rows(src)
    return GridFunction([float(v) for v in rows[0]], [float(v) for v in rows[1]])


def limitcov_to_dict(cov: LimitCov) -> dict:
    return {"x_grid": cov.x_grid.tolist(), "sigma": cov.sigma.tolist()}


def limitcov_from_dict(d) -> LimitCov:
    return LimitCov(np.array(d["x_grid"]), np.array(d["sigma"]))


# --------------------------------------------------------------------------
# LilReport
# --------------------------------------------------------------------------

LIL_COLUMNS = ["t0", "k", "h", "functional", "path_index", "value", "running_max"]


def report_to_csv(report: LilReport, path=None) -> str:
    rows = [LIL_COLUMNS]
    label = report.functional.label
    for i, t0 in enumerate(report.t0_list):
        for j, (k, h) in enumerate(zip(report.ladder.ks, report.ladder.scales)):
            vals, rmax = report.values[i, j], report.running_max[i, j]
            for p in range(report.n_paths):
                rows.append([_fmt(t0), str(int(k)), _fmt(h), label, str(p), _fmt(vals[p]), _fmt(rmax[p])])
    return _write_rows(rows, path)


def report_manifest(report: LilReport) -> dict:
    return {
        "params": params_dict(report.params),
        "t0_list": list(report.t0_list),
        "ladder": {"k_min": report.ladder.k_min, "k_max": report.ladder.k_max, "theta": report.ladder.theta},
        "functional": {"kind": report.functional.kind, "delta": report.functional.delta},
        "n_paths": report.n_paths,
        "master_seed": int(report.master_seed),
        "x_grid": report.x_grid.tolist(),
    }


def report_from_csv(src, manifest: dict) -> LilReport:
    rows = _read_rows(src)
    if rows[0] != LIL_COLUMNS:
        raise ValueError("unexpected LilReport header")
    lad = manifest["ladder"]
    ladder = ScaleLadder(int(lad["k_min"]), int(lad["k_max"]), float(lad["theta"]))
    t0s = [float(t) for t in manifest["t0_list"]]
    n = int(manifest["n_paths"])
    values = np.array([float(r[5]) for r in rows[1:]]).reshape(len(t0s), ladder.ks.size, n)
    fn = manifest["functional"]
    return LilReport(
        params_from(manifest["params"]), t0s, ladder, LilFunctional(fn["kind"], float(fn["delta"])),
        n, int(manifest["master_seed"]), np.array(manifest["x_grid"], dtype=float), values,
    )
