"""Command-line front end.

    gfbm [--config FILE] <command> [flags]

Commands: cov, simulate, spectral, rkhs, lil, selftest.  A config file holds
flat ``key = value`` lines using the long flag names; flags given on the
command line win.  With ``--out DIR`` every command writes its data files, a
JSON manifest and ``run.cfg``, which replays the run via ``gfbm --config``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
Errors are also reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import serialize as ser
from .core import DEFAULT_SPEC, GfbmParams, TimeGrid
from .errors import NumericalError, ValidationError

ARTIFACT = f"artifact {__version__}"

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# per-command defaults; argparse itself defaults everything to None so that
# config values can fill the gaps left by the command line
DEFAULTS = {
    "common": {"alpha": None, "gamma": None, "out": None, "seed": 0, "threads": 1},
    "cov": {"grid": None, "grid_points": None, "t_max": 1.0, "kind": "x", "t0": 1.0},
    "simulate": {"grid": None, "grid_points": None, "t_max": 1.0, "kind": "x", "t0": None,
                 "h": None, "paths": 1000},
    "spectral": {"lambda_max": 200.0, "n_lambda": 4001, "t_max": None},
    "rkhs": {"endpoint": False, "weights": None, "grid_points": 17, "t0": 1.0},
    "lil": {"t0": "1", "functional": "endpoint", "delta": 0.25, "kmin": 10, "kmax": 30,
            "theta": 2.0, "paths": 2000, "grid_points": 33},
    "selftest": {},
}

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


class CliError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _add_common(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, help="worker threads (0 = auto)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gfbm", description="Generalized fractional Brownian motion laboratory")
    parser.add_argument("--config", type=str, help="key=value configuration file")
    parser.add_argument("--version", action="version", version=ARTIFACT)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("cov", help="covariance matrix of X, Y, Z or the limit process")
    _add_common(p)
    p.add_argument("--grid", type=str, help="comma-separated times")
    p.add_argument("--grid-points", type=int)
    p.add_argument("--t-max", type=float)
    p.add_argument("--kind", type=str, help="x, y, z or limit")
    p.add_argument("--t0", type=float, help="base time (limit kind)")

    p = sub.add_parser("simulate", help="exact Gaussian paths")
    _add_common(p)
    p.add_argument("--grid", type=str)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--t-max", type=float)
    p.add_argument("--kind", type=str)
    p.add_argument("--t0", type=float, help="with --h: normalized increments at t0")
    p.add_argument("--h", type=float)
    p.add_argument("--paths", type=int)

    p = sub.add_parser("spectral", help="spectral density table of the Lamperti process")
    _add_common(p)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--n-lambda", type=int)
    p.add_argument("--t-max", type=float)

    p = sub.add_parser("rkhs", help="sup of a linear functional over the unit ball")
    _add_common(p)
    p.add_argument("--endpoint", action="store_const", const=True)
    p.add_argument("--weights", type=str, help="comma-separated weights on x > 0")
    p.add_argument("--grid-points", type=int)
    p.add_argument("--t0", type=float)

    p = sub.add_parser("lil", help="running-max LIL experiment")
    _add_common(p)
    p.add_argument("--t0", type=str, help="comma-separated base times")
    p.add_argument("--functional", type=str)
    p.add_argument("--delta", type=float)
    p.add_argument("--kmin", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--paths", type=int)
    p.add_argument("--grid-points", type=int)

    p = sub.add_parser("selftest", help="closed-form oracle suite")
    p.add_argument("--out", type=str)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _convert(action, value: str):
    if action.const is True:
        v = _BOOL.get(value.lower())
        if v is None:
            raise CliError(f"{action.dest}: expected a boolean, got {value!r}")
        return v
    if action.type is None:
        return value
    try:
        return action.type(value)
    except ValueError:
        raise CliError(f"{action.dest}: cannot parse {value!r}") from None


def resolve(argv) -> dict:
    """Merge command line, config file and defaults into one settings dict."""
    parser = build_parser()
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    cfg = read_config(known.config) if known.config else {}
    given = next((a for a in rest if a in COMMANDS), None)
    command = given or cfg.get("command")
    if given and cfg.get("command", given) != given:
        raise CliError("config file is for a different command")
    cfg.pop("command", None)
    if command is None:
        parser.parse_args(argv)  # --help, --version or a usage error
        raise CliError("no command given")
    if given is None:
        rest = [command, *rest]
    ns = parser.parse_args(rest)
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions if a.dest != "help"}
    unknown = sorted(set(cfg) - set(actions))
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    settings = {}
    defaults = {**DEFAULTS["common"], **DEFAULTS[command]}
    for dest in actions:
        v = getattr(ns, dest, None)
        if v is None and dest in cfg:
            v = _convert(actions[dest], cfg[dest])
        if v is None:
            v = defaults.get(dest)
        settings[dest] = v
    settings["command"] = command
    return settings


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _params(s) -> GfbmParams:
    if s.get("alpha") is None or s.get("gamma") is None:
        raise CliError("--alpha and --gamma are required")
    return GfbmParams(s["alpha"], s["gamma"])


def _grid(s, lo=0.0) -> TimeGrid:
    if s.get("grid"):
        return TimeGrid.parse(s["grid"])
    if s.get("grid_points"):
        return TimeGrid.linspace(lo, s["t_max"], s["grid_points"])
    raise CliError("give --grid or --grid-points")


def _outdir(s):
    if not s.get("out"):
        return None
    d = Path(s["out"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifest(s, extra: dict, outputs) -> dict:
    return {
        "artifact": ARTIFACT,
        "command": s["command"],
        "settings": {k: v for k, v in sorted(s.items()) if k not in ("command", "out", "config")},
        "quadrature": {
            "rel_tol": DEFAULT_SPEC.rel_tol,
            "abs_tol": DEFAULT_SPEC.abs_tol,
            "max_subdivisions": DEFAULT_SPEC.max_subdivisions,
            "tail_cutoff_policy": DEFAULT_SPEC.tail_cutoff_policy,
        },
        "outputs": list(outputs),
        **extra,
    }


def _write_run(d: Path, s, extra, outputs):
    lines = [f"command = {s['command']}"]
    for k, v in sorted(s.items()):
        if k in ("command", "out", "config") or v is None or v is False:
            continue
        lines.append(f"{k} = {v}")
    (d / "run.cfg").write_text("\n".join(lines) + "\n")
    ser.dump_json(_manifest(s, extra, [*outputs, "run.cfg"]), d / "manifest.json")


def _workers(s) -> int:
    t = s.get("threads") or 0
    return t if t > 0 else (os.cpu_count() or 1)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_cov(s, out):
    from .kernelcov import cov_matrix

    p = _params(s)
    grid = _grid(s)
    cov = cov_matrix(p, grid, s["kind"], t0=s["t0"])
    d = _outdir(s)
    text = ser.cov_to_csv(cov, d / "cov.csv" if d else None)
    if d:
        ser.dump_json(ser.cov_to_dict(cov), d / "cov.json")
        _write_run(d, s, {"params": ser.params_dict(p)}, ["cov.csv", "cov.json"])
    out.write(text)


def cmd_simulate(s, out):
    from .pathsim import increment_ensemble, x_path_ensemble

    p = _params(s)
    workers = _workers(s)
    if s.get("h") is not None:
        if s.get("t0") is None:
            raise CliError("--h needs --t0")
        x = _grid(s) if (s.get("grid") or s.get("grid_points")) else TimeGrid.linspace(0, 1, 33)
        ens = increment_ensemble(p, s["t0"], s["h"], x.times, s["paths"], s["seed"], workers)
    else:
        ens = x_path_ensemble(p, _grid(s), s["paths"], s["seed"], s["kind"], workers)
    d = _outdir(s)
    man = ser.ensemble_manifest(ens)
    if d:
        ser.ensemble_to_csv(ens, d / "paths.csv")
        ser.dump_json(man, d / "paths.json")
        _write_run(d, s, {"params": ser.params_dict(p)}, ["paths.csv", "paths.json"])
    var = ens.paths.var(axis=0)
    out.write(f"paths = {ens.n_paths}\npoints = {ens.n_points}\n")
    out.write("sample_variance = " + ",".join(f"{v:.6g}" for v in var) + "\n")


def cmd_spectral(s, out):
    from .lamperti import build_table

    p = _params(s)
    table = build_table(p, s["lambda_max"], s["n_lambda"], s["t_max"])
    d = _outdir(s)
    if d:
        ser.table_to_csv(table, d / "spectral.csv")
        ser.dump_json(ser.table_manifest(table), d / "spectral.json")
        _write_run(d, s, {"params": ser.params_dict(p)}, ["spectral.csv", "spectral.json"])
    out.write(f"r0 = {table.r0:.9g}\nmass = {table.mass():.9g}\n")
    out.write(f"fitted_decay_rate = {table.fitted_decay_rate:.6g}\nt_max = {table.t_max:.6g}\n")
    if not d:
        out.write(ser.table_to_csv(table))


def cmd_rkhs(s, out):
    from .rkhs import LimitCov, endpoint_weights, extreme_path, linear_sup, rate_functional

    p = _params(s)
    x = np.linspace(0.0, 1.0, s["grid_points"])
    cov = LimitCov.from_params(p, s["t0"], x)
    if s.get("weights"):
        a = np.array([float(v) for v in s["weights"].split(",")])
    elif s.get("endpoint"):
        a = endpoint_weights(cov)
    else:
        raise CliError("give --endpoint or --weights")
    sup = linear_sup(a, cov)
    z = extreme_path(a, cov)
    d = _outdir(s)
    if d:
        ser.gridfunction_to_csv(z, d / "extreme_path.csv")
        ser.dump_json(ser.limitcov_to_dict(cov), d / "limitcov.json")
        _write_run(d, s, {"params": ser.params_dict(p), "linear_sup": sup},
                   ["extreme_path.csv", "limitcov.json"])
    out.write(f"linear_sup = {sup:.6f}\n")
    out.write(f"rate_at_extreme = {rate_functional(z, cov):.12f}\n")


def cmd_lil(s, out):
    from .lilharness import LilFunctional, ScaleLadder, default_x_grid, estimate_limsup, run_lil_experiment

    p = _params(s)
    t0s = [float(v) for v in str(s["t0"]).split(",") if v.strip()]
    ladder = ScaleLadder(s["kmin"], s["kmax"], s["theta"])
    F = LilFunctional(s["functional"], s["delta"])
    x = default_x_grid(s["grid_points"])
    rep = run_lil_experiment(p, t0s, ladder, F, x, s["paths"], s["seed"], _workers(s))
    pred = rep.prediction()
    summaries = []
    for i, t0 in enumerate(t0s):
        if ladder.ks.size >= 10:
            est = estimate_limsup(rep, i)
            summaries.append({"t0": t0, "estimate": est.estimate, "trend_slope": est.trend_slope,
                              "band": list(est.band), "prediction_from_rkhs": pred})
        else:
            med = float(np.median(rep.running_max[i, -1]))
            summaries.append({"t0": t0, "estimate": med, "trend_slope": None, "band": None,
                              "prediction_from_rkhs": pred})
    d = _outdir(s)
    if d:
        ser.report_to_csv(rep, d / "lil.csv")
        ser.dump_json({"summary": summaries, "report": ser.report_manifest(rep)}, d / "lil.json")
        _write_run(d, s, {"params": ser.params_dict(p)}, ["lil.csv", "lil.json"])
    for sm in summaries:
        out.write(json.dumps(sm, sort_keys=True) + "\n")


def selftest_cases():
    """(name, computed, expected, tolerance) for the closed-form oracles."""
    from .kernelcov import c21, cov_matrix, cov_x, cov_z, increment_variance, rho_limit
    from .lamperti import build_table, r_u, spectral_density, tail_mass
    from .pathsim import cholesky_with_jitter
    from .rkhs import LimitCov, linear_sup

    bm, p04 = GfbmParams(0, 0), GfbmParams(0, 0.4)
    p23 = GfbmParams(0.2, 0.3)
    lor = 1 / (0.6 * math.pi)
    gam = math.gamma
    c21_closed = gam(1.2) ** 2 / (2 * gam(2.4) * math.sin(math.pi * 0.7))
    table = build_table(p04, 50.0, 2001)
    cases = [
        ("cov_x brownian (0.3,0.7)", cov_x(bm, 0.3, 0.7), 0.3, 1e-12),
        ("cov_x a=0 g=0.4 (1,2)", cov_x(p04, 1, 2), 1 / 0.6, 1e-9),
        ("cov_z a=0 g=0.4 (0.5,1)", cov_z(p04, 0.5, 1), 0.5**0.6 / 0.6, 1e-9),
        ("cov_matrix Z (2,2)", cov_matrix(p04, [1, 2], "z").entries[1, 1], 2**0.6 / 0.6, 1e-9),
        ("cov_matrix X brownian (1,1)", cov_matrix(bm, [0.5, 1], "x").entries[1, 1], 1.0, 1e-12),
        ("Z increment a=0 g=0.4", increment_variance(p04, 1, 1.5, "Z"), (1.5**0.6 - 1) / 0.6, 1e-9),
        ("c21 brownian", c21(bm), 0.5, 1e-12),
        ("c21 a=0.2 g=0.3", c21(p23), c21_closed, 1e-3),
        ("rho_limit t0 scaling", rho_limit(p23, 4, 1, 1) / rho_limit(p23, 1, 1, 1), 4**-0.3, 1e-12),
        ("r_u(0) beta a=0.25 g=0.5", r_u(GfbmParams(0.25, 0.5), 0), math.pi / 2, 1e-9),
        ("r_u(2) a=0 g=0.4", r_u(p04, 2), math.exp(-0.6) / 0.6, 1e-9),
        ("f_U(0) a=0 g=0.4", spectral_density(p04, 0.0), lor * 0.3 / 0.09, 1e-5),
        ("f_U(1) a=0 g=0.4", spectral_density(p04, 1.0), lor * 0.3 / 1.09, 1e-5),
        ("f_U(0) brownian", spectral_density(bm, 0.0), 2 / math.pi, 1e-5),
        ("tail_mass(3) a=0 g=0.4", tail_mass(table, 3.0), (1 / 0.6) * (2 / math.pi) * math.atan(0.1), 1e-4),
        ("cholesky 2x2 (1,1)", cholesky_with_jitter(np.array([[0.5, 0.5], [0.5, 1.0]])).matrix[1, 1],
         math.sqrt(0.5), 1e-14),
        ("linear_sup brownian endpoint", linear_sup([0, 1], LimitCov([0.5, 1], [[0.5, 0.5], [0.5, 1]])),
         math.sqrt(2), 1e-14),
    ]
    return cases


def cmd_selftest(s, out):
    rows = []
    ok_all = True
    for name, got, want, tol in selftest_cases():
        err = abs(got - want) / max(abs(want), 1e-300)
        ok = err <= tol
        ok_all &= ok
        rows.append((name, got, want, err, "PASS" if ok else "FAIL"))
    width = max(len(r[0]) for r in rows)
    out.write(f"{'check':<{width}}  {'computed':>22}  {'expected':>22}  {'rel_err':>9}  result\n")
    for name, got, want, err, res in rows:
        out.write(f"{name:<{width}}  {got:>22.15g}  {want:>22.15g}  {err:>9.2e}  {res}\n")
    out.write(f"{sum(r[4] == 'PASS' for r in rows)}/{len(rows)} passed\n")
    d = _outdir(s)
    if d:
        ser.dump_json(
            {"artifact": ARTIFACT, "command": "selftest",
             "results": [{"name": r[0], "computed": r[1], "expected": r[2], "result": r[4]} for r in rows]},
            d / "selftest.json",
        )
    if not ok_all:
        raise SelftestFailed("selftest failures")


class SelftestFailed(NumericalError):
    pass


COMMANDS = {
    "cov": cmd_cov,
    "simulate": cmd_simulate,
    "spectral": cmd_spectral,
    "rkhs": cmd_rkhs,
    "lil": cmd_lil,
    "selftest": cmd_selftest,
}


def _fail(code, exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None, out=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = out or sys.stdout
    try:
        s = resolve(argv)
        COMMANDS[s["command"]](s, out)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ValidationError as exc:
        return _fail(EXIT_INVALID, exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
