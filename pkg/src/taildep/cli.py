"""Batch command-line front end.

Every subcommand writes one JSON document (stdout or ``--json``) holding the
package version, the resolved configuration and the results. Settings are
resolved as: built-in defaults, then the ``params``/``io`` blocks of a
``--config`` JSON file, then flags given explicitly on the command line.
Input errors exit with code 1, numeric failures with code 2; both print an
error JSON.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bootstrap import bootstrap_quantile, bootstrap_replicates, influence_table
from .errors import InputError, NumericError, TailDepError
from .estimators import (EvaluationRequest, chi_matrix, evaluate, linearization_residual, linearized_process,
                         bias, oracle_stdf, empirical_stdf)
from .isotropy import DEFAULT_A, isotropy_test
from .mestimation import Criterion, OptimizerConfig, fit, grid_measure
from .models import model_from_config
from .ranks import load_sample, write_matrix
from .simulate import FieldGrid, sample_brown_resnick, sample_logistic

logger = logging.getLogger("taildep")

DEFAULTS = {
    "simulate": {"model": "brown-resnick", "n": 1000, "seed": 0, "grid": "4x4", "d": 2, "alpha": 0.5,
                 "beta": 0.5, "xi": 0.9, "sigma": [1.0, 0.0, 0.0, 1.0], "output": "sample.csv",
                 "true_v": None, "metadata": None, "uniform": False},
    "estimate": {"k": None, "pairs": "all", "margins": None, "at": ["1,1"], "kind": "chi,theta"},
    "chi-matrix": {"k": None, "csv": None},
    "bootstrap": {"k": None, "pairs": "all", "margins": None, "at": ["1,1"], "B": 1000, "seed": 0,
                  "bandwidth": "auto", "statistic": "max_abs", "level": 0.95, "ensemble": None},
    "fit": {"family": "logistic", "bounds": "0.05,1", "k": None, "mu_grid": 4, "T": 1.0, "g": "moments",
            "margins": None, "tol": 1e-6, "restarts": 5, "grid_per_axis": 9, "population": None,
            "trace": False},
    "isotropy-test": {"grid": None, "k": None, "B": 500, "lags": "1,sqrt2", "alpha": 0.05, "seed": 0,
                      "bandwidth": "auto", "replicates_csv": None},
    "diagnose": {"k": None, "model": None, "points": "1,1", "margins": None, "grid_points": None},
}
COMMON = {"input": None, "true_v": None, "delimiter": ",", "json": None, "threads": None}


# argument parsing


def _flag(p: argparse.ArgumentParser, *names, **kw):
    kw.setdefault("default", None)
    p.add_argument(*names, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taildep", description="Rank-based tail dependence inference.")
    parser.add_argument("--version", action="version", version=f"taildep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        _flag(p, "--config", help="JSON run configuration; explicit flags take precedence")
        _flag(p, "--threads", help="worker threads (integer or 'auto'; env TAILDEP_THREADS)")
        _flag(p, "--json", help="write the result JSON here instead of stdout")
        _flag(p, "--log-level", help="logging level (default WARNING)")
        if name != "simulate":
            _flag(p, "--input", help="CSV data matrix")
            _flag(p, "--true-v", dest="true_v", help="CSV of exact uniforms (simulation mode)")
            _flag(p, "--delimiter")
        return p

    p = command("simulate", "simulate a logistic sample or a Brown-Resnick field")
    _flag(p, "--model", choices=["logistic", "brown-resnick"])
    _flag(p, "--n", type=int)
    _flag(p, "--seed", type=int)
    _flag(p, "--grid", help="WxH (brown-resnick)")
    _flag(p, "--d", type=int, help="dimension (logistic)")
    _flag(p, "--alpha", type=float)
    _flag(p, "--beta", type=float)
    _flag(p, "--xi", type=float)
    _flag(p, "--sigma", help="row-major 2x2 matrix, e.g. 1,0,0,1")
    _flag(p, "--output", help="CSV path for the simulated data")
    _flag(p, "--true-v", dest="true_v", help="optional CSV path for the exact uniforms")
    _flag(p, "--metadata", help="metadata JSON path (default: OUTPUT with .json suffix)")
    _flag(p, "--uniform", action="store_const", const=True, help="write 1 - V instead of Frechet values")

    for name, help_ in (("estimate", "empirical STDF, tail copula, theta and chi"),
                        ("bootstrap", "multiplier bootstrap replicates and quantiles")):
        p = command(name, help_)
        _flag(p, "--k", type=int)
        _flag(p, "--pairs", help="'all' or 1-based pairs like 1-2,3-4")
        _flag(p, "--margins", help="1-based margin set like 1,2,3 (overrides --pairs)")
        _flag(p, "--at", action="append", help="evaluation point, e.g. 1,1 (repeatable)")
        if name == "estimate":
            _flag(p, "--kind", help="comma list of stdf, tail_copula, theta, chi")
        else:
            _flag(p, "--B", type=int)
            _flag(p, "--seed", type=int)
            _flag(p, "--bandwidth", help="'auto', 'auto:c' or a number")
            _flag(p, "--statistic", choices=["max_abs", "max", "min"])
            _flag(p, "--level", type=float)
            _flag(p, "--ensemble", help="write replicates to .json or .npz")

    p = command("chi-matrix", "pairwise tail correlation matrix")
    _flag(p, "--k", type=int)
    _flag(p, "--csv", help="also write the matrix as CSV")

    p = command("fit", "minimum-distance fit of a parametric family")
    _flag(p, "--family", choices=["logistic", "hr_bivariate"])
    _flag(p, "--bounds", help="parameter box lo,hi[;lo,hi...]")
    _flag(p, "--k", type=int)
    _flag(p, "--mu-grid", dest="mu_grid", type=int, help="atoms per axis of the grid measure")
    _flag(p, "--T", type=float)
    _flag(p, "--g", choices=["constant", "moments", "monomials", "boxes"])
    _flag(p, "--margins", help="1-based columns")
    _flag(p, "--tol", type=float)
    _flag(p, "--restarts", type=int)
    _flag(p, "--grid-per-axis", dest="grid_per_axis", type=int)
    _flag(p, "--population", help="fit to an exact model instead of data, e.g. 0.5")
    _flag(p, "--trace", action="store_const", const=True, help="include the optimizer trace")

    p = command("isotropy-test", "bootstrap test of extremal isotropy on a grid")
    _flag(p, "--grid")
    _flag(p, "--k", type=int)
    _flag(p, "--B", type=int)
    _flag(p, "--lags", help="comma list such as 1,sqrt2")
    _flag(p, "--alpha", type=float)
    _flag(p, "--seed", type=int)
    _flag(p, "--bandwidth")
    _flag(p, "--replicates-csv", dest="replicates_csv")

    p = command("diagnose", "simulation-mode oracle quantities and linearization residuals")
    _flag(p, "--k", type=int)
    _flag(p, "--model", help='model JSON, e.g. {"family":"logistic","parameters":{"alpha":0.5}}')
    _flag(p, "--points", help="semicolon-separated points, e.g. 1,1;0.5,1")
    _flag(p, "--grid-points", dest="grid_points", type=int, help="use the grid {1..m}/m in every coordinate")
    _flag(p, "--margins", help="1-based columns")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags."""
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[args.command])
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if file_cfg.get("command", args.command) != args.command:
            raise InputError(f"config is for {file_cfg['command']!r}, not {args.command!r}")
        for block in ("io", "params"):
            cfg.update({k.replace("-", "_"): v for k, v in file_cfg.get(block, {}).items()})
        for key in ("seed", "threads"):
            if key in file_cfg:
                cfg[key] = file_cfg[key]
    for key, val in vars(args).items():
        if val is not None and key not in ("command", "config", "log_level"):
            cfg[key] = val
    return cfg


# small parsers


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _points(spec) -> list[tuple]:
    if isinstance(spec, str):
        spec = spec.split(";")
    return [tuple(_floats(p)) for p in spec]


def _columns(spec, d: int) -> list[int]:
    cols = [int(v) - 1 for v in _floats(spec)]
    if any(c < 0 or c >= d for c in cols):
        raise InputError(f"margins {spec!r} out of range for d={d} (1-based)")
    return cols


def _request(cfg: dict, d: int, k: int) -> EvaluationRequest:
    points = _points(cfg["at"])
    if cfg.get("margins"):
        return EvaluationRequest(((_columns(cfg["margins"], d), points),), k)
    pairs = cfg["pairs"]
    if pairs == "all":
        return EvaluationRequest.all_pairs(d, points, k)
    entries = []
    for tok in str(pairs).split(","):
        a, _, b = tok.partition("-")
        entries.append((_columns(f"{a},{b}", d), points))
    return EvaluationRequest(tuple(entries), k)


def _sample(cfg: dict):
    if not cfg.get("input"):
        raise InputError("--input is required")
    return load_sample(cfg["input"], cfg["delimiter"], None, cfg.get("true_v"))


def _k(cfg: dict, n: int) -> int:
    if cfg.get("k") is None:
        raise InputError("--k is required")
    k = int(cfg["k"])
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, n={n}], got {k}")
    return k


def _threads(cfg: dict):
    t = cfg.get("threads")
    return None if t in (None, "auto") else int(t)


def _config_echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in ("json", "threads", "log_level")}


# subcommands


def cmd_simulate(cfg: dict) -> dict:
    threads = _threads(cfg)
    model = cfg["model"].replace("_", "-")
    if model == "logistic":
        sample = sample_logistic(int(cfg["n"]), int(cfg["d"]), float(cfg["alpha"]), int(cfg["seed"]), threads)
        params = {"alpha": float(cfg["alpha"]), "d": int(cfg["d"])}
        grid = None
    elif model == "brown-resnick":
        grid = FieldGrid.parse(cfg["grid"])
        sig = _floats(cfg["sigma"])
        if len(sig) != 4:
            raise InputError("sigma needs four row-major entries")
        sigma = (tuple(sig[:2]), tuple(sig[2:]))
        sample = sample_brown_resnick(int(cfg["n"]), grid, float(cfg["beta"]), float(cfg["xi"]), sigma,
                                      int(cfg["seed"]), threads=threads)
        params = {"beta": float(cfg["beta"]), "xi": float(cfg["xi"]), "sigma": sig}
        grid = str(grid)
    else:
        raise InputError(f"unknown model {cfg['model']!r}")
    out = Path(cfg["output"])
    names = [f"V{j + 1}" for j in range(sample.d)]
    write_matrix(out, 1.0 - sample.true_v if cfg.get("uniform") else sample.data, names)
    if cfg.get("true_v"):
        write_matrix(cfg["true_v"], sample.true_v, names)
    meta = {"model": model, "parameters": params, "seed": int(cfg["seed"]), "grid": grid,
            "n": sample.n, "d": sample.d, "data": str(out), "true_v": cfg.get("true_v"),
            "scale": "uniform" if cfg.get("uniform") else "unit_frechet"}
    meta_path = Path(cfg["metadata"]) if cfg.get("metadata") else out.with_suffix(".json")
    meta_path.write_text(_dumps({"version": __version__, **meta}))
    return meta


def cmd_estimate(cfg: dict) -> dict:
    sample = _sample(cfg)
    k = _k(cfg, sample.n)
    req = _request(cfg, sample.d, k)
    records = []
    for kind in str(cfg["kind"]).split(","):
        records += evaluate(sample, req, kind.strip()).to_records()
    return {"n": sample.n, "d": sample.d, "k": k, "records": records}


def cmd_chi_matrix(cfg: dict) -> dict:
    sample = _sample(cfg)
    k = _k(cfg, sample.n)
    chi = chi_matrix(sample, k)
    if cfg.get("csv"):
        write_matrix(cfg["csv"], chi)
    return {"n": sample.n, "d": sample.d, "k": k, "chi": chi.tolist()}


def cmd_bootstrap(cfg: dict) -> dict:
    sample = _sample(cfg)
    k = _k(cfg, sample.n)
    req = _request(cfg, sample.d, k)
    threads = _threads(cfg)
    table = influence_table(sample, req, cfg["bandwidth"], threads)
    ens = bootstrap_replicates(table, int(cfg["B"]), int(cfg["seed"]), threads)
    if cfg.get("ensemble"):
        path = Path(cfg["ensemble"])
        if path.suffix == ".npz":
            ens.save(path)
        else:
            path.write_text(ens.to_json())
    var = ens.replicates.var(axis=0, ddof=1) if ens.B > 1 else np.zeros(ens.p)
    stats = [{"margins": [i + 1 for i in m], "point": list(pt), "stdf": float(v), "partials": list(d),
              "bandwidth": list(h), "replicate_variance": float(s)}
             for (m, pt), v, d, h, s in zip(req.index, table.stdf, table.partials, table.h, var)]
    return {"n": sample.n, "k": k, "B": ens.B, "base_seed": ens.base_seed, "statistics": stats,
            "quantile": {"statistic": cfg["statistic"], "level": float(cfg["level"]),
                         "value": bootstrap_quantile(ens, cfg["statistic"], float(cfg["level"]))}}


def cmd_fit(cfg: dict) -> dict:
    bounds = [tuple(_floats(b)) for b in str(cfg["bounds"]).split(";")]
    if any(len(b) != 2 for b in bounds):
        raise InputError(f"bounds must look like lo,hi;lo,hi, got {cfg['bounds']!r}")
    opt = OptimizerConfig(tol=float(cfg["tol"]), restarts=int(cfg["restarts"]),
                          grid_per_axis=int(cfg["grid_per_axis"]))
    if cfg.get("population") is not None:
        theta0 = _floats(cfg["population"])
        k = int(cfg["k"]) if cfg.get("k") is not None else 1
        dim = 2
        margins = None
        source = None
    else:
        source = _sample(cfg)
        k = _k(cfg, source.n)
        margins = _columns(cfg["margins"], source.d) if cfg.get("margins") else list(range(source.d))
        dim = len(margins)
    atoms, weights = grid_measure(int(cfg["mu_grid"]), dim, float(cfg["T"]))
    crit = Criterion(cfg["family"], bounds, atoms, weights, k, cfg["g"], float(cfg["T"]), margins)
    if source is None:
        source = crit.model(theta0)
    res = fit(crit, source, opt)
    return {"family": cfg["family"], "k": k, "n_atoms": len(atoms), "q": crit.q,
            "mode": "population" if cfg.get("population") is not None else "sample",
            "result": res.to_dict(include_trace=bool(cfg.get("trace")))}


def cmd_isotropy(cfg: dict) -> dict:
    sample = _sample(cfg)
    if not cfg.get("grid"):
        raise InputError("--grid is required")
    grid = FieldGrid.parse(cfg["grid"])
    k = _k(cfg, sample.n)
    lags = cfg["lags"] if isinstance(cfg["lags"], list) else str(cfg["lags"]).split(",")
    rep = isotropy_test(sample, grid, k, int(cfg["B"]), lags, DEFAULT_A, cfg["bandwidth"], int(cfg["seed"]),
                        float(cfg["alpha"]), _threads(cfg))
    if cfg.get("replicates_csv"):
        write_matrix(cfg["replicates_csv"], np.column_stack(rep.replicates), [f"rho_{r['rho']}" for r in rep.lags])
    return rep.to_dict()


def cmd_diagnose(cfg: dict) -> dict:
    sample = _sample(cfg)
    if sample.true_v is None:
        raise InputError("diagnose needs --true-v")
    k = _k(cfg, sample.n)
    if not cfg.get("model"):
        raise InputError("--model is required")
    mcfg = cfg["model"] if isinstance(cfg["model"], dict) else json.loads(cfg["model"])
    model = model_from_config(mcfg)
    margins = _columns(cfg["margins"], sample.d) if cfg.get("margins") else list(range(sample.d))
    if cfg.get("grid_points"):
        m = int(cfg["grid_points"])
        axis = [i / m for i in range(1, m + 1)]
        points = list(itertools.product(axis, repeat=len(margins)))
    else:
        points = _points(cfg["points"])
    rows = []
    for x in points:
        if len(x) != len(margins):
            raise InputError(f"point {x} does not match {len(margins)} margins")
        rows.append({
            "point": list(x),
            "stdf_hat": empirical_stdf(sample, margins, x, k),
            "stdf_oracle": oracle_stdf(sample, margins, x, k),
            "stdf_model": model.stdf(x),
            "linearized": linearized_process(sample, model, margins, x, k),
            "bias": bias(model, margins, x, sample.n, k),
            "residual": linearization_residual(sample, model, margins, x, k),
            "residual_quantile_map": linearization_residual(sample, model, margins, x, k, "quantile_map"),
        })
    sup = {key: max(abs(r[key]) for r in rows) for key in ("linearized", "bias", "residual", "residual_quantile_map")}
    return {"n": sample.n, "k": k, "model": model.to_config(), "margins": [c + 1 for c in margins],
            "points": rows, "sup_norm": sup}


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "chi-matrix": cmd_chi_matrix,
            "bootstrap": cmd_bootstrap, "fit": cmd_fit, "isotropy-test": cmd_isotropy, "diagnose": cmd_diagnose}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(doc: dict, path: Optional[str]):
    text = _dumps(doc)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse reports usage errors with code 2, which is reserved for numeric failures
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=(args.log_level or "WARNING").upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = {}
    try:
        cfg = resolve(args)
        logger.info("taildep %s %s %s", __version__, args.command, json.dumps(_clean(_config_echo(cfg)), sort_keys=True))
        result = COMMANDS[args.command](cfg)
    except (InputError, OSError, json.JSONDecodeError) as exc:
        _emit({"version": __version__, "command": args.command,
               "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": 1}}, cfg.get("json"))
        return 1
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _emit({"version": __version__, "command": args.command,
               "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": 2}}, cfg.get("json"))
        return 2
    except TailDepError as exc:
        _emit({"version": __version__, "command": args.command,
               "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": 1}}, cfg.get("json"))
        return 1
    _emit({"version": __version__, "command": args.command, "config": _config_echo(cfg), "result": result},
          cfg.get("json"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
