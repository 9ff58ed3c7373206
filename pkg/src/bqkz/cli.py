"""Command line front end.

Three modes: `verify` runs the exact-arithmetic suites, `solve` evaluates
the contour-integral solution over a lambda grid, `residuals` recomputes
residuals for an earlier solve report or an inline configuration.

Configuration is a JSON file parsed strictly: unknown keys are rejected so
a typo cannot silently fall back to a default.  Command line flags override
file values.  Reports are JSON with a versioned schema; everything under
the "body" key is a deterministic function of the configuration and seed,
wall-clock timings live outside it.

Exit codes: 0 all checks pass, 1 a verification failure, 2 a configuration
or regime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

from . import __version__
from .sampling import SamplingExhausted
from .scalar_field import RATIONAL_BACKEND
from .integral_solver import (
    CycleW,
    DegreeError,
    QuadratureError,
    SeparationError,
    SolverParams,
    ftilde_residual,
    residual_report,
)
from . import suites as suite_mod

SCHEMA_VERSION = 1
MATCH_TOLERANCE = 1e-12


class ConfigError(ValueError):
    """Malformed configuration: unknown key, wrong type, missing field."""


_TOP_KEYS = {"mode", "model", "verify", "solve", "output"}
_MODEL_KEYS = {"n", "half_dim", "c", "k", "y"}
_VERIFY_KEYS = {"suites", "samples", "seed"}
_SOLVE_KEYS = {
    "lambda_grid",
    "degrees",
    "rtol",
    "atol",
    "panels_per_unit",
    "max_refine",
    "tolerance",
}
_OUTPUT_KEYS = {"report", "csv"}

_DEFAULT_LAMBDA_GRID = (-0.7, -0.35, -0.1, 0.15, 0.4)
_DEFAULT_Y = (0.3, -0.15, 0.2)


def _check_keys(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError("%s must be an object" % where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(
            "unknown key%s in %s: %s (allowed: %s)"
            % ("s" if len(unknown) > 1 else "", where, ", ".join(unknown),
               ", ".join(sorted(allowed)))
        )


def _as_complex(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(v, (int, float)) for v in value)
    ):
        return complex(value[0], value[1])
    raise ConfigError("%s must be a number or a [re, im] pair" % where)


def default_config() -> dict:
    return {
        "mode": "verify",
        "model": {
            "n": 1,
            "half_dim": 2,
            "c": [0.1, 0.2],
            "k": [0.05, 1.0],
            "y": None,
        },
        "verify": {"suites": None, "samples": None, "seed": 0},
        "solve": {
            "lambda_grid": list(_DEFAULT_LAMBDA_GRID),
            "degrees": None,
            "rtol": 1e-9,
            "atol": 1e-14,
            "panels_per_unit": 4.0,
            "max_refine": 5,
            "tolerance": 1e-7,
        },
        "output": {"report": None, "csv": None},
    }


def load_config(path: str | None) -> dict:
    """Read and strictly validate a config file, merged over defaults."""
    merged = default_config()
    if path is None:
        return merged
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config file %s: %s" % (path, exc))
    except json.JSONDecodeError as exc:
        raise ConfigError("config file %s is not valid JSON: %s" % (path, exc))
    _check_keys(raw, _TOP_KEYS, "config")
    if "mode" in raw:
        if raw["mode"] not in ("verify", "solve", "residuals"):
            raise ConfigError("mode must be verify, solve or residuals")
        merged["mode"] = raw["mode"]
    for section, allowed in (
        ("model", _MODEL_KEYS),
        ("verify", _VERIFY_KEYS),
        ("solve", _SOLVE_KEYS),
        ("output", _OUTPUT_KEYS),
    ):
        if section in raw:
            _check_keys(raw[section], allowed, section)
            merged[section].update(raw[section])
    _validate_config(merged)
    return merged


def _validate_config(cfg: dict):
    model = cfg["model"]
    if not isinstance(model["n"], int) or model["n"] < 1:
        raise ConfigError("model.n must be a positive integer")
    if not isinstance(model["half_dim"], int) or model["half_dim"] < 1:
        raise ConfigError("model.half_dim must be a positive integer")
    _as_complex(model["c"], "model.c")
    _as_complex(model["k"], "model.k")
    if model["y"] is not None:
        if not isinstance(model["y"], list) or not all(
            isinstance(v, (int, float)) for v in model["y"]
        ):
            raise ConfigError("model.y must be a list of real numbers")
        if len(model["y"]) != model["n"]:
            raise ConfigError("model.y must have model.n entries")
    ver = cfg["verify"]
    if ver["suites"] is not None:
        known = set(suite_mod.suite_names())
        if not isinstance(ver["suites"], list) or not set(ver["suites"]) <= known:
            raise ConfigError(
                "verify.suites must be a list drawn from: %s"
                % ", ".join(sorted(known))
            )
    if ver["samples"] is not None and (
        not isinstance(ver["samples"], int) or ver["samples"] < 1
    ):
        raise ConfigError("verify.samples must be a positive integer")
    if not isinstance(ver["seed"], int) or ver["seed"] < 0:
        raise ConfigError("verify.seed must be a non-negative integer")
    sol = cfg["solve"]
    if not isinstance(sol["lambda_grid"], list) or not sol["lambda_grid"]:
        raise ConfigError("solve.lambda_grid must be a non-empty list")
    for v in sol["lambda_grid"]:
        _as_complex(v, "solve.lambda_grid entries")
    if sol["degrees"] is not None:
        if not isinstance(sol["degrees"], list) or not sol["degrees"]:
            raise ConfigError("solve.degrees must be a non-empty list")
        for term in sol["degrees"]:
            if not (isinstance(term, list) and len(term) == 2 and isinstance(term[0], int)):
                raise ConfigError("solve.degrees entries must be [degree, coefficient]")
            _as_complex(term[1], "solve.degrees coefficients")
    for field in ("rtol", "atol", "tolerance"):
        if not isinstance(sol[field], (int, float)) or sol[field] <= 0:
            raise ConfigError("solve.%s must be a positive number" % field)
    if not isinstance(sol["panels_per_unit"], (int, float)) or sol["panels_per_unit"] <= 0:
        raise ConfigError("solve.panels_per_unit must be a positive number")
    if not isinstance(sol["max_refine"], int) or sol["max_refine"] < 0:
        raise ConfigError("solve.max_refine must be a non-negative integer")
    for field in ("report", "csv"):
        if cfg["output"][field] is not None and not isinstance(cfg["output"][field], str):
            raise ConfigError("output.%s must be a path string" % field)


def _versions() -> dict:
    return {
        "package": __version__,
        "python": "%d.%d.%d" % sys.version_info[:3],
        "rational_backend": RATIONAL_BACKEND,
        "schema": SCHEMA_VERSION,
    }


def _write_report(report: dict, path: str | None):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)


def _default_y(n: int) -> list:
    if n <= len(_DEFAULT_Y):
        return list(_DEFAULT_Y[:n])
    return [0.3 - 0.45 * i for i in range(n)]


def _solver_params(cfg: dict, lam: complex) -> SolverParams:
    model = cfg["model"]
    sol = cfg["solve"]
    y = model["y"] if model["y"] is not None else _default_y(model["n"])
    return SolverParams(
        n=model["n"],
        lam=lam,
        c=_as_complex(model["c"], "model.c"),
        k=_as_complex(model["k"], "model.k"),
        y=tuple(y),
        half_dim=model["half_dim"],
        panels_per_unit=float(sol["panels_per_unit"]),
        max_refine=sol["max_refine"],
        rtol=float(sol["rtol"]),
        atol=float(sol["atol"]),
    )


def _cycle_for(cfg: dict, lam: complex) -> CycleW:
    degrees = cfg["solve"]["degrees"]
    if degrees is None:
        return CycleW.monomial(math.floor(lam.real) + 1)
    terms = tuple(
        (d, _as_complex(cf, "solve.degrees coefficients")) for d, cf in degrees
    )
    return CycleW(terms)


def _one_solution(cfg: dict, lam: complex) -> dict:
    params = _solver_params(cfg, lam)
    cycle = _cycle_for(cfg, lam)
    report = residual_report(cycle, params)
    report["ftilde_residual"] = ftilde_residual(cycle, params)
    return report


def _solution_worst(entry: dict) -> float:
    return max(entry["max_qkz_residual"], entry["ode_residual"], entry["ftilde_residual"])


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    if args.suite:
        known = set(suite_mod.suite_names())
        bad = sorted(set(args.suite) - known)
        if bad:
            raise ConfigError(
                "unknown suite%s: %s (valid: %s)"
                % ("s" if len(bad) > 1 else "", ", ".join(bad),
                   ", ".join(sorted(known)))
            )
        cfg["verify"]["suites"] = list(args.suite)
    if args.seed is not None:
        cfg["verify"]["seed"] = args.seed
    if args.samples is not None:
        cfg["verify"]["samples"] = args.samples
    if args.out is not None:
        cfg["output"]["report"] = args.out
    names = cfg["verify"]["suites"] or list(suite_mod.suite_names())
    seed = cfg["verify"]["seed"]
    samples = cfg["verify"]["samples"]

    results = []
    timing = {}
    for result, elapsed in suite_mod.run_suites(names, samples=samples, seed=seed):
        results.append(result)
        timing[result.name] = elapsed
        flag = "pass" if result.exact_zero else "FAIL"
        print(
            "%-4s %-18s exact_zero=%-5s samples=%-4d [%s]"
            % (flag, result.name, result.exact_zero, result.samples, result.anchor)
        )
        for note in result.notes:
            print("     defect: %s" % note)
    report = {
        "schema_version": SCHEMA_VERSION,
        "body": {
            "config": cfg,
            "seed": seed,
            "versions": _versions(),
            "suites": [r.body() for r in results],
            "solutions": [],
        },
        "timing": timing,
    }
    _write_report(report, cfg["output"]["report"])
    return 0 if all(r.exact_zero for r in results) else 1


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.out_csv is not None:
        cfg["output"]["csv"] = args.out_csv
    if args.out_json is not None:
        cfg["output"]["report"] = args.out_json
    if cfg["output"]["csv"] is None or cfg["output"]["report"] is None:
        raise ConfigError("solve needs --out-csv and --out-json (or output.csv/output.report)")

    grid = [_as_complex(v, "solve.lambda_grid entries") for v in cfg["solve"]["lambda_grid"]]
    solutions = []
    timing = {}
    for lam in grid:
        start = time.perf_counter()
        solutions.append(_one_solution(cfg, lam))
        timing["lambda=%r" % lam] = time.perf_counter() - start

    with open(cfg["output"]["csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda_re", "lambda_im", "j", "coeff_re", "coeff_im"])
        for lam, entry in zip(grid, solutions):
            for j, (re, im) in enumerate(entry["coefficients"], start=1):
                writer.writerow([lam.real, lam.imag, j, re, im])

    report = {
        "schema_version": SCHEMA_VERSION,
        "body": {
            "config": cfg,
            "seed": None,
            "versions": _versions(),
            "suites": [],
            "solutions": solutions,
        },
        "timing": timing,
    }
    _write_report(report, cfg["output"]["report"])
    tolerance = cfg["solve"]["tolerance"]
    worst = max(_solution_worst(entry) for entry in solutions)
    for lam, entry in zip(grid, solutions):
        print(
            "lambda=%g%+gi max_qkz=%.3e ode=%.3e ftilde=%.3e"
            % (lam.real, lam.imag, entry["max_qkz_residual"],
               entry["ode_residual"], entry["ftilde_residual"])
        )
    print("worst residual %.3e (tolerance %g)" % (worst, tolerance))
    return 0 if worst <= tolerance else 1


def _params_from_solution(entry: dict, cfg: dict) -> SolverParams:
    sol = cfg["solve"]
    return SolverParams(
        n=entry["n"],
        lam=complex(*entry["lambda"]),
        c=complex(*entry["c"]),
        k=complex(*entry["k"]),
        y=tuple(complex(re, im) for re, im in entry["y"]),
        panels_per_unit=float(sol["panels_per_unit"]),
        max_refine=sol["max_refine"],
        rtol=float(sol["rtol"]),
        atol=float(sol["atol"]),
    )


def cmd_residuals(args) -> int:
    if args.infile is None and args.config is None:
        raise ConfigError("residuals needs --in <report> or --config <file>")
    if args.infile is not None:
        try:
            with open(args.infile) as fh:
                prior = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read input report %s: %s" % (args.infile, exc))
        except json.JSONDecodeError as exc:
            raise ConfigError("input report %s is not valid JSON: %s" % (args.infile, exc))
        try:
            cfg = prior["body"]["config"]
            entries = prior["body"]["solutions"]
        except (KeyError, TypeError):
            raise ConfigError("input report lacks body.config / body.solutions")
        if not entries:
            raise ConfigError("input report has no solutions to recompute")
        ok = True
        for entry in entries:
            params = _params_from_solution(entry, cfg)
            cycle = CycleW(tuple((d, complex(*cf)) for d, cf in entry["cycle"]))
            fresh = residual_report(cycle, params)
            fresh["ftilde_residual"] = ftilde_residual(cycle, params)
            drift = max(
                abs(fresh["qkz_residuals"][m] - entry["qkz_residuals"][m])
                for m in entry["qkz_residuals"]
            )
            drift = max(drift, abs(fresh["ode_residual"] - entry["ode_residual"]))
            if "ftilde_residual" in entry:
                drift = max(drift, abs(fresh["ftilde_residual"] - entry["ftilde_residual"]))
            matched = drift <= MATCH_TOLERANCE
            ok = ok and matched
            print(
                "lambda=%g%+gi recompute drift %.3e %s"
                % (params.lam.real, params.lam.imag, drift,
                   "matches" if matched else "DIFFERS")
            )
        return 0 if ok else 1

    cfg = load_config(args.config)
    grid = [_as_complex(v, "solve.lambda_grid entries") for v in cfg["solve"]["lambda_grid"]]
    tolerance = cfg["solve"]["tolerance"]
    worst = 0.0
    solutions = []
    for lam in grid:
        entry = _one_solution(cfg, lam)
        solutions.append(entry)
        worst = max(worst, _solution_worst(entry))
        print(
            "lambda=%g%+gi max_qkz=%.3e ode=%.3e ftilde=%.3e"
            % (lam.real, lam.imag, entry["max_qkz_residual"],
               entry["ode_residual"], entry["ftilde_residual"])
        )
    if cfg["output"]["report"] is not None:
        report = {
            "schema_version": SCHEMA_VERSION,
            "body": {
                "config": cfg,
                "seed": None,
                "versions": _versions(),
                "suites": [],
                "solutions": solutions,
            },
            "timing": {},
        }
        _write_report(report, cfg["output"]["report"])
    print("worst residual %.3e (tolerance %g)" % (worst, tolerance))
    return 0 if worst <= tolerance else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqkz",
        description="certify transport identities exactly and evaluate the "
        "contour-integral solution numerically",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run exact certification suites")
    p_verify.add_argument("--config", help="JSON configuration file")
    p_verify.add_argument(
        "--suite", action="append", help="suite name, repeatable (default: all)"
    )
    p_verify.add_argument("--seed", type=int, help="run seed (overrides config)")
    p_verify.add_argument(
        "--samples", type=int, help="samples per suite (overrides config)"
    )
    p_verify.add_argument("--out", help="write the JSON report here")
    p_verify.set_defaults(func=cmd_verify)

    p_solve = sub.add_parser("solve", help="evaluate the solution on a lambda grid")
    p_solve.add_argument("--config", help="JSON configuration file")
    p_solve.add_argument("--out-csv", help="coefficient table destination")
    p_solve.add_argument("--out-json", help="JSON report destination")
    p_solve.set_defaults(func=cmd_solve)

    p_res = sub.add_parser(
        "residuals", help="recompute residuals from a report or a config"
    )
    p_res.add_argument("--in", dest="infile", help="prior solve report to recheck")
    p_res.add_argument("--config", help="JSON configuration file")
    p_res.set_defaults(func=cmd_residuals)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        ConfigError,
        DegreeError,
        SeparationError,
        QuadratureError,
        SamplingExhausted,
    ) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
