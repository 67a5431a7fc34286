"""Command-line entry point ``dsp``.

Every subcommand prints one JSON document (``"schema": 1``) that echoes the
resolved configuration.  Exit status: 0 success, 2 bad input, 1 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotic import AlphaQuery, alpha, alpha_pinsky
from .bundle import BundlePmf, pmf_from_config
from .errors import CapExceededError, ConfigError, DomainError, DSPError, InvalidDistributionError
from .exact import DEFAULT_CAP, ExpectationQuery, get_table
from .pricing import (CostParams, IncentiveModel, optimize_incentive, package_price, delivery_time,
                      summarize, van_only_cost, z_bounds)
from .routing import (Instance, cvrp_bounds, cvrp_solve, neighbor_density, read_instance_csv,
                      tsp_tour)
from .scenarios import Scenario, default_params, run_case_study
from .simulate import mc_expected_pickups

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _load_mapping(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib

        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return data


def _parse_params(path: str | None) -> tuple[CostParams, IncentiveModel, BundlePmf | None]:
    params, model, _ = default_params()
    if path is None:
        return params, model, None
    data = _load_mapping(path)
    known = {f.name for f in fields(CostParams)} | {"a", "b", "pmf", "tau_P_seconds", "tau_V_seconds"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown parameter field(s): {', '.join(unknown)}")
    data = dict(data)
    for key in ("tau_P", "tau_V"):
        if f"{key}_seconds" in data:
            data[key] = float(data.pop(f"{key}_seconds")) / 3600.0
    pmf = pmf_from_config(data.pop("pmf")) if "pmf" in data else None
    a, b = data.pop("a", model.a), data.pop("b", model.b)
    for key, value in data.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}: field {key!r} must be a number, got {value!r}")
    try:
        params = replace(params, **data)
        model = IncentiveModel(float(a), float(b))
    except DomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return params, model, pmf


def _parse_depot(text: str | None, default=(0.0, 0.0)) -> np.ndarray:
    if text is None:
        return np.asarray(default, dtype=float)
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--depot expects 'x,y', got {text!r}") from exc
    return np.array([x, y])


def _parse_sweep(text: str) -> np.ndarray:
    try:
        a, b, steps = text.split(":")
        return np.linspace(float(a), float(b), int(steps))
    except ValueError as exc:
        raise ConfigError(f"--sweep expects t0:t1:steps, got {text!r}") from exc


def _need(cfg: dict, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _emit(doc: dict, out=None):
    text = json.dumps({"schema": SCHEMA, **doc}, indent=2, sort_keys=True, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _seed(cfg: dict) -> int:
    if cfg.get("seed") is not None:
        return int(cfg["seed"])
    env = os.environ.get("DSP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"DSP_SEED must be an integer, got {env!r}") from exc
    return 0


# ---------------------------------------------------------------- commands

def cmd_exact(cfg):
    _need(cfg, "pmf", "n", "lambda_")
    if not cfg.get("sweep"):
        _need(cfg, "t")
    F = pmf_from_config(cfg["pmf"])
    n, lam, topo = int(cfg["n"]), float(cfg["lambda_"]), cfg.get("topology") or "line"
    tab = get_table(F, n)
    if cfg.get("sweep"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["t", "C" if topo == "circle" else "K"])
        for t in _parse_sweep(cfg["sweep"]):
            q = ExpectationQuery(float(t), n, lam)
            v = tab.pickups_circle(q.t, n, lam) if topo == "circle" else n - tab.remaining_line(q.t, n, lam)
            w.writerow([repr(float(t)), repr(float(v))])
        return 0
    q = ExpectationQuery(float(cfg["t"]), n, lam)
    if topo == "circle":
        C = tab.pickups_circle(q.t, n, lam)
        result = {"C": C, "remaining": n - C}
    else:
        R = tab.remaining_line(q.t, n, lam)
        result = {"R": R, "K": n - R}
    _emit({"command": "exact", "config": _echo(cfg), "result": result})
    return 0


def cmd_alpha(cfg):
    tol = float(cfg.get("tol") or 1e-10)
    if cfg.get("pinsky") is not None:
        m = int(cfg["pinsky"])
        _emit({"command": "alpha", "config": _echo(cfg),
               "result": {"alpha": alpha_pinsky(m, tol), "quad_error_estimate": None, "method": "fixed-size"}})
        return 0
    _need(cfg, "pmf", "lambda_", "t")
    F = pmf_from_config(cfg["pmf"])
    value, err = alpha(AlphaQuery(float(cfg["t"]), float(cfg["lambda_"]), F, tol), with_error=True)
    _emit({"command": "alpha", "config": _echo(cfg), "result": {"alpha": value, "quad_error_estimate": err}})
    return 0


def cmd_simulate(cfg):
    _need(cfg, "pmf", "n", "lambda_", "T")
    F = pmf_from_config(cfg["pmf"])
    n, lam, T = int(cfg["n"]), float(cfg["lambda_"]), float(cfg["T"])
    reps = int(cfg.get("reps") or 10000)
    seed = _seed(cfg)
    mean, se = mc_expected_pickups(n, lam, F, T, reps, seed, workers=int(cfg.get("threads") or 1))
    result = {"mean": mean, "stderr": se, "exact": None, "alpha_times_n": None}
    if n <= DEFAULT_CAP:
        result["exact"] = get_table(F, n).pickups_circle(T, n, lam)
    if lam > 0:
        result["alpha_times_n"] = n * alpha(AlphaQuery(T, lam, F))
    _emit({"command": "simulate", "config": {**_echo(cfg), "seed": seed, "reps": reps}, "result": result})
    return 0


def cmd_route(cfg):
    _need(cfg, "file")
    metric = cfg.get("metric") or "l1"
    inst = read_instance_csv(cfg["file"], _parse_depot(cfg.get("depot")), metric)
    if cfg.get("cvrp"):
        V = int(cfg.get("capacity") or 200)
        sol = cvrp_solve(inst.points, inst.depot, V, metric)
        tour = tsp_tour(inst)
        lower, upper = cvrp_bounds(inst.points, inst.depot, V, tour.length, metric)
        result = {"length": sol.total_length, "routes": [r.tolist() for r in sol.routes],
                  "lower_bound": lower, "upper_bound": upper, "method": sol.method}
    else:
        tour = tsp_tour(inst)
        result = {"length": tour.length, "order": tour.order.tolist()}
    _emit({"command": "route", "config": _echo(cfg), "result": result})
    return 0


def cmd_optimize(cfg):
    _need(cfg, "instance")
    params, model, pmf = _parse_params(cfg.get("params"))
    F = pmf_from_config(cfg["pmf"]) if cfg.get("pmf") else (pmf or default_params()[2])
    inst = read_instance_csv(cfg["instance"], _parse_depot(cfg.get("depot")), cfg.get("metric") or "l1")
    tour = tsp_tour(inst)
    inst = inst.with_order(tour.order)
    summary = summarize(inst)
    opt = optimize_incentive(summary, params, F, model)
    full = cvrp_solve(inst.points, inst.depot, params.V, inst.metric)
    van = van_only_cost(full.total_length, inst.n, params)
    result = {"z_star": opt.z_star, "cost_star": opt.cost_star, "cost_van_only": van,
              "improvement_pct": 100.0 * (van - opt.cost_star) / van, "lambda_star": model(opt.z_star),
              "z_bounds": list(z_bounds(params)), "provider": opt.method,
              "tsp_length": tour.length, "cvrp_length": full.total_length, "r_bar": summary.r_bar,
              "per_package_prices": None}
    if cfg.get("prices_out"):
        write_prices_csv(cfg["prices_out"], inst, summary, params, opt.z_star, F.mean)
        result["per_package_prices"] = str(cfg["prices_out"])
    if cfg.get("objective_out"):
        write_objective_csv(cfg["objective_out"], opt.z_grid, opt.cost_grid)
    _emit({"command": "optimize", "config": _echo(cfg), "params": params.as_dict(),
           "incentive": {"a": model.a, "b": model.b}, "pmf": F.label or list(F.probs), "result": result})
    return 0


def write_prices_csv(path, inst, summary, params, z, mu):
    prices = package_price(summary.r_list, summary.d_list, params, z, mu)
    times = delivery_time(summary.r_list, summary.d_list, params, mu)
    pts = inst.points[inst.order]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y", "r", "d", "price", "time_est"])
        for k in range(inst.n):
            w.writerow([int(inst.order[k]), pts[k, 0], pts[k, 1], summary.r_list[k], summary.d_list[k],
                        prices[k], times[k]])


def write_objective_csv(path, z, cost):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "cost"])
        for a, b in zip(z, cost):
            w.writerow([float(a), float(b)])


def cmd_case_study(cfg):
    kind = cfg.get("scenario") or "uniform"
    scen = Scenario(kind, n=int(cfg.get("n") or 2000), seed=_seed(cfg), depot=cfg.get("depot") or "center")
    overrides = {}
    if cfg.get("params"):
        params, model, pmf = _parse_params(cfg["params"])
        overrides = {**params.as_dict(), "a": model.a, "b": model.b}
        if pmf is not None:
            overrides["pmf"] = pmf
    if cfg.get("pmf"):
        overrides["pmf"] = pmf_from_config(cfg["pmf"])
    report = run_case_study(scen, overrides, n_seeds=int(cfg.get("seeds") or 5),
                            workers=int(cfg.get("threads") or 1))
    _emit({"command": "case-study", "config": _echo(cfg), "report": report.to_dict()}, cfg.get("out"))
    return 0


def cmd_tsp_density(cfg):
    kind = cfg.get("scenario") or "uniform"
    n, runs, bins = int(cfg.get("n") or 1000), int(cfg.get("runs") or 50), int(cfg.get("bins") or 60)
    scen = Scenario(kind, n=n, seed=_seed(cfg))
    hi = 1.0
    hist = np.zeros(bins)
    means, sds, all_d = [], [], []
    for rep in range(runs):
        inst = Instance(scen.generate(rep), scen.depot_xy())
        tour = tsp_tour(inst, use_or_opt=not cfg.get("fast"))
        nd = neighbor_density(tour, inst, bins=bins, range_=(0.0, hi))
        hist += nd.density / runs
        means.append(nd.mean)
        sds.append(nd.sd)
        all_d.append(inst.with_order(tour.order).tour_edges())
    d = np.concatenate(all_d)
    edges = np.linspace(0.0, hi, bins + 1)
    if cfg.get("csv"):
        with Path(cfg["csv"]).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["left", "right", "density"])
            for k in range(bins):
                w.writerow([edges[k], edges[k + 1], hist[k]])
    _emit({"command": "tsp-density", "config": _echo(cfg),
           "result": {"mean": float(np.mean(means)), "sd": float(d.std()),
                      "q75": float(np.quantile(d, 0.75)), "q95": float(np.quantile(d, 0.95)), "runs": runs}})
    return 0


COMMANDS = {
    "exact": cmd_exact,
    "alpha": cmd_alpha,
    "simulate": cmd_simulate,
    "route": cmd_route,
    "optimize": cmd_optimize,
    "case-study": cmd_case_study,
    "tsp-density": cmd_tsp_density,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dsp", description="Crowdsourced pickup expectations and incentive pricing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON or TOML file with option values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        return sp

    e = common(sub.add_parser("exact", help="exact R/K (line) or C (circle)"))
    e.add_argument("--pmf")
    e.add_argument("--n", type=int)
    e.add_argument("--lambda", dest="lambda_", type=float)
    e.add_argument("--t", type=float)
    e.add_argument("--topology", choices=("line", "circle"))
    e.add_argument("--sweep", help="t0:t1:steps, prints CSV")

    a = common(sub.add_parser("alpha", help="limiting pickup fraction"))
    a.add_argument("--pmf")
    a.add_argument("--lambda", dest="lambda_", type=float)
    a.add_argument("--t", type=float)
    a.add_argument("--pinsky", type=int, metavar="M")
    a.add_argument("--tol", type=float)

    s = common(sub.add_parser("simulate", help="Monte Carlo estimate of C(T, n, lambda)"))
    s.add_argument("--pmf")
    s.add_argument("--n", type=int)
    s.add_argument("--lambda", dest="lambda_", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--reps", type=int)

    r = common(sub.add_parser("route", help="TSP or CVRP on a CSV instance"))
    g = r.add_mutually_exclusive_group()
    g.add_argument("--tsp", action="store_true", default=None)
    g.add_argument("--cvrp", action="store_true", default=None)
    r.add_argument("--capacity", type=int)
    r.add_argument("--metric", choices=("l1", "l2"))
    r.add_argument("--depot")
    r.add_argument("file", nargs="?")

    o = common(sub.add_parser("optimize", help="optimal incentive rate for an instance"))
    o.add_argument("--instance")
    o.add_argument("--params")
    o.add_argument("--pmf")
    o.add_argument("--depot")
    o.add_argument("--metric", choices=("l1", "l2"))
    o.add_argument("--prices-out", dest="prices_out")
    o.add_argument("--objective-out", dest="objective_out")

    c = common(sub.add_parser("case-study", help="mixed vs van-only comparison"))
    c.add_argument("--scenario", choices=("uniform", "clusters"))
    c.add_argument("--n", type=int)
    c.add_argument("--seeds", type=int)
    c.add_argument("--params")
    c.add_argument("--pmf")
    c.add_argument("--depot", choices=("center", "corner"))
    c.add_argument("--out")

    d = common(sub.add_parser("tsp-density", help="neighbor-distance density along tours"))
    d.add_argument("--scenario", choices=("uniform", "clusters"))
    d.add_argument("--n", type=int)
    d.add_argument("--runs", type=int)
    d.add_argument("--bins", type=int)
    d.add_argument("--csv")
    d.add_argument("--fast", action="store_true", default=None, help="2-opt only")
    return p


def _echo(cfg: dict) -> dict:
    out = {}
    for k, v in cfg.items():
        if k in ("command", "config") or v is None:
            continue
        out["lambda" if k == "lambda_" else k] = v
    return out


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """CLI flags override config-file values."""
    cfg = {k: v for k, v in vars(args).items()}
    if args.config:
        data = _load_mapping(args.config)
        allowed = set(cfg) - {"command", "config"}
        for key, value in data.items():
            name = key.replace("-", "_")
            name = "lambda_" if name == "lambda" else name
            if name not in allowed:
                raise ConfigError(f"{args.config}: unknown key {key!r} for '{args.command}'")
            if cfg.get(name) is None:
                cfg[name] = value
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return 2
        cfg = resolve(args, parser)
        return COMMANDS[args.command](cfg)
    except (ConfigError, InvalidDistributionError, DomainError) as exc:
        print(f"dsp: error: {exc}", file=sys.stderr)
        return 2
    except (CapExceededError, DSPError, ArithmeticError) as exc:
        print(f"dsp: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
