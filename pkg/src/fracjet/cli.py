"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from fracjet import gridops, jetgeo, models, variational
from fracjet.errors import DomainError, FracJetError, IntegrationError, PoleError
from fracjet.fdesolve import solve_alpha_system
from fracjet.fracpoly import Chart, FracPoly, format_exponent, parse_poly
from fracjet.specfun import FracOrder, as_order, mittag_leffler

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class InputError(FracJetError):
    """Malformed command-line or file input."""


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _order(value: float) -> FracOrder:
    try:
        return as_order(value, allow_classical=True)
    except DomainError as exc:
        raise InputError(str(exc)) from exc


def _alpha_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad alpha list {text!r}") from exc


def _fmt(v: float) -> str:
    return f"{v:.17g}"


# config files


@dataclass
class RunConfig:
    """Flat ``key = value`` settings; ``#`` starts a comment."""

    values: dict[str, str] = field(default_factory=dict)
    source: str = "<config>"

    @classmethod
    def read(cls, path: str) -> RunConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text, path)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> RunConfig:
        values: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{source}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise InputError(f"{source}:{lineno}: empty key")
            if key in values:
                raise InputError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        return cls(values, source)

    def text(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is None:
            raise InputError(f"{self.source}: missing key {key!r}")
        return default

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.values:
            if default is None:
                raise InputError(f"{self.source}: missing key {key!r}")
            return default
        try:
            v = float(self.values[key])
        except ValueError as exc:
            raise InputError(f"{self.source}: {key} must be a number, got {self.values[key]!r}") from exc
        if not math.isfinite(v):
            raise InputError(f"{self.source}: {key} must be finite")
        return v


# commands


def read_sampled_csv(path: str) -> gridops.SampledFunction:
    """Two columns ``t,value`` on a uniform grid; an optional non-numeric header row."""
    try:
        text = Path(path).read_text() if path != "-" else sys.stdin.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise InputError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            rows.append((float(row[0]), float(row[1])))
        except ValueError:
            if lineno == 1 and not rows:
                continue
            raise InputError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if len(rows) < gridops.MIN_POINTS:
        raise InputError(f"{path}: need at least {gridops.MIN_POINTS} rows")
    t = np.array([r[0] for r in rows])
    f = np.array([r[1] for r in rows])
    h = (t[-1] - t[0]) / (len(t) - 1)
    if not h > 0 or np.max(np.abs(np.diff(t) - h)) > 1e-9 * max(1.0, abs(h)):
        raise InputError(f"{path}: grid is not uniform and increasing")
    return gridops.SampledFunction(float(t[0]), float(h), f)


def cmd_caputo(args) -> int:
    f = read_sampled_csv(args.input)
    order = float(args.alpha)
    if order == 1.0:
        out = gridops.classical_derivative(f)
        if args.order_side == "right":
            out = gridops.SampledFunction(out.start, out.step, -out.values)
    elif args.order_side == "left":
        out = gridops.caputo_left(f, order)
    else:
        out = gridops.caputo_right(f, order)
    lines = ["t,value"] + [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(out.grid, out.values)]
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_ml(args) -> int:
    order = _order(args.alpha)
    if args.z:
        zs = args.z
    else:
        n = int(round(args.horizon / args.grid_step))
        zs = [0.0 - args.rho * (k * args.grid_step) ** order.alpha + 0.0 for k in range(n + 1)]
    lines = ["z,value"] + [f"{_fmt(z)},{_fmt(mittag_leffler(order, z))}" for z in zs]
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    order = _order(args.alpha)
    n = len(args.rhs)
    if len(args.y0) != n:
        raise InputError(f"{n} right-hand sides but {len(args.y0)} initial values")
    names = args.names.split(",") if args.names else list(Chart.standard(n).x)
    polys = [parse_poly(r, order.alpha) for r in args.rhs]
    traj = solve_alpha_system(order, polys, args.y0, args.horizon, args.grid_step, names=names)
    _emit(traj.to_csv(), args.output)
    return EXIT_OK


def _poly_json(P: FracPoly, alpha: float) -> list[dict]:
    a = as_order(alpha, allow_classical=True).exact
    return [
        {"coefficient": c, "monomial": {v: format_exponent(e, a) for v, e in mono.items()}}
        for c, mono in P.terms()
    ]


def cmd_derive(args) -> int:
    order = _order(args.alpha)
    al = order.alpha
    if args.model == "investment":
        if not args.phi:
            raise InputError("the investment model needs --phi")
        spec = models.InvestmentSpec(
            parse_poly(args.lagrangian, al), parse_poly(args.phi, al), args.rho or 0.0, order
        )
        system = models.investment_derive(spec, strict_paper=args.strict_paper)
    else:
        chart = Chart.named(args.names.split(",")) if args.names else Chart.standard(args.n)
        L = variational.LagrangianSpec(parse_poly(args.lagrangian, al), order, discount_rho=args.rho, chart=chart)
        if args.constraint:
            system = variational.derive_constrained_el(L, parse_poly(args.constraint, al))
        elif L.discounted:
            system = variational.derive_el_discounted(L)
        else:
            system = variational.derive_el(L)
    text = system.to_text()
    table = {
        "alpha": al,
        "rho": args.rho,
        "equations": [{"text": R.to_text(al), "terms": _poly_json(R, al)} for R in system.residuals],
    }
    sys.stdout.write(text + "\n")
    if args.output:
        Path(args.output).write_text(json.dumps(table, indent=2) + "\n")
    else:
        sys.stdout.write(json.dumps(table, indent=2) + "\n")
    return EXIT_OK


def _samuelson_run(cfg: RunConfig, alpha: float | None = None):
    order = _order(alpha if alpha is not None else cfg.number("alpha"))
    params = models.SamuelsonParams(
        cfg.number("a1"), cfg.number("a2"), cfg.number("a3"), cfg.number("rho", 0.0), order
    )
    x0, v0 = cfg.number("x0"), cfg.number("v0", 0.0)
    traj = models.samuelson_simulate(params, x0, v0, cfg.number("horizon"), cfg.number("step"))
    t_min = cfg.number("t_min", 0.1)
    res = models.samuelson_residual(params, traj, t_min)
    summary: dict = {
        "model": "samuelson",
        "alpha": order.alpha,
        "euler_lagrange_residual": {"max": float(res.max()), "mean": float(res.mean()), "t_min": t_min},
    }
    if order.is_classical:
        exact = models.samuelson_classical_solution(params, x0, v0, traj.t)
        summary["closed_form_max_error"] = float(np.max(np.abs(traj.x[:, 0] - exact)))
    H = variational.legendre(params.spec())
    if H.H is not None:
        try:
            summary["hamilton"] = variational.verify_hamilton(traj, H)
        except DomainError as exc:
            summary["hamilton"] = {"skipped": str(exc)}
    return traj, summary


def _investment_run(cfg: RunConfig, alpha: float | None = None):
    order = _order(alpha if alpha is not None else cfg.number("alpha"))
    al = order.alpha
    L1 = parse_poly(cfg.text("L1"), al)
    phi_text = cfg.text("phi")
    if "{e}" in phi_text:
        phi_text = phi_text.replace("{e}", repr(models.unit_degree_exponent(order)))
    phi = parse_poly(phi_text, al)
    r = cfg.number("r") if "r" in cfg.values else None
    spec = models.InvestmentSpec(L1, phi, cfg.number("rho", 0.0), order, r)
    strict = cfg.text("strict_paper", "false").lower() in ("1", "true", "yes")
    traj = models.investment_simulate(
        spec, cfg.number("K0"), cfg.number("I0"), cfg.number("N0"), cfg.number("horizon"), cfg.number("step"), strict
    )
    hom_L, hom_phi = models.check_homogeneity(L1, order), models.check_homogeneity(phi, order)
    summary: dict = {
        "model": "investment",
        "alpha": al,
        "homogeneity": {"L1": hom_L.r, "phi": hom_phi.r},
        "condition_residual_max": float(np.max(np.abs(models.investment_residuals(spec, traj, strict)))),
    }
    t_min = cfg.number("t_min", 0.1)
    try:
        rel = models.investment_relation_residual(traj, spec, t_min)
        summary["relation_residual"] = {
            "max": rel.max_abs,
            "mean": rel.mean_abs,
            "relative": rel.relative,
            "t_min": t_min,
            "pass": rel.relative <= 1e-2,
        }
    except DomainError as exc:
        summary["relation_residual"] = {"skipped": str(exc)}
    if spec.rho == 0.0 and "steady_guess" in cfg.values:
        guess = [float(v) for v in cfg.text("steady_guess").split(",")]
        try:
            summary["steady_state"] = dict(zip(("K", "I", "N", "lambda"), models.find_steady_state(spec, guess, strict).tolist()))
        except DomainError as exc:
            summary["steady_state"] = {"failed": str(exc)}
    return traj, summary


RUNNERS: dict[str, Callable] = {"samuelson": _samuelson_run, "investment": _investment_run}


def _run_config(cfg: RunConfig, alpha: float | None = None):
    model = cfg.text("model")
    if model not in RUNNERS:
        raise InputError(f"{cfg.source}: unknown model {model!r}")
    return RUNNERS[model](cfg, alpha)


def cmd_simulate(args) -> int:
    cfg = RunConfig.read(args.config)
    if args.alpha is not None:
        cfg.values["alpha"] = repr(args.alpha)
    traj, summary = _run_config(cfg)
    out = args.output or cfg.values.get("output")
    _emit(traj.to_csv(), out)
    summary_path = cfg.values.get("summary") or (str(Path(out).with_suffix(".json")) if out else None)
    text = json.dumps(summary, indent=2) + "\n"
    if summary_path:
        Path(summary_path).write_text(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def _quadratic_lagrangian(alpha: float) -> variational.LagrangianSpec:
    params = models.SamuelsonParams(0.5, 1.0, 0.5, 0.0, alpha)
    return variational.LagrangianSpec(params.lagrangian(), params.order)


def _geometry_suite(alpha: float, seed: int, points: int = 100) -> list[dict]:
    out = []
    if alpha != 1.0:
        worst = max(float(np.max(np.abs(jetgeo.pairing_table(alpha, n) - np.eye(2 * n + 1)))) for n in (1, 2, 3))
        out.append(jetgeo.report(f"pairing alpha={alpha}", [worst], 1e-12))
    L = _quadratic_lagrangian(alpha)
    pts = jetgeo.random_points(1, points, seed)
    res = [jetgeo.interior_product_residual(L, p) for p in pts]
    out.append(jetgeo.report(f"interior_product alpha={alpha}", res, 1e-10))
    fvf = variational.build_fvf(L)
    defects = []
    for p in pts:
        M = fvf.M_at(p.as_point(L.chart))
        defects.append(float(np.max(np.abs(jetgeo.check_fvf(jetgeo.TangentRep(1.0, p.y, M), p, alpha).defects))))
    out.append(jetgeo.report(f"fvf_conditions alpha={alpha}", defects, 1e-12))
    change = jetgeo.CoordinateChange((2.0,), (0,))
    trips = []
    for p in pts:
        back = jetgeo.transform_jet(change.inverse(), jetgeo.transform_jet(change, p, alpha), alpha)
        trips.append(float(np.max(np.abs(np.subtract(back.y, p.y)))))
    out.append(jetgeo.report(f"transform_roundtrip alpha={alpha}", trips, 1e-12))
    return out


def _brackets_suite(alpha: float, seed: int, step: float = 1 / 512) -> list[dict]:
    params = models.SamuelsonParams(0.5, 0.2, 0.5, 0.0, alpha)
    traj = models.samuelson_simulate(params, 1.0, 0.0, 1.0, step)
    H = variational.legendre(params.spec())
    rep = variational.verify_hamilton(traj, H)
    return [jetgeo.report(f"{name} alpha={alpha}", [vals["relative"]], 1e-2) for name, vals in rep.items()]


def _limits_suite(alphas: Sequence[float], seed: int) -> list[dict]:
    f = gridops.SampledFunction.from_callable(np.sin, 0.0, 1.0, 1024)
    errs = [float(np.max(np.abs(gridops.caputo_left(f, a).values[1:] - np.cos(f.grid[1:])))) for a in alphas]
    mono = all(b < a for a, b in zip(errs, errs[1:]))
    out = [{"check": "caputo_sin_to_cos", "alphas": list(alphas), "errors": errs, "pass": mono}]
    params1 = models.SamuelsonParams(0.5, 0.2, 0.5, 0.3, 1.0)
    ref = models.samuelson_classical_solution(params1, 1.0, 0.0, np.linspace(0, 1, 257))
    dists = []
    for a in alphas:
        tr = models.samuelson_simulate(models.SamuelsonParams(0.5, 0.2, 0.5, 0.3, a), 1.0, 0.0, 1.0, 1 / 256)
        dists.append(float(np.max(np.abs(tr.x[:, 0] - ref))))
    out.append(
        {
            "check": "samuelson_to_classical",
            "alphas": list(alphas),
            "distances": dists,
            "pass": all(b < a for a, b in zip(dists, dists[1:])),
        }
    )
    return out


SUITES = {"geometry": _geometry_suite, "brackets": _brackets_suite}


def _suite_job(job):
    suite, alpha, seed = job
    return SUITES[suite](alpha, seed)


def cmd_verify(args) -> int:
    default = {"geometry": "0.5", "brackets": "1", "limits": "0.9,0.99,0.999"}[args.suite]
    alphas = _alpha_list(args.alpha_list or default)
    for a in alphas:
        _order(a)
    if args.suite == "limits":
        checks = _limits_suite(alphas, args.seed)
    else:
        seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(len(alphas))]
        jobs = [(args.suite, a, s) for a, s in zip(alphas, seeds)]
        checks = [c for part in _map(_suite_job, jobs, args.workers) for c in part]
    ok = all(c["pass"] for c in checks)
    report = {"suite": args.suite, "seed": args.seed, "checks": checks, "pass": ok}
    _emit(json.dumps(report, indent=2) + "\n", args.output)
    return EXIT_OK if ok else EXIT_VERIFY


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _sweep_job(job):
    values, source, alpha = job
    traj, summary = _run_config(RunConfig(dict(values), source), alpha)
    summary["final_state"] = traj.x[-1].tolist()
    return summary


def cmd_sweep(args) -> int:
    cfg = RunConfig.read(args.config)
    alphas = _alpha_list(args.alpha_list)
    for a in alphas:
        _order(a)
    rows = _map(_sweep_job, [(cfg.values, cfg.source, a) for a in alphas], args.workers)
    _emit(json.dumps({"config": cfg.source, "runs": rows}, indent=2) + "\n", args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracjet", description="Fractional jet-bundle mechanics toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("caputo", help="Caputo derivative of a sampled function")
    c.add_argument("input", help="two-column CSV t,value ('-' for stdin)")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--order-side", choices=("left", "right"), default="left")
    c.add_argument("--output")
    c.set_defaults(func=cmd_caputo)

    m = sub.add_parser("ml", help="Mittag-Leffler values or a discount curve")
    m.add_argument("z", type=float, nargs="*")
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--rho", type=float, default=1.0)
    m.add_argument("--horizon", type=float, default=1.0)
    m.add_argument("--grid-step", type=float, default=0.125)
    m.add_argument("--output")
    m.set_defaults(func=cmd_ml)

    s = sub.add_parser("solve", help="integrate D^alpha y = f(t, y)")
    s.add_argument("--rhs", action="append", required=True, help="right-hand side polynomial, once per component")
    s.add_argument("--y0", type=float, nargs="+", required=True)
    s.add_argument("--names", help="comma-separated state names (default x or x_1..x_n)")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--grid-step", type=float, default=1 / 256)
    s.add_argument("--output")
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("derive", help="derive Euler-Lagrange equations")
    d.add_argument("--lagrangian", required=True)
    d.add_argument("--alpha", type=float, required=True)
    d.add_argument("--rho", type=float)
    d.add_argument("--constraint")
    d.add_argument("--model", choices=("general", "investment"), default="general")
    d.add_argument("--phi", help="accumulation law for --model investment")
    d.add_argument("--n", type=int, default=1)
    d.add_argument("--names", help="comma-separated coordinate names")
    d.add_argument("--strict-paper", action="store_true", help="literal D_K phi in the investment equation")
    d.add_argument("--output", help="JSON coefficient table path")
    d.set_defaults(func=cmd_derive)

    r = sub.add_parser("simulate", help="run a model from a config file")
    r.add_argument("config")
    r.add_argument("--alpha", type=float)
    r.add_argument("--output")
    r.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="verification suites")
    v.add_argument("--suite", choices=("geometry", "brackets", "limits"), required=True)
    v.add_argument("--alpha", dest="alpha_list", help="comma-separated orders")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--output")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep-alpha", help="run a model config across orders")
    w.add_argument("config")
    w.add_argument("--alpha", dest="alpha_list", required=True, help="comma-separated orders")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--output")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, DomainError, PoleError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (IntegrationError, FracJetError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
