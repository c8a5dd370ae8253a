"""Command-line interface: ``aoivoi {solve,frontier,simulate,validate}``.

Exit codes: 0 ok, 1 configuration error, 2 solver error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from .config import ConfigError, load_config, parse_beta_grid
from .model import SpecError
from .policy import zero_wait_policy
from .simulator import simulate, validate
from .solver import SolverError, default_beta_grid, frontier, solve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VALIDATION = 3


def fmt(x) -> str:
    """Shortest round-trip decimal, capped at 12 significant digits."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    short = repr(x)
    digits = short.lower().split("e")[0].replace("-", "").replace(".", "").lstrip("0")
    if len(digits) <= 12:
        return short
    return f"{x:.12g}"


def _json_number(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (int, float)) else v for v in row])
    return buf.getvalue()


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solution_record(spec, sol) -> dict:
    return {
        "beta": spec.beta,
        "arrival_rate": _json_number(spec.arrival_rate),
        "phi_variant": spec.phi_variant,
        "theta_star": sol.theta,
        "ybar": list(sol.ybar),
        "aoi": sol.aoi,
        "voi": sol.voi,
        "objective": sol.objective,
        "residual": sol.residual,
        "iterations": sol.iterations,
    }


def cmd_solve(args) -> int:
    cfg = load_config(args.config, beta=args.beta, phi_variant=args.phi_variant)
    sol = solve(cfg.spec, tol=cfg.tol, max_iter=cfg.max_iter)
    rec = _solution_record(cfg.spec, sol)
    if args.format == "structured":
        text = json.dumps(rec, indent=2) + "\n"
    elif args.format == "csv":
        m = cfg.spec.num_classes
        header = ["beta", "theta_star", "aoi", "voi", "objective", "residual", "iterations"]
        header += [f"ybar_{i + 1}" for i in range(m)]
        row = [cfg.spec.beta, sol.theta, sol.aoi, sol.voi, sol.objective, sol.residual, sol.iterations]
        text = _csv_text(header, [row + list(sol.ybar)])
    else:
        lines = [
            f"beta        {fmt(cfg.spec.beta)}",
            f"phi variant {cfg.spec.phi_variant}",
            f"theta*      {fmt(sol.theta)}",
        ]
        for i, y in enumerate(sol.ybar, start=1):
            lines.append(f"ybar_{i:<6} {fmt(y)}")
        if cfg.spec.beta == 0.0:
            lines.append("note        beta = 0: all classes share one threshold")
        lines += [
            f"AoI         {fmt(sol.aoi)}",
            f"VoI         {fmt(sol.voi)}",
            f"objective   {fmt(sol.objective)}",
            f"residual    {fmt(sol.residual)}",
            f"iterations  {sol.iterations}",
        ]
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return EXIT_OK


def cmd_frontier(args) -> int:
    cfg = load_config(args.config, phi_variant=args.phi_variant)
    if args.beta_grid is not None:
        try:
            grid = parse_beta_grid(args.beta_grid)
        except ValueError as exc:
            raise ConfigError("--beta-grid", str(exc)) from None
    elif cfg.beta_grid is not None:
        grid = cfg.beta_grid
    else:
        grid = default_beta_grid()
    if not grid:
        raise ConfigError("--beta-grid", "beta grid is empty")
    if any(not 0.0 <= b <= 1.0 for b in grid):
        raise ConfigError("--beta-grid", "values must lie in [0, 1]")
    if any(b2 < b1 for b1, b2 in zip(grid, grid[1:])):
        raise ConfigError("--beta-grid", "values must be sorted ascending")
    if 1.0 in grid and any(c.decay == 0 for c in cfg.spec.classes):
        raise ConfigError("--beta-grid", "beta = 1 requires every class to have a positive decay rate")
    points = frontier(cfg.spec, grid, tol=cfg.tol, max_iter=cfg.max_iter)
    m = cfg.spec.num_classes
    if args.format == "structured":
        text = json.dumps(
            {
                "arrival_rate": _json_number(cfg.spec.arrival_rate),
                "phi_variant": cfg.spec.phi_variant,
                "points": [
                    {"beta": p.beta, "theta_star": p.theta, "aoi": p.aoi, "voi": p.voi, "ybar": list(p.ybar)}
                    for p in points
                ],
            },
            indent=2,
        ) + "\n"
    else:
        header = ["beta", "theta_star", "aoi", "voi"] + [f"ybar_{i + 1}" for i in range(m)]
        text = _csv_text(header, [[p.beta, p.theta, p.aoi, p.voi, *p.ybar] for p in points])
    _emit(text, args.output)
    return EXIT_OK


def _policy_for(args, cfg):
    if getattr(args, "policy", "optimal") == "zero-wait":
        return zero_wait_policy(cfg.spec), None
    sol = solve(cfg.spec, tol=cfg.tol, max_iter=cfg.max_iter)
    return sol.policy, sol


def _sim_settings(args, cfg):
    epochs = cfg.epochs if args.epochs is None else args.epochs
    seed = cfg.seed if args.seed is None else args.seed
    if epochs < 1:
        raise ConfigError("--epochs", f"must be >= 1, got {epochs}")
    if not 0 <= seed < 2**64:
        raise ConfigError("--seed", "must be an unsigned 64-bit integer")
    return epochs, seed


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, beta=args.beta, phi_variant=args.phi_variant)
    epochs, seed = _sim_settings(args, cfg)
    policy, _ = _policy_for(args, cfg)
    r = simulate(cfg.spec, policy, epochs, seed)
    rec = {
        "epochs": r.epochs,
        "seed": r.seed,
        "ybar": list(policy.ybar),
        "aoi": r.aoi,
        "aoi_se": r.aoi_se,
        "voi": r.voi,
        "voi_se": r.voi_se,
        "mean_epoch": r.mean_epoch,
        "class_counts": list(r.class_counts),
    }
    if args.format == "structured":
        text = json.dumps(rec, indent=2) + "\n"
    elif args.format == "csv":
        text = _csv_text(
            ["epochs", "seed", "aoi", "aoi_se", "voi", "voi_se", "mean_epoch"],
            [[r.epochs, r.seed, r.aoi, r.aoi_se, r.voi, r.voi_se, r.mean_epoch]],
        )
    else:
        text = (
            f"epochs      {r.epochs}\nseed        {r.seed}\n"
            f"AoI         {fmt(r.aoi)} +/- {fmt(r.aoi_se)}\n"
            f"VoI         {fmt(r.voi)} +/- {fmt(r.voi_se)}\n"
            f"E[T]        {fmt(r.mean_epoch)} +/- {fmt(r.mean_epoch_se)}\n"
            f"deliveries  {' '.join(str(c) for c in r.class_counts)}\n"
        )
    _emit(text, args.output)
    return EXIT_OK


def _report_record(report) -> dict:
    return {
        "phi_variant": report.phi_variant,
        "passed": report.passed,
        "epochs": report.sim.epochs,
        "seed": report.sim.seed,
        "rows": [
            {
                "metric": r.metric,
                "analytic": _json_number(r.analytic),
                "simulated": _json_number(r.simulated),
                "se": _json_number(r.se),
                "z": _json_number(r.z),
                "passed": r.passed,
            }
            for r in report.rows
        ],
    }


def cmd_validate(args) -> int:
    cfg = load_config(args.config, beta=args.beta, phi_variant=args.phi_variant)
    epochs, seed = _sim_settings(args, cfg)
    variants = [cfg.spec.phi_variant]
    if args.compare_variants:
        variants = ["mixture", "per_class"]
    reports = []
    for v in variants:
        spec = cfg.spec.with_variant(v)
        cfg_v = type(cfg)(spec=spec, tol=cfg.tol, max_iter=cfg.max_iter, epochs=epochs, seed=seed)
        policy, _ = _policy_for(args, cfg_v)
        reports.append(validate(spec, policy, epochs, seed))
    if args.format == "structured":
        text = json.dumps([_report_record(r) for r in reports], indent=2) + "\n"
    elif args.format == "csv":
        rows = [[r.phi_variant, row.metric, row.analytic, row.simulated, row.se, row.z,
                 "PASS" if row.passed else "FAIL"] for r in reports for row in r.rows]
        text = _csv_text(["phi_variant", "metric", "analytic", "simulated", "se", "z", "status"], rows)
    else:
        blocks = []
        for r in reports:
            verdict = "PASS" if r.passed else "FAIL"
            blocks.append(f"phi variant: {r.phi_variant}  ({r.sim.epochs} epochs, seed {r.sim.seed})  {verdict}\n"
                          + r.format_table())
        if args.compare_variants:
            matching = [r.phi_variant for r in reports if r.row("E[V]").passed]
            blocks.append("E[V] matches simulation for: " + (", ".join(matching) if matching else "none"))
        text = "\n\n".join(blocks) + "\n"
    _emit(text, args.output)
    primary = reports[0] if not args.compare_variants else next(
        r for r in reports if r.phi_variant == cfg.spec.phi_variant
    )
    return EXIT_OK if primary.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoivoi", description="Optimal AoI/VoI threshold policies for M/G/1/1 blocking update systems"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("text", "csv", "structured"), default="text"):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--phi-variant", choices=["mixture", "per-class"], default=None)
        p.add_argument("--output", default=None, help="write output here instead of stdout")
        p.add_argument("--format", choices=formats, default=default)

    p = sub.add_parser("solve", help="solve for the optimal policy at one beta")
    common(p)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("frontier", help="sweep beta and emit the AoI/VoI tradeoff as CSV")
    common(p, formats=("csv", "structured"), default="csv")
    p.add_argument("--beta-grid", default=None, help="start:stop:count")
    p.set_defaults(func=cmd_frontier)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "simulate the optimal (or zero-wait) policy"),
        ("validate", cmd_validate, "compare closed forms with simulation"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--policy", choices=["optimal", "zero-wait"], default="optimal")
        if name == "validate":
            p.add_argument("--compare-variants", action="store_true",
                           help="validate under both phi variants and report which matches")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "phi_variant", None):
        args.phi_variant = args.phi_variant.replace("-", "_")
    try:
        return args.func(args)
    except (ConfigError, SpecError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
