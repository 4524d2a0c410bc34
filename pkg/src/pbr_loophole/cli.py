"""Command-line front end.

Exit codes: 0 success, 1 bad arguments, 2 valid input without a solution.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import thresholds
from .errors import InfeasibleError
from .loophole_sim import build_adversary, run_experiment
from .overlap_models import EpistemicModel, ModelKind, overlap_p
from .pbr_circuit import DEFAULT_TOL, find_forbidden_parameters, probability_matrix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(value: Any) -> Any:
    """Six significant digits for floats; other values pass through."""
    if isinstance(value, (bool, np.bool_)):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.6g}")
    return value


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(fmt(value))


def render_csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow(_cell(v) for v in row.values())
    return buf.getvalue()


def render_json(payload: Any) -> str:
    def clean(obj: Any) -> Any:
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple, np.ndarray)):
            return [clean(v) for v in obj]
        return fmt(obj)

    return json.dumps(clean(payload), indent=2) + "\n"


def _angle(value: float, degrees: bool) -> float:
    return math.radians(value) if degrees else value


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_rows(args: argparse.Namespace, rows: list[dict[str, Any]]) -> None:
    _emit(args, render_json(rows) if args.format == "json" else render_csv(rows))


def cmd_table(args: argparse.Namespace) -> int:
    rows = [
        {"theta_min": t, "n_star": n, "eta_omega": eo, "eta_k": ek}
        for t, n, eo, ek in thresholds.table_one()
    ]
    _emit_rows(args, rows)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    model = EpistemicModel(ModelKind(args.model), args.param)
    lo, hi = _angle(args.theta_lo, args.degrees), _angle(args.theta_hi, args.degrees)
    points = thresholds.sweep_eta_theta(model, lo, hi, args.steps)
    rows = [{"theta": pt.theta, "n_star": pt.n, "p": pt.p, "eta": pt.eta} for pt in points]
    _emit_rows(args, rows)
    return EXIT_OK


def cmd_critical_param(args: argparse.Namespace) -> int:
    if args.steps < 2:
        raise ValueError("--steps must be >= 2")
    if not 0.0 < args.eta_lo < args.eta_hi <= 1.0:
        raise ValueError("need 0 < eta-lo < eta-hi <= 1")
    rows = []
    for eta in np.linspace(args.eta_lo, args.eta_hi, args.steps):
        value = thresholds.critical_model_parameter(
            float(eta), args.model, reoptimize=args.reoptimize, n_max=args.n_max
        )
        rows.append({"eta": float(eta), "critical_param": value})
    _emit_rows(args, rows)
    return EXIT_OK


def cmd_circuit(args: argparse.Namespace) -> int:
    theta = _angle(args.theta, args.degrees)
    try:
        params, matching = find_forbidden_parameters(
            args.n, theta, tol=args.tol, grid=args.grid, threads=args.threads
        )
    except InfeasibleError as exc:
        print(f"infeasible: {exc} (best residual {exc.residual:.6g})", file=sys.stderr)
        return EXIT_INFEASIBLE
    entries = probability_matrix(args.n, theta, params).entries
    rows = []
    for x, z in enumerate(matching.permutation):
        row = {
            "n": args.n,
            "theta": theta,
            "phi": params.phi,
            "xi": params.xi,
            "achieved_max": matching.achieved_max,
            "x": x,
            "forbidden_z": z,
            "p_forbidden": entries[x, z],
        }
        if args.matrix:
            row.update({f"p_z{zz}": entries[x, zz] for zz in range(entries.shape[1])})
        rows.append(row)
    _emit_rows(args, rows)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    theta = _angle(args.theta, args.degrees)
    if args.runs < 0:
        raise ValueError("--runs must be nonnegative")
    model = EpistemicModel(ModelKind(args.model), args.param)
    p = overlap_p(model, theta)
    try:
        build_adversary(args.n, p, args.eta)
        params, matching = find_forbidden_parameters(
            args.n, theta, tol=args.tol, threads=args.threads
        )
    except InfeasibleError as exc:
        print(f"infeasible: {exc} (margin {exc.residual:.6g})", file=sys.stderr)
        return EXIT_INFEASIBLE
    stats = run_experiment(
        args.n, theta, model, args.eta, params, matching,
        runs=args.runs, seed=args.seed, tol=args.tol, threads=args.threads,
    )
    summary = {
        "n": args.n,
        "theta": theta,
        "p": p,
        "eta": args.eta,
        "phi": params.phi,
        "xi": params.xi,
        "seed": args.seed,
        "total_runs": stats.total_runs,
        "all_click_count": stats.all_click_count,
        "all_click_rate": stats.all_click_rate,
        "forbidden_count": stats.forbidden_count,
    }
    if args.format == "json":
        payload = dict(summary)
        payload["click_rates"] = stats.click_rates
        payload["histogram"] = stats.histogram
        _emit(args, render_json(payload))
    else:
        row = dict(summary)
        row.update({f"click_rate_{q}": r for q, r in enumerate(stats.click_rates)})
        dim = stats.histogram.shape[0]
        row.update(
            {f"count_x{x}_z{z}": stats.histogram[x, z] for x in range(dim) for z in range(dim)}
        )
        _emit(args, render_csv([row]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbr-loophole", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, default_format: str = "csv") -> None:
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.add_argument("--out", help="write to FILE instead of stdout")

    def angles(p: argparse.ArgumentParser) -> None:
        p.add_argument("--degrees", action="store_true", help="angles are given in degrees")

    p = sub.add_parser("table", help="critical efficiencies for n* = 2..7")
    common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sweep", help="critical efficiency as a function of theta")
    p.add_argument("--model", choices=("omega", "k"), required=True)
    p.add_argument("--param", type=float, default=1.0)
    p.add_argument("--theta-lo", type=float, required=True)
    p.add_argument("--theta-hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=1000)
    angles(p)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("critical-param", help="critical Omega or k as a function of eta")
    p.add_argument("--model", choices=("omega", "k"), required=True)
    p.add_argument("--eta-lo", type=float, required=True)
    p.add_argument("--eta-hi", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--reoptimize", action="store_true",
                   help="pick the best design per eta instead of the maximal-model optimum")
    p.add_argument("--n-max", type=int, default=thresholds.DEFAULT_N_MAX)
    common(p)
    p.set_defaults(func=cmd_critical_param)

    p = sub.add_parser("circuit", help="search circuit parameters forbidding one outcome per preparation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--grid", type=int, default=None, help="coarse lattice size per axis")
    p.add_argument("--matrix", action="store_true", help="include the full probability rows")
    p.add_argument("--threads", type=int, default=1)
    angles(p)
    common(p)
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("simulate", help="Monte Carlo of the adversarial detector model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--model", choices=("omega", "k"), default="omega")
    p.add_argument("--param", type=float, default=1.0)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--runs", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--threads", type=int, default=1)
    angles(p)
    common(p, default_format="json")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise ValueError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
