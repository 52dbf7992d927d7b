"""Command-line surface producing reproducible CSV/JSON artifacts.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 threshold
failure (verify-kernel).  Every run writes a manifest with the resolved
configuration, a content hash of it, and the kernel backend, so reruns of a
manifest reproduce the CSV outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .diffusive import build_xi_quadrature, kernel_check
from .errors import FracdampError, NumericalError
from .evolution import fit_decay_exponent, prepare_initial_state, simulate
from .model import PowerLawKappa, ProblemSpec, Variant
from .operator import assemble_operator, build_x_grid, default_grading
from .resolvent import (
    DiagonalOperator,
    forcing_integral,
    scan_resolvent,
    ScanRegime,
    solve_resolvent,
    theoretical_exponents,
)

USAGE_EXIT = 2
NUMERICAL_EXIT = 3
THRESHOLD_EXIT = 4


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _content_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(out: Path, command: str, config: dict, outputs, error=None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "input_hash": _content_hash(config),
        "tool_version": __version__,
        "kernel_backend": _kernels.backend_name(),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(str(p.name) for p in outputs),
    }
    if error is not None:
        manifest["error"] = error
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_file(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _problem_from_args(args, parser) -> ProblemSpec:
    doc = {}
    if getattr(args, "config", None):
        doc = _load_config_file(args.config)
    if args.problem is not None:
        doc["variant"] = args.problem
    if getattr(args, "alpha", None) is not None:
        doc["alpha"] = args.alpha
        doc.pop("kappa_samples", None)
    if getattr(args, "kappa", None) is not None:
        with open(args.kappa) as fh:
            samples = json.load(fh)
        doc["kappa_samples"] = {"x": samples["x"], "values": samples["values"]}
        doc.pop("alpha", None)
    for name in ("beta", "rho", "gamma"):
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    doc.setdefault("gamma", 0.0)
    doc.setdefault("rho", 1.0)
    if "variant" not in doc or "beta" not in doc:
        parser.error("a problem needs at least --problem and --beta (or --config)")
    if "alpha" not in doc and "kappa_samples" not in doc:
        parser.error("give either --alpha or --kappa FILE (or a config with one of them)")
    return ProblemSpec.from_json(doc)


def _grids_from_args(args, spec: ProblemSpec):
    grade = args.grade if args.grade is not None else default_grading(spec)
    xg = build_x_grid(args.nx, grade)
    xig = build_xi_quadrature(spec.beta, args.nxi, args.xi_min, args.xi_max)
    return xg, xig, grade


def _grid_config(args, spec, grade) -> dict:
    return {
        "spec": spec.to_json(),
        "nx": args.nx,
        "grade": grade,
        "nxi": args.nxi,
        "xi_min": args.xi_min,
        "xi_max": args.xi_max,
    }


def _add_problem_flags(p, include_grids=True, allow_stub=False):
    choices = ["P", "Pprime"] + (["stub"] if allow_stub else [])
    p.add_argument("--problem", choices=choices, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--kappa", default=None, metavar="FILE",
                   help="JSON file with tabulated coefficient {x: [...], values: [...]}")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--config", default=None, metavar="FILE",
                   help="problem JSON; explicit flags override its entries")
    if include_grids:
        p.add_argument("--nx", type=int, default=400)
        p.add_argument("--grade", type=float, default=None,
                       help="mesh grading exponent (default: 2 for strong degeneracy, else 1)")
        p.add_argument("--nxi", type=int, default=200)
        p.add_argument("--xi-min", dest="xi_min", type=float, default=1e-4)
        p.add_argument("--xi-max", dest="xi_max", type=float, default=1e4)


def _cmd_simulate(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = _problem_from_args(args, parser)
    xg, xig, grade = _grids_from_args(args, spec)
    dt = args.dt if args.dt is not None else args.t_final / 2e4
    if args.fit_window:
        lo, hi = (float(v) for v in args.fit_window.split(":"))
    else:
        lo, hi = args.t_final / 10.0, args.t_final
    config = _grid_config(args, spec, grade)
    config.update({"t_final": args.t_final, "dt": dt, "y0": args.y0,
                   "fit_window": [lo, hi], "scheme": "implicit_midpoint"})
    try:
        op = assemble_operator(spec, xg, xig)
        y0 = prepare_initial_state(op, args.y0)
        trace = simulate(op, y0, args.t_final, dt)
        fit = None
        fit_error = None
        try:
            fit = fit_decay_exponent(trace, (lo, hi))
        except FracdampError as exc:
            fit_error = str(exc)
    except NumericalError as exc:
        _write_manifest(out, "simulate", config, [], error={"message": str(exc), **exc.diagnostics})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    trace.to_csv(out / "trace.csv")
    fit_doc = {
        "window": [lo, hi],
        "exponent": None if fit is None else fit.exponent,
        "intercept": None if fit is None else fit.intercept,
        "r_squared": None if fit is None else fit.r_squared,
    }
    if fit_error:
        fit_doc["error"] = fit_error
    with open(out / "fit.json", "w") as fh:
        json.dump(fit_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "simulate", config, [out / "trace.csv", out / "fit.json"])
    return 0


def _cmd_scan(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lams = np.geomspace(args.lambda_min, args.lambda_max, args.points)
    regime = ScanRegime.NEAR_ZERO if args.regime == "low" else ScanRegime.HIGH_FREQUENCY
    if args.problem == "stub":
        config = {"spec": "stub", "points": args.points,
                  "lambda_min": args.lambda_min, "lambda_max": args.lambda_max,
                  "regime": args.regime, "nx": args.nx}
        op = DiagonalOperator(-np.ones(args.nx))
        prediction = None
    else:
        spec = _problem_from_args(args, parser)
        xg, xig, grade = _grids_from_args(args, spec)
        config = _grid_config(args, spec, grade)
        config.update({"points": args.points, "lambda_min": args.lambda_min,
                       "lambda_max": args.lambda_max, "regime": args.regime})
        op = assemble_operator(spec, xg, xig)
        prediction = theoretical_exponents(spec)
    try:
        scan = scan_resolvent(op, lams, regime)
    except NumericalError as exc:
        _write_manifest(out, "scan", config, [], error={"message": str(exc), **exc.diagnostics})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    scan.to_csv(out / "scan.csv")
    fit_doc = {
        "regime": scan.regime.value,
        "exponent": scan.fit.exponent,
        "r_squared": scan.fit.r_squared,
        "window": [float(scan.lam[scan.fit.window[0]]), float(scan.lam[scan.fit.window[1]])],
        "theta_theoretical": None if prediction is None else prediction.theta,
        "upsilon_theoretical": None if prediction is None else prediction.upsilon,
        "decay_exponent_predicted": None if prediction is None else prediction.decay_exponent,
    }
    with open(out / "fit.json", "w") as fh:
        json.dump(fit_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "scan", config, [out / "scan.csv", out / "fit.json"])
    return 0


def _cmd_verify_kernel(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_xi_quadrature(args.beta, args.nxi, args.xi_min, args.xi_max)
    taus = np.geomspace(args.tau_min, args.tau_max, args.points)
    check = kernel_check(grid, args.rho, taus)
    check.to_csv(out / "kernel.csv")
    config = {"beta": args.beta, "rho": args.rho, "nxi": args.nxi,
              "xi_min": args.xi_min, "xi_max": args.xi_max,
              "tau_min": args.tau_min, "tau_max": args.tau_max, "points": args.points}
    _write_manifest(out, "verify-kernel", config, [out / "kernel.csv"])
    if not math.isfinite(check.max_rel_error) or check.max_rel_error > 1e-4:
        print(
            f"kernel check failed: max rel error {check.max_rel_error:.3e} > 1e-4",
            file=sys.stderr,
        )
        return THRESHOLD_EXIT
    return 0


def _cmd_oracle_compare(args, parser) -> int:
    from .bessel import analytic_resolvent_P

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        nx_list = [int(v) for v in args.nx_list.split(",")]
    except ValueError:
        parser.error("--nx-list must be a comma-separated integer list")
    spec = ProblemSpec(
        variant=Variant.P, kappa=PowerLawKappa(args.alpha), beta=args.beta, rho=args.rho
    )
    xig = build_xi_quadrature(args.beta, args.nxi, args.xi_min, args.xi_max)
    f_psi = (
        np.zeros(xig.xi.size)
        if args.data == "zero"
        else xig.eta * np.exp(-xig.xi**2)
    )
    grade = args.grade if args.grade is not None else 2.0
    config = {"spec": spec.to_json(), "lambda": args.lam, "nx_list": nx_list,
              "grade": grade, "nxi": args.nxi, "xi_min": args.xi_min,
              "xi_max": args.xi_max, "data": args.data}
    rows = []
    errors = []
    try:
        for nx in nx_list:
            xg = build_x_grid(nx, grade)
            op = assemble_operator(spec, xg, xig)
            c_const = forcing_integral(op, args.lam, f_psi)
            zd = solve_resolvent(op, args.lam, np.zeros(nx), f_psi)
            oracle = analytic_resolvent_P(args.lam, xg.x, None, c_const,
                                          args.alpha, args.beta, args.rho)
            diff = zd.y - oracle.y
            l2 = math.sqrt(float(np.dot(xg.h, np.abs(diff) ** 2)))
            linf = float(np.abs(diff).max())
            rows.append([args.lam, l2, linf, nx])
            errors.append(l2)
    except NumericalError as exc:
        _write_manifest(out, "oracle-compare", config, [],
                        error={"message": str(exc), **exc.diagnostics})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    _write_csv(out / "oracle.csv", ["lambda", "l2_error", "linf_error", "nx"], rows)
    orders = []
    for k in range(1, len(errors)):
        if errors[k] > 0 and errors[k - 1] > 0 and nx_list[k] != nx_list[k - 1]:
            orders.append(
                math.log(errors[k - 1] / errors[k]) / math.log(nx_list[k] / nx_list[k - 1])
            )
    summary = {"orders": orders, "observed_order": min(orders) if orders else None}
    with open(out / "orders.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "oracle-compare", config,
                    [out / "oracle.csv", out / "orders.json"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracdamp",
        description="Degenerate Schrodinger systems with fractional boundary damping",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="time evolution + decay-exponent fit")
    _add_problem_flags(p)
    p.add_argument("--t-final", dest="t_final", type=float, required=True)
    p.add_argument("--dt", type=float, default=None, help="default t_final/20000")
    p.add_argument("--y0", choices=["smooth-bump", "lowest-mode", "zero"],
                   default="smooth-bump")
    p.add_argument("--fit-window", dest="fit_window", default=None, metavar="LO:HI")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scan", help="resolvent-norm scan + power-law fit")
    _add_problem_flags(p, allow_stub=True)  # stub: diagonal test operator
    p.add_argument("--lambda-min", dest="lambda_min", type=float, default=1e-4)
    p.add_argument("--lambda-max", dest="lambda_max", type=float, default=1e-1)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--regime", choices=["low", "high"], default="low")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("verify-kernel", help="quadrature kernel vs closed form")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--tau-min", dest="tau_min", type=float, default=1e-2)
    p.add_argument("--tau-max", dest="tau_max", type=float, default=1e2)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--nxi", type=int, default=200)
    p.add_argument("--xi-min", dest="xi_min", type=float, default=1e-4)
    p.add_argument("--xi-max", dest="xi_max", type=float, default=1e4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_verify_kernel)

    p = sub.add_parser("oracle-compare", help="discrete vs closed-form resolvent")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--nx-list", dest="nx_list", required=True)
    p.add_argument("--grade", type=float, default=None, help="default 2 (convergence studies)")
    p.add_argument("--nxi", type=int, default=800)
    p.add_argument("--xi-min", dest="xi_min", type=float, default=1e-4)
    p.add_argument("--xi-max", dest="xi_max", type=float, default=1e6)
    p.add_argument("--data", choices=["default", "zero"], default="default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except FracdampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
