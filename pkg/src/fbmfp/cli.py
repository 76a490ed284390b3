"""Command-line interface: ``fbmfp {omega,density,flux,cir,validate}``.

Exit codes: 0 success, 1 validation failure, 2 bad input, 3 numerical
failure. Errors are reported on stderr as one JSON object. Numbers are
written in shortest round-trip form and every output starts with ``#``
metadata lines (CSV) or a ``metadata`` object (JSON) recording all inputs.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from importlib import metadata as importlib_metadata

import numpy as np

from .cir import CirParams, cir_transition_density, map_cir_to_fpk
from .errors import DomainError, FbmFpError
from .flux import lemma2_residual, solve_flux
from .inversion import InversionConfig
from .laplace_domain import DEFAULT_TOLERANCE, InitialDistribution, omega, pde_residual
from .params import FpkParams
from .solver import density_curve, default_grid
from .validation import MC_SEED, SUITES, run_suite

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
FAILURE_LIMIT = 0.2


def _version():
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def _threads():
    raw = os.environ.get("FBMFP_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"FBMFP_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise DomainError("FBMFP_THREADS must be positive")
    return value


def _num(value):
    """Shortest round-trip text for a float; ``nan``/``inf`` spelled out."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, complex):
        return {"re": _json_safe(obj.real), "im": _json_safe(obj.imag)}
    return obj


class _Writer:
    """Single sink for the run output (file or stdout)."""

    def __init__(self, path):
        self.path = path

    def write(self, text):
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(text)


def _metadata(args, extra=None):
    meta = {"command": args.command, "version": _version(), "seed": args.seed,
            "threads": _threads()}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "handler", "output", "seed"):
            continue
        meta[key] = value
    if extra:
        meta.update(extra)
    return meta


def _csv(meta, header, rows, trailer=None):
    lines = [f"# {k}={_meta_text(v)}" for k, v in meta.items()]
    lines.append(",".join(header))
    lines.extend(",".join(row) for row in rows)
    for k, v in (trailer or {}).items():
        lines.append(f"# {k}={_meta_text(v)}")
    return "\n".join(lines) + "\n"


def _meta_text(value):
    if isinstance(value, float):
        return _num(value)
    if isinstance(value, dict):
        return json.dumps(_json_safe(value), sort_keys=True)
    return str(value)


def _dump_json(obj):
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n"


def _params(args):
    return FpkParams(args.a, args.b, args.c, args.v)


def _inversion(args):
    return InversionConfig(args.method, args.talbot_nodes, args.talbot_max_nodes,
                           args.stehfest_terms, args.cross_check_tolerance)


def _initial(args):
    if getattr(args, "bump_width", None):
        return InitialDistribution.gaussian_bump(args.xi, args.bump_width)
    return InitialDistribution.point_mass(args.xi)


def _grid(args, t, init, params):
    if args.x_min is None and args.x_max is None:
        return default_grid(t, init, params, n=args.n)
    if args.x_min is None or args.x_max is None:
        raise DomainError("--x-min and --x-max go together")
    if not 0 < args.x_min <= args.x_max:
        raise DomainError("need 0 < x-min <= x-max")
    if args.n == 1:
        return np.array([args.x_min])
    if args.x_min == args.x_max:
        raise DomainError("x-min must be below x-max when n > 1")
    if args.spacing == "geometric":
        return np.geomspace(args.x_min, args.x_max, args.n)
    return np.linspace(args.x_min, args.x_max, args.n)


def cmd_omega(args):
    params = _params(args)
    init = InitialDistribution.point_mass(args.xi)
    s = complex(args.s_re, args.s_im)
    flux = "reflecting"
    if args.mode == "flux":
        if args.t <= 0:
            raise DomainError("flux mode needs t > 0")
        flux = solve_flux(np.linspace(0.0, args.t, args.flux_cells + 1), init, params)
    ev = omega(args.t, s, init, flux, params, tol=args.tol)
    residual = math.nan
    if args.mode == "reflecting" and args.t > args.residual_step and s.imag == 0 and s.real > 0:
        res, _ = pde_residual(args.t, s.real, init, params, step=args.residual_step, tol=args.tol)
        residual = abs(res)
    meta = _metadata(args)
    fields = {
        "omega_re": ev.omega.real,
        "omega_im": ev.omega.imag,
        "pi_argument_re": ev.pi_argument.real,
        "pi_argument_im": ev.pi_argument.imag,
        "g_hat_re": ev.g_hat.real,
        "g_hat_im": ev.g_hat.imag,
        "error_estimate": ev.error_estimate,
        "pde_residual": residual,
    }
    if args.format == "json":
        return _dump_json({"metadata": meta, "result": fields}), EXIT_OK
    return _csv(meta, list(fields), [[_num(v) for v in fields.values()]]), EXIT_OK


def _curve_output(args, curve, meta):
    n = len(curve.x_grid)
    failed = len(curve.failures)
    flags = []
    for i in range(n):
        f = list(curve.flags[i])
        if i in curve.failures:
            f.append("failed")
        flags.append(";".join(f))
    norm = curve.diagnostics.get("normalization", math.nan)
    meta = dict(meta, failed_points=failed, peak=curve.diagnostics["peak"])
    if args.format == "json":
        rows = [{"x": curve.x_grid[i], "u": curve.u[i], "discrepancy": curve.discrepancy[i],
                 "flags": flags[i], "failure": curve.failures.get(i)} for i in range(n)]
        text = _dump_json({"metadata": meta, "rows": rows, "normalization": norm,
                           "diagnostics": {k: v for k, v in curve.diagnostics.items()
                                           if k != "flux"}})
    else:
        rows = [[_num(curve.x_grid[i]), _num(curve.u[i]), _num(curve.discrepancy[i]), flags[i]]
                for i in range(n)]
        text = _csv(meta, ["x", "u", "discrepancy", "flags"], rows, {"normalization": norm})
    if args.plot:
        from .plotting import density_figure, save_figure

        save_figure(density_figure(curve), args.plot)
    if failed:
        print(f"warning: {failed} of {n} points failed", file=sys.stderr)
    code = EXIT_NUMERICAL if failed > FAILURE_LIMIT * n else EXIT_OK
    return text, code


def cmd_density(args):
    params = _params(args)
    init = _initial(args)
    if not args.t > 0:
        raise DomainError("t must be positive")
    x = _grid(args, args.t, init, params)
    mode = "reflecting" if args.mode == "reflecting" else "lemma2-flux"
    curve = density_curve(args.t, x, init, mode, params, _inversion(args), tol=args.tol,
                          flux_cells=args.flux_cells)
    return _curve_output(args, curve, _metadata(args))


def cmd_flux(args):
    params = _params(args)
    init = InitialDistribution.point_mass(args.xi)
    if not args.t_max > 0 or args.n < 2:
        raise DomainError("need t-max > 0 and n >= 2")
    grid = np.linspace(0.0, args.t_max, args.n)
    flux = solve_flux(grid, init, params)
    residuals = [lemma2_residual(flux, t, init, params) for t in grid]
    meta = _metadata(args, {"zero_flux_nodes": flux.diagnostics.get("zero_flux_nodes")})
    if args.plot:
        from .plotting import flux_figure, save_figure

        save_figure(flux_figure(flux), args.plot)
    if args.format == "json":
        rows = [{"t": t, "f": f, "residual": r} for t, f, r in zip(grid, flux.values, residuals)]
        return _dump_json({"metadata": meta, "rows": rows}), EXIT_OK
    rows = [[_num(t), _num(f), _num(r)] for t, f, r in zip(grid, flux.values, residuals)]
    return _csv(meta, ["t", "f", "residual"], rows), EXIT_OK


def cmd_cir(args):
    p = CirParams(args.hurst, args.sigma, args.rate, args.dividend_h, args.s_t, args.delta_t)
    params, xi, t = map_cir_to_fpk(p)
    x = _grid(args, t, InitialDistribution.point_mass(xi), params)
    mode = "reflecting" if args.mode == "reflecting" else "lemma2-flux"
    curve = cir_transition_density(p, x, mode, _inversion(args), tol=args.tol)
    meta = _metadata(args, {"mapped": params.as_dict(), "xi": xi, "t": t})
    return _curve_output(args, curve, meta)


def cmd_validate(args):
    start = time.perf_counter()
    results = run_suite(args.suite, fast=args.fast, seed=args.seed)
    timing = not args.no_timing
    for r in results:
        print(r.line(), file=sys.stderr)
    passed = all(r.passed for r in results)
    report = {
        "metadata": _metadata(args),
        "all_passed": passed,
        "checks": [r.as_dict(timing=timing) for r in results],
    }
    if timing:
        report["wall_time"] = time.perf_counter() - start
    return _dump_json(report), EXIT_OK if passed else EXIT_VALIDATION


def _model_flags(p, with_xi=True):
    for name in ("a", "b", "c", "v"):
        p.add_argument(f"--{name}", type=float, required=True)
    if with_xi:
        p.add_argument("--xi", type=float, default=1.0, help="initial point mass location")


def _common_flags(p, formats=True):
    p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    p.add_argument("--seed", type=int, default=MC_SEED, help="RNG seed recorded in the output")
    if formats:
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE,
                       help="absolute quadrature tolerance")


def _grid_flags(p):
    p.add_argument("--x-min", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--n", type=int, default=256, help="number of grid points")
    p.add_argument("--spacing", choices=("linear", "geometric"), default="linear")
    p.add_argument("--mode", choices=("reflecting", "flux"), default="reflecting")
    p.add_argument("--flux-cells", type=int, default=128)
    p.add_argument("--method", choices=("talbot", "stehfest", "both"), default="talbot")
    p.add_argument("--talbot-nodes", type=int, default=32)
    p.add_argument("--talbot-max-nodes", type=int, default=128)
    p.add_argument("--stehfest-terms", type=int, default=16)
    p.add_argument("--cross-check-tolerance", type=float, default=1e-4)
    p.add_argument("--plot", default=None, metavar="FILE", help="also save a figure")


def build_parser():
    parser = argparse.ArgumentParser(prog="fbmfp", description=(
        "Laplace-domain solution, density recovery and validation for the "
        "fractional Fokker-Planck equation"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("omega", help="evaluate the transform at one Laplace point")
    _model_flags(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--s-re", type=float, required=True)
    p.add_argument("--s-im", type=float, default=0.0)
    p.add_argument("--mode", choices=("reflecting", "flux"), default="reflecting")
    p.add_argument("--flux-cells", type=int, default=128)
    p.add_argument("--residual-step", type=float, default=1e-4)
    _common_flags(p)
    p.set_defaults(handler=cmd_omega)

    p = sub.add_parser("density", help="density curve u(t, x) as CSV")
    _model_flags(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--bump-width", type=float, default=None,
                   help="replace the point mass by a Gaussian bump of this width")
    _grid_flags(p)
    _common_flags(p)
    p.set_defaults(handler=cmd_density)

    p = sub.add_parser("flux", help="boundary flux on a uniform grid with residuals")
    _model_flags(p)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--n", type=int, default=64, help="number of grid nodes")
    p.add_argument("--plot", default=None, metavar="FILE")
    _common_flags(p)
    p.set_defaults(handler=cmd_flux)

    p = sub.add_parser("cir", help="transition density of the square-root asset model")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--dividend-h", type=float, required=True)
    p.add_argument("--s-t", type=float, required=True)
    p.add_argument("--delta-t", type=float, required=True)
    _grid_flags(p)
    _common_flags(p)
    p.set_defaults(handler=cmd_cir)

    p = sub.add_parser("validate", help="run acceptance suites and print a JSON report")
    p.add_argument("--suite", choices=tuple(SUITES), default="all")
    p.add_argument("--fast", action="store_true", help="smaller sample sizes and grids")
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall times so reports are byte-reproducible")
    _common_flags(p, formats=False)
    p.set_defaults(handler=cmd_validate)
    return parser


def _fail(code, exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    details = getattr(exc, "details", None)
    if details:
        payload["details"] = details
    print(json.dumps(_json_safe(payload), sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, code = args.handler(args)
    except DomainError as exc:
        return _fail(EXIT_INPUT, exc)
    except (FbmFpError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    _Writer(args.output).write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
