"""Command-line front end.

Exit status is 0 on success, 1 on a domain error (bad configuration, failed
check, I/O problem) and 2 on a usage error.  Every failure prints exactly
one ``error: <Kind>: <reason>`` line to stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import scipy.integrate

from . import io
from .errors import Fano3Error, MismatchedStructure
from .fit import FitProblem, parameter_names, solve
from .lineshape import curve, energy_grid
from .model import normalization_residual
from .oracle import DiscretizationSpec, compare, spectral_scale
from .presets import preset, preset_names, run_preset

# flags whose values may legitimately start with '-'
_RANGE_FLAGS = ("--grid", "--span")


class UsageError(Exception):
    pass


class CheckFailed(Fano3Error):
    """A verification or comparison ran but did not meet its threshold."""

    kind = "CheckFailed"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _range(text: str, parts: int) -> tuple[float, ...]:
    pieces = text.split(":")
    if len(pieces) != parts:
        want = "LO:HI:STEP" if parts == 3 else "LO:HI"
        raise argparse.ArgumentTypeError(f"expected {want}, got {text!r}")
    try:
        values = tuple(float(p) for p in pieces)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric range {text!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"non-finite range {text!r}")
    if not values[1] > values[0]:
        raise argparse.ArgumentTypeError(f"upper end must exceed lower end in {text!r}")
    if parts == 3 and not values[2] > 0.0:
        raise argparse.ArgumentTypeError(f"step must be positive in {text!r}")
    return values


def grid_arg(text: str) -> np.ndarray:
    lo, hi, step = _range(text, 3)
    try:
        return energy_grid(lo, hi, step)
    except Fano3Error as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def span_arg(text: str) -> tuple[float, float]:
    return _range(text, 2)


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _merge_ranges(argv: list[str]) -> list[str]:
    """Glue ``--grid -10:10:0.1`` into ``--grid=-10:10:0.1`` so argparse accepts it."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _RANGE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _load_with_lineshape(path):
    config, params = io.read_config(path)
    if params is None:
        raise MismatchedStructure(f"{path}: configuration has no 'lineshape' block")
    return config, params


def cmd_eval(args) -> int:
    config, params = _load_with_lineshape(args.config)
    result = curve(config, params, args.grid, convention=args.convention)
    io.write_curve(result, args.out)
    r = result.r_values
    finite = r[np.isfinite(r)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (math.nan, math.nan)
    print(f"{config.label}: points={r.size} gaps={result.gaps} R_min={lo:.6g} R_max={hi:.6g} -> {args.out}")
    return 0


def cmd_probs(args) -> int:
    config, _ = io.read_config(args.config)
    from .model import _probabilities, _terms

    probs = _probabilities(_terms(config, args.grid, args.convention))
    levels = sorted(probs)
    for n in levels:
        p = probs[n]
        ok = np.isfinite(p)
        k = int(np.nanargmax(p))
        area = float(scipy.integrate.trapezoid(p[ok], args.grid[ok]))
        print(f"level {n}: peak={p[k]:.6g} at eps={args.grid[k]:.6g} MHz, integral over grid={area:.6g}")
    if args.out:
        lines = ["epsilon," + ",".join(f"p_{n}" for n in levels)]
        for i, e in enumerate(args.grid):
            lines.append(",".join([repr(float(e))] + [io._fmt(probs[n][i]) for n in levels]))
        io._write_text(args.out, "\n".join(lines) + "\n")
    return 0


def run_verify(config, samples: int, seed: int = 0, residual=normalization_residual):
    """Largest normalization residual over ``samples`` random energies near the levels."""
    energies = list(config.bound_energies.values())
    pad = 10.0 * spectral_scale(config)
    rng = np.random.default_rng(seed)
    eps = rng.uniform(min(energies) - pad, max(energies) + pad, samples)
    res = np.asarray(residual(config, eps), dtype=float)
    poles = int(np.count_nonzero(np.isnan(res)))
    worst = float(np.nanmax(res)) if poles < res.size else math.nan
    return worst, poles


def cmd_verify(args) -> int:
    config, _ = io.read_config(args.config)
    worst, poles = run_verify(config, args.samples, args.seed)
    print(f"{config.label}: samples={args.samples} seed={args.seed} max_residual={worst:.3e} poles_skipped={poles}")
    if not worst < 1e-10:
        raise CheckFailed(f"normalization residual {worst:.3e} is not below 1e-10")
    return 0


def cmd_oracle(args) -> int:
    config, _ = io.read_config(args.config)
    lo, hi = args.span
    spec = DiscretizationSpec(lo, hi, args.bins)
    grid = None if args.grid is None else args.grid
    result = compare(config, spec, grid=grid, tol=args.tol)
    print(result.summary())
    if not result.passed:
        raise CheckFailed(f"max deviation {result.max_deviation:.3e} is not below tol {args.tol:g}")
    return 0


def cmd_sweep(args) -> int:
    curves = run_preset(args.preset, convention=args.convention)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise io.IoFailure(f"cannot create {out}: {exc.strerror or exc}") from None
    for i, c in enumerate(curves):
        q = "_".join(f"q{n}={v:g}" for n, v in sorted(c.meta["lineshape"]["q"].items()))
        path = out / f"{args.preset}_{i}.csv"
        io.write_curve(c, path)
        print(f"{path}  {q}  gaps={c.gaps}")
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            p = preset(name)
            print(f"{name}  {p.kind}-{p.position}  curves={len(p.q_list)}")
        return 0
    if not args.name:
        raise UsageError(f"presets {args.action} needs a preset name")
    p = preset(args.name)
    if args.action == "show":
        print(json.dumps(p.to_dict(), indent=2))
        return 0
    # config: write an eval-ready configuration for one curve of the preset
    if not 0 <= args.curve < len(p.q_list):
        raise MismatchedStructure(f"{p.name} has curves 0..{len(p.q_list) - 1}")
    record = io.config_record(p.config(), p.params_list[args.curve], preset=p.name)
    text = json.dumps(record, indent=2)
    if args.out:
        io._write_text(args.out, text + "\n")
        print(f"{p.name} curve {args.curve} -> {args.out}")
    else:
        print(text)
    return 0


def cmd_fit(args) -> int:
    spectrum = io.read_spectrum(args.data)
    record = io.load_json(args.init)
    if not isinstance(record, dict):
        raise io.MalformedFile(f"{args.init}: top level must be an object")
    config, params = io.parse_config(record)
    if params is None:
        raise MismatchedStructure(f"{args.init}: initial guess needs a 'lineshape' block")
    if config.label != args.model:
        raise MismatchedStructure(f"--model {args.model} does not match the initial guess ({config.label})")
    free = record.get("free")
    if args.free:
        free = [p.strip() for p in args.free.split(",") if p.strip()]
    bounds = {k: tuple(v) for k, v in (record.get("bounds") or {}).items()}
    problem = FitProblem(
        config,
        params,
        float(record.get("scale", 1.0)),
        float(record.get("baseline", 0.0)),
        free=free,
        bounds=bounds,
    )
    result = solve(problem, spectrum, n_starts=args.starts, seed=args.seed)
    print(f"{config.label}: points={len(spectrum)} free={len(problem.free)} of {parameter_names(config)}")
    print(result.report())
    if args.out:
        body = {
            "model": config.label,
            "converged": result.converged,
            "residual_norm": result.residual_norm,
            "iterations": result.iterations,
            "best_params": result.best_params,
            "standard_errors": result.standard_errors,
            "unidentifiable": result.unidentifiable,
        }
        io._write_text(args.out, json.dumps(body, indent=2, allow_nan=True) + "\n")
    if not result.converged:
        raise CheckFailed(f"fit did not converge after {result.iterations} iterations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fano3", description="Fano line shapes of three-level systems with one continuum.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def conv(p):
        p.add_argument("--convention", choices=("standard", "reversed"), default="standard")

    p = sub.add_parser("eval", help="line shape and bound densities on a grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, type=grid_arg, metavar="LO:HI:STEP")
    p.add_argument("--out", required=True)
    conv(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probs", help="bound-level probability densities on a grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, type=grid_arg, metavar="LO:HI:STEP")
    p.add_argument("--out")
    conv(p)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("verify", help="check the normalization identity at random energies")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="compare against a discretized-continuum diagonalization")
    p.add_argument("--config", required=True)
    p.add_argument("--bins", type=positive_int, required=True)
    p.add_argument("--span", type=span_arg, required=True, metavar="LO:HI")
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--grid", type=grid_arg, metavar="LO:HI:STEP", help="compare on this grid instead of the eigenvalues")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="write the curves of a preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--out", required=True)
    conv(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("presets", help="list or inspect presets")
    p.add_argument("action", choices=("list", "show", "config"))
    p.add_argument("name", nargs="?")
    p.add_argument("--curve", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("fit", help="fit a line shape to a measured spectrum")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="configuration label, e.g. lambda-middle")
    p.add_argument("--init", required=True, help="JSON configuration with a lineshape block")
    p.add_argument("--free", help="comma-separated free parameters (default: all)")
    p.add_argument("--starts", type=positive_int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)
    return parser


def _fail(kind: str, message: str) -> None:
    print(f"error: {kind}: {' '.join(str(message).split())}", file=sys.stderr)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_merge_ranges(argv))
    except UsageError as exc:
        _fail("UsageError", exc)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        _fail("UsageError", exc)
        return 2
    except Fano3Error as exc:
        _fail(exc.kind, exc)
        return 1
    except Exception as exc:  # keep the exit-code contract total
        _fail("InternalError", f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
