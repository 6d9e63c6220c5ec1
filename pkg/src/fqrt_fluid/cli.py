"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 overload assumption fails,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from importlib import metadata
from pathlib import Path

from .errors import AssumptionViolated, FqrtError, InvalidParameters, NumericalFailure
from .model import FluidState, ModelParams, canonical_params, validate_params

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is taken by the assumption check
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _parse_value(name: str, text: str):
    if name in ("ratio_num", "ratio_den"):
        try:
            return int(text)
        except ValueError:
            raise InputError(f"{name} must be an integer, got {text!r}")
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{name} must be a number, got {text!r}")


def load_params(path: str | None, overrides: list[str]) -> ModelParams:
    """Params from a JSON file (canonical values if none) with key=value overrides."""
    if path is None:
        data = canonical_params().to_dict()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read params file: {exc}")
        data = ModelParams.from_json(text).to_dict()
    names = {f.name for f in fields(ModelParams)}
    for item in overrides or []:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise InputError(f"--set expects key=value, got {item!r}")
        if key not in names:
            raise InputError(f"unknown parameter {key!r}")
        data[key] = _parse_value(key, value.strip())
    return ModelParams.from_dict(data)


def _parse_floats(text: str, count: int, flag: str) -> tuple:
    parts = text.split(",")
    if len(parts) != count:
        raise InputError(f"{flag} expects {count} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(v) for v in parts)
    except ValueError:
        raise InputError(f"{flag} has a non-numeric entry: {text!r}")


def _parse_lattice(text: str | None):
    if text is None:
        return None
    try:
        J, K = (int(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"--lattice expects J,K integers, got {text!r}")
    return J, K


def _dump(obj) -> str:
    # json uses repr for floats, the shortest string that round-trips
    return json.dumps(obj, indent=2, allow_nan=True)


class Output:
    """Writes the manifest before any result file."""

    def __init__(self, out: str | None, manifest: dict):
        self.dir = None if out is None else Path(out)
        if self.dir is not None:
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
                (self.dir / "manifest.json").write_text(_dump(manifest) + "\n")
            except OSError as exc:
                raise InputError(f"cannot write to {out}: {exc}")

    def write(self, name: str, text: str):
        if self.dir is not None:
            (self.dir / name).write_text(text)


def _manifest(args, p: ModelParams, **extra) -> dict:
    opts = {k: v for k, v in vars(args).items() if k not in ("func", "params", "set", "out")}
    return {"command": args.command, "tool_version": _version(), "params": p.to_dict(),
            "params_path": args.params, "overrides": list(args.set or []),
            "options": opts, "seed": getattr(args, "seed", None), **extra}


def read_manifest(path) -> dict:
    """Load a manifest and rebuild its resolved ModelParams under ``params``."""
    data = json.loads(Path(path).read_text())
    data["params"] = ModelParams.from_dict(data["params"])
    return data


# ------------------------------------------------------------------ commands

def cmd_validate(args, p: ModelParams) -> int:
    out = Output(args.out, _manifest(args, p))
    try:
        rep = validate_params(p)
    except InvalidParameters as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = _dump(rep.to_dict())
    print(text)
    out.write("validate.json", text + "\n")
    if not rep.assumption_a:
        for msg in rep.messages:
            print(msg, file=sys.stderr)
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_stationary(args, p: ModelParams) -> int:
    from .stationarity import stationary_point
    out = Output(args.out, _manifest(args, p))
    text = _dump(stationary_point(p).to_dict())
    print(text)
    out.write("stationary.json", text + "\n")
    return EXIT_OK


def cmd_pi(args, p: ModelParams) -> int:
    from .qbd import pi12, truncated_oracle_pi12
    if args.x0 is None:
        raise InputError("pi needs a state: --x0 q1,q2,z12")
    x = FluidState(*_parse_floats(args.x0, 3, "--x0"))
    lattice = _parse_lattice(args.lattice)
    out = Output(args.out, _manifest(args, p))
    validate_params(p)
    if args.oracle:
        value = truncated_oracle_pi12(x, p, level_cap=args.level_cap, lattice=lattice)
    else:
        value = pi12(x, p, lattice=lattice)
    print(repr(value))
    out.write("pi.json", _dump({"x": list(x.as_tuple()), "pi12": value,
                                "method": "oracle" if args.oracle else "qbd"}) + "\n")
    return EXIT_OK


def _initial_state(args):
    from .solver import ExtendedState
    if args.x0 is None:
        return ExtendedState.empty()
    vals = args.x0.split(",")
    if len(vals) == 6:
        return ExtendedState(*_parse_floats(args.x0, 6, "--x0"))
    return FluidState(*_parse_floats(args.x0, 3, "--x0"))


def cmd_solve(args, p: ModelParams) -> int:
    from .analysis import summarize
    from .solver import solve_ivp
    x0 = _initial_state(args)
    out = Output(args.out, _manifest(args, p))
    traj = solve_ivp(x0, p, h=args.h, t_end=args.t_end, lattice=_parse_lattice(args.lattice))
    summary = summarize(traj, p)
    text = _dump(summary)
    print(text)
    out.write("trajectory.csv", traj.to_csv())
    out.write("summary.json", text + "\n")
    return EXIT_OK


def cmd_simulate(args, p: ModelParams) -> int:
    from .errors import WindowTooShort
    from .simulation import SimConfig, difference_process_stats, initial_from_fluid, simulate
    initial = None
    if args.x0 is not None:
        from .solver import ExtendedState, normalize_state
        x0 = _initial_state(args)
        if isinstance(x0, FluidState):
            x0 = ExtendedState.from_fluid(x0, p)
        initial = initial_from_fluid(normalize_state(x0, p), args.n,
                                     (round(args.n * p.m1), round(args.n * p.m2)))
    cfg = SimConfig(p, args.n, seed=args.seed, t_end=args.t_end, sample_dt=args.sample_dt,
                    initial=initial)
    out = Output(args.out, _manifest(args, p, sim_config=cfg.to_dict()))
    path = simulate(cfg)
    report = {"n_events": path.n_events, "final": {k: getattr(path.final, k) for k in
                                                   ("Q1", "Q2", "Z11", "Z12", "Z21", "Z22")}}
    a, b = args.window
    try:
        st = difference_process_stats(path, (a, min(b, args.t_end)))
        report["window"] = [a, b]
        report["fraction_D_positive"] = st.fraction_positive
        report["D_transitions"] = st.transitions
        report["mean_queue_ratio"] = st.mean_queue_ratio
    except WindowTooShort as exc:
        report["window_error"] = str(exc)
    text = _dump(report)
    print(text)
    out.write("path.csv", path.to_csv())
    out.write("simulate.json", text + "\n")
    return EXIT_OK


def cmd_compare(args, p: ModelParams) -> int:
    from .analysis import compare, n_sweep
    seeds = list(range(args.seed, args.seed + args.seeds))
    out = Output(args.out, _manifest(args, p, seeds=seeds))
    window = tuple(args.window)
    rep = compare(p, args.n, seeds, h=args.h, t_end=args.t_end, window=window).to_dict()
    if args.sweep:
        rep["n_sweep"] = n_sweep(p, seeds=seeds, h=args.h, t_end=args.t_end, window=window)
        rep["n_sweep"]["median_sup_norm"] = {str(k): v for k, v in
                                             rep["n_sweep"]["median_sup_norm"].items()}
    text = _dump(rep)
    print(text)
    out.write("compare.json", text + "\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="ModelParams JSON file (default: canonical values)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter; repeatable")
    common.add_argument("--out", help="directory for manifest.json and result files")

    parser = _Parser(prog="fqrt-fluid", description="Fluid model of the X queue under FQR-T.")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check parameters and the overload assumption"
                   ).set_defaults(func=cmd_validate)
    sub.add_parser("stationary", parents=[common], help="stationary point report"
                   ).set_defaults(func=cmd_stationary)

    sp = sub.add_parser("pi", parents=[common], help="pi12 at one state")
    sp.add_argument("--x0", help="state q1,q2,z12")
    sp.add_argument("--oracle", action="store_true", help="use the truncated sparse solve")
    sp.add_argument("--level-cap", type=int, default=200)
    sp.add_argument("--lattice", help="J,K lattice for the QBD (multiple of j,k)")
    sp.set_defaults(func=cmd_pi)

    sp = sub.add_parser("solve", parents=[common], help="integrate the fluid ODE")
    sp.add_argument("--x0", help="q1,q2,z12 or q1,q2,z11,z12,z22,z21 (default: empty)")
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--t-end", type=float, default=50.0)
    sp.add_argument("--lattice", help="J,K lattice for the QBD (multiple of j,k)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", parents=[common], help="simulate the scale-n CTMC")
    sp.add_argument("--x0", help="fluid start, scaled by n (default: empty)")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--t-end", type=float, default=50.0)
    sp.add_argument("--sample-dt", type=float, default=0.1)
    sp.add_argument("--window", type=float, nargs=2, default=[20.0, 50.0])
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", parents=[common], help="fluid run against simulations")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--seeds", type=int, default=10, help="number of seeds")
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--t-end", type=float, default=50.0)
    sp.add_argument("--window", type=float, nargs=2, default=[20.0, 50.0])
    sp.add_argument("--sweep", action="store_true", help="also run n in {100, 400, 1600}")
    sp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        p = load_params(args.params, args.set)
        return args.func(args, p)
    except (InputError, InvalidParameters, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssumptionViolated as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FqrtError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
