"""Command-line front end.

Exit codes: 0 success (an "entangled" verdict is a finding, not a failure),
1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bipartite import (
    ROTATED_DIFFUSION_EXACT,
    ROTATED_DIFFUSION_NOMINAL,
    FactoredBipartiteState,
    criterion_report,
    duan_lhs,
    duan_mirror_lhs,
    duan_satisfied,
    evolve_bipartite,
    evolve_epr,
    factor,
    ph_separable,
    rotate_to_epr,
    separation_certificate,
)
from .core import GaussianState, NumericalDomainError, PhysicalParams, minimum_uncertainty
from .dynamics import TRAJECTORY_HEADER, fmt_float, evolve, state_to_dimensionless
from .solver import epr_threshold, general_threshold, optimize_s, tolerances, worst_case_epr

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

DIFFUSION_CONVENTIONS = {"nominal": ROTATED_DIFFUSION_NOMINAL, "exact": ROTATED_DIFFUSION_EXACT}

BIPARTITE_COLUMNS = ("t", "sK2", "sX2", "sP2", "sQ2", "duan_lhs", "duan_mirror_lhs", "duan_separable", "ph_separable")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclasses.dataclass
class RunConfig:
    subcommand: str
    params: dict
    options: dict
    output_format: str = "json"

    def as_dict(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params, "options": self.options, "format": self.output_format}


def _positive(v: str) -> float:
    x = float(v)
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {v}")
    return x


def _nonneg(v: str) -> float:
    x = float(v)
    if not (x >= 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be a non-negative number, got {v}")
    return x


def _nonneg_int(v: str) -> int:
    x = int(v)
    if x < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {v}")
    return x


def _times(v: str) -> list[float]:
    return [_nonneg(s) for s in v.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--hbar", type=_positive, default=1.0)
    common.add_argument("--mass", type=_positive, default=1.0)
    common.add_argument("--diffusion", type=_positive, default=1.0, help="momentum diffusion D = 2 m gamma k T")
    common.add_argument("--config", type=Path, help="key=value file; command-line flags take precedence")
    common.add_argument("--no-meta", action="store_true", help="omit the timestamped metadata field")
    common.add_argument("-o", "--output", type=Path, help="output file (default: stdout)")

    parser = _Parser(prog="phasesep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("disentangle-time", parents=[common], help="threshold after which every state is separable")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--s", type=_positive, help="squeezing parameter of the minimum-uncertainty split")
    g.add_argument("--optimize-s", action="store_true")
    p.add_argument("--s-lo", type=_positive, default=0.5)
    p.add_argument("--s-hi", type=_positive, default=1.5)

    p = sub.add_parser("epr-time", parents=[common], help="threshold after which the EPR state passes the Duan test")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--c", type=_positive, help="K variance of the regularized EPR state")
    g.add_argument("--worst-case", action="store_true")
    p.add_argument("--sP2", type=_nonneg, default=0.0)
    p.add_argument("--convention", choices=sorted(DIFFUSION_CONVENTIONS), default="nominal",
                   help="rotated-pair diffusion: nominal D or exact D/2")

    p = sub.add_parser("evolve", parents=[common], help="sample the closed-form evolution of a state file")
    p.add_argument("--state", type=Path, required=True)
    p.add_argument("--t-max", type=_nonneg, required=True)
    p.add_argument("--steps", type=_nonneg_int, required=True)
    p.add_argument("--convention", choices=sorted(DIFFUSION_CONVENTIONS), default="nominal")
    p.add_argument("--svg", type=Path)

    p = sub.add_parser("check", parents=[common], help="separability criteria for a two-particle state")
    p.add_argument("--state", type=Path, required=True)

    p = sub.add_parser("grid", parents=[common], help="brute-force Wigner grid evolution")
    p.add_argument("--initial", choices=("gaussian", "cat"), required=True)
    p.add_argument("--state", type=Path, help="one-mode Gaussian state file (gaussian initial only)")
    p.add_argument("--separation", type=_positive, default=4.0)
    p.add_argument("--width", type=_positive, default=0.5)
    p.add_argument("--np", dest="n_p", type=int, default=512)
    p.add_argument("--nx", dest="n_x", type=int, default=512)
    p.add_argument("--p-max", type=_positive, default=10.0)
    p.add_argument("--x-max", type=_positive, default=10.0)
    p.add_argument("--dt", type=_positive, default=1e-3)
    p.add_argument("--t-max", type=_nonneg, default=1.0)
    p.add_argument("--times", type=_times, help="comma-separated sample times (default: 10 even samples)")
    p.add_argument("--out-dir", type=Path, default=Path("grid_out"))
    p.add_argument("--snapshot-format", choices=("csv", "binary", "none"), default="binary")
    p.add_argument("--svg", type=Path)

    p = sub.add_parser("certify", parents=[common], help="explicit separation certificate at time t")
    p.add_argument("--t", type=_positive, required=True)
    p.add_argument("--s", type=_positive, required=True)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]):
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("subcommand", nargs="?")
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None or known.subcommand is None:
        return
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices.get(known.subcommand)
    if sp is None:
        return
    try:
        lines = known.config.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    actions = {}
    for a in sp._actions:
        if a.dest in ("help", "config"):
            continue
        actions[a.dest] = a
        for opt in a.option_strings:
            actions[opt.lstrip("-").replace("-", "_")] = a
    defaults: dict[str, Any] = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{known.config}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"{known.config}:{n}: unknown key {key!r} for {known.subcommand}")
        act = actions[dest]
        dest = act.dest
        try:
            if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                defaults[dest] = value.lower() in ("true", "1", "yes")
            else:
                defaults[dest] = act.type(value) if act.type else value
                if act.choices is not None and defaults[dest] not in act.choices:
                    raise ValueError(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{known.config}:{n}: bad value for {key!r}: {exc}") from None
    # mutually exclusive groups must see file values as if they were flags
    for grp in sp._mutually_exclusive_groups:
        dests = [a.dest for a in grp._group_actions]
        given_on_cli = any(o in argv for a in grp._group_actions for o in a.option_strings)
        in_file = [d for d in dests if d in defaults and defaults[d] not in (None, False)]
        if in_file and not given_on_cli:
            if len(in_file) > 1:
                raise UsageError(f"{known.config}: keys {in_file} are mutually exclusive")
            grp.required = False
        elif in_file:
            for d in in_file:
                defaults.pop(d)
    for a in sp._actions:
        if a.dest in defaults and a.required:
            a.required = False
    sp.set_defaults(**defaults)


def _resolve(args: argparse.Namespace) -> tuple[RunConfig, PhysicalParams]:
    params = PhysicalParams(args.hbar, args.mass, args.diffusion)
    skip = {"subcommand", "hbar", "mass", "diffusion", "config", "no_meta", "output"}
    opts = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, Path):
            v = str(v)
        opts[k] = v
    return RunConfig(args.subcommand, params.as_dict(), opts), params


def _envelope(result: dict, cfg: RunConfig, no_meta: bool) -> dict:
    out = dict(result)
    out["config"] = cfg.as_dict()
    if not no_meta:
        out["meta"] = {
            "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "precision": "fast" if tolerances().sweep_step > 1e-3 else "strict",
        }
    return out


def _emit_json(payload: dict, output: Path | None):
    text = json.dumps(payload, indent=2, sort_keys=False, allow_nan=False) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text)


def _sidecar(output: Path | None, cfg: RunConfig, no_meta: bool, extra: dict | None = None):
    if output is None:
        return
    payload = _envelope(extra or {}, cfg, no_meta)
    Path(str(output) + ".run.json").write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n")


def load_state_file(path: Path) -> GaussianState | FactoredBipartiteState:
    """Read a Gaussian or factored two-particle state; errors name the line or field."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read state file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    try:
        if "modes" in data:
            return GaussianState.from_dict(data)
        if "sK2" in data:
            return FactoredBipartiteState.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: invalid state: {exc}") from None
    raise UsageError(f"{path}: expected a Gaussian state (field 'modes') or factored widths (field 'sK2')")


def cmd_disentangle_time(args, cfg, params) -> dict:
    if args.optimize_s:
        if not args.s_lo < args.s_hi:
            raise UsageError("--s-lo must be smaller than --s-hi")
        s_star, res = optimize_s(args.s_lo, args.s_hi)
        out = res.report(params)
        out["optimal_s"] = s_star
    else:
        out = general_threshold(args.s).report(params)
    return out


def cmd_epr_time(args, cfg, params) -> dict:
    kappa = DIFFUSION_CONVENTIONS[args.convention]
    if args.worst_case:
        c_star, res = worst_case_epr(args.sP2, kappa)
        out = res.report(params)
        out["worst_case_c"] = c_star
    else:
        out = epr_threshold(args.c, args.sP2, kappa).report(params)
    out["convention"] = args.convention
    return out


def cmd_certify(args, cfg, params) -> dict:
    return separation_certificate(args.t, args.s).to_dict()


def _factored_of(state) -> FactoredBipartiteState:
    if isinstance(state, FactoredBipartiteState):
        return state
    if state.modes != 2:
        raise UsageError("criteria need a two-particle state")
    try:
        return factor(rotate_to_epr(state))
    except ValueError as exc:
        raise UsageError(f"{exc}; only states that factor in (K, X, P, Q) are supported") from None


def cmd_check(args, cfg, params) -> dict:
    state = load_state_file(args.state)
    if isinstance(state, GaussianState):
        state = state_to_dimensionless(state, params)
    report = criterion_report(_factored_of(state))
    return report


def _bipartite_row(t: float, f: FactoredBipartiteState) -> list[str]:
    return [fmt_float(t), fmt_float(f.sK2), fmt_float(f.sX2), fmt_float(f.sP2), fmt_float(f.sQ2), fmt_float(duan_lhs(f)), fmt_float(duan_mirror_lhs(f)),
            str(duan_satisfied(f)).lower(), str(ph_separable(f)).lower()]


def cmd_evolve(args, cfg, params) -> str:
    state = load_state_file(args.state)
    times = [args.t_max * k / args.steps for k in range(1, args.steps + 1)] if args.steps else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    svg_series = []
    if isinstance(state, FactoredBipartiteState):
        kappa = DIFFUSION_CONVENTIONS[args.convention]
        w.writerow(BIPARTITE_COLUMNS)
        for t in times:
            f = evolve_epr(state, t, kappa)
            w.writerow(_bipartite_row(t, f))
            svg_series.append((t, duan_lhs(f)))
        label = "Var(X) + 4 Var(P)"
    elif state.modes == 1:
        w.writerow(TRAJECTORY_HEADER)
        for t in times:
            s = evolve(state, t, params)
            c = s.mode_cov(0)
            w.writerow([fmt_float(v) for v in (t, s.mean[0], s.mean[1], c.spp, c.spx, c.sxx, c.det)])
            svg_series.append((t, c.det))
        label = "det cov"
    elif state.modes == 2:
        t_unit = 1.0
        if state.units == "si":
            # sample times are physical; the criteria live in dimensionless units
            state = state_to_dimensionless(state, params)
            t_unit = math.sqrt(params.hbar * params.mass / params.diffusion)
        w.writerow(BIPARTITE_COLUMNS)
        for t in times:
            rot = rotate_to_epr(evolve_bipartite(state, t / t_unit))
            # K-X and P-Q correlations build up; the criteria read the variances
            f = FactoredBipartiteState(*np.diag(rot.cov).tolist())
            w.writerow(_bipartite_row(t, f))
            svg_series.append((t, duan_lhs(f)))
        label = "Var(X) + 4 Var(P)"
    else:
        raise UsageError("evolve supports one- and two-mode states")
    if args.svg is not None:
        from .plotting import line_svg

        line_svg(svg_series, args.svg, xlabel="t", ylabel=label)
    return buf.getvalue()


def cmd_grid(args, cfg, params) -> str:
    from . import grid as G

    if not params.is_unit:
        raise UsageError("the grid oracle runs in dimensionless units; drop --hbar/--mass/--diffusion")
    base = G.WignerGrid.empty(args.n_p, args.n_x, args.p_max, args.x_max)
    k = None
    if args.initial == "cat":
        if args.state is not None:
            raise UsageError("--state applies to the gaussian initial condition only")
        mixture = G.cat_state(args.separation, args.width)
        k = G.fringe_wavevector(args.separation)
    else:
        state = load_state_file(args.state) if args.state else minimum_uncertainty()
        if not isinstance(state, GaussianState) or state.modes != 1:
            raise UsageError("--state must hold a one-mode Gaussian state")
        mixture = G.GaussianMixtureState.from_gaussian(state)
    grid0 = G.rasterize(mixture, base)
    times = args.times if args.times is not None else [args.t_max * i / 10 for i in range(11)]
    times = sorted(t for t in times if t <= args.t_max + 1e-12)
    ref = G.fringe_amplitude(grid0, k) if k is not None else None
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rows = []

    def record(g):
        mean, cov = G.moments(g)
        vis = G.fringe_visibility(g, k, ref) if k is not None else float("nan")
        rows.append((g.t, mean[0], mean[1], cov.spp, cov.spx, cov.sxx, vis, g.integral()))
        if args.snapshot_format == "csv":
            G.write_snapshot_csv(g, args.out_dir / f"snapshot_t{g.t:.6f}.csv")
        elif args.snapshot_format == "binary":
            G.write_snapshot_binary(g, args.out_dir / f"snapshot_t{g.t:.6f}.wgrd")

    steps = round(args.t_max / args.dt)
    G.evolve_grid(grid0, steps * args.dt, args.dt, sample_times=times, callback=record)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "mean_p", "mean_x", "cov_pp", "cov_px", "cov_xx", "visibility", "integral"))
    for r in rows:
        w.writerow([fmt_float(v) for v in r])
    summary = args.out_dir / "summary.csv"
    summary.write_text(buf.getvalue())
    if args.svg is not None:
        from .plotting import line_svg

        series = [(r[0], r[6] if k is not None else r[3]) for r in rows]
        line_svg(series, args.svg, xlabel="t", ylabel="fringe visibility" if k is not None else "cov_pp")
    return buf.getvalue()


COMMANDS = {
    "disentangle-time": (cmd_disentangle_time, "json"),
    "epr-time": (cmd_epr_time, "json"),
    "certify": (cmd_certify, "json"),
    "check": (cmd_check, "json"),
    "evolve": (cmd_evolve, "csv"),
    "grid": (cmd_grid, "csv"),
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"phasesep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    fn, fmt = COMMANDS[args.subcommand]
    try:
        cfg, params = _resolve(args)
        cfg.output_format = fmt
        tolerances()
        result = fn(args, cfg, params)
    except UsageError as exc:
        print(f"phasesep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalDomainError as exc:
        print(f"phasesep: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"phasesep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if fmt == "json":
        _emit_json(_envelope(result, cfg, args.no_meta), args.output)
    elif args.subcommand == "grid":
        _sidecar(args.out_dir / "summary.csv", cfg, args.no_meta)
        if args.output is not None:
            args.output.write_text(result)
        else:
            sys.stdout.write(result)
    else:
        if args.output is None:
            sys.stdout.write(result)
        else:
            args.output.write_text(result)
            _sidecar(args.output, cfg, args.no_meta)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
