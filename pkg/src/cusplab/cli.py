"""Command-line front end: ``cusplab <command> [options]``.

Exit codes: 0 success, 1 a scientific check failed, 2 usage or configuration
error (including violated preconditions and unwritable output), 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .blowup_atlas import (
    ChartId,
    ChartPoint,
    blow_down,
    blow_up,
    chart_field,
    matching_map,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    CuspLabError,
    DegenerateFiberError,
    DomainError,
    FoldDetectionError,
    FoldSingularityError,
    GeometryError,
    IntegrationError,
    NonContractiveError,
    SweepError,
)
from .odeflow import Section, integrate_to_section
from .sdi import endpoints_for_sections, sdi_closed, sdi_quadrature, sdi_slow_path
from .transition_lab import fold_exponent_fit, git_describe, layer_study, sweep_eps

log = logging.getLogger("cusplab")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
FOLD_SLOPE_RANGE = (0.60, 0.73)

_USAGE_ERRORS = (ConfigError, DomainError, FoldSingularityError, GeometryError)
_NUMERIC_ERRORS = (IntegrationError, DegenerateFiberError, NonContractiveError, SweepError,
                   FoldDetectionError)


class OutputError(Exception):
    """Output directory or file cannot be written."""


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _fmt(x: float) -> str:
    return repr(float(x) + 0.0)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _summary(cfg: RunConfig, command: str, status: int, payload: dict) -> None:
    doc = {"command": command, "exit_code": status, "git_describe": git_describe(),
           "config": cfg.to_dict(), "result": payload}
    _write(_out_dir(cfg) / f"{command}_summary.json",
           json.dumps(doc, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _csv_text(header, rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    """Integrate one orbit from the entry section a = -a_minus to a = a_plus."""
    if not cfg.eps > 0:
        raise DomainError(f"eps must satisfy eps > 0, got {cfg.eps}")
    if cfg.z0 is None:
        raise ConfigError("simulate needs a start value --z0")
    if not cfg.z0 > 0:
        raise DomainError(f"start point must satisfy z > 0 on the entry section, got z0={cfg.z0}")
    out = _out_dir(cfg)
    system = cfg.build_system()
    y0 = [-cfg.a_minus, cfg.b, cfg.z0, cfg.eps]
    t_max = 50.0 * (cfg.a_minus + cfg.a_plus) / cfg.eps
    y, t_hit, traj = integrate_to_section(system.fast_rhs, y0, Section("a", cfg.a_plus), 1,
                                          cfg.rtol, cfg.atol, t_max, return_trajectory=True)
    traj.to_csv(out / "trajectory.csv")
    payload = {"t_hit": t_hit, "final_state": dict(zip("a b z eps".split(), map(float, y))),
               "residual": abs(float(y[0]) - cfg.a_plus), "steps": len(traj.times) - 1}
    print(f"hit a={_fmt(y[0])} at t={_fmt(t_hit)}: b={_fmt(y[1])} z={_fmt(y[2])} "
          f"({payload['steps']} steps)")
    _summary(cfg, "simulate", EXIT_OK, payload)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    """Rate sweep over eps; exit 1 unless the deviations decrease monotonically."""
    out = _out_dir(cfg)
    rep = sweep_eps(cfg.build_system(), cfg.b, cfg.eps_list, cfg.a_minus, cfg.a_plus,
                    cfg.rtol, cfg.atol, cfg.z_offset)
    rep.to_csv(out / "sweep.csv")
    rep.to_json(out / "sweep.json", config=cfg.to_dict())
    for d in rep.row_dicts():
        flag = "  FAILED" if math.isnan(d["rate_num"]) else ""
        print(f"eps={d['eps']:.3e} rate={d['rate_num']:.6f} target={-rep.target_I:.6f} "
              f"deviation={d['deviation']:.3e}{flag}")
    for e, msg in rep.failures:
        print(f"row eps={e:.3e} failed: {msg}", file=sys.stderr)
    status = EXIT_OK if rep.monotone() else EXIT_CHECK
    print("deviations decrease monotonically" if status == EXIT_OK
          else "deviations do not decrease monotonically")
    _summary(cfg, "sweep", status, {"deviations": rep.deviations, "monotone": rep.monotone(),
                                    "failures": rep.failures})
    return status


def cmd_layers(cfg: RunConfig) -> int:
    """Entry-chart exit coordinate b1 for b = mu eps^(2/5); exit 1 if an inner row escapes."""
    out = _out_dir(cfg)
    rows = layer_study(cfg.build_system(), cfg.eps, cfg.mu_list, cfg.L, cfg.M, cfg.delta,
                       cfg.a_minus, cfg.a_plus, run_transition=cfg.layer_rates,
                       rtol=cfg.rtol, atol=cfg.atol)
    header = ("mu", "b", "eps", "label", "b1_exit", "escaped", "rate_num")
    table = [(r.mu, r.b0, r.eps, str(r.label), r.b1_exit, int(r.escaped), r.rate_num) for r in rows]
    _write(out / "layers.csv", _csv_text(header, table))
    bad = [r for r in rows if r.label.inner and r.escaped]
    for r in rows:
        print(f"mu={r.mu:+.2f} b={r.b0:+.4e} {str(r.label):>14s} b1={r.b1_exit:+.6f}"
              f"{'  escaped' if r.escaped else ''}")
    status = EXIT_CHECK if bad else EXIT_OK
    _summary(cfg, "layers", status, {"rows": [dict(zip(header, t)) for t in table]})
    return status


def cmd_fold(cfg: RunConfig) -> int:
    """Fold passage exponent fit; exit 1 if the slope is outside [0.60, 0.73]."""
    out = _out_dir(cfg)
    fit = fold_exponent_fit(cfg.fold_eps, cfg.A0, cfg.z_exit_depth, cfg.rtol, cfg.atol)
    table = [(e, o, a, z) for e, o, (a, z) in zip(fit.eps, fit.offsets, fit.jump_points)]
    _write(out / "fold.csv", _csv_text(("eps2", "offset", "jump_a2", "jump_z2"), table))
    for e, o, a, z in table:
        print(f"eps2={e:.3e} offset={o:.6e} jump=({a:.6f}, {z:.6f})")
    lo, hi = FOLD_SLOPE_RANGE
    status = EXIT_OK if lo <= fit.slope <= hi else EXIT_CHECK
    print(f"fitted exponent {fit.slope:.4f} (expected in [{lo}, {hi}])")
    _summary(cfg, "fold", status, {"slope": fit.slope, "intercept": fit.intercept,
                                   "jump_distance": fit.jump_distance(0)})
    return status


def cmd_chart(cfg: RunConfig, chart: str, point, to: str | None, round_trip: bool) -> int:
    """Chart field at a point, optionally the matching map and the round trip."""
    src = ChartId.parse(chart)
    if point is None or len(point) != 4:
        raise ConfigError("--point needs four comma-separated values r,c0,c1,c2")
    p = ChartPoint(src, point[0], tuple(point[1:]))
    payload = {"chart": src.value, "point": list(p.as_array())}
    field = chart_field(src, cfg.build_system())(p.as_array())
    payload["field"] = list(field)
    print(f"field  {src.value}: ({', '.join(_fmt(v) for v in field)})")
    if to is not None:
        q = matching_map(src, ChartId.parse(to), p)
        payload["matched"] = {"chart": q.chart.value, "point": list(q.as_array())}
        print(f"match  {q.chart.value}: ({', '.join(_fmt(v) for v in q.as_array())})")
    if round_trip:
        s = blow_down(p)
        back = blow_up(src, s)
        payload["blown_down"] = list(s.as_array())
        payload["round_trip"] = list(back.as_array())
        print(f"down   (a, b, z, eps) = ({', '.join(_fmt(v) for v in s.as_array())})")
        print(f"up     {src.value}: ({', '.join(_fmt(v) for v in back.as_array())})")
    _summary(cfg, "chart", EXIT_OK, payload)
    return EXIT_OK


def cmd_sdi(cfg: RunConfig, z_en: float | None, z_ex: float | None, jump: bool) -> int:
    """Closed form and quadrature of the slow divergence integral side by side."""
    if z_en is None or z_ex is None:
        ze, zx = endpoints_for_sections(cfg.a_minus, cfg.a_plus, cfg.b)
        z_en = ze if z_en is None else z_en
        z_ex = zx if z_ex is None else z_ex
    if jump:
        closed = sdi_slow_path(cfg.b, z_en, z_ex, "closed")
        quad = sdi_slow_path(cfg.b, z_en, z_ex, "quadrature")
    else:
        closed = sdi_closed(cfg.b, z_en, z_ex)
        quad = sdi_quadrature(cfg.b, z_en, z_ex)
    diff = abs(closed - quad)
    print(f"b={_fmt(cfg.b)} z_en={_fmt(z_en)} z_ex={_fmt(z_ex)}")
    print(f"closed     {closed:.12f}")
    print(f"quadrature {quad:.12f}")
    status = EXIT_OK if diff <= 1e-6 else EXIT_CHECK
    if status != EXIT_OK:
        print(f"mismatch {diff:.3e} exceeds 1e-6", file=sys.stderr)
    _summary(cfg, "sdi", status, {"b": cfg.b, "z_en": z_en, "z_ex": z_ex, "closed": closed,
                                  "quadrature": quad, "difference": diff})
    return status


def cmd_verify(cfg: RunConfig) -> int:
    """Run the acceptance suite; exit 0 iff every criterion passes."""
    _out_dir(cfg)
    results = acceptance.run_suite(cfg.criteria or None, target_shift=cfg.target_shift,
                                   seed=cfg.seed, L=cfg.L, M=cfg.M, echo=print)
    status = EXIT_OK if all(r.passed for r in results) else EXIT_CHECK
    payload = {"passed": status == EXIT_OK,
               "criteria": [{"number": r.number, "name": r.name, "passed": r.passed,
                             "wall_time": r.wall_time, "budget": r.budget, "details": r.details}
                            for r in results]}
    _summary(cfg, "verify", status, payload)
    return status


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_S = argparse.SUPPRESS


def _global_parent() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False, argument_default=_S)
    g.add_argument("--config", help="JSON config file; flags override its keys")
    g.add_argument("--out", help="output directory")
    g.add_argument("--rtol", type=float, help="relative integration tolerance")
    g.add_argument("--atol", type=float, help="absolute integration tolerance")
    g.add_argument("--seed", type=int, help="seed for randomized checks")
    g.add_argument("--system", choices=("principal", "eps-flat", "origin-flat", "expr"),
                   help="vector field: principal part, a stock flat perturbation or expressions")
    g.add_argument("--amplitude", type=float, help="amplitude of the stock flat perturbation")
    g.add_argument("--expr-file", dest="expr_file", help="file with f1 = ..., f2 = ..., f3 = ... lines")
    g.add_argument("--a-minus", dest="a_minus", type=float, help="entry section a = -a_minus")
    g.add_argument("--a-plus", dest="a_plus", type=float, help="exit section a = a_plus")
    g.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return g


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    parser = argparse.ArgumentParser(
        prog="cusplab", parents=[parent],
        description="Transition maps of slow-fast systems near a cusp point.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[parent], argument_default=_S,
                       help="integrate one orbit between the sections and write its CSV")
    p.add_argument("--b", type=float)
    p.add_argument("--z0", type=float)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("sweep", parents=[parent], argument_default=_S,
                       help="transition rate against eps, compared with the slow divergence integral")
    p.add_argument("--b", type=float)
    p.add_argument("--eps-list", dest="eps_list", type=_float_list)
    p.add_argument("--z-offset", dest="z_offset", type=float)

    p = sub.add_parser("layers", parents=[parent], argument_default=_S,
                       help="entry-chart coordinate b1 across the layers b = mu eps^(2/5)")
    p.add_argument("--eps", type=float)
    p.add_argument("--mu-list", dest="mu_list", type=_float_list)
    p.add_argument("--L", type=float)
    p.add_argument("--M", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--rates", dest="layer_rates", action="store_true",
                   help="also estimate the transition rate of every row")

    p = sub.add_parser("fold", parents=[parent], argument_default=_S,
                       help="fold passage exit offset against eps2 and its exponent")
    p.add_argument("--fold-eps", dest="fold_eps", type=_float_list)
    p.add_argument("--A0", type=float)
    p.add_argument("--z-exit-depth", dest="z_exit_depth", type=float)

    p = sub.add_parser("chart", parents=[parent], argument_default=_S,
                       help="chart field, matching map and round trip at a chart point")
    p.add_argument("chart", help="en, ex, eps, b+ or b-")
    p.add_argument("--point", type=_float_list, help="r,c0,c1,c2")
    p.add_argument("--to", help="target chart of the matching map")
    p.add_argument("--round-trip", dest="round_trip", action="store_true")

    p = sub.add_parser("sdi", parents=[parent], argument_default=_S,
                       help="slow divergence integral, closed form and quadrature")
    p.add_argument("--b", type=float)
    p.add_argument("--z-en", dest="z_en", type=float)
    p.add_argument("--z-ex", dest="z_ex", type=float)
    p.add_argument("--jump", action="store_true", help="follow the jump at the fold for b < 0")

    p = sub.add_parser("verify", parents=[parent], argument_default=_S,
                       help="run the acceptance suite")
    p.add_argument("--criteria", type=_int_list, help="subset, e.g. 1,3,5")
    p.add_argument("--target-shift", dest="target_shift", type=float,
                   help="offset added to the rate targets (a failing run for testing)")
    return parser


_COMMAND_ONLY = ("command", "config", "chart", "point", "to", "round_trip", "z_en", "z_ex",
                 "jump", "verbose")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args["command"]
    overrides = {k: v for k, v in args.items() if k not in _COMMAND_ONLY}
    try:
        cfg = load_config(args.get("config"), overrides)
        if command == "simulate":
            return cmd_simulate(cfg)
        if command == "sweep":
            return cmd_sweep(cfg)
        if command == "layers":
            return cmd_layers(cfg)
        if command == "fold":
            return cmd_fold(cfg)
        if command == "chart":
            return cmd_chart(cfg, args["chart"], args.get("point"), args.get("to"),
                             args.get("round_trip", False))
        if command == "sdi":
            return cmd_sdi(cfg, args.get("z_en"), args.get("z_ex"), args.get("jump", False))
        return cmd_verify(cfg)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CuspLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
