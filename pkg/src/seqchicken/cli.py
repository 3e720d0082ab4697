"""Command line front end: solve, curve, simulate, fit, serve.

All outputs are plain text or delimited files, deterministic for a fixed
seed; plotting is left to downstream tools.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from seqchicken import __version__
from seqchicken.fitting import (
    DEFAULT_UCRASH_GRID,
    filter_funnel,
    fit_ucrash,
    format_fit_summary,
    write_cumulative_csv,
    write_curve_csv,
)
from seqchicken.game import (
    GameParams,
    GameState,
    cumulative_no_yield,
    game_value,
    policy,
    yield_curve_model,
)
from seqchicken.records import read_records, write_records
from seqchicken.simulate import (
    Scenario,
    WALKERS,
    load_scenario,
    monte_carlo_stats,
    self_play_session,
)

DEFAULT_GRID_TEXT = ",".join(str(int(c)) for c in DEFAULT_UCRASH_GRID)


def _parse_ucrash_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad crash-cost list {text!r}")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("crash costs must be positive")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqchicken",
        description="Sequential-chicken crossing game: solver, simulator, fitter, service",
    )
    parser.add_argument("--version", action="version", version=f"seqchicken {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="game value and policy at a state")
    solve.add_argument("--ucrash", type=float, default=3.0, help="crash cost in seconds (default 3)")
    solve.add_argument("--turn-cost", type=float, default=1.0, help="per-turn time cost (default 1)")
    solve.add_argument("--y", type=int, required=True, help="vehicle boxes to collision")
    solve.add_argument("--x", type=int, required=True, help="pedestrian boxes to collision")

    curve = sub.add_parser("curve", help="model yield and survival curves per crash cost")
    curve.add_argument(
        "--ucrash",
        type=_parse_ucrash_list,
        default=list(DEFAULT_UCRASH_GRID),
        help=f"comma-separated crash costs (default {DEFAULT_GRID_TEXT})",
    )
    curve.add_argument("--turn-cost", type=float, default=1.0, help="per-turn time cost (default 1)")
    curve.add_argument("--kmax", type=int, default=15, help="largest pedestrian bin (default 15)")
    curve.add_argument("--ped-box", type=float, default=0.2, help="pedestrian box size in m (default 0.2)")
    curve.add_argument("--out", type=Path, default=None, help="write CSV here instead of stdout")

    sim = sub.add_parser("simulate", help="discrete episodes or continuous crossings")
    sim.add_argument("--kind", choices=["episodes", "crossings"], default="episodes")
    sim.add_argument("--ucrash", type=float, default=3.0, help="crash cost in seconds (default 3)")
    sim.add_argument("--turn-cost", type=float, default=1.0, help="per-turn time cost (default 1)")
    sim.add_argument("--y", type=int, default=12, help="episodes: vehicle start boxes (default 12)")
    sim.add_argument("--x", type=int, default=12, help="episodes: pedestrian start boxes (default 12)")
    sim.add_argument("--n", type=int, default=1000, help="episode count or crossing count (default 1000)")
    sim.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    sim.add_argument(
        "--walker",
        choices=sorted(WALKERS),
        default="model",
        help="crossings: pedestrian policy (default model)",
    )
    sim.add_argument("--config", type=Path, default=None, help="crossings: scenario YAML file")
    sim.add_argument("--out", type=Path, default=None, help="crossings: write records JSONL here")

    fit = sub.add_parser("fit", help="fit the crash cost to a crossing log")
    fit.add_argument("--in", dest="infile", type=Path, required=True, help="crossing log (JSONL)")
    fit.add_argument(
        "--ucrash",
        type=_parse_ucrash_list,
        default=list(DEFAULT_UCRASH_GRID),
        help=f"comma-separated candidate grid (default {DEFAULT_GRID_TEXT})",
    )
    fit.add_argument("--turn-cost", type=float, default=1.0, help="per-turn time cost (default 1)")
    fit.add_argument("--config", type=Path, default=None, help="scenario YAML for geometry")
    fit.add_argument("--out", type=Path, default=None, help="write yield-curve CSV here")
    fit.add_argument("--cumulative-out", type=Path, default=None, help="write survival-curve CSV here")
    fit.add_argument("--summary-out", type=Path, default=None, help="write the fit summary here")

    serve = sub.add_parser("serve", help="run the live crossing service")
    serve.add_argument("--port", type=int, default=8000, help="listen port (default 8000)")
    serve.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    serve.add_argument("--data-dir", type=Path, default=Path("sessions"), help="session store directory")
    serve.add_argument("--frontend", type=Path, default=None, help="static web client directory")
    return parser


def _cmd_solve(args) -> int:
    params = GameParams(crash_cost=args.ucrash, turn_cost=args.turn_cost,
                        max_y=max(64, args.y + 2), max_x=max(64, args.x + 2))
    state = GameState(args.y, args.x)
    value = game_value(state, params)
    eq = policy(state, params)
    print(f"state: (y={args.y}, x={args.x})  ucrash={args.ucrash:g}s  turn_cost={args.turn_cost:g}s")
    print(f"value: u_vehicle={value.u_vehicle:.9f}  u_pedestrian={value.u_pedestrian:.9f}")
    print(
        f"equilibrium: P(SLOW) vehicle={eq.p_vehicle_slow:.9f}  "
        f"pedestrian={eq.p_pedestrian_slow:.9f}  kind={eq.kind.value}"
    )
    k_top = min(args.y, args.x)
    if k_top >= 2:
        print()
        print("policy table (symmetric states):")
        print("k  p_vehicle_slow  p_pedestrian_slow  u_vehicle  u_pedestrian")
        for k in range(2, k_top + 1):
            e = policy(GameState(k, k), params)
            print(
                f"{k:<3d} {e.p_vehicle_slow:<15.9f} {e.p_pedestrian_slow:<18.9f} "
                f"{e.value.u_vehicle:<10.4f} {e.value.u_pedestrian:.4f}"
            )
    return 0


def _cmd_curve(args) -> int:
    lines = []
    header = ["k", "distance_m"]
    curves = {}
    cumulatives = {}
    for c in args.ucrash:
        params = GameParams(crash_cost=c, turn_cost=args.turn_cost,
                            max_y=max(64, args.kmax + 2), max_x=max(64, args.kmax + 2))
        curve = yield_curve_model(params, args.kmax)
        curves[c] = dict(curve)
        cumulatives[c] = dict(cumulative_no_yield(sorted(curve, reverse=True)))
        label = str(int(c)) if float(c).is_integer() else repr(c)
        header.append(f"yield_C{label}")
    for c in args.ucrash:
        label = str(int(c)) if float(c).is_integer() else repr(c)
        header.append(f"S_C{label}")
    lines.append(",".join(header))
    for k in range(2, args.kmax + 1):
        row = [str(k), f"{(k + 0.5) * args.ped_box:.10g}"]
        row += [f"{curves[c][k]:.10g}" for c in args.ucrash]
        row += [f"{cumulatives[c][k]:.10g}" for c in args.ucrash]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
        print(f"wrote {args.out} ({args.kmax - 1} bins, {len(args.ucrash)} candidates)")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "episodes":
        params = GameParams(crash_cost=args.ucrash, turn_cost=args.turn_cost,
                            max_y=max(64, args.y + 2), max_x=max(64, args.x + 2))
        stats = monte_carlo_stats(params, args.y, args.x, args.n, rng)
        value = game_value(GameState(args.y, args.x), params)
        out = {
            "kind": "episodes",
            "start": {"y": args.y, "x": args.x},
            "ucrash": args.ucrash,
            "turn_cost": args.turn_cost,
            "seed": args.seed,
            "n": stats.n,
            "crash_rate": stats.crash_rate,
            "pedestrian_win_rate": stats.pedestrian_win_rate,
            "vehicle_win_rate": stats.vehicle_win_rate,
            "mean_utilities": list(stats.mean_utilities),
            "se_utilities": list(stats.se_utilities),
            "se_crash_rate": stats.se_crash_rate,
            "se_pedestrian_win_rate": stats.se_pedestrian_win_rate,
            "game_value": list(value),
        }
        print(json.dumps(out, indent=2))
        return 0
    scenario = load_scenario(args.config) if args.config else Scenario()
    scenario = replace(scenario, ucrash=args.ucrash, turn_cost=args.turn_cost)
    records = self_play_session(
        scenario, rng, walker=args.walker, session_id=f"sim-{args.seed}", n_crossings=args.n
    )
    if args.out is not None:
        n = write_records(args.out, records)
        print(f"wrote {n} records for {args.n} crossings to {args.out}")
    else:
        for r in records:
            print(r.to_json_line())
    return 0


def _cmd_fit(args) -> int:
    scenario = load_scenario(args.config) if args.config else Scenario()
    geom = scenario.geometry
    records = list(read_records(args.infile))
    funnel = filter_funnel(records, geom)
    params = GameParams(crash_cost=1.0, turn_cost=args.turn_cost)
    result = fit_ucrash(funnel.points, grid=args.ucrash, params=params)
    summary = format_fit_summary(result, funnel)
    sys.stdout.write(summary)
    if args.summary_out is not None:
        args.summary_out.write_text(summary, encoding="utf-8")
    if args.out is not None:
        write_curve_csv(args.out, result, geom)
    if args.cumulative_out is not None:
        write_cumulative_csv(args.cumulative_out, result, geom)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from seqchicken.service import create_app

    app = create_app(args.data_dir, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "curve": _cmd_curve,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
