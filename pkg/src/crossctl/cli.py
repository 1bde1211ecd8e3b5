"""Command-line entry point: ``crossctl simulate|compare|plot``.

Exit status 0 means success, 1 a bad input file, 2 a run whose safety audit found a violation.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import List, Optional

from .config import ConfigError, config_to_scenario, load_config
from .outputs import atomic_write_text, commit_all, metrics, metrics_json, read_csv, write_run
from .plot import PlotError, render_svg, series_from_rows, windows_from_rows
from .simulator import BASELINE, PROPOSED, Scenario, run

EXIT_OK, EXIT_INPUT, EXIT_UNSAFE = 0, 1, 2
ALPHA_SWEEP = (0.25, 1.5)


def _err(msg: str) -> None:
    print(f"crossctl: error: {msg}", file=sys.stderr)


def _load(path, **overrides) -> Scenario:
    return config_to_scenario(load_config(path), **overrides)


def cmd_simulate(args) -> int:
    try:
        sc = _load(args.scenario, dt=args.dt, controller=args.controller)
    except ConfigError as exc:
        _err(f"{args.scenario}: {exc}")
        return EXIT_INPUT
    result = run(sc)
    paths = write_run(result, args.out)
    a = result.audit
    print(f"{sc.name}: {sc.controller}, {len(result.logs)} vehicles, J_u mean {result.J_u_mean:.4f}, "
          f"J_alpha mean {result.J_alpha_mean:.4f}, min gap {a.min_gap:.4f} m")
    for p in paths.values():
        print(f"  wrote {p}")
    if not a.clean:
        for line in a.details:
            print(f"  audit: {line}", file=sys.stderr)
        return EXIT_UNSAFE
    return EXIT_OK


def with_alpha(sc: Scenario, alpha: float, controller: str) -> Scenario:
    vehicles = tuple(dataclasses.replace(v, params=dataclasses.replace(v.params, alpha=alpha))
                     for v in sc.vehicles)
    return dataclasses.replace(sc, vehicles=vehicles, controller=controller)


def compare(sc: Scenario, alphas=ALPHA_SWEEP) -> List[dict]:
    """One row per (alpha, controller): mean costs and mean compute time per call."""
    rows = []
    for alpha in alphas:
        pair = {}
        for ctrl in (BASELINE, PROPOSED):
            pair[ctrl] = run(with_alpha(sc, alpha, ctrl))
        plan_s = pair[BASELINE].compute_stats["mean_s"]
        for ctrl, res in pair.items():
            st = res.compute_stats
            rows.append({
                "alpha": alpha,
                "controller": ctrl,
                "J_u": res.J_u_mean,
                "J_alpha": res.J_alpha_mean,
                "compute_unit": "per plan" if ctrl == BASELINE else "per step",
                "compute_mean_s": st["mean_s"],
                "compute_min_s": st["min_s"],
                "compute_max_s": st["max_s"],
                "speedup": plan_s / st["mean_s"] if ctrl == PROPOSED else None,
                "clean": res.audit.clean,
                "audit": metrics(res)["audit"],
            })
    return rows


def format_table(rows) -> str:
    head = f"{'alpha':>6}  {'controller':<10} {'J_u':>10} {'J_alpha':>12} {'compute':>12} {'unit':<9} {'speedup':>9}"
    out = [head, "-" * len(head)]
    for r in rows:
        sp = f"{r['speedup']:.0f}x" if r["speedup"] is not None else ""
        out.append(f"{r['alpha']:>6g}  {r['controller']:<10} {r['J_u']:>10.3f} {r['J_alpha']:>12.3f} "
                   f"{r['compute_mean_s'] * 1e6:>10.2f}us {r['compute_unit']:<9} {sp:>9}")
    return "\n".join(out)


def cmd_compare(args) -> int:
    try:
        sc = _load(args.scenario)
    except ConfigError as exc:
        _err(f"{args.scenario}: {exc}")
        return EXIT_INPUT
    rows = compare(sc)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "comparison.json")
    commit_all({path: metrics_json({"scenario": sc.name, "seed": sc.seed, "rows": rows})})
    print(format_table(rows))
    print(f"wrote {path}")
    unsafe = [r for r in rows if not r["clean"]]
    for r in unsafe:
        for line in r["audit"]["details"]:
            print(f"  audit ({r['controller']}, alpha={r['alpha']}): {line}", file=sys.stderr)
    return EXIT_UNSAFE if unsafe else EXIT_OK


def cmd_plot(args) -> int:
    try:
        traj = read_csv(args.traj)
        wins = read_csv(args.windows) if args.windows else []
        series = series_from_rows(traj)
        svg = render_svg(series, windows_from_rows(wins), title=os.path.basename(args.traj))
    except (OSError, PlotError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    atomic_write_text(args.out, svg)
    print(f"wrote {args.out} ({len(series)} vehicles)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crossctl", description="Intersection crossing simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario and write trajectory, window and metrics files")
    s.add_argument("--scenario", required=True, help="scenario YAML file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--dt", type=float, help="integration step in seconds (overrides the file)")
    s.add_argument("--controller", choices=(PROPOSED, BASELINE), help="overrides the file")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="baseline vs proposed for alpha in {0.25, 1.5}")
    c.add_argument("--scenario", required=True, help="scenario YAML file")
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="position-time SVG of a trajectory CSV")
    p.add_argument("--traj", required=True, help="trajectory CSV from simulate")
    p.add_argument("--windows", help="window log CSV from simulate")
    p.add_argument("--out", required=True, help="SVG file to write")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "dt", None) is not None and not args.dt > 0:
        _err("--dt must be > 0")
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
