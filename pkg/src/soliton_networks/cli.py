"""Command line: ``solve`` boundary rays, ``flow`` a solution forward, ``render`` a document.

Examples::

    soliton-networks solve --rays 0,2.0944,4.1888 --out-dir out/triod
    soliton-networks flow out/triod/solution_00.json --times 0.5,1,2 --check --out-dir out/triod/flow
    soliton-networks render out/triod/solution_00.json --chart blowup --out triod.svg
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .flow import FlowError, WorldSheet, blowup_lift, direct_flow_check, evolve, vertex_trajectories
from .io import DocumentError, load_network, save_network, write_csv, write_manifest
from .plotting import CHARTS, deviation_figure, frames_figure, network_figure, save_svg, solutions_figure
from .steiner.relax import RelaxConfig, RelaxError, solve_expander
from .steiner.topology import MODES, TopologyError

log = logging.getLogger("soliton_networks")

# --tol keys and the configuration fields they set
TOL_KEYS = {
    "balance": "balance_tol",
    "angle": "angle_tol",
    "residual": "residual_tol",
    "polish": "polish_tol",
    "collision": "collision",
    "dedup": "dedup",
}


class UsageError(ValueError):
    pass


def parse_floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{what}: need a comma-separated list of finite numbers")
    return vals


def parse_tolerances(items: list[str] | None) -> dict[str, float]:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or key not in TOL_KEYS:
            raise UsageError(f"--tol expects KEY=VALUE with KEY in {sorted(TOL_KEYS)}, got {item!r}")
        out[TOL_KEYS[key]] = float(val)
    return out


def relax_config(args) -> RelaxConfig:
    kw = parse_tolerances(args.tol)
    if args.R_schedule:
        sched = tuple(parse_floats(args.R_schedule, "--R-schedule"))
        if any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] <= 0:
            raise UsageError("--R-schedule must be positive and increasing")
        kw["schedule"] = sched
    return RelaxConfig(**kw)


def _config_record(rays, mode, config: RelaxConfig) -> dict:
    rec = {"rays": list(rays), "mode": mode}
    for f in dataclasses.fields(config):
        val = getattr(config, f.name)
        rec[f.name] = list(val) if isinstance(val, tuple) else val
    return rec


# -- solve ----------------------------------------------------------------------------


def cmd_solve(args) -> int:
    rays = parse_floats(args.rays, "--rays")
    config = relax_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sol = solve_expander(rays, args.mode, config, workers=args.workers)
    tol = {"balance_tol": config.balance_tol, "angle_tol": config.angle_tol,
           "residual_tol": config.residual_tol}
    written = []
    rows = []
    for i, net in enumerate(sol.networks):
        name = f"solution_{i:02d}.json"
        save_network(net, out / name, far_radius=config.far_radius, tolerances=tol)
        written.append(name)
        d = net.diagnostics
        rows.append([i, net.topology.label(), net.topology.is_connected, net.topology.n_interior,
                     d["renormalized_length"], d["max_soliton_residual"], d["max_balance_defect"],
                     d["max_angle_error"], d["hull_check"],
                     " ".join(repr(float(x)) for x in np.asarray(net.vertex_positions).ravel())])
    write_csv(out / "solutions.csv", ["index", "topology", "connected", "n_interior", "renormalized_length",
                                      "max_soliton_residual", "max_balance_defect", "max_angle_error",
                                      "hull_check", "vertices"], rows)
    fails = []
    for res in sol.failures:
        reason = res.error or "; ".join(res.network.diagnostics.get("failures", []))
        fails.append([res.topology.label(), reason])
    write_csv(out / "failures.csv", ["topology", "reason"], fails)
    written += ["solutions.csv", "failures.csv"]
    if sol.networks:
        save_svg(solutions_figure(sol.networks), out / "solutions.svg")
        written.append("solutions.svg")
    ok = bool(sol.networks) if args.mode == "matchings" else bool(sol.connected)
    write_manifest(out / "manifest.json", "solve", _config_record(rays, args.mode, config), written,
                   counts={"topologies": len(sol.results), "solutions": len(sol.networks),
                           "connected": len(sol.connected), "failed": len(sol.failures),
                           "duplicates": len(sol.duplicates)})
    print(f"{len(sol.networks)} solution(s) ({len(sol.connected)} connected), "
          f"{len(sol.failures)} topology failure(s); written to {out}")
    return 0 if ok else 1


# -- flow -----------------------------------------------------------------------------


def cmd_flow(args) -> int:
    base = load_network(args.document)
    if base.status != "regular":
        raise DocumentError("the document does not describe a regular network")
    times = parse_floats(args.times, "--times")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = [evolve(base, t) for t in times]
    rows = []
    for fr in frames:
        for ei, e in enumerate(fr.network.edges):
            for x, y in e.arc.points():
                rows.append([fr.t, ei, float(x), float(y)])
    write_csv(out / "frames.csv", ["t", "edge", "x", "y"], rows)
    traj = []
    for tr in vertex_trajectories(base):
        for t in times:
            x, y = tr.at(t)
            traj.append([t, tr.vertex, float(x), float(y)])
    write_csv(out / "trajectories.csv", ["t", "vertex", "x", "y"], traj)
    save_svg(frames_figure(frames), out / "frames.svg")
    written = ["frames.csv", "trajectories.csv", "frames.svg"]
    extra = {}
    if args.check:
        rep = direct_flow_check(base, args.t_end, h=args.h)
        header = ["t", "deviation"] + [f"{c}{v}" for v in base.topology.interior for c in "xy"]
        write_csv(out / "deviation.csv", header, rep.rows())
        save_svg(deviation_figure(rep), out / "deviation.svg")
        written += ["deviation.csv", "deviation.svg"]
        extra["max_deviation"] = rep.max_deviation
        print(f"direct flow check: max normalised deviation {rep.max_deviation:.3e} (h = {args.h:g})")
    cfg = {"document": str(args.document), "times": times, "check": bool(args.check),
           "t_end": args.t_end, "h": args.h}
    write_manifest(out / "manifest.json", "flow", cfg, written, **extra)
    return 0


# -- render ---------------------------------------------------------------------------


def cmd_render(args) -> int:
    if args.chart not in CHARTS:
        raise UsageError(f"unknown chart {args.chart!r}")
    net = load_network(args.document)
    lift = None
    if args.chart == "blowup":
        lift = blowup_lift(WorldSheet(net, np.array([0.5, 1.0, 2.0])))
    fig = network_figure(net, args.chart, lift=lift)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_svg(fig, path)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soliton-networks", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="find all regular networks for given boundary rays")
    s.add_argument("--rays", required=True, help="comma-separated angles in radians, counter-clockwise")
    s.add_argument("--mode", choices=MODES, default="connected")
    s.add_argument("--tol", action="append", metavar="KEY=VALUE",
                   help=f"override a tolerance; keys: {', '.join(sorted(TOL_KEYS))}")
    s.add_argument("--R-schedule", dest="R_schedule", help="continuation radii, e.g. 4,6,8,12")
    s.add_argument("--workers", type=int, default=1, help="processes for the topology sweep")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("flow", help="evolve a solution document and optionally check it by direct flow")
    f.add_argument("document")
    f.add_argument("--times", default="0.5,1,2")
    f.add_argument("--check", action="store_true", help="run the front-tracking comparison")
    f.add_argument("--t-end", dest="t_end", type=float, default=2.0)
    f.add_argument("--h", type=float, default=0.02, help="mesh size of the direct flow")
    f.add_argument("--out-dir", required=True)
    f.set_defaults(func=cmd_flow)

    r = sub.add_parser("render", help="draw a solution document as SVG")
    r.add_argument("document")
    r.add_argument("--chart", default="ball", help=f"one of {', '.join(CHARTS)}")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, RelaxError, TopologyError, DocumentError, FlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
