"""Command-line front end: ``vgplan plan | simulate | benchmark``.

Exit codes: 0 success, 1 input error, 2 no path found (``plan`` only).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .extraction import ExtractionParams
from .geometry import Point2
from .planner import (
    ATTEMPTABLE, MODES, GraphFormatError, NoPath, PlanningError, PlanRequest, load_graph, plan,
)
from .render import render_svg
from .scenarios import builtin_scenarios
from .sim import (
    ACCUMULATE, PLANNERS, RESET, PlannerParams, SimConfig, World, WorldFormatError, load_world,
    metrics_csv, run_navigation,
)
from .vgraph import MergeParams, VGraph

BUILTIN_PREFIX = "builtin:"
SUMMARY_COLUMNS = ["map", "planner", "setting", "runs", "failed", "travel_time", "distance",
                   "mean_search_ms", "max_search_ms", "replans"]


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1); exit 2 is reserved for "no path"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# shared option handling


def _add_params(p: argparse.ArgumentParser) -> None:
    ext, merge, cfg = ExtractionParams(), MergeParams(), SimConfig()
    p.add_argument("--resolution", type=float, default=ext.resolution, help="raster cell size [m]")
    p.add_argument("--zeta-deg", type=float, default=math.degrees(ext.zeta), help="inner-angle threshold [deg]")
    p.add_argument("--assoc-dist", type=float, default=merge.assoc_dist, help="vertex association distance [m]")
    p.add_argument("--long-edge", type=float, default=merge.long_edge_threshold,
                   help="edges longer than this must leave both ends in escaping directions [m]")
    p.add_argument("--replan-rate", type=float, default=cfg.replan_rate, help="replans per second [Hz]")
    p.add_argument("--speed", type=float, default=cfg.vehicle_speed, help="vehicle speed [m/s]")
    p.add_argument("--seed", type=int, default=cfg.rng_seed, help="sensor-noise seed")
    p.add_argument("--noise", type=float, default=cfg.noise_sigma, help="range noise sigma [m]")
    p.add_argument("--setting", choices=(RESET, ACCUMULATE), default=cfg.setting)
    p.add_argument("--mode", choices=MODES, default=ATTEMPTABLE)


def _params(ns) -> tuple[PlannerParams, SimConfig]:
    try:
        ext = ExtractionParams(resolution=ns.resolution, zeta=math.radians(ns.zeta_deg))
        merge = MergeParams(assoc_dist=ns.assoc_dist, long_edge_threshold=ns.long_edge)
        cfg = SimConfig(replan_rate=ns.replan_rate, vehicle_speed=ns.speed, rng_seed=ns.seed,
                        noise_sigma=ns.noise, setting=ns.setting, mode=ns.mode)
    except ValueError as exc:
        raise InputError(f"bad parameter: {exc}") from None
    return PlannerParams(ext, merge), cfg


def _point(vals: Sequence[float], what: str) -> Point2:
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what} must be finite")
    return Point2(float(vals[0]), float(vals[1]))


def _read_world(spec: str) -> tuple[World, Point2 | None, tuple[Point2, ...]]:
    """World plus default start/goals; ``builtin:<name>`` selects a bundled scenario."""
    if spec.startswith(BUILTIN_PREFIX):
        name = spec[len(BUILTIN_PREFIX):]
        scenarios = builtin_scenarios()
        if name not in scenarios:
            raise InputError(f"unknown builtin scenario {name!r}; choose from {', '.join(sorted(scenarios))}")
        s = scenarios[name]
        return s.world, s.start, s.goals
    try:
        return load_world(spec), None, ()
    except OSError as exc:
        raise InputError(f"{spec}: {exc.strerror or exc}") from None
    except WorldFormatError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# plan


def cmd_plan(ns, out) -> int:
    params, _ = _params(ns)
    start, goal = _point(ns.start, "start"), _point(ns.goal, "goal")
    if ns.graph:
        try:
            data = Path(ns.graph).read_bytes()
        except OSError as exc:
            raise InputError(f"{ns.graph}: {exc.strerror or exc}") from None
        try:
            graph = load_graph(data, params.merge)
        except GraphFormatError as exc:
            raise InputError(f"{ns.graph}:{exc}") from None
    elif ns.map:
        world, _, _ = _read_world(ns.map)
        graph = VGraph.from_polygons(world.obstacles, params.merge)
    else:
        raise InputError("need a map file or --graph")
    t0 = time.perf_counter()
    try:
        path = plan(PlanRequest(start, goal, ns.mode), graph)
    except NoPath as exc:
        print(f"no_path: {exc.code}", file=sys.stderr)
        return 2
    except PlanningError as exc:
        raise InputError(str(exc)) from None
    ms = (time.perf_counter() - t0) * 1e3
    for k, (x, y) in enumerate(path.waypoints):
        print(f"waypoint {k} {x:.6f} {y:.6f}", file=out)
    print(f"length {path.length:.6f}", file=out)
    print(f"via_unknown {int(path.via_unknown)}", file=out)
    print(f"search_ms {ms:.3f}", file=out)
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(ns, out) -> int:
    params, cfg = _params(ns)
    world, start, goals = _read_world(ns.world)
    if ns.start is not None:
        start = _point(ns.start, "start")
    if ns.goal:
        goals = tuple(_point(g, "goal") for g in ns.goal)
    if start is None or not goals:
        raise InputError("need --start and at least one --goal")
    try:
        m = run_navigation(world, goals, cfg, params, start=start, planner=ns.planner)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = metrics_csv([m], timing=ns.timing)
    if ns.out:
        Path(ns.out).write_text(text)
    else:
        out.write(text)
    if ns.render:
        graph = m.navigator.graph if isinstance(getattr(m.navigator, "graph", None), VGraph) else None
        svg = render_svg(world, graph, m.path_executed, start, goals)
        Path(ns.render).write_text(svg)
    return 0


# ---------------------------------------------------------------------------
# benchmark


def _load_suite(path: str) -> list[dict]:
    """Suite file: ``{"maps": [{"world", "start"?, "goals"?, "planners"?, "settings"?, "seeds"?}]}``."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None
    maps = raw.get("maps") if isinstance(raw, dict) else raw
    if not isinstance(maps, list) or not maps:
        raise InputError(f"{path}: suite lists no maps")
    cells = []
    for k, entry in enumerate(maps):
        where = f"{path}: maps[{k}]"
        if not isinstance(entry, dict) or "world" not in entry:
            raise InputError(f"{where}: needs a 'world' entry")
        spec = str(entry["world"])
        if not spec.startswith(BUILTIN_PREFIX) and not Path(spec).is_absolute():
            spec = str(Path(path).parent / spec)  # relative to the suite file
        world, start, goals = _read_world(spec)
        try:
            if "start" in entry:
                start = _point(entry["start"], "start")
            if "goals" in entry:
                goals = tuple(_point(g, "goal") for g in entry["goals"])
        except (TypeError, IndexError, ValueError):
            raise InputError(f"{where}: points must be [x, y] pairs") from None
        if start is None or not goals:
            raise InputError(f"{where}: needs start and goals")
        planners = entry.get("planners", list(PLANNERS))
        settings = entry.get("settings", [RESET, ACCUMULATE])
        seeds = entry.get("seeds", [0])
        bad = [p for p in planners if p not in PLANNERS] + [s for s in settings if s not in (RESET, ACCUMULATE)]
        if bad:
            raise InputError(f"{where}: unknown planner or setting {bad[0]!r}")
        name = entry.get("name") or world.name or f"map{k}"
        for planner in planners:
            for setting in settings:
                for seed in seeds:
                    cells.append(dict(map=name, world=world, start=start, goals=goals,
                                      planner=planner, setting=setting, seed=int(seed)))
    return cells


def _run_cell(cell: dict, params: PlannerParams, cfg: SimConfig):
    cfg = replace(cfg, setting=cell["setting"], rng_seed=cell["seed"])
    try:
        return run_navigation(cell["world"], cell["goals"], cfg, params, start=cell["start"],
                              planner=cell["planner"]), ""
    except Exception as exc:  # a failed cell is reported, the suite goes on
        return None, f"{type(exc).__name__}: {exc}"


def _summarize(cells: list[dict], results: list) -> list[list]:
    groups: dict[tuple, list] = {}
    for cell, res in zip(cells, results):
        groups.setdefault((cell["map"], cell["planner"], cell["setting"]), []).append(res)
    rows = []
    for (name, planner, setting), runs in groups.items():
        ok = [m for m, err in runs if m is not None]
        failed = sum(1 for m, err in runs if m is None or not m.success)
        search = [t for m in ok for t in m.search_times]
        rows.append([
            name, planner, setting, len(runs), failed,
            sum(m.travel_time for m in ok), sum(m.distance_traveled for m in ok),
            1e3 * sum(search) / len(search) if search else float("nan"),
            1e3 * max(search) if search else float("nan"),
            sum(m.replan_count for m in ok),
        ])
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.3f}"
    return str(v)


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(header)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = ["  ".join(c.rjust(w) if k > 2 else c.ljust(w) for k, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def cmd_benchmark(ns, out) -> int:
    params, cfg = _params(ns)
    cells = _load_suite(ns.suite)
    if ns.jobs > 1:
        with ProcessPoolExecutor(ns.jobs) as pool:
            results = list(pool.map(_run_cell, cells, [params] * len(cells), [cfg] * len(cells)))
    else:
        results = [_run_cell(c, params, cfg) for c in cells]
    for cell, (m, err) in zip(cells, results):
        if err:
            print(f"failed: {cell['map']} {cell['planner']} {cell['setting']} seed {cell['seed']}: {err}",
                  file=sys.stderr)
    rows = _summarize(cells, results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerows([[_fmt(v) for v in r] for r in rows])
    if ns.out:
        Path(ns.out).write_text(buf.getvalue())
    if ns.runs_csv:
        Path(ns.runs_csv).write_text(metrics_csv([m for m, _ in results if m is not None], timing=True))
    out.write(format_table(SUMMARY_COLUMNS, rows))
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vgplan", description="Visibility-graph navigation planner.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="shortest path on a fully known map or a saved graph")
    p.add_argument("map", nargs="?", help="world file (or builtin:<name>)")
    p.add_argument("--graph", help="saved graph file used instead of the map polygons")
    p.add_argument("--start", type=float, nargs=2, required=True, metavar=("X", "Y"))
    p.add_argument("--goal", type=float, nargs=2, required=True, metavar=("X", "Y"))
    _add_params(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="navigate a world and write per-replan metrics as CSV")
    p.add_argument("world", help="world file (or builtin:<name>)")
    p.add_argument("--start", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--goal", type=float, nargs=2, action="append", metavar=("X", "Y"))
    p.add_argument("--planner", choices=PLANNERS, default="vgraph")
    p.add_argument("--out", help="CSV file (default: standard output)")
    p.add_argument("--render", help="write an SVG of world, graph and trajectory")
    p.add_argument("--timing", action="store_true", help="add wall-clock columns (not reproducible)")
    _add_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run a JSON suite and print a summary table")
    p.add_argument("suite", help="JSON suite file")
    p.add_argument("--out", help="summary CSV file")
    p.add_argument("--runs-csv", help="per-replan CSV of every run, with timing columns")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_params(p)
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
