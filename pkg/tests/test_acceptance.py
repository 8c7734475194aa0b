"""Acceptance suite: one test per criterion, each printing a pass/fail line."""
import math
import time

import numpy as np
import shapely
from scipy.spatial import cKDTree

from oracles import full_visibility_length, random_map
from vgplan.baselines import DStarLite, astar_cells, dstar_lite_plan
from vgplan.extraction import ExtractionParams, SensorScan, extract_polygons
from vgplan.geometry import Point2, Polygon, inner_angles
from vgplan.planner import (
    NON_ATTEMPTABLE, GraphFormatError, NoPath, PlanRequest, TerminalIsolated, load_graph, plan, save_graph,
    update_space_labels,
)
from vgplan.scenarios import dead_end_suite, dead_end_worlds, forest_world, maze_world, pedestrian_corridor, rect
from vgplan.sim import (
    ACCUMULATE, RESET, GraphNavigator, SimConfig, World, run_navigation, simulate_scan,
)
from vgplan.vgraph import ACTIVE, BLOCKED, UNKNOWN, VISIBILITY, MergeParams, VGraph, robust_update


def test_criterion_01_optimality(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        polys, a, b = random_map(seed)
        assert len(polys) <= 8 and sum(len(p) for p in polys) <= 60
        got = plan(PlanRequest(a, b), VGraph.from_polygons(polys)).length
        ref = full_visibility_length(polys, a, b)
        worst = max(worst, abs(got - ref) / ref)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    verdict(1, ok, f"20 maps, max relative error {worst:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_reduction_soundness(verdict):
    worst, smaller, multi = 0.0, 0, 0
    for seed in range(20):
        polys, a, b = random_map(seed, convex=True)
        red = VGraph.from_polygons(polys)
        full = VGraph.from_polygons(polys, MergeParams(long_edge_threshold=math.inf))
        lr = plan(PlanRequest(a, b), red).length
        lf = plan(PlanRequest(a, b), full).length
        worst = max(worst, abs(lr - lf) / lf)
        if len(polys) >= 2:
            multi += 1
            smaller += len(red.edges) < len(full.edges)
    ok = worst <= 1e-9 and smaller == multi
    verdict(2, ok, f"max relative gap {worst:.1e}, reduced graph smaller on {smaller}/{multi} multi-polygon maps")
    assert ok


def test_criterion_03_incremental_equals_batch(verdict):
    S = 30.0
    polys = (rect(3, 3, 6, 5, 0), rect(0.55 * S, 0.3 * S, 0.55 * S + 2, 0.3 * S + 4, 1),
             Polygon(((0.3 * S, 0.7 * S), (0.3 * S + 3, 0.65 * S), (0.3 * S + 2, 0.7 * S + 3)), id=2))
    world = World((0, 0, S, S), polys)
    cfg = SimConfig()
    nav = GraphNavigator(cfg)
    tour = [(x, y) for y in np.linspace(1.5, S - 1.5, 4) for x in np.linspace(1.5, S - 1.5, 4)]
    for k, p in enumerate(tour * 2):
        pose = Point2(*p)
        if not world.collides(pose):
            nav.observe(simulate_scan(world, pose, cfg, 0.0, None, k), pose)
    inc = nav.graph
    scan = SensorScan(nav.memory.points, Point2(S / 2, S / 2))
    batch = VGraph.from_polygons(extract_polygons(scan, ExtractionParams(local_extent=S + 20)))
    gi, bi = sorted(inc.vertices), sorted(batch.vertices)
    d_ib, j_ib = cKDTree(batch.positions(bi)).query(inc.positions(gi))
    d_bi, _ = cKDTree(inc.positions(gi)).query(batch.positions(bi))
    to_batch = {gi[k]: bi[j_ib[k]] for k in range(len(gi))}
    boundary = {vid for vid, v in inc.vertices.items() if v.boundary}
    ie = {tuple(sorted((to_batch[e.a], to_batch[e.b]))) for e in inc.edges.values()
          if e.status == ACTIVE and not ({e.a, e.b} & boundary)}
    bb = {vid for vid, v in batch.vertices.items() if v.boundary}
    be = {k for k, e in batch.edges.items() if e.status == ACTIVE and not (set(k) & bb)}
    tol = inc.params.assoc_dist
    ok = len(gi) == len(bi) and d_ib.max() <= tol and d_bi.max() <= tol and ie == be
    verdict(3, ok, f"{len(gi)} vs {len(bi)} vertices, max offset {max(d_ib.max(), d_bi.max()):.3f} m, "
                   f"active edges {len(ie)} vs {len(be)} ({len(ie ^ be)} differ)")
    assert ok


def test_criterion_04_dead_end_escape(verdict):
    details, ok = [], True
    for sc in dead_end_worlds():
        m = run_navigation(sc.world, sc.goals, SimConfig(), start=sc.start)
        ok &= m.success and m.replan_count > 1
        details.append(f"{sc.name} {m.goals[0].status} after {m.replan_count} replans")
        # nothing observed yet: strict mode has no free vertex to start from
        strict = GraphNavigator(SimConfig(mode=NON_ATTEMPTABLE))
        out = strict.plan(sc.start, sc.goals[0])
        prior = VGraph.from_polygons(sc.world.obstacles, label=UNKNOWN)
        try:
            plan(PlanRequest(sc.start, sc.goals[0], NON_ATTEMPTABLE), prior)
            prior_code = "planned"
        except TerminalIsolated as exc:
            prior_code = exc.code
        ok &= out.path is None and out.code == "terminal_isolated" and prior_code == "terminal_isolated"
        details.append(f"strict {out.code}/{prior_code}")
    verdict(4, ok, ", ".join(details))
    assert ok


def test_criterion_05_accumulate_not_worse(verdict):
    held, lines = 0, []
    for sc in dead_end_suite():
        dist = {}
        for setting in (RESET, ACCUMULATE):
            m = run_navigation(sc.world, sc.goals, SimConfig(setting=setting), start=sc.start)
            dist[setting] = m.distance_traveled if m.success else math.inf
        held += dist[ACCUMULATE] <= dist[RESET]
        lines.append(f"{sc.name} {dist[ACCUMULATE]:.1f}<={dist[RESET]:.1f}")
    ok = held >= 9
    verdict(5, ok, f"holds on {held}/10 maps: " + " ".join(lines))
    assert ok


def test_criterion_06_search_latency(verdict):
    sc = forest_world()
    forest = run_navigation(sc.world, sc.goals, SimConfig(setting=ACCUMULATE), start=sc.start)
    peak = max(r.vertices for r in forest.replans)
    forest_ms = 1e3 * float(np.mean(forest.search_times))
    mz = maze_world()
    cells = int(round((mz.world.bounds[2] - mz.world.bounds[0]) / 0.2))
    vg = run_navigation(mz.world, mz.goals, SimConfig(), start=mz.start)
    grid = run_navigation(mz.world, mz.goals, SimConfig(), start=mz.start, planner="astar")
    vg_ms = 1e3 * float(np.mean(vg.search_times))
    grid_ms = 1e3 * float(np.mean(grid.search_times))
    ok = peak >= 300 and forest_ms < 10.0 and cells >= 200 and vg_ms < grid_ms and vg.success
    verdict(6, ok, f"forest {peak} vertices, mean search {forest_ms:.2f} ms; maze {cells}x{cells} cells, "
                   f"vgraph {vg_ms:.2f} ms vs A* {grid_ms:.2f} ms")
    assert ok


def test_criterion_07_dstar_lite(verdict):
    rng = np.random.default_rng(7)
    h = w = 40
    m = rng.random((h, w)) > 0.25
    goal = (h - 1, w - 1)
    m[goal] = True
    start = (0, 0)
    ds = DStarLite(m, start, goal)
    ds.compute()
    updates = mismatches = 0
    for _ in range(220):
        flip = [tuple(c) for c in rng.integers(0, h, (int(rng.integers(1, 25)), 2)) if tuple(c) != goal]
        for c in flip:
            m[c] = not m[c]
        try:
            got = dstar_lite_plan(flip, ds, m, start)
        except NoPath:
            got = None
        mask = m.copy()
        mask[start] = True
        try:
            want = astar_cells(mask, start, goal)
        except NoPath:
            want = None
        updates += 1
        if (got is None) != (want is None) or (
                got is not None and (got.straight, got.diagonal) != (want.straight, want.diagonal)):
            mismatches += 1
        if got is not None:
            start = got.cells[min(int(rng.integers(0, 4)), len(got.cells) - 1)]
    ok = updates >= 200 and mismatches == 0
    verdict(7, ok, f"{updates} incremental updates, {mismatches} length mismatches against A*")
    assert ok


def test_criterion_08_robust_fitting(verdict):
    rng = np.random.default_rng(0)
    pts = rng.normal(0.0, 0.05, (20, 2))
    th = rng.uniform(0, 2 * np.pi, 4)
    pts[16:] += np.c_[np.cos(th), np.sin(th)]
    mu, inliers = robust_update(pts)
    err = math.hypot(*mu)
    ok = not inliers[16:].any() and err <= 0.05
    verdict(8, ok, f"outliers kept {int(inliers[16:].sum())}/4, mean error {err:.3f} m")
    assert ok


def test_criterion_09_dynamic_cycle(verdict):
    sc = pedestrian_corridor()
    world, cfg = sc.world, SimConfig()
    nav = GraphNavigator(cfg)
    pose = sc.start
    history, ends = [], {}
    frames = 34
    for k in range(frames):
        nav.observe(simulate_scan(world, pose, cfg, k * cfg.dt, None, k), pose)
        g = nav.graph
        history.append({key: e.status for key, e in g.edges.items()})
        for key in g.edges:
            ends[key] = (g.vertices[key[0]].position, g.vertices[key[1]].position)

    def overlaps(k, key):
        ped = shapely.Polygon(world.actors[0].polygon(k * cfg.dt).vertices).buffer(0.4)
        return ped.intersects(shapely.LineString(ends[key]))

    cycles, late = 0, []
    for key in sorted({k for h in history for k, s in h.items() if s == BLOCKED}):
        blocked = [k for k, h in enumerate(history) if h.get(key) == BLOCKED]
        over = [k for k in range(frames) if overlaps(k, key)]
        if not over or not set(blocked) & set(over):
            continue
        clear = max(over) + 1
        back = next((k for k in range(max(blocked) + 1, frames) if history[k].get(key) == ACTIVE), None)
        if back is not None and back <= clear + 2:
            cycles += 1
        else:
            late.append(key)
    ok = cycles >= 1 and not late
    verdict(9, ok, f"{cycles} edges blocked while overlapped and reactivated within 2 frames, {len(late)} late")
    assert ok


def test_criterion_10_extraction_fidelity(verdict):
    p = ExtractionParams()
    t = np.arange(0, 4.0, 0.1)
    z = np.zeros_like(t)
    ring = np.concatenate([np.c_[t, z], np.c_[4 + z, t], np.c_[4 - t, 4 + z], np.c_[z, 4 - t]]) + [3.0, 3.0]
    scan = SensorScan(ring, Point2(0, 0))
    polys = extract_polygons(scan, p)
    again = extract_polygons(scan, p)
    outer = [q for q in polys if not q.hole]
    truth = shapely.LinearRing(ring).buffer(p.inflation_radius)
    ours = shapely.Polygon(outer[0].array, [q.array for q in polys if q.hole]) if len(outer) == 1 else None
    hd = ours.boundary.hausdorff_distance(truth.boundary) if ours is not None else math.inf
    min_angle = min(float(inner_angles(q.array).min()) for q in polys)
    same = len(polys) == len(again) and all(
        a.array.tobytes() == b.array.tobytes() and a.hole == b.hole for a, b in zip(polys, again))
    ok = len(outer) == 1 and hd <= p.resolution + p.dp_epsilon and min_angle >= p.zeta and same
    verdict(10, ok, f"{len(outer)} outer polygon, Hausdorff {hd:.3f} m (limit {p.resolution + p.dp_epsilon:.1f}), "
                    f"min inner angle {math.degrees(min_angle):.1f} deg, deterministic {same}")
    assert ok


def _evolved_graph(seed):
    polys, a, b = random_map(seed)
    world = World((0, 0, 20, 20), tuple(polys))
    rng = np.random.default_rng(seed)
    nav = GraphNavigator(SimConfig(sensor_range=8.0))
    for k in range(4):
        pose = Point2(*rng.uniform(0.5, 19.5, 2))
        if not world.collides(pose, clearance=0.5):
            nav.observe(simulate_scan(world, pose, nav.config, 0.0, None, k), pose)
    g = nav.graph
    vis = sorted(k for k, e in g.edges.items() if e.kind == VISIBILITY)
    for k in rng.permutation(len(vis))[: max(1, len(vis) // 5)]:
        g.edges[vis[k]].status = BLOCKED
    update_space_labels(g, a)
    return g


def _set_field(line, k, value):
    tok = line.split()
    tok[k] = value
    return " ".join(tok)


def test_criterion_11_persistence(verdict):
    same = 0
    for seed in range(10):
        g = _evolved_graph(seed)
        data = save_graph(g)
        h = load_graph(data)
        same += h == g and save_graph(h) == data and (
            [v.label for v in h.vertices.values()] == [v.label for v in g.vertices.values()])
    lines = save_graph(_evolved_graph(0)).decode().splitlines()
    corruptions = [
        ["vgraph 2"] + lines[1:],
        lines[:3] + ["V 1 2 3"] + lines[4:],
        lines + ["E 0 123456 vis active"],
        lines + ["E 0 1 vis sleeping"],
        [lines[0], _set_field(lines[1], 6, "999999")] + lines[2:],
        lines + ["garbage"],
    ]
    assert all(bad != lines for bad in corruptions)
    located = 0
    for bad in corruptions:
        try:
            load_graph("\n".join(bad))
        except GraphFormatError as exc:
            located += exc.line is not None and f"line {exc.line}:" in str(exc)
    ok = same == 10 and located == len(corruptions)
    verdict(11, ok, f"{same}/10 round trips identical, {located}/{len(corruptions)} corruptions rejected with a line")
    assert ok
