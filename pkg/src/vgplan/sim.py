"""Deterministic point-robot navigation simulator.

A world is a bounding rectangle (sensed as walls), static obstacle polygons
and optional moving actors.  Each tick the robot casts a ring of range rays,
the navigator updates its map and replans, and the robot moves along the
current path at constant speed for one replan period.
"""
from __future__ import annotations

import csv
import io
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .extraction import ExtractionParams, SensorScan, beam_index, beam_ranges, extract_polygons, raster_frame
from .geometry import EPS_GEOM, Obstacles, Point2, Polygon, as_point, point_segment_distances
from .planner import (
    ATTEMPTABLE, NavPath, PlanRequest, PlanningError, TerminalInObstacle, plan,
    polyline_length, update_space_labels,
)
from .vgraph import LocalRegion, MergeParams, VGraph, process_frame

RESET = "reset"
ACCUMULATE = "accumulate"
REACHED = "reached"
TIMEOUT = "timeout"
UNREACHABLE = "unreachable"


# ---------------------------------------------------------------------------
# worlds


@dataclass(frozen=True)
class Actor:
    """Moving polygon: ``shape`` is given relative to the reference point on ``route``."""

    shape: Polygon
    route: tuple[Point2, ...]
    speed: float

    def __post_init__(self):
        if not self.route:
            raise ValueError("actor route needs at least one waypoint")
        if self.speed <= 0:
            raise ValueError("actor speed must be positive")
        object.__setattr__(self, "route", tuple(as_point(p) for p in self.route))

    def position(self, t: float) -> Point2:
        pts = np.asarray(self.route, dtype=float)
        if len(pts) == 1 or t <= 0:
            return self.route[0]
        seg = np.hypot(*np.diff(pts, axis=0).T)
        times = np.concatenate([[0.0], np.cumsum(seg) / self.speed])
        if t >= times[-1]:
            return self.route[-1]
        k = int(np.searchsorted(times, t, side="right")) - 1
        span = times[k + 1] - times[k]
        f = 0.0 if span <= 0 else (t - times[k]) / span
        p = pts[k] + f * (pts[k + 1] - pts[k])
        return Point2(float(p[0]), float(p[1]))

    def polygon(self, t: float) -> Polygon:
        c = self.position(t)
        return Polygon(tuple((x + c.x, y + c.y) for x, y in self.shape.vertices), id=self.shape.id)


@dataclass(frozen=True)
class World:
    bounds: tuple[float, float, float, float]
    obstacles: tuple[Polygon, ...] = ()
    actors: tuple[Actor, ...] = ()
    name: str = ""

    def __post_init__(self):
        xmin, ymin, xmax, ymax = map(float, self.bounds)
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate bounds {self.bounds}")
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "actors", tuple(self.actors))
        for poly in self.obstacles:
            a = poly.array
            if a[:, 0].min() < xmin or a[:, 0].max() > xmax or a[:, 1].min() < ymin or a[:, 1].max() > ymax:
                raise ValueError(f"obstacle {poly.id} leaves the world bounds")

    @property
    def perimeter(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return 2.0 * ((xmax - xmin) + (ymax - ymin))

    def bounds_ring(self) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        # clockwise: the outside of the box is the obstacle
        return np.array([(xmin, ymin), (xmin, ymax), (xmax, ymax), (xmax, ymin)], dtype=float)

    def polygons_at(self, t: float) -> list[Polygon]:
        return list(self.obstacles) + [a.polygon(t) for a in self.actors]

    def segments_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        rings = [p.array for p in self.polygons_at(t)] + [self.bounds_ring()]
        a = np.concatenate(rings)
        b = np.concatenate([np.roll(r, -1, axis=0) for r in rings])
        return a, b

    def static_obstacles(self) -> Obstacles:
        return Obstacles.from_polygons(self.obstacles)

    def collides(self, p, t: float = 0.0, clearance: float = 0.0) -> bool:
        """Point inside an obstacle or actor, outside the bounds, or closer than ``clearance``."""
        p = as_point(p)
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin + clearance <= p.x <= xmax - clearance and ymin + clearance <= p.y <= ymax - clearance):
            return True
        polys = self.polygons_at(t)
        if not polys:
            return False
        obs = Obstacles.from_polygons(polys)
        if obs.contains(np.array([p]), strict=False)[0]:
            return True
        if clearance > 0:
            d = point_segment_distances(np.array([p]), obs.block_a, obs.block_b)
            return bool(d.min() < clearance)
        return False


def step_dynamic_actors(world: World, t: float) -> list[Point2]:
    return [a.position(t) for a in world.actors]


class WorldFormatError(ValueError):
    pass


def _floats(tokens: Sequence[str], where: str) -> list[float]:
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise WorldFormatError(f"{where}: expected numbers, got {' '.join(tokens)!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise WorldFormatError(f"{where}: non-finite coordinate")
    return vals


def _take_points(tok: list[str], k: int, where: str) -> tuple[list[tuple[float, float]], int]:
    try:
        n = int(tok[k])
    except (IndexError, ValueError):
        raise WorldFormatError(f"{where}: missing point count") from None
    vals = tok[k + 1:k + 1 + 2 * n]
    if n < 1 or len(vals) != 2 * n:
        raise WorldFormatError(f"{where}: expected {n} points")
    v = _floats(vals, where)
    return list(zip(v[0::2], v[1::2])), k + 1 + 2 * n


def parse_world(text: str, source: str = "<world>") -> World:
    """Parse the ``bounds`` / ``poly`` / ``actor`` line format."""
    bounds = None
    polys: list[Polygon] = []
    actors: list[Actor] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        tok = line.split()
        try:
            if tok[0] == "bounds":
                if len(tok) != 5:
                    raise WorldFormatError(f"{where}: bounds needs 4 numbers")
                bounds = tuple(_floats(tok[1:], where))
            elif tok[0] == "poly":
                pts, end = _take_points(tok, 1, where)
                if end != len(tok):
                    raise WorldFormatError(f"{where}: trailing tokens after polygon")
                polys.append(Polygon(tuple(pts), id=len(polys)))
            elif tok[0] == "actor":
                shape, k = _take_points(tok, 1, where)
                if tok[k:k + 1] != ["speed"] or len(tok) < k + 3 or tok[k + 2] != "route":
                    raise WorldFormatError(f"{where}: expected 'speed <v> route <m> ...'")
                speed = _floats([tok[k + 1]], where)[0]
                route, end = _take_points(tok, k + 3, where)
                if end != len(tok):
                    raise WorldFormatError(f"{where}: trailing tokens after route")
                actors.append(Actor(Polygon(tuple(shape), id=len(actors)), tuple(route), speed))
            else:
                raise WorldFormatError(f"{where}: unknown record {tok[0]!r}")
        except WorldFormatError:
            raise
        except ValueError as exc:
            raise WorldFormatError(f"{where}: {exc}") from None
    if bounds is None:
        raise WorldFormatError(f"{source}: missing bounds record")
    try:
        return World(bounds, tuple(polys), tuple(actors), name=Path(source).stem)
    except ValueError as exc:
        raise WorldFormatError(f"{source}: {exc}") from None


def load_world(path: str | Path) -> World:
    with open(path) as fh:
        return parse_world(fh.read(), str(path))


def format_world(world: World) -> str:
    def pts(seq):
        return " ".join(f"{x!r} {y!r}" for x, y in seq)

    lines = ["bounds " + " ".join(repr(v) for v in world.bounds)]
    for p in world.obstacles:
        lines.append(f"poly {len(p)} {pts(p.vertices)}")
    for a in world.actors:
        lines.append(f"actor {len(a.shape)} {pts(a.shape.vertices)} speed {a.speed!r} "
                     f"route {len(a.route)} {pts(a.route)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# sensing


@dataclass(frozen=True)
class SimConfig:
    sensor_range: float = 15.0
    angular_resolution: float = math.radians(0.5)
    vehicle_speed: float = 2.0
    replan_rate: float = 2.5
    goal_tolerance: float = 0.5
    setting: str = RESET
    rng_seed: int = 0
    noise_sigma: float = 0.0
    mode: str = ATTEMPTABLE
    unreachable_after: int = 10
    timeout_ticks: int | None = None
    memory_cell_cap: int = 4
    clear_margin: float = 0.3

    def __post_init__(self):
        for name in ("sensor_range", "angular_resolution", "vehicle_speed", "replan_rate", "goal_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.setting not in (RESET, ACCUMULATE):
            raise ValueError(f"unknown setting {self.setting!r}")

    @property
    def n_beams(self) -> int:
        return max(3, int(round(2 * math.pi / self.angular_resolution)))

    @property
    def dt(self) -> float:
        return 1.0 / self.replan_rate


def cast_rays(world: World, pose, config: SimConfig, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Beam angles and true hit ranges (``inf`` where nothing lies within range)."""
    o = np.asarray(as_point(pose), dtype=float)
    n = config.n_beams
    ang = np.arange(n) * (2 * math.pi / n)
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    a, b = world.segments_at(t)
    e = b - a
    ao = a - o
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = (ao[None, :, 0] * e[None, :, 1] - ao[None, :, 1] * e[None, :, 0]) / denom
        uu = (ao[None, :, 0] * d[:, None, 1] - ao[None, :, 1] * d[:, None, 0]) / denom
    ok = (np.abs(denom) > 1e-12) & (tt > 1e-9) & (uu >= -1e-12) & (uu <= 1 + 1e-12) & (tt <= config.sensor_range)
    tt = np.where(ok, tt, np.inf)
    return ang, tt.min(axis=1)


def simulate_scan(world: World, pose, config: SimConfig, t: float = 0.0,
                  rng: np.random.Generator | None = None, frame_index: int = 0) -> SensorScan:
    """One ring of range returns with optional radial Gaussian noise."""
    pose = as_point(pose)
    if world.collides(pose, t):
        raise ValueError(f"pose {tuple(pose)} is inside an obstacle")
    ang, rng_true = cast_rays(world, pose, config, t)
    noise = np.zeros(len(ang))
    if config.noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
        noise = rng.normal(0.0, config.noise_sigma, len(ang))
    hit = np.isfinite(rng_true)
    r = np.maximum(rng_true[hit] + noise[hit], 0.0)
    pts = np.stack([pose.x + r * np.cos(ang[hit]), pose.y + r * np.sin(ang[hit])], axis=1)
    return SensorScan(pts, pose, frame_index)


class ObstacleMemory:
    """World-frame store of obstacle returns, capped per cell.

    Stored points are cleared once a later ray passes well beyond them,
    which lets moved obstacles vanish from the map.
    """

    def __init__(self, cell: float = 0.2, cap: int = 4, clear_margin: float = 0.3):
        self.cell = cell
        self.cap = cap
        self.clear_margin = clear_margin
        self.points = np.zeros((0, 2))
        self._counts: dict[tuple[int, int], int] = {}

    def clear(self) -> None:
        self.points = np.zeros((0, 2))
        self._counts = {}

    def __len__(self) -> int:
        return len(self.points)

    def _cells(self, pts: np.ndarray) -> np.ndarray:
        return np.floor(pts / self.cell).astype(np.int64)

    def update(self, scan: SensorScan, n_beams: int, max_range: float) -> None:
        if len(self.points):
            o = np.asarray(scan.origin)
            rel = self.points - o
            dist = np.hypot(rel[:, 0], rel[:, 1])
            ranges = beam_ranges(scan, n_beams, max_range)
            beam = beam_index(rel, n_beams)
            near = np.minimum.reduce([ranges[(beam - 1) % n_beams], ranges[beam], ranges[(beam + 1) % n_beams]])
            gone = (dist < max_range) & (near > dist + self.clear_margin)
            if gone.any():
                self.points = self.points[~gone]
                self._counts = {}
                for c in map(tuple, self._cells(self.points).tolist()):
                    self._counts[c] = self._counts.get(c, 0) + 1
        new = []
        for p, c in zip(scan.points.tolist(), map(tuple, self._cells(scan.points).tolist())):
            k = self._counts.get(c, 0)
            if k < self.cap:
                self._counts[c] = k + 1
                new.append(p)
        if new:
            self.points = np.concatenate([self.points, np.asarray(new)])


# ---------------------------------------------------------------------------
# navigators


@dataclass(frozen=True)
class PlannerParams:
    extraction: ExtractionParams = field(default_factory=ExtractionParams)
    merge: MergeParams = field(default_factory=MergeParams)


@dataclass
class PlanOutcome:
    path: NavPath | None
    code: str = ""
    version: int = 0


def _nearest_outside(graph: VGraph, p: Point2, push: float = 0.05) -> Point2 | None:
    """Closest point a little outside every polygon of ``graph`` that contains ``p``."""
    obs = graph.snapshot().obstacles
    q = np.array([p], dtype=float)
    for _ in range(4):
        if not obs.contains(q, strict=True)[0]:
            return Point2(float(q[0, 0]), float(q[0, 1]))
        a, b = obs.block_a, obs.block_b
        ab = b - a
        t = np.clip(np.einsum("ij,ij->i", q - a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-18), 0, 1)
        c = a + t[:, None] * ab
        k = int(np.argmin(np.hypot(*(c - q).T)))
        step = c[k] - q[0]
        n = math.hypot(*step)
        if n < 1e-12:
            e = ab[k] / max(math.hypot(*ab[k]), 1e-12)
            step, n = np.array([e[1], -e[0]]), 1.0
        q = (c[k] + step / n * push)[None]
    return None


class GraphNavigator:
    """Navigator on the incremental visibility graph."""

    name = "vgraph"

    def __init__(self, config: SimConfig, params: PlannerParams | None = None, prior: VGraph | None = None):
        self.config = config
        self.params = params or PlannerParams()
        self.graph = prior if prior is not None else VGraph(self.params.merge)
        self.memory = ObstacleMemory(self.params.extraction.resolution, config.memory_cell_cap, config.clear_margin)
        self.frame = 0

    def reset(self) -> None:
        self.graph.clear()
        self.memory.clear()

    @property
    def map_size(self) -> tuple[int, int]:
        return len(self.graph.vertices), len(self.graph.edges)

    @property
    def version(self) -> int:
        return self.graph.version

    def observe(self, scan: SensorScan, pose: Point2) -> None:
        ext = self.params.extraction
        self.memory.update(scan, self.config.n_beams, self.config.sensor_range)
        self.frame += 1
        frame_scan = SensorScan(self.memory.points, pose, self.frame)
        polys = extract_polygons(frame_scan, ext)
        corner, n = raster_frame(pose, ext)
        side = n * ext.resolution
        region = LocalRegion(corner.x, corner.y, corner.x + side, corner.y + side, pose)
        process_frame(self.graph, polys, region)
        update_space_labels(self.graph, pose)

    def plan(self, pose: Point2, goal: Point2) -> PlanOutcome:
        start, lead = pose, []
        for _ in range(2):
            try:
                path = plan(PlanRequest(start, goal, self.config.mode), self.graph)
            except TerminalInObstacle as exc:
                if lead or exc.which == "goal":
                    return PlanOutcome(None, exc.code, self.version)
                snapped = _nearest_outside(self.graph, pose)
                if snapped is None:
                    return PlanOutcome(None, exc.code, self.version)
                start, lead = snapped, [pose]
                continue
            except PlanningError as exc:
                return PlanOutcome(None, exc.code, self.version)
            if lead:
                pts = tuple(lead) + path.waypoints
                path = NavPath(pts, polyline_length(pts), path.via_unknown, path.vertex_ids)
            return PlanOutcome(path, "", self.version)
        return PlanOutcome(None, TerminalInObstacle.code, self.version)


def make_navigator(name: str, world: World, config: SimConfig, params: PlannerParams | None = None,
                   prior: VGraph | None = None):
    if name == "vgraph":
        return GraphNavigator(config, params, prior)
    from .baselines import GridNavigator

    if name in ("astar", "dstar_lite"):
        return GridNavigator(name, world, config, params)
    raise ValueError(f"unknown planner {name!r}")


PLANNERS = ("vgraph", "astar", "dstar_lite")


# ---------------------------------------------------------------------------
# run loop and metrics


@dataclass
class ReplanRecord:
    goal_index: int
    tick: int
    time: float
    x: float
    y: float
    status: str
    path_length: float
    vertices: int
    edges: int
    search_time: float
    processing_time: float


@dataclass
class GoalResult:
    goal_index: int
    goal: Point2
    status: str
    travel_time: float
    distance: float
    replans: int
    ticks: int


@dataclass
class RunMetrics:
    planner: str
    setting: str
    seed: int
    goals: list[GoalResult] = field(default_factory=list)
    replans: list[ReplanRecord] = field(default_factory=list)
    path_executed: list[Point2] = field(default_factory=list)
    navigator: object = None

    @property
    def replan_count(self) -> int:
        return len(self.replans)

    @property
    def distance_traveled(self) -> float:
        return polyline_length(self.path_executed)

    @property
    def travel_time(self) -> float:
        return sum(g.travel_time for g in self.goals)

    @property
    def search_times(self) -> list[float]:
        return [r.search_time for r in self.replans]

    @property
    def processing_times(self) -> list[float]:
        return [r.processing_time for r in self.replans]

    @property
    def success(self) -> bool:
        return all(g.status == REACHED for g in self.goals)


def timeout_ticks(world: World, config: SimConfig) -> int:
    if config.timeout_ticks is not None:
        return config.timeout_ticks
    return int(math.ceil(4.0 * world.perimeter / config.vehicle_speed * config.replan_rate))


def _advance(world: World, pose: Point2, path: NavPath, step: float, t: float) -> tuple[Point2, list[Point2]]:
    """Move up to ``step`` along ``path``; stop short of any ground-truth obstacle."""
    walls = Obstacles.from_rings([p.array for p in world.polygons_at(t)] + [world.bounds_ring()])
    trail = []
    cur = np.array(pose, dtype=float)
    left = step
    for wp in path.waypoints[1:]:
        nxt = np.array(wp, dtype=float)
        seg = nxt - cur
        L = math.hypot(*seg)
        if L <= EPS_GEOM:
            continue
        tgt = nxt if L <= left else cur + seg * (left / L)
        hit = _first_hit(walls, cur, tgt)
        if hit is not None:
            back = max(hit - 0.05, 0.0)
            tgt = cur + (tgt - cur) * back
            trail.append(Point2(float(tgt[0]), float(tgt[1])))
            return trail[-1], trail
        trail.append(Point2(float(tgt[0]), float(tgt[1])))
        left -= math.hypot(*(tgt - cur))
        cur = tgt
        if left <= EPS_GEOM:
            break
    end = trail[-1] if trail else pose
    return end, trail


def _first_hit(walls: Obstacles, p: np.ndarray, q: np.ndarray) -> float | None:
    """Fraction along p->q of the first wall crossing, if any."""
    a, b = walls.block_a, walls.block_b
    r = q - p
    e = b - a
    denom = r[0] * e[:, 1] - r[1] * e[:, 0]
    ap = a - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ap[:, 0] * e[:, 1] - ap[:, 1] * e[:, 0]) / denom
        u = (ap[:, 0] * r[1] - ap[:, 1] * r[0]) / denom
    ok = (np.abs(denom) > 1e-15) & (t > 1e-9) & (t <= 1.0) & (u >= 0) & (u <= 1)
    if not ok.any():
        return None
    return float(t[ok].min())


def run_navigation(world: World, goals: Sequence, config: SimConfig | None = None,
                   params: PlannerParams | None = None, *, start, planner: str = "vgraph",
                   prior: VGraph | None = None, navigator=None) -> RunMetrics:
    """Visit ``goals`` in order from ``start``; returns per-goal and per-replan metrics."""
    config = config or SimConfig()
    nav = navigator if navigator is not None else make_navigator(planner, world, config, params, prior)
    rng = np.random.default_rng(config.rng_seed)
    pose = as_point(start)
    if world.collides(pose):
        raise ValueError(f"start {tuple(pose)} is inside an obstacle")
    goals = [as_point(g) for g in goals]
    for k, g in enumerate(goals):
        if world.collides(g):
            raise ValueError(f"goal {k} {tuple(g)} is inside an obstacle")
    metrics = RunMetrics(nav.name, config.setting, config.rng_seed, navigator=nav)
    metrics.path_executed.append(pose)
    limit = timeout_ticks(world, config)
    t = 0.0
    tick = 0
    step = config.vehicle_speed * config.dt
    for gi, goal in enumerate(goals):
        ticks = 0
        dist = 0.0
        replans = 0
        streak = 0
        last_version = None
        status = TIMEOUT
        while True:
            if math.hypot(goal.x - pose.x, goal.y - pose.y) <= config.goal_tolerance:
                status = REACHED
                break
            if ticks >= limit:
                status = TIMEOUT
                break
            scan = simulate_scan(world, pose, config, t, rng, tick)
            t0 = _time.perf_counter()
            nav.observe(scan, pose)
            t1 = _time.perf_counter()
            out = nav.plan(pose, goal)
            t2 = _time.perf_counter()
            replans += 1
            nv, ne = nav.map_size
            metrics.replans.append(ReplanRecord(
                gi, tick, round(t, 9), pose.x, pose.y, "ok" if out.path else out.code,
                out.path.length if out.path else float("nan"), nv, ne, t2 - t1, t1 - t0))
            if out.path is None:
                streak = streak + 1 if out.version == last_version else 1
                last_version = out.version
                if streak >= config.unreachable_after:
                    status = UNREACHABLE
                    break
            else:
                streak = 0
                last_version = None
                new_pose, trail = _advance(world, pose, out.path, step, t)
                if trail:
                    dist += polyline_length([pose] + trail)
                    metrics.path_executed.extend(trail)
                pose = new_pose
            t += config.dt
            ticks += 1
            tick += 1
        metrics.goals.append(GoalResult(gi, goal, status, dist / config.vehicle_speed, dist, replans, ticks))
        if config.setting == RESET:
            nav.reset()
    return metrics


CSV_COLUMNS = ["planner", "setting", "seed", "row", "goal_index", "tick", "time", "x", "y", "status",
               "path_length", "vertices", "edges", "distance", "travel_time", "replans"]
TIMING_COLUMNS = ["search_ms", "processing_ms"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def metrics_rows(m: RunMetrics, timing: bool = False) -> list[list[str]]:
    """One ``replan`` row per tick and one ``goal`` summary row per goal."""
    rows = []
    by_goal: dict[int, list[ReplanRecord]] = {}
    for r in m.replans:
        by_goal.setdefault(r.goal_index, []).append(r)
    for g in m.goals:
        for r in by_goal.get(g.goal_index, []):
            row = [m.planner, m.setting, m.seed, "replan", r.goal_index, r.tick, r.time, r.x, r.y, r.status,
                   r.path_length, r.vertices, r.edges, "", "", ""]
            if timing:
                row += [r.search_time * 1e3, r.processing_time * 1e3]
            rows.append([_fmt(v) for v in row])
        row = [m.planner, m.setting, m.seed, "goal", g.goal_index, "", "", g.goal.x, g.goal.y, g.status,
               "", "", "", g.distance, g.travel_time, g.replans]
        if timing:
            rows.append([_fmt(v) for v in row] + ["", ""])
        else:
            rows.append([_fmt(v) for v in row])
    return rows


def metrics_csv(runs: Iterable[RunMetrics], timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + (TIMING_COLUMNS if timing else []))
    for m in runs:
        w.writerows(metrics_rows(m, timing))
    return buf.getvalue()


__all__ = [
    "ACCUMULATE", "PLANNERS", "REACHED", "RESET", "TIMEOUT", "UNREACHABLE",
    "Actor", "GoalResult", "GraphNavigator", "ObstacleMemory", "PlanOutcome", "PlannerParams",
    "ReplanRecord", "RunMetrics", "SimConfig", "World", "WorldFormatError",
    "beam_ranges", "cast_rays", "format_world", "load_world", "make_navigator", "metrics_csv",
    "metrics_rows", "parse_world", "run_navigation", "simulate_scan", "step_dynamic_actors",
    "timeout_ticks",
]
