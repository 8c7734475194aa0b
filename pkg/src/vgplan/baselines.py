"""Grid baselines: occupancy mapping, 8-connected A*, and D* Lite.

Unknown cells are traversable.  Diagonal moves may not cut a corner, so a
diagonal step needs both orthogonal neighbours passable.  Path lengths are
kept as integer (straight, diagonal) step counts so two planners can be
compared exactly.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .extraction import SensorScan, beam_index, beam_ranges
from .geometry import Point2, as_point
from .planner import NavPath, NoPath, polyline_length

SQRT2 = math.sqrt(2.0)
UNKNOWN_CELL, FREE_CELL, OCCUPIED_CELL = 0, 1, 2
_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class OccupancyGrid:
    """Fixed-extent grid; ``occupied`` is the disk dilation of raw hit cells."""

    def __init__(self, bounds: Sequence[float], resolution: float = 0.2, inflation_radius: float = 0.4):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        xmin, ymin, xmax, ymax = map(float, bounds)
        self.resolution = float(resolution)
        self.origin = Point2(xmin, ymin)
        self.width = max(1, int(math.ceil((xmax - xmin) / resolution - 1e-9)))
        self.height = max(1, int(math.ceil((ymax - ymin) / resolution - 1e-9)))
        r = inflation_radius / resolution
        k = int(math.floor(r + 1e-9))
        yy, xx = np.mgrid[-k:k + 1, -k:k + 1]
        self.kernel = (xx * xx + yy * yy) <= r * r + 1e-9
        self.hits = np.zeros((self.height, self.width), dtype=bool)
        self.observed = np.zeros_like(self.hits)
        self.occupied = np.zeros_like(self.hits)
        self.version = 0

    def reset(self) -> None:
        self.hits[:] = False
        self.observed[:] = False
        self.occupied[:] = False
        self.version += 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.hits.shape

    @property
    def cells(self) -> np.ndarray:
        out = np.full(self.shape, UNKNOWN_CELL, dtype=np.int8)
        out[self.observed] = FREE_CELL
        out[self.occupied] = OCCUPIED_CELL
        return out

    def cell_of(self, p) -> tuple[int, int]:
        p = as_point(p)
        c = int(math.floor((p.x - self.origin.x) / self.resolution))
        r = int(math.floor((p.y - self.origin.y) / self.resolution))
        return min(max(r, 0), self.height - 1), min(max(c, 0), self.width - 1)

    def center(self, r: int, c: int) -> Point2:
        return Point2(self.origin.x + (c + 0.5) * self.resolution, self.origin.y + (r + 0.5) * self.resolution)

    def passable(self) -> np.ndarray:
        return ~self.occupied

    def refresh(self) -> set[tuple[int, int]]:
        """Recompute ``occupied`` from hits; returns cells whose state flipped."""
        occ = ndimage.binary_dilation(self.hits, structure=self.kernel) if self.hits.any() else np.zeros_like(self.hits)
        changed = np.argwhere(occ != self.occupied)
        self.occupied = occ
        if len(changed):
            self.version += 1
        return set(map(tuple, changed.tolist()))


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Cells on the integer line from (r0, c0) to (r1, c1), both ends included."""
    cells = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        cells.append((r, c))
        if r == r1 and c == c1:
            return cells
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def grid_update(grid: OccupancyGrid, scan: SensorScan, pose=None, n_beams: int = 720,
                max_range: float = 15.0, clear_margin: float = 0.3) -> set[tuple[int, int]]:
    """Ray-trace a scan into the grid; returns the cells whose passability changed.

    Cells traversed by a beam become observed.  The end cell of a beam with
    a return becomes a hit.  An earlier hit is cleared only when the beam
    towards it and both neighbouring beams reach at least ``clear_margin``
    past it; a single grazing beam does not erase a wall.  Beams without a
    return are traced out to ``max_range``.
    """
    pose = as_point(pose if pose is not None else scan.origin)
    r0, c0 = grid.cell_of(pose)
    ranges = beam_ranges(scan, n_beams, max_range)
    has_hit = np.zeros(n_beams, dtype=bool)
    if len(scan.points):
        rel = scan.points - np.asarray(pose)
        has_hit[beam_index(rel, n_beams)] = True

    old = np.argwhere(grid.hits)
    if len(old):
        centers = np.column_stack([grid.origin.x + (old[:, 1] + 0.5) * grid.resolution,
                                   grid.origin.y + (old[:, 0] + 0.5) * grid.resolution])
        rel = centers - np.asarray(pose)
        dist = np.hypot(rel[:, 0], rel[:, 1])
        b = beam_index(rel, n_beams)
        near = np.minimum.reduce([ranges[(b - 1) % n_beams], ranges[b], ranges[(b + 1) % n_beams]])
        gone = old[(dist < max_range) & (near > dist + clear_margin)]
        grid.hits[gone[:, 0], gone[:, 1]] = False

    ang = np.arange(n_beams) * (2 * math.pi / n_beams)
    ends = np.stack([pose.x + ranges * np.cos(ang), pose.y + ranges * np.sin(ang)], axis=1)
    for k in range(n_beams):
        r1, c1 = grid.cell_of(ends[k])
        line = bresenham(r0, c0, r1, c1)
        rr, cc = zip(*line)
        grid.observed[rr, cc] = True
        if has_hit[k]:
            grid.hits[r1, c1] = True
    return grid.refresh()


# ---------------------------------------------------------------------------
# search


@dataclass(frozen=True)
class GridPath:
    cells: tuple[tuple[int, int], ...]
    straight: int
    diagonal: int
    expansions: int = 0

    def length(self, resolution: float = 1.0) -> float:
        return (self.straight + SQRT2 * self.diagonal) * resolution

    def to_navpath(self, grid: OccupancyGrid, start, goal) -> NavPath:
        start, goal = as_point(start), as_point(goal)
        pts = [start] + [grid.center(r, c) for r, c in self.cells[1:]] + [goal]
        dedup = [pts[0]]
        for p in pts[1:]:
            if math.hypot(p.x - dedup[-1].x, p.y - dedup[-1].y) > 1e-12:
                dedup.append(p)
        return NavPath(tuple(dedup), polyline_length(dedup), False)


def _octile(r0, c0, r1, c1) -> float:
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    return (max(dr, dc) - min(dr, dc)) + SQRT2 * min(dr, dc)


def _count_steps(cells: Sequence[tuple[int, int]]) -> tuple[int, int]:
    s = d = 0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 != r1 and c0 != c1:
            d += 1
        else:
            s += 1
    return s, d


def _neighbors(passable: np.ndarray, r: int, c: int):
    """Passable 8-neighbours of (r, c) without corner cutting, with step cost."""
    h, w = passable.shape
    for dr, dc in _MOVES:
        rr, cc = r + dr, c + dc
        if not (0 <= rr < h and 0 <= cc < w) or not passable[rr, cc]:
            continue
        if dr and dc:
            if not (passable[r + dr, c] and passable[r, c + dc]):
                continue
            yield rr, cc, SQRT2
        else:
            yield rr, cc, 1.0


def _passable_with_start(grid_or_mask, start_cell) -> np.ndarray:
    mask = grid_or_mask.passable() if isinstance(grid_or_mask, OccupancyGrid) else np.asarray(grid_or_mask, bool)
    mask = mask.copy()
    mask[start_cell] = True
    return mask


def astar_cells(passable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> GridPath:
    """8-connected A* with octile heuristic; ties broken by (f, h, cell index)."""
    h_, w_ = passable.shape
    if not passable[goal]:
        raise NoPath(f"goal cell {goal} is occupied")
    if not passable[start]:
        raise NoPath(f"start cell {start} is occupied")
    gr, gc = goal
    g = {start: 0.0}
    parent = {start: None}
    closed = set()
    h0 = _octile(*start, gr, gc)
    heap = [(h0, h0, start[0] * w_ + start[1], start)]
    expansions = 0
    while heap:
        f, h, _, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        expansions += 1
        if u == goal:
            cells = []
            while u is not None:
                cells.append(u)
                u = parent[u]
            cells.reverse()
            s, d = _count_steps(cells)
            return GridPath(tuple(cells), s, d, expansions)
        gu = g[u]
        for rr, cc, cost in _neighbors(passable, *u):
            v = (rr, cc)
            if v in closed:
                continue
            ng = gu + cost
            if ng < g.get(v, math.inf) - 1e-12:
                g[v] = ng
                parent[v] = u
                hv = _octile(rr, cc, gr, gc)
                heapq.heappush(heap, (ng + hv, hv, rr * w_ + cc, v))
    raise NoPath(f"no grid path from {start} to {goal}")


def astar_plan(grid: OccupancyGrid, start, goal) -> NavPath:
    """A* over free and unknown cells; the robot's own cell is always passable."""
    s, t = grid.cell_of(start), grid.cell_of(goal)
    res = astar_cells(_passable_with_start(grid, s), s, t)
    path = res.to_navpath(grid, start, goal)
    return path


class DStarLite:
    """Incremental planner from a moving start to a fixed goal cell (optimized variant).

    The search runs backwards from the goal.  ``update`` takes the cells whose
    passability changed and the new start cell; keys are kept consistent via
    the ``km`` offset.
    """

    def __init__(self, passable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]):
        self.passable = np.array(passable, dtype=bool)
        self.start = start
        self.goal = goal
        self.last = start
        self.km = 0.0
        self.g: dict = {}
        self.rhs: dict = {goal: 0.0}
        self.open: dict = {}
        self.heap: list = []
        self.expansions = 0
        self._push(goal, (self._h(start, goal), 0.0))

    # occupancy with the start cell forced passable
    def _ok(self, s) -> bool:
        return s == self.start or bool(self.passable[s])

    def _h(self, a, b) -> float:
        return _octile(a[0], a[1], b[0], b[1])

    def _cost(self, u, v) -> float:
        if not (self._ok(u) and self._ok(v)):
            return math.inf
        dr, dc = v[0] - u[0], v[1] - u[1]
        if dr and dc:
            if not (self._ok((u[0] + dr, u[1])) and self._ok((u[0], u[1] + dc))):
                return math.inf
            return SQRT2
        return 1.0

    def _adjacent(self, u):
        h, w = self.passable.shape
        for dr, dc in _MOVES:
            r, c = u[0] + dr, u[1] + dc
            if 0 <= r < h and 0 <= c < w:
                yield (r, c)

    def _key(self, s):
        m = min(self.g.get(s, math.inf), self.rhs.get(s, math.inf))
        return (m + self._h(self.start, s) + self.km, m)

    def _push(self, s, key):
        self.open[s] = key
        heapq.heappush(self.heap, (key, s))

    def _top(self):
        while self.heap:
            key, s = self.heap[0]
            if self.open.get(s) == key:
                return key, s
            heapq.heappop(self.heap)
        return (math.inf, math.inf), None

    def _update_vertex(self, u):
        g, rhs = self.g.get(u, math.inf), self.rhs.get(u, math.inf)
        if g != rhs:
            self._push(u, self._key(u))
        else:
            self.open.pop(u, None)

    def _best_rhs(self, u) -> float:
        best = math.inf
        for s in self._adjacent(u):
            c = self._cost(u, s)
            if c < math.inf:
                best = min(best, c + self.g.get(s, math.inf))
        return best

    def compute(self) -> None:
        while True:
            k_old, u = self._top()
            if u is None:
                return
            start_key = self._key(self.start)
            # keys tied with the start (up to float noise) are settled too, so the
            # greedy path walk never follows a stale value of equal cost
            if k_old[0] > start_key[0] + 1e-9 and self.rhs.get(self.start, math.inf) == self.g.get(self.start, math.inf):
                return
            k_new = self._key(u)
            self.expansions += 1
            if k_old < k_new:
                self._push(u, k_new)
                continue
            gu, rhsu = self.g.get(u, math.inf), self.rhs.get(u, math.inf)
            if gu > rhsu:
                self.g[u] = rhsu
                self.open.pop(u, None)
                for s in self._adjacent(u):
                    if s != self.goal:
                        c = self._cost(s, u)
                        if c + rhsu < self.rhs.get(s, math.inf):
                            self.rhs[s] = c + rhsu
                        self._update_vertex(s)
            else:
                self.g[u] = math.inf
                for s in list(self._adjacent(u)) + [u]:
                    if s != self.goal:
                        self.rhs[s] = self._best_rhs(s)
                    self._update_vertex(s)

    def update(self, changed: Iterable[tuple[int, int]], passable: np.ndarray, start: tuple[int, int]) -> None:
        """Move the start and apply new passability for ``changed`` cells."""
        changed = set(changed)
        if start != self.start:
            changed |= {self.start, start}
        self.km += self._h(self.last, start)
        self.last = start
        self.start = start
        self.passable = np.array(passable, dtype=bool)
        touched = set()
        for cell in changed:
            touched.add(cell)
            touched.update(self._adjacent(cell))
        for u in sorted(touched):
            if u != self.goal:
                self.rhs[u] = self._best_rhs(u)
            self._update_vertex(u)

    def path(self) -> GridPath:
        if self.g.get(self.start, math.inf) == math.inf and self.rhs.get(self.start, math.inf) == math.inf:
            raise NoPath(f"no grid path from {self.start} to {self.goal}")
        cells = [self.start]
        u = self.start
        seen = {u}
        limit = self.passable.size
        while u != self.goal:
            best, nxt = math.inf, None
            for s in self._adjacent(u):
                c = self._cost(u, s)
                if c == math.inf:
                    continue
                val = c + self.g.get(s, math.inf)
                if val < best - 1e-12:
                    best, nxt = val, s
            if nxt is None or best == math.inf or nxt in seen or len(cells) > limit:
                raise NoPath(f"no grid path from {self.start} to {self.goal}")
            cells.append(nxt)
            seen.add(nxt)
            u = nxt
        s, d = _count_steps(cells)
        return GridPath(tuple(cells), s, d, self.expansions)


def dstar_lite_plan(grid_delta: Iterable[tuple[int, int]], state: DStarLite, passable: np.ndarray | None = None,
                    start: tuple[int, int] | None = None) -> GridPath:
    """One incremental replanning cycle on an existing planner state."""
    state.update(grid_delta, state.passable if passable is None else passable,
                 state.start if start is None else start)
    state.compute()
    return state.path()


# ---------------------------------------------------------------------------
# simulator navigator


@dataclass
class _Outcome:
    path: NavPath | None
    code: str = ""
    version: int = 0


class GridNavigator:
    """Occupancy-grid navigator for ``astar`` or ``dstar_lite``."""

    def __init__(self, name: str, world, config, params=None):
        from .sim import PlannerParams

        params = params or PlannerParams()
        self.name = name
        self.config = config
        self.grid = OccupancyGrid(world.bounds, params.extraction.resolution, params.extraction.inflation_radius)
        self.state: DStarLite | None = None
        self._delta: set = set()
        self.expansions: list[int] = []

    def reset(self) -> None:
        self.grid.reset()
        self.state = None
        self._delta = set()

    @property
    def map_size(self) -> tuple[int, int]:
        return int(self.grid.occupied.sum()), int(self.grid.observed.sum())

    @property
    def version(self) -> int:
        return self.grid.version

    def observe(self, scan: SensorScan, pose) -> None:
        self._delta |= grid_update(self.grid, scan, pose, self.config.n_beams, self.config.sensor_range)

    def plan(self, pose, goal) -> _Outcome:
        start, target = self.grid.cell_of(pose), self.grid.cell_of(goal)
        try:
            if self.name == "astar":
                res = astar_cells(_passable_with_start(self.grid, start), start, target)
            else:
                if self.state is None or self.state.goal != target:
                    self.state = DStarLite(self.grid.passable(), start, target)
                    self._delta = set()
                    self.state.compute()
                    res = self.state.path()
                else:
                    res = dstar_lite_plan(self._delta, self.state, self.grid.passable(), start)
                self._delta = set()
        except NoPath as exc:
            self._delta = set()
            return _Outcome(None, exc.code, self.version)
        self.expansions.append(res.expansions)
        return _Outcome(res.to_navpath(self.grid, pose, goal), "", self.version)


__all__ = [
    "DStarLite", "FREE_CELL", "GridNavigator", "GridPath", "OCCUPIED_CELL", "OccupancyGrid", "UNKNOWN_CELL",
    "astar_cells", "astar_plan", "bresenham", "dstar_lite_plan", "grid_update",
]
