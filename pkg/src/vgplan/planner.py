"""Shortest-path search on the global layer, space labels, and graph files."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import EPS_GEOM, Point2, as_point
from .vgraph import (
    ACTIVE, BLOCKED, CONTOUR, FREE, UNKNOWN, VISIBILITY,
    GraphSnapshot, VGraph, escaping_mask,
)

ATTEMPTABLE = "attemptable"
NON_ATTEMPTABLE = "non_attemptable"
MODES = (ATTEMPTABLE, NON_ATTEMPTABLE)

START_ID = -1
GOAL_ID = -2


class PlanningError(Exception):
    code = "planning_error"

    def __init__(self, message: str = "", code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(f"{self.code}: {message}" if message else self.code)


class TerminalInObstacle(PlanningError):
    code = "terminal_in_obstacle"

    def __init__(self, message: str = "", which: str = "terminal"):
        self.which = which
        super().__init__(message)


class NoPath(PlanningError):
    code = "no_route"


class TerminalIsolated(NoPath):
    code = "terminal_isolated"


@dataclass(frozen=True)
class PlanRequest:
    start: Point2
    goal: Point2
    mode: str = ATTEMPTABLE

    def __post_init__(self):
        object.__setattr__(self, "start", as_point(self.start))
        object.__setattr__(self, "goal", as_point(self.goal))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class NavPath:
    waypoints: tuple[Point2, ...]
    length: float
    via_unknown: bool = False
    vertex_ids: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.waypoints)


def polyline_length(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    d = np.diff(pts, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _as_snapshot(graph) -> GraphSnapshot:
    return graph.snapshot() if isinstance(graph, VGraph) else graph


def _visible_rows(p: Point2, snap: GraphSnapshot, rows: np.ndarray, reduce: bool) -> np.ndarray:
    if len(rows) == 0:
        return rows
    pos = snap.pos[rows]
    d = pos - np.array(p)
    length = np.hypot(d[:, 0], d[:, 1])
    ok = length > EPS_GEOM
    if reduce:
        esc = escaping_mask(pos, snap.prev_pos[rows], snap.next_pos[rows], d)
        ok &= (length <= snap.long_edge_threshold) | esc
    rows = rows[ok]
    if len(rows) == 0:
        return rows
    clear = snap.obstacles.clear_from(p, snap.pos[rows])
    if len(snap.blockers.block_a):
        clear &= snap.blockers.clear_from(p, snap.pos[rows])
    return rows[clear]


def _check_terminal(p: Point2, snap: GraphSnapshot, which: str) -> None:
    pt = np.array([p])
    if snap.obstacles.contains(pt, strict=True)[0]:
        raise TerminalInObstacle(f"{which} {tuple(p)} lies inside an obstacle", which)


def connect_terminal(p, graph, mode: str = ATTEMPTABLE, reduce: bool = True) -> list[tuple[int, float]]:
    """Visibility edges from a temporary terminal to global vertices, sorted by vertex id."""
    snap = _as_snapshot(graph)
    p = as_point(p)
    _check_terminal(p, snap, "terminal")
    rows = np.arange(len(snap))
    if mode == NON_ATTEMPTABLE:
        rows = rows[snap.free]
    rows = _visible_rows(p, snap, rows, reduce)
    if len(rows) == 0:
        raise TerminalIsolated(f"no visible vertex from {tuple(p)}")
    out = []
    for r in rows.tolist():
        q = snap.pos[r]
        out.append((int(snap.ids[r]), math.hypot(q[0] - p.x, q[1] - p.y)))
    return out


def _direct_clear(a: Point2, b: Point2, snap: GraphSnapshot) -> bool:
    if math.hypot(b.x - a.x, b.y - a.y) <= EPS_GEOM:
        return True
    src, dst = np.array([a]), np.array([b])
    ok = bool(snap.obstacles.segments_clear(src, dst)[0])
    if ok and len(snap.blockers.block_a):
        ok = bool(snap.blockers.segments_clear(src, dst)[0])
    return ok


def plan(req: PlanRequest, graph) -> NavPath:
    """Minimum-length path from ``req.start`` to ``req.goal`` over active edges.

    Ties in length are broken by hop count and then by the lexicographic
    vertex-id sequence.  In attemptable mode the start and goal may also be
    joined directly; non-attemptable search runs on free vertices only.
    """
    snap = _as_snapshot(graph)
    start, goal = req.start, req.goal
    _check_terminal(start, snap, "start")
    _check_terminal(goal, snap, "goal")
    attempt = req.mode == ATTEMPTABLE
    fail_code = "no_route" if attempt else "goal_unreachable_known"

    if attempt and _direct_clear(start, goal, snap):
        return NavPath((start, goal), math.hypot(goal.x - start.x, goal.y - start.y), False, ())

    rows = np.arange(len(snap))
    usable = np.ones(len(snap), dtype=bool) if attempt else snap.free.copy()
    s_rows = _visible_rows(start, snap, rows[usable], True)
    if len(s_rows) == 0:
        raise TerminalIsolated(f"start {tuple(start)} sees no usable vertex")
    g_rows = _visible_rows(goal, snap, rows[usable], True)
    if len(g_rows) == 0:
        raise TerminalIsolated(f"goal {tuple(goal)} sees no usable vertex")

    n = len(snap)
    src, dst = n, n + 1
    goal_edge = {int(r): math.hypot(snap.pos[r, 0] - goal.x, snap.pos[r, 1] - goal.y) for r in g_rows}
    dist = [math.inf] * (n + 2)
    hops = [0] * (n + 2)
    pred = [-1] * (n + 2)
    done = [False] * (n + 2)
    dist[src] = 0.0
    ids = snap.ids

    def seq(v):
        out = []
        while v >= 0 and v < n:
            out.append(int(ids[v]))
            v = pred[v]
        return out[::-1]

    def relax(u, v, w):
        nd = dist[u] + w
        tol = 1e-12 * max(1.0, nd)
        if nd < dist[v] - tol:
            better = True
        elif nd <= dist[v] + tol and not done[v]:
            h_new = hops[u] + 1
            better = h_new < hops[v] or (h_new == hops[v] and seq(u) < seq(pred[v]))
        else:
            better = False
        if better:
            dist[v] = nd
            hops[v] = hops[u] + 1
            pred[v] = u
            heapq.heappush(heap, (nd, hops[v], v))

    heap: list = []
    for r in s_rows.tolist():
        relax(src, r, math.hypot(snap.pos[r, 0] - start.x, snap.pos[r, 1] - start.y))
    done[src] = True
    while heap:
        d, h, u = heapq.heappop(heap)
        if done[u] or d != dist[u] or h != hops[u]:
            continue
        done[u] = True
        if u == dst:
            break
        if u in goal_edge:
            relax(u, dst, goal_edge[u])
        for v, w in snap.adjacency[u]:
            if usable[v] and not done[v]:
                relax(u, v, w)

    if not done[dst]:
        raise NoPath(f"no path from {tuple(start)} to {tuple(goal)}", code=fail_code)
    chain = []
    v = pred[dst]
    while v != src:
        chain.append(v)
        v = pred[v]
    chain.reverse()
    pts = [start] + [Point2(float(snap.pos[r, 0]), float(snap.pos[r, 1])) for r in chain] + [goal]
    via_unknown = bool(any(not snap.free[r] for r in chain))
    return NavPath(tuple(pts), polyline_length(pts), via_unknown, tuple(int(ids[r]) for r in chain))


def update_space_labels(graph: VGraph, robot) -> VGraph:
    """Mark every vertex with a clear sight line from ``robot`` as free (labels never revert)."""
    snap = graph.snapshot()
    robot = as_point(robot)
    if len(snap) == 0 or snap.obstacles.contains(np.array([robot]), strict=True)[0]:
        return graph
    rows = _visible_rows(robot, snap, np.flatnonzero(~snap.free), reduce=False)
    changed = False
    for r in rows.tolist():
        v = graph.vertices[int(snap.ids[r])]
        if v.label != FREE:
            v.label = FREE
            changed = True
    if changed:
        graph._touch()
    return graph


# ---------------------------------------------------------------------------
# graph files

HEADER = "vgraph 1"
_KIND_OUT = {CONTOUR: "contour", VISIBILITY: "vis"}
_KIND_IN = {"contour": CONTOUR, "vis": VISIBILITY}


class GraphFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _ref(v: int | None) -> str:
    return "-" if v is None else str(v)


def save_graph(graph: VGraph) -> bytes:
    lines = [HEADER]
    for vid in sorted(graph.vertices):
        v = graph.vertices[vid]
        lines.append(
            f"V {vid} {v.position.x!r} {v.position.y!r} {v.polygon_id} {_ref(v.prev)} {_ref(v.next)} "
            f"{v.label} {int(v.boundary)}"
        )
    for key in sorted(graph.edges):
        e = graph.edges[key]
        lines.append(f"E {e.a} {e.b} {_KIND_OUT[e.kind]} {e.status}")
    return ("\n".join(lines) + "\n").encode("ascii")


def _parse_int(tok: str, what: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise GraphFormatError(f"bad {what} {tok!r}", line) from None


def _parse_float(tok: str, what: str, line: int) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise GraphFormatError(f"bad {what} {tok!r}", line) from None
    if not math.isfinite(x):
        raise GraphFormatError(f"non-finite {what} {tok!r}", line)
    return x


def load_graph(data: bytes | str, params=None) -> VGraph:
    """Inverse of :func:`save_graph`; raises :class:`GraphFormatError` with a line number."""
    text = data.decode("ascii", errors="replace") if isinstance(data, bytes) else data
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        got = lines[0].strip() if lines else ""
        raise GraphFormatError(f"expected header {HEADER!r}, got {got!r}", 1)
    g = VGraph(params)
    links: dict[int, tuple[int | None, int | None, int]] = {}
    edges = []
    for no, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "V":
            if len(tok) != 9:
                raise GraphFormatError(f"V record needs 8 fields, got {len(tok) - 1}", no)
            vid = _parse_int(tok[1], "vertex id", no)
            x = _parse_float(tok[2], "x", no)
            y = _parse_float(tok[3], "y", no)
            pid = _parse_int(tok[4], "polygon id", no)
            prev = None if tok[5] == "-" else _parse_int(tok[5], "prev id", no)
            nxt = None if tok[6] == "-" else _parse_int(tok[6], "next id", no)
            if tok[7] not in (FREE, UNKNOWN):
                raise GraphFormatError(f"bad label {tok[7]!r}", no)
            if tok[8] not in ("0", "1"):
                raise GraphFormatError(f"bad boundary flag {tok[8]!r}", no)
            if vid in g.vertices:
                raise GraphFormatError(f"duplicate vertex id {vid}", no)
            g.add_vertex((x, y), pid, label=tok[7], boundary=tok[8] == "1", vid=vid)
            links[vid] = (prev, nxt, no)
        elif tok[0] == "E":
            if len(tok) != 5:
                raise GraphFormatError(f"E record needs 4 fields, got {len(tok) - 1}", no)
            a = _parse_int(tok[1], "vertex id", no)
            b = _parse_int(tok[2], "vertex id", no)
            if tok[3] not in _KIND_IN:
                raise GraphFormatError(f"bad edge kind {tok[3]!r}", no)
            if tok[4] not in (ACTIVE, BLOCKED):
                raise GraphFormatError(f"bad edge status {tok[4]!r}", no)
            edges.append((a, b, _KIND_IN[tok[3]], tok[4], no))
        else:
            raise GraphFormatError(f"unknown record {tok[0]!r}", no)

    for vid, (prev, nxt, no) in links.items():
        for other, what in ((prev, "prev"), (nxt, "next")):
            if other is not None and other not in g.vertices:
                raise GraphFormatError(f"vertex {vid} {what} refers to missing vertex {other}", no)
        if nxt is not None and links[nxt][0] != vid:
            raise GraphFormatError(f"vertex {vid} next {nxt} does not point back", no)
        if prev is not None and links[prev][1] != vid:
            raise GraphFormatError(f"vertex {vid} prev {prev} does not point back", no)
    for vid, (prev, nxt, _) in links.items():
        g.vertices[vid].prev = prev
        g.vertices[vid].next = nxt

    seen = set()
    for a, b, kind, status, no in edges:
        for vid in (a, b):
            if vid not in g.vertices:
                raise GraphFormatError(f"edge refers to missing vertex {vid}", no)
        if a == b:
            raise GraphFormatError(f"self-loop on vertex {a}", no)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key}", no)
        seen.add(key)
        linked = g.vertices[a].next == b or g.vertices[b].next == a
        if (kind == CONTOUR) != linked:
            raise GraphFormatError(f"edge {key} kind {kind} disagrees with contour links", no)
        e = g.add_edge(a, b, kind)
        e.status = status
    for vid, v in g.vertices.items():
        if v.next is not None and (min(vid, v.next), max(vid, v.next)) not in seen:
            raise GraphFormatError(f"contour link {vid}->{v.next} has no E record", links[vid][2])
    g._touch()
    return g


__all__ = [
    "ATTEMPTABLE", "NON_ATTEMPTABLE", "START_ID", "GOAL_ID",
    "GraphFormatError", "NavPath", "NoPath", "PlanRequest", "PlanningError",
    "TerminalInObstacle", "TerminalIsolated",
    "connect_terminal", "load_graph", "plan", "polyline_length", "save_graph", "update_space_labels",
]
