"""Two-layer visibility graph.

The local layer is rebuilt from each frame's polygons.  The global layer is a
persistent set of :class:`NavVertex` and :class:`VisEdge` that the local layer
is merged into: vertex association, robust position fitting, vote-based
removal, edge merging and elimination, and dynamic-obstacle edge blocking.

Contour neighbours are stored with the obstacle on the left of the
prev -> vertex -> next traversal, so outer contours run counter-clockwise and
hole contours clockwise.  The obstacle-side cone at a vertex is then the
counter-clockwise sweep from the direction to ``next`` to the direction to
``prev`` for every vertex.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    EPS_GEOM,
    Obstacles,
    Point2,
    Polygon,
    as_point,
    in_open_cone,
    signed_area,
)

FREE = "free"
UNKNOWN = "unknown"
CONTOUR = "contour"
VISIBILITY = "visibility"
ACTIVE = "active"
BLOCKED = "blocked"


@dataclass(frozen=True)
class MergeParams:
    assoc_dist: float = 0.5
    vote_window: int = 5
    vote_miss_limit: int = 3
    robust_max_iters: int = 10
    inlier_gate: float = 2.0
    history_depth: int = 10
    sigma_floor: float = 0.05
    long_edge_threshold: float = 2.0
    dynamic_age: int = 3
    # width of the band along the local-region border exempt from miss votes
    border_margin: float = 1.0

    def __post_init__(self):
        if self.assoc_dist <= 0 or self.long_edge_threshold < 0:
            raise ValueError("assoc_dist must be > 0 and long_edge_threshold >= 0")
        if not 1 <= self.vote_miss_limit <= self.vote_window:
            raise ValueError("need 1 <= vote_miss_limit <= vote_window")
        if self.history_depth < 1 or self.robust_max_iters < 1:
            raise ValueError("history_depth and robust_max_iters must be >= 1")


@dataclass
class NavVertex:
    id: int
    position: Point2
    polygon_id: int
    prev: int | None = None
    next: int | None = None
    label: str = UNKNOWN
    boundary: bool = False
    hit_count: int = 1
    votes: deque = field(default_factory=deque)  # True = missed in that frame
    history: deque = field(default_factory=deque)

    @property
    def contour_neighbors(self) -> tuple[int | None, int | None]:
        return (self.prev, self.next)

    @property
    def miss_count(self) -> int:
        return sum(self.votes)


@dataclass
class VisEdge:
    a: int
    b: int
    kind: str
    status: str = ACTIVE
    length: float = 0.0

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b)


def edge_key(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise ValueError(f"self-loop on vertex {a}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class LocalRegion:
    """Axis-aligned window of the current frame, optionally cut to a sensing disk."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    center: Point2 | None = None
    radius: float | None = None

    @classmethod
    def around(cls, center, half_extent: float, radius: float | None = None) -> "LocalRegion":
        c = as_point(center)
        return cls(c.x - half_extent, c.y - half_extent, c.x + half_extent, c.y + half_extent, c, radius)

    @classmethod
    def of_raster(cls, bounds: Sequence[float], center=None, radius: float | None = None) -> "LocalRegion":
        xmin, ymin, xmax, ymax = bounds
        c = as_point(center) if center is not None else Point2(0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
        return cls(xmin, ymin, xmax, ymax, c, radius)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = (
            (pts[:, 0] >= self.xmin) & (pts[:, 0] <= self.xmax)
            & (pts[:, 1] >= self.ymin) & (pts[:, 1] <= self.ymax)
        )
        if self.radius is not None:
            d = np.hypot(pts[:, 0] - self.center.x, pts[:, 1] - self.center.y)
            inside &= d <= self.radius
        return inside

    def in_band(self, pts, margin: float) -> np.ndarray:
        """Points within ``margin`` of the region's outline."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d_edge = np.minimum.reduce([
            pts[:, 0] - self.xmin, self.xmax - pts[:, 0],
            pts[:, 1] - self.ymin, self.ymax - pts[:, 1],
        ])
        band = d_edge <= margin
        if self.radius is not None:
            d = np.hypot(pts[:, 0] - self.center.x, pts[:, 1] - self.center.y)
            band |= d >= self.radius - margin
        return band

    def overlaps_segments(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Conservative: segment bounding box meets the region box."""
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        return (hi[:, 0] >= self.xmin) & (lo[:, 0] <= self.xmax) & (hi[:, 1] >= self.ymin) & (lo[:, 1] <= self.ymax)


# ---------------------------------------------------------------------------
# escaping directions


def escaping_mask(at, prev, nxt, direction) -> np.ndarray:
    """Vectorized escaping test; rows with a missing neighbour (NaN) count as escaping."""
    at = np.asarray(at, dtype=float)
    to_prev = np.asarray(prev, dtype=float) - at
    to_next = np.asarray(nxt, dtype=float) - at
    inside = in_open_cone(direction, to_next, to_prev)
    missing = np.isnan(to_prev).any(axis=-1) | np.isnan(to_next).any(axis=-1)
    return ~inside | missing


def is_escaping(at, prev, nxt, direction) -> bool:
    """True iff ``direction`` lies outside the open obstacle cone at ``at``.

    The cone is the counter-clockwise sweep from the direction towards
    ``nxt`` to the direction towards ``prev``.  Directions along either
    contour edge are escaping.  For graph edges the direction passed is the
    travel direction on arrival at the vertex: an edge is kept only if
    continuing straight past the vertex does not enter the obstacle.
    """
    return bool(escaping_mask(np.asarray(at, float)[None], np.asarray(prev, float)[None],
                              np.asarray(nxt, float)[None], np.asarray(direction, float)[None])[0])


# ---------------------------------------------------------------------------
# local layer


@dataclass
class LocalLayer:
    positions: np.ndarray
    polygon_index: np.ndarray
    prev: np.ndarray
    next: np.ndarray
    boundary: np.ndarray
    polygons: list
    edges: dict  # (i, j) with i < j -> kind
    pairs_enumerated: int = 0

    def __len__(self) -> int:
        return len(self.positions)

    def ring_indices(self, k: int) -> list[int]:
        """Local vertex indices of polygon ``k`` in obstacle-left order."""
        start = int(np.flatnonzero(self.polygon_index == k)[0])
        out = [start]
        cur = int(self.next[start])
        while cur != start:
            out.append(cur)
            cur = int(self.next[cur])
        return out


def _layer_arrays(polys: Sequence[Polygon]):
    pos, pidx, prev, nxt, bnd, rings = [], [], [], [], [], []
    base = 0
    for k, poly in enumerate(polys):
        ring = poly.ring()
        flags = list(poly.boundary[::-1]) if poly.hole else list(poly.boundary)
        n = len(ring)
        idx = np.arange(n)
        pos.append(ring)
        pidx.append(np.full(n, k))
        prev.append(base + (idx - 1) % n)
        nxt.append(base + (idx + 1) % n)
        bnd.append(np.asarray(flags, dtype=bool))
        rings.append(ring)
        base += n
    if not pos:
        z = np.zeros(0, dtype=int)
        return np.zeros((0, 2)), z, z, z, np.zeros(0, dtype=bool), rings
    return (np.concatenate(pos), np.concatenate(pidx), np.concatenate(prev),
            np.concatenate(nxt), np.concatenate(bnd), rings)


def build_local_layer(polys: Sequence[Polygon], params: MergeParams | None = None) -> LocalLayer:
    """Partially reduced visibility graph over one frame's polygons.

    Contour edges are always kept.  Any other vertex pair is kept when the
    segment is clear of every polygon and it is either short (at most
    ``long_edge_threshold``) or escaping at both ends.
    """
    params = params or MergeParams()
    pos, pidx, prev, nxt, bnd, rings = _layer_arrays(polys)
    n = len(pos)
    edges: dict[tuple[int, int], str] = {}
    for i in range(n):
        j = int(nxt[i])
        edges[(min(i, j), max(i, j))] = CONTOUR
    layer = LocalLayer(pos, pidx, prev, nxt, bnd, list(polys), edges)
    if n < 2:
        return layer
    ii, jj = np.triu_indices(n, k=1)
    layer.pairs_enumerated = len(ii)
    adjacent = (nxt[ii] == jj) | (nxt[jj] == ii)
    ii, jj = ii[~adjacent], jj[~adjacent]
    d = pos[jj] - pos[ii]
    length = np.hypot(d[:, 0], d[:, 1])
    ok = length > EPS_GEOM
    ii, jj, d, length = ii[ok], jj[ok], d[ok], length[ok]
    long = length > params.long_edge_threshold
    # arrival at j travels along d, arrival at i along -d
    esc_j = escaping_mask(pos[jj], pos[prev[jj]], pos[nxt[jj]], d)
    esc_i = escaping_mask(pos[ii], pos[prev[ii]], pos[nxt[ii]], -d)
    keep = ~long | (esc_i & esc_j)
    ii, jj = ii[keep], jj[keep]
    obstacles = Obstacles.from_rings(rings)
    clear = obstacles.segments_clear(pos[ii], pos[jj])
    for i, j in zip(ii[clear].tolist(), jj[clear].tolist()):
        edges[(i, j)] = VISIBILITY
    return layer


# ---------------------------------------------------------------------------
# association and robust fitting


def associate_vertices(local, global_, assoc_dist: float) -> list[tuple[int, int]]:
    """Mutual-nearest-neighbour pairs (local index, global index) closer than ``assoc_dist``."""
    local = np.asarray(local, dtype=float).reshape(-1, 2)
    global_ = np.asarray(global_, dtype=float).reshape(-1, 2)
    if len(local) == 0 or len(global_) == 0:
        return []
    diff = local[:, None, :] - global_[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    nn_g = dist.argmin(axis=1)
    nn_l = dist.argmin(axis=0)
    out = []
    for li, gi in enumerate(nn_g.tolist()):
        if nn_l[gi] == li and dist[li, gi] < assoc_dist:
            out.append((li, gi))
    return out


def robust_update(
    history: Sequence[Sequence[float]],
    inlier_gate: float = 2.0,
    max_iters: int = 10,
    sigma_floor: float = 0.05,
) -> tuple[Point2, np.ndarray]:
    """Iteratively re-selected inlier mean of a position history.

    Starts with every sample as an inlier; each iteration gates samples by
    Mahalanobis distance to the inlier mean/covariance.  A near-singular
    covariance (fewer than three inliers, or a flat spread) switches to a
    Euclidean gate of ``inlier_gate * max(sqrt(trace / 2), sigma_floor)``.
    Stops once the inlier set repeats or after ``max_iters`` iterations.
    """
    pts = np.asarray(history, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("robust_update needs a non-empty history")
    inliers = np.ones(len(pts), dtype=bool)
    for _ in range(max_iters):
        sel = pts[inliers]
        mu = sel.mean(axis=0)
        delta = pts - mu
        cov = np.cov(sel.T, bias=True) if len(sel) > 1 else np.zeros((2, 2))
        eig = np.linalg.eigvalsh(cov)
        singular = len(sel) < 3 or eig[0] <= max(1e-12, 1e-6 * eig[1])
        if singular:
            radius = inlier_gate * max(math.sqrt(max(float(np.trace(cov)), 0.0) / 2.0), sigma_floor)
            new = np.hypot(delta[:, 0], delta[:, 1]) <= radius
        else:
            m2 = np.einsum("ij,jk,ik->i", delta, np.linalg.inv(cov), delta)
            new = m2 <= inlier_gate * inlier_gate
        if not new.any() or np.array_equal(new, inliers):
            break
        inliers = new
    mu = pts[inliers].mean(axis=0)
    return Point2(float(mu[0]), float(mu[1])), inliers


# ---------------------------------------------------------------------------
# graph snapshot consumed by the planner


@dataclass
class GraphSnapshot:
    ids: np.ndarray
    index: dict
    pos: np.ndarray
    prev_pos: np.ndarray
    next_pos: np.ndarray
    free: np.ndarray
    obstacles: Obstacles
    blockers: Obstacles
    adjacency: list  # row -> list of (row, length) over active edges
    long_edge_threshold: float
    version: int

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class _Pending:
    points: np.ndarray
    age: int


@dataclass
class FrameStats:
    local_vertices: int = 0
    pairs_enumerated: int = 0
    associated: int = 0
    added: int = 0
    removed: int = 0
    edges_eliminated: int = 0
    edges_blocked: int = 0
    edges_reconnected: int = 0


class VGraph:
    """Global layer plus bookkeeping for the per-frame merge."""

    def __init__(self, params: MergeParams | None = None):
        self.params = params or MergeParams()
        self.vertices: dict[int, NavVertex] = {}
        self.edges: dict[tuple[int, int], VisEdge] = {}
        self.transient: list[Polygon] = []
        self.local: LocalLayer | None = None
        self.frame = 0
        self.version = 0
        self.stats = FrameStats()
        self._adj: dict[int, set[int]] = {}
        self._pending: list[_Pending] = []
        self._next_vid = 0
        self._next_pid = 0
        self._snapshot: GraphSnapshot | None = None
        self._structure_cache = None

    # -- construction -------------------------------------------------------

    @classmethod
    def from_polygons(cls, polys: Sequence[Polygon], params: MergeParams | None = None,
                      label: str = FREE) -> "VGraph":
        """Batch graph over a fully known polygon set."""
        g = cls(params)
        layer = build_local_layer(polys, g.params)
        merge_layers(g, layer, region=None)
        for v in g.vertices.values():
            v.label = label
        g._touch()
        return g

    def clear(self) -> None:
        params = self.params
        self.__init__(params)

    def __len__(self) -> int:
        return len(self.vertices)

    # -- primitive mutation ---------------------------------------------------

    def _touch(self, structural: bool = False) -> None:
        self._snapshot = None
        self._structure_cache = None
        if structural:
            self.version += 1

    def new_vertex_id(self) -> int:
        vid = self._next_vid
        self._next_vid += 1
        return vid

    def new_polygon_id(self) -> int:
        pid = self._next_pid
        self._next_pid += 1
        return pid

    def add_vertex(self, position, polygon_id: int, label: str = UNKNOWN, boundary: bool = False,
                   vid: int | None = None) -> NavVertex:
        if vid is None:
            vid = self.new_vertex_id()
        elif vid in self.vertices:
            raise ValueError(f"duplicate vertex id {vid}")
        self._next_vid = max(self._next_vid, vid + 1)
        self._next_pid = max(self._next_pid, polygon_id + 1)
        p = as_point(position)
        v = NavVertex(vid, p, polygon_id, label=label, boundary=boundary,
                      votes=deque(maxlen=self.params.vote_window),
                      history=deque([p], maxlen=self.params.history_depth))
        self.vertices[vid] = v
        self._adj[vid] = set()
        self._touch(True)
        return v

    def add_edge(self, a: int, b: int, kind: str, status: str = ACTIVE) -> VisEdge:
        key = edge_key(a, b)
        for vid in key:
            if vid not in self.vertices:
                raise KeyError(f"edge endpoint {vid} is not a vertex")
        pa, pb = self.vertices[key[0]].position, self.vertices[key[1]].position
        e = self.edges.get(key)
        if e is None:
            e = VisEdge(key[0], key[1], kind, status, math.hypot(pb.x - pa.x, pb.y - pa.y))
            self.edges[key] = e
            self._adj[key[0]].add(key[1])
            self._adj[key[1]].add(key[0])
            self._touch(True)
        elif e.kind != kind and kind == CONTOUR:
            e.kind = CONTOUR
            self._touch(True)
        return e

    def remove_edge(self, a: int, b: int) -> None:
        key = edge_key(a, b)
        if self.edges.pop(key, None) is not None:
            self._adj[key[0]].discard(key[1])
            self._adj[key[1]].discard(key[0])
            self._touch(True)

    def link(self, a: int, b: int) -> None:
        """Make ``b`` the contour successor of ``a``, dropping stale links."""
        va, vb = self.vertices[a], self.vertices[b]
        if va.next == b and vb.prev == a:
            self.add_edge(a, b, CONTOUR)
            return
        if va.next is not None and va.next != b:
            self.unlink(a, va.next)
        if vb.prev is not None and vb.prev != a:
            self.unlink(vb.prev, b)
        va.next = b
        vb.prev = a
        self.add_edge(a, b, CONTOUR)
        self._touch(True)

    def unlink(self, a: int, b: int) -> None:
        va, vb = self.vertices.get(a), self.vertices.get(b)
        if va is not None and va.next == b:
            va.next = None
        if vb is not None and vb.prev == a:
            vb.prev = None
        if va is not None and vb is not None:
            still = va.prev == b or vb.next == a
            if not still:
                self.remove_edge(a, b)
        self._touch(True)

    def remove_vertex(self, vid: int, splice: bool = True) -> None:
        v = self.vertices[vid]
        p, n = v.prev, v.next
        for other in list(self._adj[vid]):
            self.remove_edge(vid, other)
        if p is not None and p in self.vertices and self.vertices[p].next == vid:
            self.vertices[p].next = None
        if n is not None and n in self.vertices and self.vertices[n].prev == vid:
            self.vertices[n].prev = None
        del self.vertices[vid]
        del self._adj[vid]
        if (splice and p is not None and n is not None and p != n
                and p in self.vertices and n in self.vertices
                and self.vertices[p].next is None and self.vertices[n].prev is None):
            self.link(p, n)
        self._touch(True)

    def refresh_lengths(self, vids: Iterable[int] | None = None) -> None:
        keys = self.edges.keys() if vids is None else {
            edge_key(v, o) for v in vids if v in self._adj for o in self._adj[v]
        }
        for key in keys:
            e = self.edges[key]
            pa, pb = self.vertices[e.a].position, self.vertices[e.b].position
            e.length = math.hypot(pb.x - pa.x, pb.y - pa.y)

    def neighbors(self, vid: int) -> set[int]:
        return set(self._adj[vid])

    # -- derived structure ----------------------------------------------------

    def contours(self) -> tuple[list[list[int]], list[list[int]]]:
        """Closed rings and open chains of vertex ids following ``next`` links."""
        if self._structure_cache is not None:
            return self._structure_cache
        seen: set[int] = set()
        rings, chains = [], []
        verts = self.vertices
        for vid in sorted(verts):
            v = verts[vid]
            if vid in seen or v.next is None:
                continue
            if v.prev is not None and v.prev in verts and verts[v.prev].next == vid:
                continue
            chain = [vid]
            seen.add(vid)
            cur = v.next
            while cur is not None and cur not in seen:
                chain.append(cur)
                seen.add(cur)
                cur = verts[cur].next
            chains.append(chain)
        for vid in sorted(verts):
            if vid in seen or verts[vid].next is None:
                continue
            ring = [vid]
            seen.add(vid)
            cur = verts[vid].next
            closed = False
            while cur is not None:
                if cur == vid:
                    closed = True
                    break
                if cur in seen:
                    break
                ring.append(cur)
                seen.add(cur)
                cur = verts[cur].next
            (rings if closed and len(ring) >= 3 else chains).append(ring)
        self._structure_cache = (rings, chains)
        return self._structure_cache

    def positions(self, ids: Sequence[int]) -> np.ndarray:
        if not ids:
            return np.zeros((0, 2))
        return np.array([self.vertices[i].position for i in ids], dtype=float)

    def obstacles(self) -> Obstacles:
        rings, chains = self.contours()
        ring_pts = []
        for r in rings:
            pts = self.positions(r)
            if abs(signed_area(pts)) > EPS_GEOM:
                ring_pts.append(pts)
            else:
                chains.append(r + [r[0]])
        return Obstacles.from_rings(ring_pts, [self.positions(c) for c in chains])

    def polygons(self) -> list[Polygon]:
        """Closed global rings as :class:`Polygon` objects (holes flagged)."""
        out = []
        rings, _ = self.contours()
        for r in rings:
            pts = self.positions(r)
            area = signed_area(pts)
            if abs(area) <= EPS_GEOM:
                continue
            try:
                out.append(Polygon(tuple(map(tuple, pts)), id=self.vertices[r[0]].polygon_id, hole=area < 0))
            except ValueError:
                continue
        return out

    def is_escaping(self, vid: int, direction) -> bool:
        v = self.vertices[vid]
        nan = (math.nan, math.nan)
        prev = self.vertices[v.prev].position if v.prev is not None else nan
        nxt = self.vertices[v.next].position if v.next is not None else nan
        return is_escaping(v.position, prev, nxt, direction)

    def _neighbor_arrays(self, ids: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        nan = (math.nan, math.nan)
        prev = np.array([self.vertices[self.vertices[i].prev].position if self.vertices[i].prev is not None
                         else nan for i in ids], dtype=float).reshape(-1, 2)
        nxt = np.array([self.vertices[self.vertices[i].next].position if self.vertices[i].next is not None
                        else nan for i in ids], dtype=float).reshape(-1, 2)
        return prev, nxt

    def snapshot(self) -> GraphSnapshot:
        if self._snapshot is not None:
            return self._snapshot
        ids = sorted(self.vertices)
        index = {vid: k for k, vid in enumerate(ids)}
        pos = self.positions(ids)
        prev, nxt = self._neighbor_arrays(ids)
        free = np.array([self.vertices[i].label == FREE for i in ids], dtype=bool)
        adjacency: list[list[tuple[int, float]]] = [[] for _ in ids]
        for key in sorted(self.edges):
            e = self.edges[key]
            if e.status != ACTIVE:
                continue
            ra, rb = index[e.a], index[e.b]
            adjacency[ra].append((rb, e.length))
            adjacency[rb].append((ra, e.length))
        blockers = Obstacles.from_polygons(self.transient) if self.transient else Obstacles.empty()
        self._snapshot = GraphSnapshot(
            ids=np.asarray(ids, dtype=int), index=index, pos=pos, prev_pos=prev, next_pos=nxt,
            free=free, obstacles=self.obstacles(), blockers=blockers, adjacency=adjacency,
            long_edge_threshold=self.params.long_edge_threshold, version=self.version,
        )
        return self._snapshot

    # -- comparison / persistence support --------------------------------------

    def structure(self):
        verts = tuple(
            (v.id, v.position.x, v.position.y, v.polygon_id, v.prev, v.next, v.label, v.boundary)
            for v in (self.vertices[k] for k in sorted(self.vertices))
        )
        edges = tuple((e.a, e.b, e.kind, e.status) for e in (self.edges[k] for k in sorted(self.edges)))
        return verts, edges

    def __eq__(self, other):
        if not isinstance(other, VGraph):
            return NotImplemented
        return self.structure() == other.structure()

    __hash__ = None

    def check_invariants(self) -> list[str]:
        """Problems with mutual links, edge endpoints or stored lengths."""
        problems = []
        for vid, v in self.vertices.items():
            if v.next is not None and self.vertices.get(v.next, None) is None:
                problems.append(f"vertex {vid} next {v.next} missing")
            elif v.next is not None and self.vertices[v.next].prev != vid:
                problems.append(f"vertex {vid} next {v.next} not mutual")
            if v.prev is not None and self.vertices.get(v.prev, None) is None:
                problems.append(f"vertex {vid} prev {v.prev} missing")
        for key, e in self.edges.items():
            if e.a not in self.vertices or e.b not in self.vertices:
                problems.append(f"edge {key} has a missing endpoint")
                continue
            pa, pb = self.vertices[e.a].position, self.vertices[e.b].position
            if abs(e.length - math.hypot(pb.x - pa.x, pb.y - pa.y)) > 1e-9:
                problems.append(f"edge {key} stale length")
        return problems


# ---------------------------------------------------------------------------
# per-frame operations


def classify_polygons(graph: VGraph, polys: Sequence[Polygon]) -> tuple[list[Polygon], list[Polygon]]:
    """Split a frame's polygons into registered ones and young, transient ones.

    A polygon is registered if any vertex lies within ``assoc_dist`` of a
    global vertex, or once it has been seen in ``dynamic_age`` consecutive
    frames (matched frame to frame by vertex proximity).  Younger polygons
    only act as dynamic blockers.
    """
    p = graph.params
    if p.dynamic_age <= 1:
        graph._pending = []
        return list(polys), []
    gpos = graph.positions(sorted(graph.vertices))
    registered, transient, pending = [], [], []
    for poly in polys:
        pts = poly.array
        if len(gpos):
            diff = pts[:, None, :] - gpos[None, :, :]
            if np.hypot(diff[..., 0], diff[..., 1]).min() < p.assoc_dist:
                registered.append(poly)
                continue
        best_age, best_frac = 0, 0.0
        for pend in graph._pending:
            diff = pts[:, None, :] - pend.points[None, :, :]
            frac = float((np.hypot(diff[..., 0], diff[..., 1]).min(axis=1) < 0.5 * p.assoc_dist).mean())
            if frac >= 0.5 and frac > best_frac:
                best_age, best_frac = pend.age, frac
        age = best_age + 1
        if age >= p.dynamic_age:
            registered.append(poly)
        else:
            transient.append(poly)
            pending.append(_Pending(pts, age))
    graph._pending = pending
    return registered, transient


def merge_layers(graph: VGraph, local: LocalLayer, region: LocalRegion | None) -> VGraph:
    """Merge one local layer into the global layer (in place; returns ``graph``).

    ``region=None`` treats the whole plane as observed, which is how batch
    graphs are built.
    """
    p = graph.params
    graph.frame += 1
    stats = FrameStats(local_vertices=len(local), pairs_enumerated=local.pairs_enumerated)
    all_ids = sorted(graph.vertices)
    all_pos = graph.positions(all_ids)
    if region is None:
        in_region = np.ones(len(all_ids), dtype=bool)
        band = np.zeros(len(all_ids), dtype=bool)
    else:
        in_region = region.contains(all_pos) if len(all_ids) else np.zeros(0, dtype=bool)
        band = region.in_band(all_pos, p.border_margin) if len(all_ids) else np.zeros(0, dtype=bool)
    region_ids = [vid for vid, ok in zip(all_ids, in_region) if ok]
    inner_ids = {vid for vid, ok, bd in zip(all_ids, in_region, band) if ok and not bd}
    region_band = band[in_region] if len(all_ids) else band
    region_pos = all_pos[in_region] if len(all_ids) else all_pos

    l2g: dict[int, int] = {}
    matched: set[int] = set()
    # border vertices are raster artifacts and never stand for a real corner
    interior = np.flatnonzero(~np.asarray(local.boundary, dtype=bool))
    for k, gi in associate_vertices(local.positions[interior], region_pos, p.assoc_dist):
        li = int(interior[k])
        vid = region_ids[gi]
        v = graph.vertices[vid]
        v.history.append(Point2(*map(float, local.positions[li])))
        v.position, _ = robust_update(v.history, p.inlier_gate, p.robust_max_iters, p.sigma_floor)
        v.hit_count += 1
        v.votes.append(False)
        v.boundary = False
        l2g[li] = vid
        matched.add(vid)
    stats.associated = len(matched)

    removals = []
    for vid, in_band in zip(region_ids, region_band):
        if vid in matched or in_band:
            continue
        v = graph.vertices[vid]
        v.votes.append(True)
        if v.miss_count >= p.vote_miss_limit:
            removals.append(vid)

    added = _merge_contours(graph, local, l2g, inner_ids, region)
    stats.added += added

    for vid in removals:
        graph.remove_vertex(vid, splice=True)
    stats.removed = len(removals)

    present = set(l2g.values())
    mapped = sorted(v for v in present if v in graph.vertices)
    trusted = {v for v, ok in zip(mapped, _inner(region, graph.positions(mapped), p.border_margin)) if ok} \
        if mapped else set()
    local_keys = set()
    for (i, j), kind in local.edges.items():
        if i not in l2g or j not in l2g:
            continue
        a, b = l2g[i], l2g[j]
        if a not in graph.vertices or b not in graph.vertices:
            continue
        key = edge_key(a, b)
        local_keys.add(key)
        if kind == VISIBILITY and key not in graph.edges:
            graph.add_edge(a, b, VISIBILITY)
    for key in [k for k, e in graph.edges.items() if e.kind == VISIBILITY]:
        if key[0] in trusted and key[1] in trusted and key not in local_keys:
            graph.remove_edge(*key)
            stats.edges_eliminated += 1

    graph.refresh_lengths(present)
    stats.edges_eliminated += _eliminate_invalid_edges(graph, region)
    graph.stats = stats
    graph.local = local
    graph._touch()
    return graph


def _inner(region: LocalRegion | None, pts, margin: float) -> np.ndarray:
    """Points in the region and clear of its border band."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if region is None:
        return np.ones(len(pts), dtype=bool)
    return region.contains(pts) & ~region.in_band(pts, margin)


def _crossings(region: LocalRegion, margin: float, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Where each segment p -> q (p inner, q not) leaves the inner region, by bisection."""
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    lo = np.zeros(len(p))
    hi = np.ones(len(p))
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        ok = _inner(region, p + mid[:, None] * (q - p), margin)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return p + lo[:, None] * (q - p)


def _pair(a: np.ndarray, b: np.ndarray, tol: float, same: np.ndarray | None = None) -> dict[int, int]:
    """Greedy closest-first pairing of rows of ``a`` with rows of ``b`` within ``tol``.

    Entries flagged in ``same`` describe the same crossing and pair first.
    """
    if len(a) == 0 or len(b) == 0:
        return {}
    d = np.hypot(*(a[:, None, :] - b[None, :, :]).transpose(2, 0, 1))
    if same is not None:
        d = np.where(same, -1.0, d)
    out: dict[int, int] = {}
    used: set[int] = set()
    for flat in np.argsort(d, axis=None, kind="stable"):
        i, j = divmod(int(flat), d.shape[1])
        if d[i, j] >= tol:
            break
        if i in out or j in used:
            continue
        out[i] = j
        used.add(j)
    return out


def _merge_contours(graph: VGraph, local: LocalLayer, l2g: dict[int, int], inner_ids: set[int],
                    region: LocalRegion | None) -> int:
    """Rewire contour links from the local rings; returns the number of vertices added.

    Inside the region and away from its border band the local rings are
    authoritative.  In the band and outside the region the global contour
    is kept.  Where a local ring crosses into the band it is joined to the
    global contour crossing at about the same place; a band stretch of a
    local ring is only adopted when neither of its ends meets a global
    crossing, which is the case for obstacles seen for the first time.
    """
    margin = graph.params.border_margin
    n_local = len(local)
    if n_local:
        inner_l = _inner(region, local.positions, margin)
        for li, vid in l2g.items():
            inner_l[li] = vid in inner_ids
    else:
        inner_l = np.zeros(0, dtype=bool)

    # global contour links crossing the band, as (outer id, inner id)
    g_exit, g_entry = [], []
    for vid in sorted(inner_ids):
        v = graph.vertices[vid]
        if v.next is not None and v.next not in inner_ids:
            g_exit.append((vid, v.next))
        if v.prev is not None and v.prev not in inner_ids:
            g_entry.append((v.prev, vid))

    use: list[int] = []
    links: list[tuple[int, int]] = []  # local index pairs
    segments = []  # (x, band run, x') per band stretch of a ring
    for k in range(len(local.polygons)):
        ring = local.ring_indices(k)
        inn = [bool(inner_l[i]) for i in ring]
        n = len(ring)
        if all(inn) or (not any(inn) and not any(i in l2g for i in ring)):
            use.extend(ring)
            links.extend((ring[j], ring[(j + 1) % n]) for j in range(n))
            continue
        if not any(inn):
            continue
        s0 = next(j for j in range(n) if inn[j] and not inn[j - 1])
        ring = ring[s0:] + ring[:s0]
        inn = inn[s0:] + inn[:s0]
        j = 0
        while j < n:
            if inn[j]:
                use.append(ring[j])
                if inn[(j + 1) % n]:
                    links.append((ring[j], ring[(j + 1) % n]))
                j += 1
                continue
            m = j
            while m < n and not inn[m]:
                m += 1
            segments.append((ring[j - 1], ring[j:m], ring[m % n]))
            j = m

    pos = local.positions
    loc_ex = _pair_points(region, margin, pos, [(x, run[0]) for x, run, _ in segments])
    loc_en = _pair_points(region, margin, pos, [(x2, run[-1]) for _, run, x2 in segments])
    glob_ex = _pair_points(region, margin, None, g_exit, graph.positions)
    glob_en = _pair_points(region, margin, None, [(e, d) for d, e in g_entry], graph.positions)
    tol = 2.0 * graph.params.assoc_dist

    def same(loc_ends, glob_ends):
        # a crossing sharing either end vertex with a global crossing is that crossing
        out = np.zeros((len(loc_ends), len(glob_ends)), dtype=bool)
        for r, (i, o) in enumerate(loc_ends):
            for c, (gi, go) in enumerate(glob_ends):
                out[r, c] = l2g.get(i) == gi or l2g.get(o) == go
        return out

    ex_pair = _pair(loc_ex, glob_ex, tol, same([(x, run[0]) for x, run, _ in segments], g_exit))
    en_pair = _pair(loc_en, glob_en, tol, same([(x2, run[-1]) for _, run, x2 in segments],
                                               [(e, d) for d, e in g_entry]))

    g_links: list[tuple] = []  # mixed: ("l", i) local or ("g", id) global ends
    for s_idx, (x, run, x2) in enumerate(segments):
        if s_idx in ex_pair:
            g_links.append((("l", x), ("g", g_exit[ex_pair[s_idx]][1])))
        if s_idx in en_pair:
            g_links.append((("g", g_entry[en_pair[s_idx]][0]), ("l", x2)))
        if s_idx not in ex_pair and s_idx not in en_pair:
            use.extend(run)
            chain = [x] + list(run) + [x2]
            links.extend(zip(chain, chain[1:]))

    added = 0
    for li in use:
        if li not in l2g:
            v = graph.add_vertex(local.positions[li], polygon_id=-1, label=UNKNOWN,
                                 boundary=bool(local.boundary[li]))
            v.votes.append(False)
            l2g[li] = v.id
            added += 1

    def gid(end):
        kind, i = end
        return l2g[i] if kind == "l" else i

    desired = [(l2g[a], l2g[b]) for a, b in links] + [(gid(a), gid(b)) for a, b in g_links]
    want_next = dict(desired)
    for vid in sorted(inner_ids):
        v = graph.vertices[vid]
        if v.next is not None and want_next.get(vid) != v.next:
            graph.unlink(vid, v.next)
        if v.prev is not None and want_next.get(v.prev) != vid:
            graph.unlink(v.prev, vid)
    for a, b in desired:
        graph.link(a, b)
    _relabel_polygons(graph, {v for pair in desired for v in pair})
    return added


def _pair_points(region, margin, pos, pairs, lookup=None) -> np.ndarray:
    """Band crossing points of (inner, outer) vertex pairs."""
    if not pairs:
        return np.zeros((0, 2))
    if lookup is None:
        p = pos[[a for a, _ in pairs]]
        q = pos[[b for _, b in pairs]]
    else:
        p = lookup([a for a, _ in pairs])
        q = lookup([b for _, b in pairs])
    if region is None:
        return p
    return _crossings(region, margin, p, q)


def _relabel_polygons(graph: VGraph, seeds: set[int]) -> None:
    """Give every contour component that contains a seed one polygon id."""
    seen: set[int] = set()
    for seed in sorted(seeds):
        if seed in seen or seed not in graph.vertices:
            continue
        comp = [seed]
        seen.add(seed)
        for step in ("next", "prev"):
            cur = getattr(graph.vertices[seed], step)
            while cur is not None and cur not in seen:
                seen.add(cur)
                comp.append(cur)
                cur = getattr(graph.vertices[cur], step)
        known = [graph.vertices[v].polygon_id for v in comp if graph.vertices[v].polygon_id >= 0]
        pid = min(known) if known else graph.new_polygon_id()
        for v in comp:
            graph.vertices[v].polygon_id = pid


def _eliminate_invalid_edges(graph: VGraph, region: LocalRegion | None) -> int:
    """Drop visibility edges near the region that are now blocked or no longer pass around."""
    keys = [k for k, e in graph.edges.items() if e.kind == VISIBILITY]
    if not keys:
        return 0
    a_ids = [k[0] for k in keys]
    b_ids = [k[1] for k in keys]
    pa = graph.positions(a_ids)
    pb = graph.positions(b_ids)
    if region is not None:
        near = region.overlaps_segments(pa, pb)
        sel = np.flatnonzero(near)
    else:
        sel = np.arange(len(keys))
    if len(sel) == 0:
        return 0
    pa, pb = pa[sel], pb[sel]
    clear = graph.obstacles().segments_clear(pa, pb)
    d = pb - pa
    length = np.hypot(d[:, 0], d[:, 1])
    long = length > graph.params.long_edge_threshold
    a_prev, a_next = graph._neighbor_arrays([a_ids[i] for i in sel])
    b_prev, b_next = graph._neighbor_arrays([b_ids[i] for i in sel])
    esc = escaping_mask(pb, b_prev, b_next, d) & escaping_mask(pa, a_prev, a_next, -d)
    bad = ~clear | (long & ~esc)
    for k in np.flatnonzero(bad):
        graph.remove_edge(*keys[sel[k]])
    return int(bad.sum())


def update_dynamic_blocking(graph: VGraph, region: LocalRegion, transient_polys: Sequence[Polygon],
                            observed_polys: Sequence[Polygon] | None = None) -> VGraph:
    """Block edges crossed by transient polygons and reconnect cleared ones.

    A blocked edge is reactivated only when both endpoints lie inside the
    sensed region and the segment meets none of this frame's polygons.
    """
    observed = list(observed_polys) if observed_polys is not None else list(transient_polys)
    graph.transient = list(transient_polys)
    keys = sorted(graph.edges)
    if not keys:
        graph._touch()
        return graph
    pa = graph.positions([k[0] for k in keys])
    pb = graph.positions([k[1] for k in keys])
    status = np.array([graph.edges[k].status == ACTIVE for k in keys])
    blocked_now = 0
    if transient_polys:
        blockers = Obstacles.from_polygons(transient_polys)
        act = np.flatnonzero(status)
        hit = ~blockers.segments_clear(pa[act], pb[act])
        for k in act[hit]:
            graph.edges[keys[k]].status = BLOCKED
            blocked_now += 1
    reconnected = 0
    cand = np.flatnonzero(~status)
    if len(cand):
        inside = region.contains(pa[cand]) & region.contains(pb[cand])
        cand = cand[inside]
        if len(cand):
            clear = Obstacles.from_polygons(observed).segments_clear(pa[cand], pb[cand]) if observed \
                else np.ones(len(cand), dtype=bool)
            for k in cand[clear]:
                graph.edges[keys[k]].status = ACTIVE
                reconnected += 1
    graph.stats.edges_blocked = blocked_now
    graph.stats.edges_reconnected = reconnected
    graph._touch(structural=bool(blocked_now or reconnected))
    return graph


def process_frame(graph: VGraph, polys: Sequence[Polygon], region: LocalRegion) -> VGraph:
    """Classification, local layer, merge and dynamic blocking for one frame."""
    registered, transient = classify_polygons(graph, polys)
    local = build_local_layer(registered, graph.params)
    merge_layers(graph, local, region)
    update_dynamic_blocking(graph, region, transient, polys)
    return graph


__all__ = [
    "ACTIVE", "BLOCKED", "CONTOUR", "FREE", "UNKNOWN", "VISIBILITY",
    "FrameStats", "GraphSnapshot", "LocalLayer", "LocalRegion", "MergeParams", "NavVertex",
    "VGraph", "VisEdge", "associate_vertices", "build_local_layer", "classify_polygons",
    "edge_key", "escaping_mask", "is_escaping", "merge_layers", "process_frame",
    "robust_update", "update_dynamic_blocking",
]
