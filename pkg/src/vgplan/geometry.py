"""2D geometric primitives shared by extraction, graph building and planning.

Scalar predicates (``segments_intersect``, ``point_in_polygon``,
``inner_angle``) work on :class:`Point2`/:class:`Polygon`.  The ``*_mask``
and ``winding_depth`` helpers are numpy-vectorized versions used on the hot
paths; tests check them against the scalar forms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely

EPS_GEOM = 1e-9
TWO_PI = 2.0 * math.pi


class Point2(NamedTuple):
    x: float
    y: float


class Segment2(NamedTuple):
    a: Point2
    b: Point2


class Location(str, enum.Enum):
    INSIDE = "inside"
    ON_BOUNDARY = "on_boundary"
    OUTSIDE = "outside"


class GeometryError(ValueError):
    pass


def as_point(p: Sequence[float]) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite point ({x}, {y})")
    return Point2(x, y)


def signed_area(points: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Closed obstacle contour, always stored counter-clockwise.

    ``hole`` marks an inner boundary (free space inside).  ``boundary`` holds
    one flag per vertex for vertices that lie on a cropping border.
    """

    vertices: tuple[Point2, ...]
    id: int | str = 0
    hole: bool = False
    boundary: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        try:
            arr = np.array([tuple(v) for v in self.vertices], dtype=float).reshape(-1, 2)
        except (TypeError, ValueError):
            raise GeometryError(f"polygon {self.id!r} has malformed vertices") from None
        n = len(arr)
        flags = tuple(bool(f) for f in self.boundary) or (False,) * n
        if len(flags) != n:
            raise GeometryError("boundary flags must match vertex count")
        if n < 3:
            raise GeometryError(f"polygon {self.id!r} needs >= 3 vertices, got {n}")
        if not np.isfinite(arr).all():
            raise GeometryError(f"polygon {self.id!r} has non-finite coordinates")
        step = np.roll(arr, -1, axis=0) - arr
        bad = np.flatnonzero(np.hypot(step[:, 0], step[:, 1]) <= EPS_GEOM)
        if len(bad):
            raise GeometryError(f"polygon {self.id!r} has repeated consecutive vertex {tuple(arr[bad[0]])}")
        area = signed_area(arr)
        if abs(area) <= EPS_GEOM:
            raise GeometryError(f"polygon {self.id!r} has zero area")
        if area < 0:
            arr = arr[::-1].copy()
            flags = flags[::-1]
        arr.setflags(write=False)
        object.__setattr__(self, "vertices", tuple(map(Point2._make, arr.tolist())))
        object.__setattr__(self, "boundary", flags)
        self.__dict__["array"] = arr

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        kind = "hole" if self.hole else "outer"
        return f"Polygon(id={self.id!r}, {kind}, n={len(self.vertices)})"

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.vertices, dtype=float)
        arr.setflags(write=False)
        return arr

    @property
    def area(self) -> float:
        return signed_area(self.array)

    def edges(self) -> Iterable[Segment2]:
        n = len(self.vertices)
        for i in range(n):
            yield Segment2(self.vertices[i], self.vertices[(i + 1) % n])

    def ring(self) -> np.ndarray:
        """Vertices ordered with the obstacle on the left (holes come out clockwise)."""
        return self.array[::-1].copy() if self.hole else self.array.copy()

    def is_simple(self) -> bool:
        return polygon_is_simple(self.array)

    def same_shape(self, other: "Polygon") -> bool:
        return self.hole == other.hole and self.array.shape == other.array.shape and bool(
            np.array_equal(self.array, other.array)
        )


def orient(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _side(a, b, c) -> int:
    """Sign of c relative to line ab, zero when within EPS_GEOM of the line."""
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    d = orient(a, b, c) / length
    if d > EPS_GEOM:
        return 1
    if d < -EPS_GEOM:
        return -1
    return 0


def _on_segment(a, b, c) -> bool:
    """c collinear with ab assumed; True if c lies within the closed segment."""
    return (
        min(a[0], b[0]) - EPS_GEOM <= c[0] <= max(a[0], b[0]) + EPS_GEOM
        and min(a[1], b[1]) - EPS_GEOM <= c[1] <= max(a[1], b[1]) + EPS_GEOM
    )


def segments_intersect(s1: Segment2, s2: Segment2, mode: str = "closed") -> bool:
    """Segment intersection test.

    ``closed`` counts any shared point, including touching endpoints and
    collinear overlap.  ``open`` only reports proper crossings: a point
    interior to both segments where they are not collinear.
    """
    a, b = s1
    c, d = s2
    for s in (s1, s2):
        if math.hypot(s[1][0] - s[0][0], s[1][1] - s[0][1]) <= EPS_GEOM:
            raise GeometryError(f"degenerate segment {s}")
    o1, o2 = _side(a, b, c), _side(a, b, d)
    o3, o4 = _side(c, d, a), _side(c, d, b)
    if mode == "open":
        return o1 * o2 < 0 and o3 * o4 < 0
    if mode != "closed":
        raise ValueError(f"unknown mode {mode!r}")
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == 0 and _on_segment(a, b, c):
        return True
    if o2 == 0 and _on_segment(a, b, d):
        return True
    if o3 == 0 and _on_segment(c, d, a):
        return True
    if o4 == 0 and _on_segment(c, d, b):
        return True
    return False


def point_segment_distance(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    ll = dx * dx + dy * dy
    t = 0.0 if ll == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / ll))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def point_in_polygon(p: Sequence[float], poly: Polygon) -> Location:
    """Even-odd classification; points within EPS_GEOM of an edge are on the boundary."""
    verts = poly.vertices
    n = len(verts)
    inside = False
    px, py = p[0], p[1]
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        if point_segment_distance(p, a, b) <= EPS_GEOM:
            return Location.ON_BOUNDARY
        if (a.y > py) != (b.y > py):
            x_cross = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y)
            if x_cross > px:
                inside = not inside
    return Location.INSIDE if inside else Location.OUTSIDE


def ccw_angle(u: Sequence[float], v: Sequence[float]) -> float:
    """Counter-clockwise sweep from direction u to direction v, in [0, 2π)."""
    ang = math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])
    return ang + TWO_PI if ang < 0 else ang


def inner_angle(poly: Polygon, vertex_index: int) -> float:
    """Interior angle at a vertex of a CCW polygon; reflex vertices give > π."""
    n = len(poly.vertices)
    v = poly.vertices[vertex_index % n]
    prev = poly.vertices[(vertex_index - 1) % n]
    nxt = poly.vertices[(vertex_index + 1) % n]
    to_next = (nxt.x - v.x, nxt.y - v.y)
    to_prev = (prev.x - v.x, prev.y - v.y)
    return ccw_angle(to_next, to_prev)


def inner_angles(points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`inner_angle` for every vertex of a CCW ring."""
    to_next = np.roll(points, -1, axis=0) - points
    to_prev = np.roll(points, 1, axis=0) - points
    cross = to_next[:, 0] * to_prev[:, 1] - to_next[:, 1] * to_prev[:, 0]
    dot = (to_next * to_prev).sum(axis=1)
    return np.mod(np.arctan2(cross, dot), TWO_PI)


def in_open_cone(direction, cone_from, cone_to) -> np.ndarray:
    """True where ``direction`` lies strictly inside the CCW sweep cone_from -> cone_to.

    All arguments broadcast as (..., 2) arrays.  Directions within EPS_GEOM
    (in radians) of either bounding ray count as outside.
    """
    direction = np.asarray(direction, dtype=float)
    cone_from = np.asarray(cone_from, dtype=float)
    cone_to = np.asarray(cone_to, dtype=float)

    def sweep(u, v):
        cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
        dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
        return np.mod(np.arctan2(cross, dot), TWO_PI)

    width = sweep(cone_from, cone_to)
    theta = sweep(cone_from, direction)
    eps = 1e-9
    return (theta > eps) & (theta < width - eps)


def polygon_is_simple(points: np.ndarray) -> bool:
    """No two non-adjacent edges share a point (closed test), O(n^2)."""
    n = len(points)
    if n < 3:
        return False
    a = points
    b = np.roll(points, -1, axis=0)
    hit = segment_hit_matrix(a, b, a, b, closed=True)
    idx = np.arange(n)
    adjacent = (
        (idx[:, None] == idx[None, :])
        | (((idx[:, None] + 1) % n) == idx[None, :])
        | (((idx[None, :] + 1) % n) == idx[:, None])
    )
    return not bool((hit & ~adjacent).any())


# ---------------------------------------------------------------------------
# vectorized kernels


def segment_hits(p, q, a, b, closed: bool = False) -> np.ndarray:
    """Elementwise (broadcasting) intersection test of segments pq against ab.

    With ``closed=False`` only proper crossings count, matching
    ``segments_intersect(..., mode="open")``.
    """
    p, q, a, b = (np.asarray(v, dtype=float) for v in (p, q, a, b))
    rx, ry = q[..., 0] - p[..., 0], q[..., 1] - p[..., 1]
    sx, sy = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
    # signed distances of one segment's endpoints from the other's line, scaled by its length
    tol_r = EPS_GEOM * np.hypot(rx, ry)
    tol_s = EPS_GEOM * np.hypot(sx, sy)
    apx, apy = a[..., 0] - p[..., 0], a[..., 1] - p[..., 1]
    bpx, bpy = b[..., 0] - p[..., 0], b[..., 1] - p[..., 1]
    c_a = rx * apy - ry * apx
    c_b = rx * bpy - ry * bpx
    c_p = sy * apx - sx * apy  # cross(s, p - a)
    c_q = sx * (q[..., 1] - a[..., 1]) - sy * (q[..., 0] - a[..., 0])
    sa = np.sign(c_a) * (np.abs(c_a) > tol_r)
    sb = np.sign(c_b) * (np.abs(c_b) > tol_r)
    sp = np.sign(c_p) * (np.abs(c_p) > tol_s)
    sq = np.sign(c_q) * (np.abs(c_q) > tol_s)
    proper = (sa * sb < 0) & (sp * sq < 0)
    if not closed:
        return proper

    def within(u0, u1, c):
        lo = np.minimum(u0, u1) - EPS_GEOM
        hi = np.maximum(u0, u1) + EPS_GEOM
        return (
            (c[..., 0] >= lo[..., 0]) & (c[..., 0] <= hi[..., 0])
            & (c[..., 1] >= lo[..., 1]) & (c[..., 1] <= hi[..., 1])
        )

    touch = (
        ((sa == 0) & within(p, q, a))
        | ((sb == 0) & within(p, q, b))
        | ((sp == 0) & within(a, b, p))
        | ((sq == 0) & within(a, b, q))
    )
    return proper | touch


def segment_hit_matrix(p, q, a, b, closed: bool = False) -> np.ndarray:
    """Pairwise intersection of segments p[i]q[i] against a[j]b[j] as an (m, e) matrix."""
    p = np.asarray(p, dtype=float)[:, None, :]
    q = np.asarray(q, dtype=float)[:, None, :]
    a = np.asarray(a, dtype=float)[None, :, :]
    b = np.asarray(b, dtype=float)[None, :, :]
    return segment_hits(p, q, a, b, closed)


def winding_depth(points: np.ndarray, ring_a: np.ndarray, ring_b: np.ndarray) -> np.ndarray:
    """Sum of winding numbers of ``points`` over a set of closed ring edges.

    Rings use the obstacle-on-the-left convention, so the result is positive
    inside obstacles and zero in free space (including inside holes).
    ``ring_a``/``ring_b`` are the start/end points of every ring edge.
    """
    points = np.asarray(points, dtype=float)
    if len(ring_a) == 0 or len(points) == 0:
        return np.zeros(len(points), dtype=int)
    px = points[:, 0:1]
    py = points[:, 1:2]
    ax, ay = ring_a[None, :, 0], ring_a[None, :, 1]
    bx, by = ring_b[None, :, 0], ring_b[None, :, 1]
    is_left = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
    up = (ay <= py) & (by > py) & (is_left > 0)
    down = (ay > py) & (by <= py) & (is_left < 0)
    return up.sum(axis=1) - down.sum(axis=1)


def points_on_segments(p, q, pts, exclude_ends: bool = True) -> np.ndarray:
    """(m, k) mask: pts[k] lies on segment p[m]q[m] (strictly between the ends by default)."""
    p = np.asarray(p, dtype=float)[:, None, :]
    q = np.asarray(q, dtype=float)[:, None, :]
    c = np.asarray(pts, dtype=float)[None, :, :]
    return point_on_segment(p, q, c, exclude_ends)


def point_on_segment(p, q, c, exclude_ends: bool = True) -> np.ndarray:
    """Elementwise (broadcasting) form of :func:`points_on_segments`."""
    r = q - p
    ll = (r ** 2).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((c - p) * r).sum(axis=-1) / ll
    foot = p + t[..., None] * r
    dist = np.hypot(c[..., 0] - foot[..., 0], c[..., 1] - foot[..., 1])
    length = np.sqrt(ll)
    with np.errstate(divide="ignore"):
        tol = EPS_GEOM / length
    if exclude_ends:
        inside = (t > tol) & (t < 1 - tol)
    else:
        inside = (t >= -tol) & (t <= 1 + tol)
    return (dist <= 1e-7) & inside


def point_segment_distances(pts, a, b) -> np.ndarray:
    """(k, e) distances from pts[k] to segments a[e]b[e]."""
    pts = np.asarray(pts, dtype=float)[:, None, :]
    a = np.asarray(a, dtype=float)[None, :, :]
    b = np.asarray(b, dtype=float)[None, :, :]
    d = b - a
    ll = (d ** 2).sum(axis=-1)
    safe = np.where(ll == 0, 1.0, ll)
    t = np.clip(((pts - a) * d).sum(axis=-1) / safe, 0.0, 1.0)
    foot = a + t[..., None] * d
    return np.hypot(*(pts - foot).transpose(2, 0, 1))


@dataclass
class Obstacles:
    """Flattened obstacle boundary arrays for vectorized visibility queries.

    ``block_a``/``block_b`` are every boundary edge (they block sight);
    ``ring_a``/``ring_b`` are the edges of closed rings only (they define the
    obstacle interior through :func:`winding_depth`); ``vertices`` are all
    boundary vertices, used to find segments grazing through a vertex.
    """

    block_a: np.ndarray
    block_b: np.ndarray
    ring_a: np.ndarray
    ring_b: np.ndarray
    vertices: np.ndarray
    _trees: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    # above this many (segment, edge) pairs queries go through an R-tree
    SPARSE_PAIRS = 50_000

    @classmethod
    def empty(cls) -> "Obstacles":
        z = np.zeros((0, 2))
        return cls(z, z, z, z, z)

    @classmethod
    def from_rings(cls, rings: Sequence[np.ndarray], chains: Sequence[np.ndarray] = ()) -> "Obstacles":
        ring_a, ring_b, verts = [], [], []
        for r in rings:
            ring_a.append(r)
            ring_b.append(np.roll(r, -1, axis=0))
            verts.append(r)
        chain_a, chain_b = [], []
        for c in chains:
            if len(c) >= 2:
                chain_a.append(c[:-1])
                chain_b.append(c[1:])
            verts.append(c)
        stack = lambda parts: np.concatenate(parts) if parts else np.zeros((0, 2))  # noqa: E731
        ra, rb = stack(ring_a), stack(ring_b)
        return cls(
            block_a=stack([ra, stack(chain_a)]),
            block_b=stack([rb, stack(chain_b)]),
            ring_a=ra,
            ring_b=rb,
            vertices=stack(verts),
        )

    @classmethod
    def from_polygons(cls, polys: Iterable[Polygon]) -> "Obstacles":
        return cls.from_rings([p.ring() for p in polys])

    def __len__(self) -> int:
        return len(self.block_a)

    def _tree(self, name: str) -> shapely.STRtree:
        tree = self._trees.get(name)
        if tree is None:
            if name == "block":
                geoms = shapely.linestrings(np.stack([self.block_a, self.block_b], axis=1))
            elif name == "ring":
                geoms = shapely.linestrings(np.stack([self.ring_a, self.ring_b], axis=1))
            else:
                # tiny boxes so vertices within the on-segment tolerance are found
                v, r = self.vertices, 1e-7
                geoms = shapely.box(v[:, 0] - r, v[:, 1] - r, v[:, 0] + r, v[:, 1] + r)
            tree = self._trees[name] = shapely.STRtree(geoms)
        return tree

    def depth(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if len(pts) * len(self.ring_a) <= self.SPARSE_PAIRS:
            return winding_depth(pts, self.ring_a, self.ring_b)
        # only ring edges met by a ray towards +x can contribute
        far = max(self.ring_a[:, 0].max(), self.ring_b[:, 0].max()) + 1.0
        ends = np.column_stack([np.maximum(np.full(len(pts), far), pts[:, 0] + 1.0), pts[:, 1]])
        i, j = self._tree("ring").query(shapely.linestrings(np.stack([pts, ends], axis=1)))
        a, b = self.ring_a[j], self.ring_b[j]
        px, py = pts[i, 0], pts[i, 1]
        is_left = (b[:, 0] - a[:, 0]) * (py - a[:, 1]) - (px - a[:, 0]) * (b[:, 1] - a[:, 1])
        up = (a[:, 1] <= py) & (b[:, 1] > py) & (is_left > 0)
        down = (a[:, 1] > py) & (b[:, 1] <= py) & (is_left < 0)
        return np.bincount(i, weights=up.astype(float) - down, minlength=len(pts)).astype(int)

    def _near_boundary(self, pts: np.ndarray) -> np.ndarray:
        """Points within 1e-7 of a boundary edge."""
        if len(pts) * len(self.block_a) <= self.SPARSE_PAIRS:
            return point_segment_distances(pts, self.block_a, self.block_b).min(axis=1) <= 1e-7
        i, _ = self._tree("block").query(shapely.points(pts), predicate="dwithin", distance=1e-7)
        out = np.zeros(len(pts), dtype=bool)
        out[i] = True
        return out

    def contains(self, pts: np.ndarray, strict: bool = True) -> np.ndarray:
        """Points inside an obstacle; with ``strict`` boundary points are excluded."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = self.depth(pts) > 0
        if strict and inside.any() and len(self.block_a):
            inside[np.flatnonzero(inside)[self._near_boundary(pts[inside])]] = False
        return inside

    def segments_clear(self, p: np.ndarray, q: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Visibility of segments p[i]q[i]: no proper crossing and no interior passage."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        q = np.asarray(q, dtype=float).reshape(-1, 2)
        m = len(p)
        out = np.ones(m, dtype=bool)
        if m == 0 or len(self.block_a) == 0:
            return out
        e = max(len(self.block_a), len(self.vertices), 1)
        step = max(1, min(chunk, 2_000_000 // e))
        for lo in range(0, m, step):
            hi = min(m, lo + step)
            out[lo:hi] = self._clear_chunk(p[lo:hi], q[lo:hi])
        return out

    def _clear_chunk(self, p, q):
        sparse = len(p) * len(self.block_a) > self.SPARSE_PAIRS
        if sparse:
            return self._clear_sparse(p, q)
        crossed = segment_hit_matrix(p, q, self.block_a, self.block_b).any(axis=1)
        clear = ~crossed
        if not clear.any() or len(self.ring_a) == 0:
            return clear
        idx = np.flatnonzero(clear)
        on_seg = points_on_segments(p[idx], q[idx], self.vertices)
        touching = [self.vertices[row] for row in on_seg]
        return self._finish(p, q, clear, idx, touching)

    def clear_from(self, origin, targets) -> np.ndarray:
        """``segments_clear`` for segments sharing one start point.

        Candidate (segment, edge) pairs come from an angular range search
        around ``origin``: a proper crossing needs the target's bearing to
        lie within the bearings subtended by the edge.
        """
        targets = np.asarray(targets, dtype=float).reshape(-1, 2)
        o = np.asarray(origin, dtype=float).reshape(2)
        m = len(targets)
        if m == 0 or len(self.block_a) == 0:
            return np.ones(m, dtype=bool)
        src = np.broadcast_to(o, (m, 2))
        if m * len(self.block_a) <= self.SPARSE_PAIRS:
            return self._clear_chunk(src, targets)
        A, B = self.block_a - o, self.block_b - o
        sx, sy = B[:, 0] - A[:, 0], B[:, 1] - A[:, 1]
        # edges whose line passes through the origin cannot be crossed properly
        side = A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0]
        live = np.flatnonzero(np.abs(side) > EPS_GEOM * np.hypot(sx, sy))
        th_a = np.arctan2(A[live, 1], A[live, 0])
        th_b = np.arctan2(B[live, 1], B[live, 0])
        start = np.where(side[live] > 0, th_a, th_b)
        width = np.mod(np.where(side[live] > 0, th_b - th_a, th_a - th_b), 2 * math.pi)
        rel = targets - o
        th = np.arctan2(rel[:, 1], rel[:, 0])
        order = np.argsort(th, kind="stable")
        ring = np.concatenate([th[order], th[order] + 2 * math.pi, th[order] + 4 * math.pi])
        base = np.mod(start + math.pi, 2 * math.pi) - math.pi + 2 * math.pi
        lo = np.searchsorted(ring, base - 1e-9, side="left")
        hi = np.searchsorted(ring, base + width + 1e-9, side="right")
        counts = hi - lo
        edge = np.repeat(live, counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        seg = order[(np.repeat(lo, counts) + offs) % m]
        clear = np.ones(m, dtype=bool)
        if len(seg):
            hit = segment_hits(src[seg], targets[seg], self.block_a[edge], self.block_b[edge])
            clear[seg[hit]] = False
        if not clear.any() or len(self.ring_a) == 0:
            return clear
        idx = np.flatnonzero(clear)
        return self._finish(src, targets, clear, idx, self._touching(src[idx], targets[idx]))

    def _touching(self, p, q) -> list[np.ndarray]:
        """Boundary vertices lying strictly inside each segment."""
        i, j = self._tree("vertex").query(shapely.linestrings(np.stack([p, q], axis=1)))
        on = point_on_segment(p[i], q[i], self.vertices[j])
        out: list = [[] for _ in range(len(p))]
        for row, k in zip(i[on].tolist(), j[on].tolist()):
            out[row].append(k)
        return [self.vertices[t] if t else np.zeros((0, 2)) for t in out]

    def _clear_sparse(self, p, q):
        """Same result as the dense path; candidate pairs come from R-tree queries."""
        segs = shapely.linestrings(np.stack([p, q], axis=1))
        # bounding-box candidates; the exact test is cheaper than a GEOS predicate
        i, j = self._tree("block").query(segs)
        clear = np.ones(len(p), dtype=bool)
        if len(i):
            hit = segment_hits(p[i], q[i], self.block_a[j], self.block_b[j])
            clear[i[hit]] = False
        if not clear.any() or len(self.ring_a) == 0:
            return clear
        idx = np.flatnonzero(clear)
        return self._finish(p, q, clear, idx, self._touching(p[idx], q[idx]))

    def _finish(self, p, q, clear, idx, touching):
        """Interior check for uncrossed segments; those through a vertex take the split path."""
        grazing = np.array([len(t) > 0 for t in touching], dtype=bool)
        simple = idx[~grazing]
        if len(simple):
            mid = 0.5 * (p[simple] + q[simple])
            inside = self.depth(mid) > 0
            if inside.any():
                inside[np.flatnonzero(inside)[self._near_boundary(mid[inside])]] = False
            clear[simple] = ~inside
        for row in np.flatnonzero(grazing):
            i = idx[row]
            clear[i] = self._clear_split(p[i], q[i], touching[row])
        return clear

    def _clear_split(self, p, q, touching):
        """Slow path: split the segment at boundary vertices it passes through."""
        d = q - p
        ts = ((touching - p) @ d) / (d @ d)
        cuts = np.unique(np.concatenate([[0.0], ts, [1.0]]))
        mids = p + 0.5 * (cuts[:-1] + cuts[1:])[:, None] * d
        inside = self.depth(mids) > 0
        if inside.any():
            # pieces running along a boundary edge are not interior
            return bool(self._near_boundary(mids[inside]).all())
        return True
