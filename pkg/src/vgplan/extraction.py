"""Sensor points to obstacle polygons.

Pipeline: rasterize (with inflation) -> box blur -> contour tracing ->
Douglas-Peucker -> inner-angle filter.  The raster is robot-centred and
snapped to the world lattice of ``resolution`` so identical obstacle points
give identical contours from different robot positions.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import cv2
import numpy as np
from scipy import ndimage

from .geometry import (
    EPS_GEOM,
    GeometryError,
    Point2,
    Polygon,
    as_point,
    inner_angles,
    signed_area,
)

PolygonSet = list  # list[Polygon]


@dataclass(frozen=True, eq=False)
class SensorScan:
    points: np.ndarray
    origin: Point2
    frame_index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.isfinite(pts).all():
            raise ValueError("scan contains non-finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "origin", as_point(self.origin))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class RasterImage:
    cells: np.ndarray  # (height, width), row 0 at origin.y
    resolution: float
    origin: Point2  # world position of the (0, 0) cell corner

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=float))

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def cell_center(self, row, col):
        """World centre of a cell.

        On a lattice-aligned raster the centre is computed from the global
        cell index, so the same cell gets bit-identical coordinates in every
        frame regardless of where the raster starts.
        """
        res = self.resolution
        out = []
        for o, k in ((self.origin.x, col), (self.origin.y, row)):
            i0 = o / res
            if abs(i0 - round(i0)) < 1e-6:
                out.append((round(i0) + np.asarray(k) + 0.5) * res)
            else:
                out.append(o + (np.asarray(k) + 0.5) * res)
        return out[0], out[1]

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (
            self.origin.x,
            self.origin.y,
            self.origin.x + self.width * self.resolution,
            self.origin.y + self.height * self.resolution,
        )

    def to_pgm(self, path: str | Path) -> None:
        """Write a binary PGM, top row = highest y, obstacle = white."""
        img = np.clip(np.rint(self.cells[::-1] * 255), 0, 255).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{self.width} {self.height}\n255\n".encode("ascii"))
            fh.write(img.tobytes())


@dataclass(frozen=True)
class ExtractionParams:
    resolution: float = 0.2
    inflation_radius: float = 0.4
    blur_kernel: int = 3
    binarize_threshold: float = 0.3
    dp_epsilon: float = 0.3
    zeta: float = math.pi / 6
    local_extent: float = 40.0

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.blur_kernel < 3 or self.blur_kernel % 2 == 0:
            raise ValueError("blur_kernel must be odd and >= 3")
        if not 0 < self.binarize_threshold < 1:
            raise ValueError("binarize_threshold must be in (0, 1)")
        if not 0 <= self.zeta < math.pi:
            raise ValueError("zeta must be in [0, pi)")
        if self.inflation_radius < 0 or self.dp_epsilon < 0 or self.local_extent <= 0:
            raise ValueError("inflation_radius, dp_epsilon must be >= 0 and local_extent > 0")

    @property
    def cells_per_side(self) -> int:
        return max(1, int(round(self.local_extent / self.resolution)))


def raster_frame(origin: Point2, params: ExtractionParams) -> tuple[Point2, int]:
    """Corner and side (in cells) of the lattice-snapped raster centred on ``origin``."""
    n = params.cells_per_side
    res = params.resolution
    ci = math.floor(origin.x / res + 1e-9)
    cj = math.floor(origin.y / res + 1e-9)
    corner = Point2((ci - n // 2) * res, (cj - n // 2) * res)
    return corner, n


def rasterize(scan: SensorScan, params: ExtractionParams) -> RasterImage:
    """Binary occupancy image with every point inflated by ``inflation_radius``.

    A cell is marked when its centre lies within the inflation radius of a
    scan point.  Points outside the raster are dropped.
    """
    if params.resolution <= 0:
        raise ValueError("resolution must be positive")
    corner, n = raster_frame(scan.origin, params)
    res = params.resolution
    img = np.zeros((n, n), dtype=float)
    pts = scan.points
    if len(pts) == 0:
        return RasterImage(img, res, corner)
    local = (pts - np.asarray(corner)) / res  # continuous cell coordinates
    keep = (local[:, 0] >= 0) & (local[:, 0] < n) & (local[:, 1] >= 0) & (local[:, 1] < n)
    local = local[keep]
    if len(local) == 0:
        return RasterImage(img, res, corner)
    r_cells = params.inflation_radius / res
    k = int(math.ceil(r_cells)) + 1
    offs = np.arange(-k, k + 1)
    base_c = np.floor(local[:, 0]).astype(int)
    base_r = np.floor(local[:, 1]).astype(int)
    for dr in offs:
        rows = base_r + dr
        dy = rows + 0.5 - local[:, 1]
        for dc in offs:
            cols = base_c + dc
            dx = cols + 0.5 - local[:, 0]
            ok = (dx * dx + dy * dy <= r_cells * r_cells + 1e-9) & (rows >= 0) & (rows < n) & (cols >= 0) & (cols < n)
            img[rows[ok], cols[ok]] = 1.0
    return RasterImage(img, res, corner)


def blur(img: RasterImage, kernel: int) -> RasterImage:
    """Box-filter average with zero padding outside the image."""
    if kernel % 2 == 0 or kernel < 1:
        raise ValueError(f"blur kernel must be odd, got {kernel}")
    out = ndimage.uniform_filter(img.cells, size=kernel, mode="constant", cval=0.0)
    return RasterImage(out, img.resolution, img.origin)


def _split_pinches(cells: list[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    """Cut a traced contour into simple loops at pixels visited more than once."""
    stack: list[tuple[int, int]] = []
    where: dict[tuple[int, int], int] = {}
    loops = []
    for c in cells:
        if c in where:
            start = where[c]
            loop = stack[start:]
            for q in loop[1:]:
                where.pop(q, None)
            del stack[start + 1:]
            if len(loop) >= 3:
                loops.append(loop)
        else:
            where[c] = len(stack)
            stack.append(c)
    if len(stack) >= 3:
        loops.append(stack)
    return loops


def extract_contours(img: RasterImage, threshold: float) -> list[Polygon]:
    """Trace obstacle borders of the binarized image.

    Outer borders come back as CCW polygons, borders of holes as CCW
    polygons with ``hole=True``.  Vertices sit at the centres of the border
    cells; those on the outermost raster row/column are flagged boundary.
    """
    binary = (img.cells >= threshold).astype(np.uint8)
    if not binary.any():
        return []
    contours, hierarchy = cv2.findContours(binary, cv2.RETR_CCOMP, cv2.CHAIN_APPROX_NONE)
    if hierarchy is None:
        return []
    h, w = binary.shape
    polys: list[Polygon] = []
    for idx, contour in enumerate(contours):
        is_hole = int(hierarchy[0][idx][3]) != -1
        cells = [(int(c[0][0]), int(c[0][1])) for c in contour]
        whole = np.asarray(cells, dtype=float)
        sense = np.sign(signed_area(whole)) if len(whole) >= 3 else 0.0
        for loop in _split_pinches(cells):
            arr = np.asarray(loop)
            xs, ys = img.cell_center(arr[:, 1], arr[:, 0])
            pts = np.column_stack([xs, ys])
            area = signed_area(pts)
            # loops cut off with the opposite sense are slivers between pinches
            if abs(area) <= EPS_GEOM or np.sign(signed_area(arr.astype(float))) != sense:
                continue
            flags = (arr[:, 0] == 0) | (arr[:, 0] == w - 1) | (arr[:, 1] == 0) | (arr[:, 1] == h - 1)
            try:
                poly = Polygon(tuple(map(tuple, pts)), id=len(polys), hole=is_hole, boundary=tuple(flags))
            except GeometryError:
                continue
            polys.append(poly)
    return polys


def _dp_chain(points: np.ndarray, eps: float) -> list[int]:
    """Indices kept by Douglas-Peucker on an open chain (endpoints always kept)."""
    n = len(points)
    if n <= 2:
        return list(range(n))
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        a, b = points[lo], points[hi]
        seg = points[lo + 1:hi]
        d = b - a
        ll = float(d @ d)
        if ll <= EPS_GEOM * EPS_GEOM:
            dist = np.hypot(*(seg - a).T)
        else:
            t = np.clip(((seg - a) @ d) / ll, 0.0, 1.0)
            dist = np.hypot(*(seg - (a + t[:, None] * d)).T)
        j = int(np.argmax(dist))
        if dist[j] > eps:
            mid = lo + 1 + j
            keep[mid] = True
            stack.append((mid, hi))
            stack.append((lo, mid))
    return list(np.flatnonzero(keep))


def diameter_pair(points: np.ndarray) -> tuple[int, int]:
    """Indices (i < j) of the two mutually farthest vertices.

    Ties go to the lexicographically smallest pair.  Only convex-hull
    vertices can attain the maximum, so the search runs over the hull.
    """
    points = np.asarray(points, dtype=float)
    if len(points) > 8:
        hull = cv2.convexHull(points.astype(np.float32), returnPoints=False)
        cand = np.unique(hull.ravel())
    else:
        cand = np.arange(len(points))
    sub_pts = points[cand]
    diff = sub_pts[:, None, :] - sub_pts[None, :, :]
    d2 = (diff ** 2).sum(axis=-1)
    best = d2.max()
    ii, jj = np.nonzero(np.triu(d2 == best, k=1))
    return min((min(a, b), max(a, b)) for a, b in zip(cand[ii].tolist(), cand[jj].tolist()))


def _border_anchors(flags: Sequence[bool]) -> np.ndarray:
    """Mask of the first and last vertex of every run of border vertices."""
    f = np.asarray(flags, dtype=bool)
    if f.all() or not f.any():
        return np.zeros(len(f), dtype=bool)
    return f & ~(np.roll(f, 1) & np.roll(f, -1))


def _dp_anchored(pts: np.ndarray, chain: np.ndarray, anchors: np.ndarray, eps: float) -> np.ndarray:
    """Douglas-Peucker on ``pts[chain]`` with the anchored chain entries always kept."""
    cuts = [0] + [k for k in range(1, len(chain) - 1) if anchors[chain[k]]] + [len(chain) - 1]
    kept = [chain[0]]
    for lo, hi in zip(cuts, cuts[1:]):
        sub = chain[lo:hi + 1]
        kept.extend(sub[_dp_chain(pts[sub], eps)][1:])
    return np.asarray(kept)


def simplify(poly: Polygon, dp_epsilon: float) -> Polygon | None:
    """Douglas-Peucker on a closed contour.

    The ring is split at its diameter pair and both chains are simplified.
    The two ends of every run of border vertices are kept so a cut ring
    still meets the raster border where it did.  Returns ``None`` if fewer
    than three vertices survive.
    """
    pts = poly.array
    n = len(pts)
    i, j = diameter_pair(pts)
    anchors = _border_anchors(poly.boundary)
    chain1 = np.arange(i, j + 1)
    chain2 = np.concatenate([np.arange(j, n), np.arange(0, i + 1)])
    keep1 = _dp_anchored(pts, chain1, anchors, dp_epsilon)
    keep2 = _dp_anchored(pts, chain2, anchors, dp_epsilon)
    kept = list(keep1) + list(keep2[1:-1])
    if len(kept) < 3:
        return None
    order = sorted(kept, key=lambda k: (k - i) % n)
    try:
        return Polygon(
            tuple(poly.vertices[k] for k in order),
            id=poly.id,
            hole=poly.hole,
            boundary=tuple(poly.boundary[k] for k in order),
        )
    except GeometryError:
        return None


def angle_filter(poly: Polygon, zeta: float) -> Polygon:
    """Drop vertices with inner angle below ``zeta``, sharpest first, until none remain or n == 3.

    Border vertices are never dropped.
    """
    verts = list(poly.vertices)
    flags = list(poly.boundary)
    while len(verts) > 3:
        ang = np.where(flags, np.inf, inner_angles(np.asarray(verts)))
        k = int(np.argmin(ang))
        if ang[k] >= zeta:
            break
        del verts[k]
        del flags[k]
    if len(verts) == len(poly.vertices):
        return poly
    return Polygon(tuple(verts), id=poly.id, hole=poly.hole, boundary=tuple(flags))


def _reduce(contour: Polygon, params: ExtractionParams) -> Polygon | None:
    eps = params.dp_epsilon
    simplified = None
    for _ in range(4):
        simplified = simplify(contour, eps)
        if simplified is None or simplified.is_simple():
            break
        eps *= 0.5
    else:
        simplified = contour if contour.is_simple() else None
    if simplified is None:
        return None
    try:
        filtered = angle_filter(simplified, params.zeta)
    except GeometryError:
        return simplified
    return filtered if filtered.is_simple() else simplified


def extract_polygons(scan: SensorScan, params: ExtractionParams | None = None) -> PolygonSet:
    """Full extraction pipeline; output ids are 0..k-1 in trace order."""
    params = params or ExtractionParams()
    img = blur(rasterize(scan, params), params.blur_kernel)
    out: PolygonSet = []
    for contour in extract_contours(img, params.binarize_threshold):
        poly = _reduce(contour, params)
        if poly is None:
            continue
        out.append(Polygon(poly.vertices, id=len(out), hole=poly.hole, boundary=poly.boundary))
    return out


def beam_index(rel: np.ndarray, n_beams: int) -> np.ndarray:
    """Index of the evenly spaced beam (beam 0 along +x) nearest to each relative bearing."""
    step = 2 * math.pi / n_beams
    return np.rint(np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * math.pi) / step).astype(int) % n_beams


def beam_ranges(scan: SensorScan, n_beams: int, max_range: float) -> np.ndarray:
    """Per-beam range recovered from scan points; beams without a return get ``max_range``."""
    out = np.full(n_beams, float(max_range))
    if len(scan.points) == 0:
        return out
    rel = scan.points - np.asarray(scan.origin)
    r = np.hypot(rel[:, 0], rel[:, 1])
    beam = beam_index(rel, n_beams)
    np.minimum.at(out, beam, r)
    return out


# ---------------------------------------------------------------------------
# scan text format:  "frame <k> pose <x> <y>" followed by "p <x> <y>" lines

_FRAME_RE = re.compile(r"^frame\s+(-?\d+)\s+pose\s+(\S+)\s+(\S+)\s*$")


def write_scans(scans: Iterable[SensorScan], path: str | Path) -> None:
    with open(path, "w") as fh:
        for s in scans:
            fh.write(f"frame {s.frame_index} pose {s.origin.x!r} {s.origin.y!r}\n")
            for x, y in s.points:
                fh.write(f"p {float(x)!r} {float(y)!r}\n")


def iter_scans(lines: Iterable[str], source: str = "<scans>") -> Iterator[SensorScan]:
    header = None
    pts: list[tuple[float, float]] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _FRAME_RE.match(line)
        if m:
            if header is not None:
                yield SensorScan(np.asarray(pts).reshape(-1, 2), header[1], header[0])
            header = (int(m.group(1)), Point2(float(m.group(2)), float(m.group(3))))
            pts = []
            continue
        parts = line.split()
        if parts[0] != "p" or len(parts) != 3:
            raise ValueError(f"{source}:{lineno}: expected 'p <x> <y>' or a frame header, got {line!r}")
        if header is None:
            raise ValueError(f"{source}:{lineno}: point before any frame header")
        try:
            pts.append((float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: bad coordinate in {line!r}") from exc
    if header is not None:
        yield SensorScan(np.asarray(pts).reshape(-1, 2), header[1], header[0])


def read_scans(path: str | Path) -> list[SensorScan]:
    with open(path) as fh:
        return list(iter_scans(fh, str(path)))
