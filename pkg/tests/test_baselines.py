import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from vgplan.baselines import (
    FREE_CELL, OCCUPIED_CELL, UNKNOWN_CELL, DStarLite, OccupancyGrid, astar_cells, astar_plan, bresenham,
    dstar_lite_plan, grid_update,
)
from vgplan.extraction import SensorScan
from vgplan.planner import NoPath

SQRT2 = math.sqrt(2)


def dijkstra_octile(passable, start, goal):
    """Reference 8-connected shortest path (no corner cutting) via scipy."""
    h, w = passable.shape
    rows, cols, costs = [], [], []
    for r in range(h):
        for c in range(w):
            if not passable[r, c]:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if (dr, dc) == (0, 0) or not (0 <= rr < h and 0 <= cc < w) or not passable[rr, cc]:
                        continue
                    if dr and dc and not (passable[r + dr, c] and passable[r, c + dc]):
                        continue
                    rows.append(r * w + c)
                    cols.append(rr * w + cc)
                    costs.append(SQRT2 if dr and dc else 1.0)
    m = csr_matrix((costs, (rows, cols)), shape=(h * w, h * w))
    return float(dijkstra(m, indices=start[0] * w + start[1])[goal[0] * w + goal[1]])


def test_astar_open_diagonal():
    p = astar_cells(np.ones((10, 10), bool), (0, 0), (9, 9))
    assert (p.straight, p.diagonal) == (0, 9)
    assert p.length(0.2) == pytest.approx(9 * SQRT2 * 0.2)


def test_astar_through_gap():
    m = np.ones((7, 7), bool)
    m[:, 3] = False
    m[5, 3] = True
    p = astar_cells(m, (0, 0), (0, 6))
    assert (5, 3) in p.cells
    assert p.length() == pytest.approx(dijkstra_octile(m, (0, 0), (0, 6)))


def test_astar_no_corner_cutting():
    m = np.ones((2, 2), bool)
    m[0, 1] = m[1, 0] = False
    with pytest.raises(NoPath):
        astar_cells(m, (0, 0), (1, 1))


def test_astar_blocked_goal():
    m = np.ones((5, 5), bool)
    m[4, 4] = False
    with pytest.raises(NoPath):
        astar_cells(m, (0, 0), (4, 4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_astar_matches_dijkstra(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((12, 12)) > 0.3
    m[0, 0] = m[11, 11] = True
    ref = dijkstra_octile(m, (0, 0), (11, 11))
    if math.isinf(ref):
        with pytest.raises(NoPath):
            astar_cells(m, (0, 0), (11, 11))
    else:
        assert astar_cells(m, (0, 0), (11, 11)).length() == pytest.approx(ref, abs=1e-9)


def test_bresenham_endpoints_and_connectivity():
    cells = bresenham(0, 0, 3, 7)
    assert cells[0] == (0, 0) and cells[-1] == (3, 7)
    assert all(max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1 for a, b in zip(cells, cells[1:]))


def test_dstar_lite_matches_astar_over_updates():
    rng = np.random.default_rng(2)
    h = w = 30
    m = rng.random((h, w)) > 0.25
    goal = (h - 1, w - 1)
    m[goal] = True
    start = (0, 0)
    ds = DStarLite(m, start, goal)
    ds.compute()
    checked = 0
    for _ in range(250):
        k = int(rng.integers(1, 30))
        flip = [tuple(c) for c in rng.integers(0, h, (k, 2)) if tuple(c) != goal]
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
        assert (got is None) == (want is None)
        if got is not None:
            assert (got.straight, got.diagonal) == (want.straight, want.diagonal)
            checked += 1
            # jumps of several cells, like a robot moving between replans
            start = got.cells[min(int(rng.integers(0, 4)), len(got.cells) - 1)]
    assert checked >= 200


def _ring_scan(center, radius, n=720):
    ang = np.arange(n) * 2 * np.pi / n
    pts = np.c_[center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)]
    return SensorScan(pts, center)


def test_grid_update_marks_hits_and_free_space():
    g = OccupancyGrid((0, 0, 20, 20), 0.2, 0.4)
    changed = grid_update(g, _ring_scan((10, 10), 5.0))
    cells = g.cells
    assert cells[g.cell_of((10, 10))] == FREE_CELL
    assert cells[g.cell_of((15, 10))] == OCCUPIED_CELL
    assert cells[g.cell_of((10, 17.5))] == UNKNOWN_CELL
    assert changed == set(map(tuple, np.argwhere(g.occupied).tolist()))


def test_grid_update_clears_moved_wall():
    g = OccupancyGrid((0, 0, 20, 20), 0.2, 0.4)
    grid_update(g, _ring_scan((10, 10), 3.0))
    assert g.occupied[g.cell_of((13, 10))]
    changed = grid_update(g, _ring_scan((10, 10), 6.0))
    assert not g.occupied[g.cell_of((13, 10))]
    assert g.cell_of((13, 10)) in changed and g.occupied[g.cell_of((16, 10))]


def test_grazing_beam_keeps_wall():
    g = OccupancyGrid((0, 0, 20, 20), 0.2, 0.0)
    grid_update(g, _ring_scan((10, 10), 3.0))
    hits = g.hits.copy()
    # the same ring with a single beam punched through must not erase its cell
    scan = _ring_scan((10, 10), 3.0)
    pts = scan.points.copy()
    pts[0] = (16, 10)
    grid_update(g, SensorScan(pts, scan.origin))
    assert g.hits[g.cell_of((13, 10))] and hits[g.cell_of((13, 10))]


def test_astar_plan_waypoints():
    g = OccupancyGrid((0, 0, 10, 10), 0.5, 0.0)
    path = astar_plan(g, (0.25, 0.25), (4.75, 0.25))
    assert path.waypoints[0] == (0.25, 0.25) and path.waypoints[-1] == (4.75, 0.25)
    assert path.length == pytest.approx(4.5)
