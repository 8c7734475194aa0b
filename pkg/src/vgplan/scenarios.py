"""Built-in worlds: dead-end suite, maze, forest, pedestrian corridor."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Point2, Polygon
from .sim import Actor, World


@dataclass(frozen=True)
class Scenario:
    name: str
    world: World
    start: Point2
    goals: tuple[Point2, ...]


def rect(x0: float, y0: float, x1: float, y1: float, id: int = 0) -> Polygon:
    return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)), id=id)


def _polys(*shapes) -> tuple[Polygon, ...]:
    return tuple(Polygon(p.vertices, id=k) for k, p in enumerate(shapes))


def _cup(x0: float, x1: float, y0: float, y1: float, t: float = 0.3, open_left: bool = True) -> list[Polygon]:
    """Three walls forming a pocket that opens towards -x (or +x)."""
    back = rect(x1 - t, y0, x1, y1) if open_left else rect(x0, y0, x0 + t, y1)
    return [rect(x0, y0, x1, y0 + t), rect(x0, y1 - t, x1, y1), back]


def _scenario(name, bounds, shapes, start, goals) -> Scenario:
    world = World(bounds, _polys(*shapes), name=name)
    return Scenario(name, world, Point2(*start), tuple(Point2(*g) for g in goals))


def dead_end_suite() -> list[Scenario]:
    """Ten static worlds with pockets on the direct line between the goals.

    Goals shuttle A -> B -> A -> B; the pocket is entered on A -> B legs, so
    a planner keeping its map across goals can skip the second visit.
    """
    B = (0, 0, 40, 20)
    A, G = (2.5, 10.0), (37.0, 10.0)
    shuttle = (G, A, G)
    out = [
        _scenario("cup", B, _cup(8, 27, 5, 15), A, shuttle),
        _scenario("cup_high", B, _cup(8, 27, 7, 17), A, shuttle),
        _scenario("cup_deep", B, _cup(6, 30, 4, 16), A, shuttle),
        _scenario("cup_blocks", B, _cup(9, 27, 5, 15) + [rect(31, 3, 33, 6), rect(31, 14, 33, 17),
                                                         rect(4, 2, 6, 4)], A, shuttle),
        _scenario("funnel", B, [
            Polygon(((8, 3), (27, 6.5), (27, 6.8), (8, 3.3))),
            Polygon(((8, 16.7), (27, 13.2), (27, 13.5), (8, 17))),
            rect(26.7, 6.5, 27, 13.5),
        ], A, shuttle),
        _scenario("l_pocket", B, [
            rect(8, 5, 24, 5.3), rect(8, 14.7, 30, 15), rect(23.7, 5, 24, 11),
            rect(24, 10.7, 30, 11), rect(29.7, 11, 30, 15),
        ], A, shuttle),
        _scenario("double_cup", (0, 0, 44, 20), _cup(7, 20, 6, 14) + _cup(24, 37, 4, 16), A, ((41.0, 10.0), A, (41.0, 10.0))),
        # three side-by-side pockets, all opening left
        _scenario("comb", B, [
            rect(8, 4, 26, 4.3), rect(8, 15.7, 26, 16), rect(25.7, 4.3, 26, 15.7),
            rect(12, 8.5, 25.7, 8.8), rect(12, 11.2, 25.7, 11.5),
        ], A, shuttle),
        _scenario("zigzag", B, [
            rect(8, 3, 28, 3.3), rect(8, 16.7, 28, 17), rect(27.7, 3, 28, 17),
            rect(12, 3.3, 12.3, 12), rect(17, 8, 17.3, 16.7), rect(22, 3.3, 22.3, 12),
        ], A, shuttle),
        _scenario("cup_low", B, _cup(10, 28, 3, 13), A, shuttle),
    ]
    return out


def dead_end_worlds() -> list[Scenario]:
    """The two scripted worlds used for single-goal escape checks."""
    suite = {s.name: s for s in dead_end_suite()}
    return [Scenario(s.name, s.world, s.start, s.goals[:1]) for s in (suite["cup"], suite["l_pocket"])]


def maze_world(cells: int = 8, cell_size: float = 5.0, wall: float = 0.3, seed: int = 3) -> Scenario:
    """Perfect maze from a seeded depth-first carve; one wall rectangle per maze wall run."""
    rng = np.random.default_rng(seed)
    n = cells
    # h_walls[i][j]: wall below cell row i (between rows i-1 and i), v_walls[i][j]: left of column j
    h_walls = np.ones((n + 1, n), dtype=bool)
    v_walls = np.ones((n, n + 1), dtype=bool)
    seen = np.zeros((n, n), dtype=bool)
    stack = [(0, 0)]
    seen[0, 0] = True
    while stack:
        r, c = stack[-1]
        nbrs = [(r + dr, c + dc) for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= r + dr < n and 0 <= c + dc < n and not seen[r + dr, c + dc]]
        if not nbrs:
            stack.pop()
            continue
        rr, cc = nbrs[int(rng.integers(len(nbrs)))]
        if rr != r:
            h_walls[max(r, rr), c] = False
        else:
            v_walls[r, max(c, cc)] = False
        seen[rr, cc] = True
        stack.append((rr, cc))
    s = cell_size
    shapes = []
    # interior walls only; the world bounds close the maze
    for i in range(1, n):
        j = 0
        while j < n:
            if h_walls[i, j]:
                k = j
                while k < n and h_walls[i, k]:
                    k += 1
                shapes.append(rect(j * s, i * s - wall / 2, k * s, i * s + wall / 2))
                j = k
            else:
                j += 1
    for j in range(1, n):
        i = 0
        while i < n:
            if v_walls[i, j]:
                k = i
                while k < n and v_walls[k, j]:
                    k += 1
                shapes.append(rect(j * s - wall / 2, i * s, j * s + wall / 2, k * s))
                i = k
            else:
                i += 1
    side = n * s
    world = World((0, 0, side, side), _polys(*shapes), name="maze")
    return Scenario("maze", world, Point2(s / 2, s / 2), (Point2(side - s / 2, side - s / 2),))


def forest_world(spacing: float = 4.0, side: float = 40.0, seed: int = 5) -> Scenario:
    """Rotated square pillars on a jittered lattice; many small separate obstacles."""
    rng = np.random.default_rng(seed)
    shapes = []
    ticks = np.arange(spacing, side - spacing / 2, spacing)
    for cx in ticks:
        for cy in ticks:
            half = rng.uniform(0.4, 0.8)
            theta = rng.uniform(0.0, np.pi / 2)
            c = np.array([cx, cy]) + rng.uniform(-0.6, 0.6, size=2)
            rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
            corners = np.array([[-half, -half], [half, -half], [half, half], [-half, half]]) @ rot.T + c
            shapes.append(Polygon(tuple(map(tuple, corners.tolist()))))
    world = World((0, 0, side, side), _polys(*shapes), name="forest")
    return Scenario("forest", world, Point2(1.5, 1.5), (Point2(side - 1.5, side - 1.5), Point2(1.5, side - 1.5)))


def pedestrian_corridor(speed: float = 1.5) -> Scenario:
    """Two pillars in a hall with a pedestrian walking between them once."""
    shapes = [rect(6, 5, 8, 7), rect(14, 5, 16, 7)]
    ped = Actor(Polygon(((-0.25, -0.25), (0.25, -0.25), (0.25, 0.25), (-0.25, 0.25))),
                ((11.0, 16.0), (11.0, -3.0)), speed)
    world = World((0, -4, 22, 17), _polys(*shapes), (ped,), name="pedestrian")
    return Scenario("pedestrian", world, Point2(4.0, 1.0), (Point2(4.0, 1.0),))


def builtin_scenarios() -> dict[str, Scenario]:
    out = {s.name: s for s in dead_end_suite()}
    out["maze"] = maze_world()
    out["forest"] = forest_world()
    out["pedestrian"] = pedestrian_corridor()
    return out


__all__ = ["Scenario", "builtin_scenarios", "dead_end_suite", "dead_end_worlds", "forest_world", "maze_world",
           "pedestrian_corridor", "rect"]
