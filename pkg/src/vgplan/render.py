"""Static SVG rendering of worlds, graphs and trajectories."""
from __future__ import annotations

from typing import Sequence

from .vgraph import ACTIVE, CONTOUR, VGraph


def _f(v: float) -> str:
    return f"{v:.3f}"


def render_svg(world=None, graph: VGraph | None = None, trajectory: Sequence = (), start=None,
               goals: Sequence = (), path: Sequence = (), scale: float = 20.0, bounds=None) -> str:
    """SVG text; y grows upwards in world coordinates and is flipped for display.

    Ground-truth obstacles are grey, contour edges black, active visibility
    edges light blue, blocked edges dashed red, the trajectory green, start a
    blue dot and goals red crosses.
    """
    if bounds is None:
        if world is None:
            raise ValueError("need a world or explicit bounds")
        bounds = world.bounds
    xmin, ymin, xmax, ymax = bounds
    w, h = (xmax - xmin) * scale, (ymax - ymin) * scale

    def X(x):
        return _f((x - xmin) * scale)

    def Y(y):
        return _f((ymax - y) * scale)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w)}" height="{_f(h)}" '
           f'viewBox="0 0 {_f(w)} {_f(h)}">',
           f'<rect x="0" y="0" width="{_f(w)}" height="{_f(h)}" fill="white" stroke="black"/>']
    if world is not None:
        for poly in world.obstacles:
            pts = " ".join(f"{X(x)},{Y(y)}" for x, y in poly.vertices)
            out.append(f'<polygon points="{pts}" fill="#bbbbbb" stroke="none"/>')
    if graph is not None:
        for key in sorted(graph.edges):
            e = graph.edges[key]
            a, b = graph.vertices[e.a].position, graph.vertices[e.b].position
            if e.kind == CONTOUR:
                style = 'stroke="black" stroke-width="1.5"'
            elif e.status == ACTIVE:
                style = 'stroke="#6fa8dc" stroke-width="0.6"'
            else:
                style = 'stroke="#cc0000" stroke-width="0.8" stroke-dasharray="4,3"'
            out.append(f'<line x1="{X(a.x)}" y1="{Y(a.y)}" x2="{X(b.x)}" y2="{Y(b.y)}" {style}/>')
        for vid in sorted(graph.vertices):
            v = graph.vertices[vid]
            fill = "#38761d" if v.label == "free" else "#999999"
            out.append(f'<circle cx="{X(v.position.x)}" cy="{Y(v.position.y)}" r="2" fill="{fill}"/>')
    if len(path) > 1:
        pts = " ".join(f"{X(p[0])},{Y(p[1])}" for p in path)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#e69138" stroke-width="1.5"/>')
    if len(trajectory) > 1:
        pts = " ".join(f"{X(p[0])},{Y(p[1])}" for p in trajectory)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#00a000" stroke-width="2"/>')
    if start is not None:
        out.append(f'<circle cx="{X(start[0])}" cy="{Y(start[1])}" r="5" fill="#0b5394"/>')
    for g in goals:
        gx, gy = float(X(g[0])), float(Y(g[1]))
        out.append(f'<path d="M{_f(gx - 5)},{_f(gy - 5)} L{_f(gx + 5)},{_f(gy + 5)} '
                   f'M{_f(gx - 5)},{_f(gy + 5)} L{_f(gx + 5)},{_f(gy - 5)}" stroke="#cc0000" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
