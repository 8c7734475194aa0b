"""Incremental visibility-graph navigation planner with a point-robot simulator and grid baselines."""
from .geometry import Obstacles, Point2, Polygon, Segment2, inner_angle, point_in_polygon, segments_intersect
from .planner import NavPath, PlanRequest, load_graph, plan, save_graph
from .sim import SimConfig, World, run_navigation
from .vgraph import MergeParams, VGraph, process_frame

__version__ = "0.1.0"

__all__ = [
    "MergeParams", "NavPath", "Obstacles", "PlanRequest", "Point2", "Polygon", "Segment2", "SimConfig",
    "VGraph", "World", "inner_angle", "load_graph", "plan", "point_in_polygon", "process_frame",
    "run_navigation", "save_graph", "segments_intersect",
]
