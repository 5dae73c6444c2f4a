"""Deterministic SVG snapshots of trace frames.

Each frame draws the workspace polygon, the clearance-contracted free space
at that frame's clearance value, the sensing-graph edges, and the robots.
All coordinates are emitted with fixed six-decimal formatting so a given
trace always produces byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .geometry.contraction import ContractionError, contract
from .geometry.environment import Environment, validate_environment


def _f(x: float) -> str:
    return f"{float(x):.6f}"


def _points_attr(poly: np.ndarray) -> str:
    return " ".join(f"{_f(x)},{_f(y)}" for x, y in np.asarray(poly, dtype=float))


def frame_svg(env: Environment, frame, robot_radius: float = 0.35,
              region_cache: dict | None = None) -> str:
    """One frame as a standalone SVG document (a string)."""
    verts = env.vertices
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    margin = 0.03 * float(max(hi - lo))
    x0, y0 = lo - margin
    w, h = (hi - lo) + 2 * margin

    region = None
    if region_cache is not None and frame.epsilon in region_cache:
        region = region_cache[frame.epsilon]
    else:
        try:
            region = contract(env, max(frame.epsilon, 1e-9))
        except ContractionError:
            region = None
        if region_cache is not None:
            region_cache[frame.epsilon] = region

    P = np.asarray(frame.positions, dtype=float)
    E = np.asarray(frame.edges, dtype=int).reshape(-1, 2)

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_f(x0)} {_f(-y0 - h)} {_f(w)} {_f(h)}" '
        f'width="{_f(10 * w)}" height="{_f(10 * h)}">')
    # flip the y axis so the world's +y points up
    out.append('<g transform="scale(1,-1)">')
    out.append(f'<polygon points="{_points_attr(verts)}" '
               'fill="#f7f7f5" stroke="#222222" stroke-width="0.25"/>')
    if region is not None:
        out.append(f'<polygon points="{_points_attr(region.approx)}" '
                   'fill="none" stroke="#3572a5" stroke-width="0.12" '
                   'stroke-dasharray="0.8 0.5"/>')
    for a, b in E:
        out.append(f'<line x1="{_f(P[a, 0])}" y1="{_f(P[a, 1])}" '
                   f'x2="{_f(P[b, 0])}" y2="{_f(P[b, 1])}" '
                   'stroke="#999999" stroke-width="0.08"/>')
    for x, y in P:
        out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(robot_radius)}" '
                   'fill="#d62728" stroke="#5c0a0b" stroke-width="0.06"/>')
    out.append('</g>')
    out.append(f'<text x="{_f(x0 + 0.5)}" y="{_f(-y0 - 0.7)}" '
               'font-family="monospace" font-size="2.2" fill="#333333">'
               f'time {_f(frame.time)} clearance {_f(frame.epsilon)}</text>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def render_trace(trace, out_dir, every: int = 1) -> list:
    """Write every N-th frame of a trace to ``out_dir``; returns the paths.

    ``trace`` is a Trace (with embedded environment) from ``read_trace``.
    """
    import os
    if trace.environment is None:
        raise ValueError("trace has no embedded environment to draw")
    if every < 1:
        raise ValueError("every must be >= 1")
    env = validate_environment(trace.environment)
    radius = trace.robot_radius if trace.robot_radius else 0.35
    os.makedirs(out_dir, exist_ok=True)
    cache: dict = {}
    paths = []
    for k in range(0, len(trace.frames), every):
        svg = frame_svg(env, trace.frames[k], robot_radius=radius,
                        region_cache=cache)
        path = os.path.join(out_dir, f"frame_{k:05d}.svg")
        with open(path, "w") as f:
            f.write(svg)
        paths.append(path)
    return paths
