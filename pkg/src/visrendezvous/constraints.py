"""Convex motion constraints that keep pairwise links alive.

For a linked pair (p_i, p_j) the constraint set is a convex subset of the
contracted region in which both robots may move freely without the link
leaving sensing range or losing robust visibility: the visibility region of
p_i, capped to a polygon inscribed in the half-range disk around the link
midpoint, then cut by tangent lines at whichever boundary concavities the
clipped set still touches.  Cutting at the concavity point nearest the link
keeps both endpoints feasible while removing every line of sight the
concavity occludes.

The half-range polygon uses an even vertex count with its phase locked to
the link direction, so both endpoints land on spokes (always inside) and the
whole construction commutes with rigid motions of the scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import core
from .geometry.contraction import (ContractedRegion, StrictConcavity,
                                   _segpairs_edges_min_dist)
from .geometry.convex import (ConvexRegion, HalfPlane, EMPTY_REGION,
                              clip_halfplane, clip_loop_tagged,
                              inscribed_disk_polygon, intersect_convex,
                              region_from_points)
from .geometry.visibility import StarPolygon, visibility_region, clip_star_by_convex


@dataclass(frozen=True)
class LinkConstraint:
    region: ConvexRegion
    cuts: int               # tangent cuts applied
    fast_path: bool         # half-range polygon was provably clear of walls


def link_disk_polygon(p_i, p_j, comm_radius: float, segments: int = 64) -> ConvexRegion:
    """Inscribed polygon of the half-range disk around the link midpoint."""
    if segments % 2:
        raise ValueError("segments must be even so both endpoints sit on spokes")
    p_i = core.as_point(p_i)
    p_j = core.as_point(p_j)
    mid = 0.5 * (p_i + p_j)
    delta = p_j - p_i
    phase = float(np.arctan2(delta[1], delta[0])) if np.hypot(*delta) > 0 else 0.0
    return inscribed_disk_polygon(mid, comm_radius / 2.0, segments, phase)


def _hull_clear(region: ContractedRegion, p_i: np.ndarray, disk: ConvexRegion) -> bool:
    """True when conv({p_i} + disk polygon) provably lies in the contracted set.

    Boundary clearance alone is not enough if the workspace could sit inside
    the hull, so workspace vertices are required to stay outside it.
    """
    pts = np.concatenate([p_i[None, :], disk.vertices], axis=0)
    hull = region_from_points(pts)
    V = hull.vertices
    if len(V) < 3:
        return False
    if not np.all(core.points_in_polygon(region.env.vertices, V)):
        return False
    if np.any(hull.contains(region.env.vertices)):
        return False
    A, B = core.poly_edges(V)
    Ea, Eb = region.env.edges
    dmin = _segpairs_edges_min_dist(A, B, Ea, Eb)
    return bool(np.min(dmin) >= region.epsilon - region.tol)


def _arc_point_nearest_segment(conc: StrictConcavity, a: np.ndarray,
                               b: np.ndarray) -> tuple[np.ndarray, float]:
    """Point of the concavity arc closest to segment [a, b], with distance."""
    c = conc.center
    q = _closest_on_segment(a, b, c)
    span = conc.a1 - conc.a0
    th = np.concatenate([
        np.arctan2(*(np.stack([q, a, b]) - c).T[::-1]),
        conc.a0 + span * np.linspace(0.0, 1.0, 17),
    ])
    # clamp every candidate into the span, towards the closer end
    rel = (th - conc.a0) % (2 * np.pi)
    off = rel > span
    to_a1 = rel - span <= 2 * np.pi - rel
    th = np.where(off, np.where(to_a1, conc.a1, conc.a0), th)
    pts = c + conc.radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    d = core.points_segs_dist(pts, a[None, :], b[None, :])[:, 0]
    k = int(np.argmin(d))
    return pts[k], float(d[k])


def _closest_on_segment(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    d = b - a
    L2 = float(d @ d)
    t = 0.0 if L2 == 0 else float(np.clip((p - a) @ d / L2, 0.0, 1.0))
    return a + t * d


def _overlapping_concavities(region: ContractedRegion, V: np.ndarray,
                             resolved: set[int]) -> list[StrictConcavity]:
    """Unresolved concavities whose exclusion disk meets the polygon V.

    Working on true disks rather than boundary provenance keeps chord-level
    slivers from slipping through: one tangent cut then removes the whole
    disk, so each concavity needs at most one cut.
    """
    if len(V) < 3:
        return []
    todo = [c for c in region.concavities if c.vertex_index not in resolved]
    if not todo:
        return []
    margin = 1e-12 * region.diameter
    centers = np.stack([c.center for c in todo])
    radii = np.array([c.radius for c in todo])
    A, B = core.poly_edges(V)
    d = core.points_segs_dist(centers, A, B).min(axis=1)
    inside = core.points_in_polygon(V, centers)
    hit = inside | (d < radii - margin)
    return [c for c, h in zip(todo, hit) if h]


def link_constraint(region: ContractedRegion, p_i, p_j, comm_radius: float,
                    segments: int = 64, star=None) -> LinkConstraint:
    """Constraint set for one link.  ``star`` may be a precomputed visibility
    region for p_i or a zero-argument callable producing one (evaluated only
    when the fast path fails)."""
    p_i = core.as_point(p_i)
    p_j = core.as_point(p_j)
    disk = link_disk_polygon(p_i, p_j, comm_radius, segments)
    tol = core.scale_tol(region.diameter)

    if _hull_clear(region, p_i, disk):
        return LinkConstraint(region=disk, cuts=0, fast_path=True)

    if star is None:
        star = visibility_region(region, p_i)
    elif callable(star):
        star = star()
    clipped = clip_star_by_convex(star, disk, tol)
    V, kinds, ids = clipped.vertices, clipped.tag_kind, clipped.tag_id

    resolved: set[int] = set()
    cuts = 0

    def tangent_plane(conc: StrictConcavity) -> HalfPlane | None:
        t, _ = _arc_point_nearest_segment(conc, p_i, p_j)
        plane = HalfPlane(anchor=t, normal=(t - conc.center) / conc.radius)
        # the tangent at the arc point nearest a robustly visible link keeps
        # both endpoints; guard against clipping them on skew geometry
        if plane.signed_dist(np.stack([p_i, p_j])).min() < -tol:
            return None
        return plane

    for _ in range(len(region.concavities)):
        if len(V) == 0:
            break
        over = _overlapping_concavities(region, V, resolved)
        if not over:
            break
        best = min(over, key=lambda c: _arc_point_nearest_segment(c, p_i, p_j)[1])
        resolved.add(best.vertex_index)
        plane = tangent_plane(best)
        if plane is None:
            continue
        V, kinds, ids = clip_loop_tagged(V, kinds, ids, plane, tol)
        cuts += 1

    if len(V) == 0:
        return LinkConstraint(region=EMPTY_REGION, cuts=cuts, fast_path=False)
    final = region_from_points(V, tol=tol)

    # closing the hull can only re-admit chord slivers; re-cut until clean
    recut = 0
    for _ in range(len(region.concavities)):
        over = _overlapping_concavities(region, final.vertices, resolved)
        if not over:
            break
        for conc in over:
            resolved.add(conc.vertex_index)
            plane = tangent_plane(conc)
            if plane is None:
                continue
            final = clip_halfplane(final, plane, tol)
            recut += 1
    if recut and not final.is_empty:
        # re-cuts can leave vertices folded out of convex position by about
        # tol, which the edge-based membership test cannot tolerate
        final = region_from_points(final.vertices, tol=tol)
    cuts += recut
    return LinkConstraint(region=final, cuts=cuts, fast_path=False)


def motion_constraint(region: ContractedRegion, p_i, neighbor_points,
                      comm_radius: float, segments: int = 64,
                      star: StarPolygon | None = None) -> ConvexRegion:
    """Intersection of link constraints over all neighbors of one robot.

    A robot with no neighbors constrains itself to the half-range polygon
    around its own position, which keeps it from wandering.  The visibility
    region of p_i is computed at most once across all links.
    """
    p_i = core.as_point(p_i)
    N = core.as_points(neighbor_points) if neighbor_points is not None else np.zeros((0, 2))
    if len(N) == 0:
        N = p_i[None, :]
    cache = [star]

    def shared_star() -> StarPolygon:
        if cache[0] is None:
            cache[0] = visibility_region(region, p_i)
        return cache[0]

    combined: ConvexRegion | None = None
    tol = core.scale_tol(region.diameter)
    for p_j in N:
        lc = link_constraint(region, p_i, p_j, comm_radius, segments, star=shared_star)
        combined = lc.region if combined is None else intersect_convex(combined, lc.region, tol)
        if combined.is_empty:
            break
    return combined
