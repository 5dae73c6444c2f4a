"""Line-of-sight regions inside a contracted workspace.

The visibility region of a point is computed on the tagged polyline
approximation by an angular ray sweep: three rays per boundary vertex (the
vertex angle and a hair to either side) so occlusion discontinuities always
land between two adjacent rays.  Hit points inherit the provenance of the
boundary edge they land on, which is what lets the constraint generator find
concave chains without estimating curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .contraction import TAG_ARC, TAG_NONE, ContractedRegion
from .convex import (ConvexRegion, active_halfplanes, clip_loop_tagged,
                     edge_halfplanes, inscribed_disk_polygon)

_DELTA = 1e-7          # angular offset of the side rays
_RAY_BLOCK = 1024      # rays per broadcast block, caps transient memory


@dataclass(frozen=True)
class StarPolygon:
    """Simple polygon star-shaped around ``anchor``, vertices CCW by angle."""

    anchor: np.ndarray
    vertices: np.ndarray
    tag_kind: np.ndarray
    tag_id: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def contains(self, P, tol: float = 0.0) -> np.ndarray:
        P = core.as_points(P)
        V = self.vertices
        if len(V) < 3:
            if len(V) == 0:
                return np.zeros(len(P), dtype=bool)
            A, B = (V, np.roll(V, -1, axis=0)) if len(V) == 2 else (V, V)
            return core.points_segs_dist(P, A[:1], B[:1])[:, 0] <= tol
        inside = core.points_in_polygon(V, P)
        if tol > 0.0:
            A, B = core.poly_edges(V)
            inside = inside | (core.points_segs_dist(P, A, B).min(axis=1) <= tol)
        return inside

    def contains_point(self, p, tol: float = 0.0) -> bool:
        return bool(self.contains(core.as_point(p)[None, :], tol)[0])


def _cast_origin(region: ContractedRegion, p: np.ndarray) -> np.ndarray:
    """Move a boundary-grazing viewpoint a hair inside before casting."""
    A, B = region.approx_edges
    d = core.points_segs_dist(p[None, :], A, B)[0]
    j = int(np.argmin(d))
    lift = 4 * core.scale_tol(region.diameter)
    if d[j] > lift:
        return p
    e = B[j] - A[j]
    n = np.array([-e[1], e[0]])
    n = n / max(np.hypot(*n), 1e-300)
    return p + lift * n


def visibility_region(region: ContractedRegion, p) -> StarPolygon:
    """All points of the contracted region seeable from p along straight lines.

    Rays are cast against the exact boundary (offset segments and true arcs),
    so tangential occlusion at a concavity is resolved exactly; the polyline
    output only chord-approximates the arcs between rays and therefore stays
    a subset of the true region up to chord deviation.
    """
    p = core.as_point(p)
    if not region.contains_point(p):
        raise ValueError("viewpoint is outside the contracted region")
    origin = _cast_origin(region, p)
    angles = _ray_angles(region, origin)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    Sa, Sb, seg_ids = region.exact_segments
    tol = core.scale_tol(region.diameter)
    R = len(angles)
    t_best = np.full(R, np.inf)
    kinds = np.full(R, TAG_NONE, dtype=np.int8)
    ids = np.full(R, TAG_NONE, dtype=np.int32)

    for s in range(0, R, _RAY_BLOCK):
        sl = slice(s, min(s + _RAY_BLOCK, R))
        t, idx = core.ray_first_hits(origin, dirs[sl], Sa, Sb, t_min=tol)
        t_best[sl] = t
        kinds[sl] = np.where(np.isfinite(t), 0, TAG_NONE)
        ids[sl] = np.where(np.isfinite(t), seg_ids[idx], TAG_NONE)

    for conc in region.concavities:
        t_arc = _ray_arc_hits(origin, dirs, conc, tol)
        better = t_arc < t_best
        t_best[better] = t_arc[better]
        kinds[better] = TAG_ARC
        ids[better] = conc.vertex_index

    escaped = ~np.isfinite(t_best)
    if np.any(escaped):
        # grazing numerical escapes: drop those rays
        keep_rays = ~escaped
        t_best, dirs, kinds, ids = t_best[keep_rays], dirs[keep_rays], kinds[keep_rays], ids[keep_rays]

    hits = origin + t_best[:, None] * dirs

    keep = np.hypot(*(hits - np.roll(hits, 1, axis=0)).T) > tol
    if not keep.any():
        keep[0] = True
    hits, kinds, ids = hits[keep], kinds[keep], ids[keep]
    return StarPolygon(anchor=p.copy(), vertices=hits, tag_kind=kinds, tag_id=ids)


def _ray_angles(region: ContractedRegion, origin: np.ndarray) -> np.ndarray:
    rel = region.approx - origin
    base = np.arctan2(rel[:, 1], rel[:, 0])
    extra = []
    for conc in region.concavities:
        oc = conc.center - origin
        d = float(np.hypot(*oc))
        if d <= conc.radius * (1 + 1e-12):
            continue
        phi = np.arcsin(min(1.0, conc.radius / d))
        thc = np.arctan2(oc[1], oc[0])
        extra.extend([thc - phi - _DELTA, thc - phi + _DELTA,
                      thc + phi - _DELTA, thc + phi + _DELTA])
    parts = [base - _DELTA, base, base + _DELTA]
    if extra:
        parts.append(np.array(extra))
    # tangent cones straddling the +-pi seam produce out-of-range values;
    # normalize before sorting or the sweep order is not the angular order
    allang = np.concatenate(parts)
    return np.sort(np.mod(allang + np.pi, 2 * np.pi) - np.pi)


def _ray_arc_hits(origin: np.ndarray, dirs: np.ndarray, conc, t_min: float) -> np.ndarray:
    """First hit param of each unit ray against one boundary arc (inf if none)."""
    oc = origin - conc.center
    b = 2 * (dirs @ oc)
    c0 = float(oc @ oc) - conc.radius ** 2
    disc = b * b - 4 * c0
    t_out = np.full(len(dirs), np.inf)
    ok = disc >= 0
    if not np.any(ok):
        return t_out
    sq = np.sqrt(disc[ok])
    span = conc.a1 - conc.a0
    for root in ((-b[ok] - sq) / 2.0, (-b[ok] + sq) / 2.0):
        valid = root > t_min
        pts = origin + root[:, None] * dirs[ok]
        th = np.arctan2(pts[:, 1] - conc.center[1], pts[:, 0] - conc.center[0])
        on_arc = ((th - conc.a0) % (2 * np.pi)) <= span + 1e-9
        good = valid & on_arc
        cur = t_out[ok]
        cur[good] = np.minimum(cur[good], root[good])
        t_out[ok] = cur
    return t_out


def sensing_region(region: ContractedRegion, p, sensing_radius: float,
                   segments: int = 64, phase: float = 0.0) -> StarPolygon:
    """Visibility region intersected with an inscribed polygon of the range disk."""
    vis = visibility_region(region, p)
    return clip_star_by_convex(vis,
                               inscribed_disk_polygon(vis.anchor, sensing_radius,
                                                      segments, phase),
                               core.scale_tol(region.diameter))


def clip_star_by_convex(star: StarPolygon, clip: ConvexRegion, tol: float) -> StarPolygon:
    """Clip a star polygon by a convex region containing its anchor.

    The intersection stays star-shaped around the anchor, so the sequential
    half-plane passes cannot disconnect it.
    """
    V, k, i = star.vertices, star.tag_kind, star.tag_id
    for h in active_halfplanes(clip, V, tol):
        V, k, i = clip_loop_tagged(V, k, i, h, tol)
        if len(V) == 0:
            break
    return StarPolygon(anchor=star.anchor, vertices=V, tag_kind=k, tag_id=i)
