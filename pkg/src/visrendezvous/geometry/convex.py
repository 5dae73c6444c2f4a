"""Convex regions, half-plane clipping, and smallest enclosing circles.

A :class:`ConvexRegion` is a CCW vertex loop that may degenerate to a
segment, a single point, or the empty set; emptiness stays a distinct value
rather than an exception so intersection pipelines can report it.  The
clipping helpers also run on non-convex subjects (one half-plane at a time)
provided the result is connected, which is how the constraint generator uses
them; vertex provenance tags ride along through every cut.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core

TAG_NONE = -1


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane {x : (x - anchor) . normal >= 0}."""

    anchor: np.ndarray
    normal: np.ndarray      # unit vector pointing into the kept side

    def signed_dist(self, P) -> np.ndarray:
        P = core.as_points(P)
        return (P - self.anchor) @ self.normal

    def contains(self, P, tol: float = 0.0) -> np.ndarray:
        return self.signed_dist(P) >= -tol


@dataclass(frozen=True)
class ConvexRegion:
    vertices: np.ndarray    # (k,2) CCW; k in {0,1,2} are the degenerate cases
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) < 3

    def contains(self, P, tol: float = 0.0) -> np.ndarray:
        P = core.as_points(P)
        V = self.vertices
        if len(V) == 0:
            return np.zeros(len(P), dtype=bool)
        if len(V) == 1:
            return np.hypot(*(P - V[0]).T) <= tol
        A, B = core.poly_edges(V)
        if len(V) == 2:
            return core.points_segs_dist(P, A[:1], B[:1])[:, 0] <= tol
        e = B - A
        elen = np.hypot(*e.T)
        # an edge much shorter than the polygon carries no usable direction
        # (clip ties emit such slivers); excluding it widens the test by at
        # most its own length
        span = float(np.abs(V - V.mean(axis=0)).max())
        ok = elen > 1e-9 * span
        if not ok.any():
            return np.hypot(*(P - V[0]).T) <= max(tol, 2 * span)
        A, e, elen = A[ok], e[ok], elen[ok]
        w = P[:, None, :] - A[None, :, :]
        cr = e[None, :, 0] * w[..., 1] - e[None, :, 1] * w[..., 0]
        # cr / |e| is the signed distance left of each CCW edge, >= -tol everywhere
        return np.all(cr >= -tol * elen[None, :], axis=1)

    def contains_point(self, p, tol: float = 0.0) -> bool:
        return bool(self.contains(core.as_point(p)[None, :], tol)[0])

    def area(self) -> float:
        if self.is_degenerate:
            return 0.0
        return core.polygon_area(self.vertices)


EMPTY_REGION = ConvexRegion(vertices=np.zeros((0, 2)))


def region_from_points(P, tol: float = 0.0) -> ConvexRegion:
    """Convex hull as a region; handles coincident and collinear inputs."""
    P = core.as_points(P)
    if len(P) == 0:
        return EMPTY_REGION
    idx = core.convex_hull(P, tol=tol)
    V = P[idx].copy()
    V.setflags(write=False)
    return ConvexRegion(vertices=V)


def clip_halfplane(region: ConvexRegion, h: HalfPlane, tol: float = 0.0) -> ConvexRegion:
    """Intersect a convex region with a half-plane (ties kept)."""
    V = region.vertices
    if len(V) == 0:
        return EMPTY_REGION
    if len(V) == 1:
        return region if h.contains(V, tol)[0] else EMPTY_REGION
    out, _, _ = clip_loop_tagged(V, None, None, h, tol)
    if len(out) == 0:
        return EMPTY_REGION
    return ConvexRegion(vertices=out)


def clip_loop_tagged(V: np.ndarray, kinds, ids, h: HalfPlane, tol: float):
    """One Sutherland-Hodgman pass of a closed loop against a half-plane.

    Crossing vertices inherit the provenance of the subject edge they cut
    when both edge endpoints agree, else TAG_NONE.  The subject may be
    non-convex; the caller guarantees the intersection is connected.
    """
    d = h.signed_dist(V)
    keep = d >= -tol
    if keep.all():
        return V, kinds, ids
    if not keep.any():
        empty = np.zeros((0, 2))
        et = np.zeros(0, dtype=np.int32)
        return empty, (et.astype(np.int8) if kinds is not None else None), \
            (et if ids is not None else None)

    n = len(V)
    keep_next = np.concatenate([keep[1:], keep[:1]])
    cross_edges = np.nonzero(keep != keep_next)[0]
    i = cross_edges
    j = i + 1
    j[j == n] = 0
    # when one endpoint is kept by tolerance only (d slightly negative), the
    # zero crossing may lie outside the edge; clamping emits that endpoint
    # instead of an extrapolated point far from the subject
    t = np.clip(d[i] / (d[i] - d[j]), 0.0, 1.0)
    X = V[i] + t[:, None] * (V[j] - V[i])

    kept_idx = np.nonzero(keep)[0]
    order = np.concatenate([2 * kept_idx, 2 * cross_edges + 1])
    pts = np.concatenate([V[kept_idx], X])
    perm = np.argsort(order, kind="stable")
    out = pts[perm]

    if kinds is None:
        return out, None, None
    same = (kinds[i] == kinds[j]) & (ids[i] == ids[j])
    xk = np.where(same, kinds[i], np.int8(TAG_NONE)).astype(np.int8)
    xi = np.where(same, ids[i], np.int32(TAG_NONE)).astype(np.int32)
    out_k = np.concatenate([kinds[kept_idx], xk])[perm]
    out_i = np.concatenate([ids[kept_idx], xi])[perm]
    return out, out_k, out_i


def intersect_convex(a: ConvexRegion, b: ConvexRegion, tol: float = 0.0) -> ConvexRegion:
    """Intersection of two convex regions via successive half-plane cuts."""
    if a.is_empty or b.is_empty:
        return EMPTY_REGION
    if b.is_degenerate:
        a, b = b, a
    if a.is_degenerate:
        return _intersect_degenerate(a, b, tol)
    out = a
    for h in active_halfplanes(b, a.vertices, tol):
        out = clip_halfplane(out, h, tol)
        if out.is_empty:
            return EMPTY_REGION
    return out


def _intersect_degenerate(a: ConvexRegion, b: ConvexRegion, tol: float) -> ConvexRegion:
    V = a.vertices
    if len(V) == 1:
        return a if b.contains(V, tol)[0] else EMPTY_REGION
    # clip the segment [V0,V1] against b
    p0, p1 = V[0], V[1]
    lo, hi = 0.0, 1.0
    if b.is_degenerate:
        # segment vs point/segment: fall back to endpoint membership
        pts = [q for q in (p0, p1) if b.contains(q[None, :], tol)[0]]
        return ConvexRegion(vertices=np.array(pts)) if pts else EMPTY_REGION
    for h in edge_halfplanes(b):
        d0 = float(h.signed_dist(p0[None, :])[0])
        d1 = float(h.signed_dist(p1[None, :])[0])
        if d0 < -tol and d1 < -tol:
            return EMPTY_REGION
        if d0 < -tol or d1 < -tol:
            t = d0 / (d0 - d1)
            if d0 < -tol:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
    if lo > hi:
        return EMPTY_REGION
    q0 = p0 + lo * (p1 - p0)
    q1 = p0 + hi * (p1 - p0)
    if np.hypot(*(q1 - q0)) <= tol:
        return ConvexRegion(vertices=q0[None, :])
    return ConvexRegion(vertices=np.stack([q0, q1]))


def _plane_data(region: ConvexRegion):
    """Cached (planes, normals, offsets) for a region's usable edges."""
    got = region._cache.get("planes")
    if got is None:
        V = region.vertices
        A, B = core.poly_edges(V)
        # the direction of a sliver edge is numerically meaningless
        lo = 1e-9 * float(np.abs(V - V.mean(axis=0)).max()) if len(V) else 0.0
        planes = []
        for k in range(len(V)):
            e = B[k] - A[k]
            L = np.hypot(*e)
            if L <= lo:
                continue
            planes.append(HalfPlane(anchor=A[k],
                                    normal=np.array([-e[1], e[0]]) / L))
        if planes:
            N = np.stack([h.normal for h in planes])
            off = np.einsum("ij,ij->i", np.stack([h.anchor for h in planes]), N)
        else:
            N = np.zeros((0, 2))
            off = np.zeros(0)
        got = (planes, N, off)
        region._cache["planes"] = got
    return got


def edge_halfplanes(region: ConvexRegion):
    """Inward half-planes of a CCW convex polygon, one per usable edge."""
    return _plane_data(region)[0]


def active_halfplanes(region: ConvexRegion, P: np.ndarray, tol: float):
    """Edge half-planes of ``region`` that actually cut the point set ``P``.

    A plane keeping every point within tol is exactly the clip pass that
    would return its subject unchanged, so dropping it is equivalence, not
    approximation; the certificate survives later cuts because those only
    create points inside the hull of the current vertex set.
    """
    planes, N, off = _plane_data(region)
    if len(planes) == 0 or len(P) == 0:
        return planes
    dmin = (P @ N.T - off).min(axis=0)
    return [h for h, d in zip(planes, dmin) if d < -tol]


def circumcenter(region: ConvexRegion) -> np.ndarray:
    """Center of the smallest circle enclosing the region (= its vertices)."""
    if region.is_empty:
        raise ValueError("circumcenter of an empty region")
    c, _ = core.min_enclosing_circle(region.vertices)
    return c


def convex_hausdorff(a: ConvexRegion, b: ConvexRegion) -> float:
    """Hausdorff distance between two nonempty convex regions."""
    return max(_directed(a, b), _directed(b, a))


def _directed(a: ConvexRegion, b: ConvexRegion) -> float:
    P = a.vertices
    V = b.vertices
    if len(V) == 1:
        return float(np.hypot(*(P - V[0]).T).max())
    A, B = core.poly_edges(V)
    if len(V) == 2:
        A, B = A[:1], B[:1]
    d = core.points_segs_dist(P, A, B).min(axis=1)
    if len(V) >= 3:
        d[b.contains(P)] = 0.0
    return float(d.max())


def inscribed_disk_polygon(center, radius: float, segments: int = 64,
                           phase: float = 0.0) -> ConvexRegion:
    """Regular m-gon inscribed in a disk; a conservative disk stand-in.

    ``phase`` sets the first vertex direction.  Callers that need rigid-motion
    equivariance must derive the phase from scene geometry, not world axes.
    """
    center = core.as_point(center)
    th = phase + 2 * np.pi * np.arange(segments) / segments
    V = center + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    return ConvexRegion(vertices=V)
