"""Low-level planar primitives shared by the whole geometry stack.

Points are float64 numpy arrays of shape (2,), point collections (N, 2).
Everything here is exact arithmetic on coordinates plus a single tolerance
convention: callers pass an absolute ``tol`` derived from the scene scale
(see :func:`scale_tol`).  Ties are resolved toward "inside / kept".
"""

from __future__ import annotations

import math
import random

import numpy as np

# Membership slack per unit of scene diameter; floored so tiny scenes do not
# end up with a tolerance below fp noise.
REL_TOL = 1e-9
MIN_TOL = 1e-9


def scale_tol(diameter: float) -> float:
    """Absolute tolerance for a scene of the given bounding-box diameter."""
    return max(MIN_TOL, REL_TOL * diameter)


def as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=np.float64).reshape(2)
    return a


def as_points(P) -> np.ndarray:
    a = np.asarray(P, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, 2)
    return a


def unit(v: np.ndarray) -> np.ndarray:
    n = np.hypot(v[0], v[1])
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return v / n


def left_perp(v: np.ndarray) -> np.ndarray:
    """Rotate v by +90 degrees; for a CCW polygon edge this points inward."""
    return np.array([-v[1], v[0]])


def cross2(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def poly_edges(poly: np.ndarray):
    """Edge start/end arrays (E,2),(E,2) of a closed polygon given as (N,2)."""
    return poly, np.roll(poly, -1, axis=0)


def polygon_area(poly: np.ndarray) -> float:
    A, B = poly_edges(np.asarray(poly, dtype=np.float64))
    return 0.5 * float(np.sum(A[:, 0] * B[:, 1] - B[:, 0] * A[:, 1]))


def polygon_perimeter(poly: np.ndarray) -> float:
    A, B = poly_edges(np.asarray(poly, dtype=np.float64))
    return float(np.sum(np.hypot(*(B - A).T)))


def bbox_diameter(P: np.ndarray) -> float:
    P = as_points(P)
    lo = P.min(axis=0)
    hi = P.max(axis=0)
    return float(np.hypot(*(hi - lo)))


# ---------------------------------------------------------------------------
# distances


def segs_point_dist(A: np.ndarray, B: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distance from point p to each segment [A[i], B[i]]."""
    d = B - A
    w = p - A
    L2 = np.einsum("ij,ij->i", d, d)
    t = np.divide(np.einsum("ij,ij->i", w, d), L2, out=np.zeros_like(L2), where=L2 > 0)
    t = np.clip(t, 0.0, 1.0)
    proj = A + t[:, None] * d
    return np.hypot(*(p - proj).T)


def points_segs_dist(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances (N,E) from each point in P to each segment [A[j], B[j]]."""
    d = B - A                                   # (E,2)
    L2 = np.einsum("ij,ij->i", d, d)            # (E,)
    w = P[:, None, :] - A[None, :, :]           # (N,E,2)
    t = np.divide(np.einsum("nej,ej->ne", w, d), L2, out=np.zeros(w.shape[:2]), where=L2 > 0)
    t = np.clip(t, 0.0, 1.0)
    proj = A[None, :, :] + t[..., None] * d[None, :, :]
    diff = P[:, None, :] - proj
    return np.hypot(diff[..., 0], diff[..., 1])


def seg_segs_dist(p0: np.ndarray, p1: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Min distance between segment [p0,p1] and each segment [A[i],B[i]].

    Zero where the segments properly cross; otherwise the least of the four
    endpoint-to-segment distances, which is exact for non-crossing segments.
    """
    d1 = segs_point_dist(A, B, p0)
    d2 = segs_point_dist(A, B, p1)
    d3 = points_segs_dist(A, np.asarray([p0]), np.asarray([p1]))[:, 0]
    d4 = points_segs_dist(B, np.asarray([p0]), np.asarray([p1]))[:, 0]
    out = np.minimum(np.minimum(d1, d2), np.minimum(d3, d4))
    out[segs_cross(p0, p1, A, B)] = 0.0
    return out


def segs_cross(p0: np.ndarray, p1: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """True where open segment (p0,p1) strictly crosses open segment (A[i],B[i])."""
    r = p1 - p0
    s = B - A
    denom = cross2(r[None, :], s)
    w = A - p0
    t_num = cross2(w, s)
    u_num = cross2(w, np.broadcast_to(r, s.shape))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        u = u_num / denom
    ok = denom != 0
    return ok & (t > 0) & (t < 1) & (u > 0) & (u < 1)


def seg_intersections(p0, p1, A, B, pad: float = 0.0):
    """Intersection params of segment [p0,p1] with segments [A,B].

    Returns (mask, t, u): where mask, p0 + t*(p1-p0) == A + u*(B-A) with
    t, u in [-pad, 1+pad].  Parallel pairs are never reported.
    """
    r = p1 - p0
    s = B - A
    denom = cross2(r[None, :], s)
    w = A - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross2(w, s) / denom
        u = cross2(w, np.broadcast_to(r, s.shape)) / denom
    mask = (denom != 0) & (t >= -pad) & (t <= 1 + pad) & (u >= -pad) & (u <= 1 + pad)
    return mask, t, u


# ---------------------------------------------------------------------------
# polygon membership


def points_in_polygon(poly: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Strict crossing-number test, boundary points unspecified (use a
    distance check first when boundary behavior matters)."""
    P = as_points(P)
    A, B = poly_edges(poly)
    x, y = P[:, 0][:, None], P[:, 1][:, None]
    ya, yb = A[:, 1][None, :], B[:, 1][None, :]
    xa, xb = A[:, 0][None, :], B[:, 0][None, :]
    straddle = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = xa + (y - ya) * (xb - xa) / (yb - ya)
    hits = straddle & (xcross > x)
    return np.sum(hits, axis=1) % 2 == 1


def point_in_polygon(poly: np.ndarray, p, tol: float = 0.0) -> bool:
    """Membership with boundary counted as inside within tol."""
    p = as_point(p)
    if tol > 0.0:
        A, B = poly_edges(poly)
        if segs_point_dist(A, B, p).min() <= tol:
            return True
    return bool(points_in_polygon(poly, p[None, :])[0])


def dist_to_polygon_boundary(poly: np.ndarray, P: np.ndarray) -> np.ndarray:
    A, B = poly_edges(poly)
    return points_segs_dist(as_points(P), A, B).min(axis=1)


# ---------------------------------------------------------------------------
# hulls and circles


def convex_hull(P: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Indices of the convex hull of P in CCW order.

    The chain itself pops on the exact non-left-turn test; a tolerance in
    the pop would let coordinate jitter below tol delete true extremes of
    nearly collinear clusters.  Near-collinear vertices within tol of the
    segment of their hull neighbors are dropped afterwards, but only when
    they project between those neighbors, so the tips of degenerate
    needle-shaped hulls survive.
    """
    P = as_points(P)
    order = np.lexsort((P[:, 1], P[:, 0]))
    xs = P[:, 0].tolist()
    ys = P[:, 1].tolist()
    idx_sorted = order.tolist()

    def half(idx):
        out: list[int] = []
        for i in idx:
            xi = xs[i]
            yi = ys[i]
            while len(out) >= 2:
                b = out[-1]
                a = out[-2]
                if ((xs[b] - xs[a]) * (yi - ys[a])
                        - (ys[b] - ys[a]) * (xi - xs[a])) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(i)
        return out

    lower = half(idx_sorted)
    upper = half(idx_sorted[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 0:
        hull = [idx_sorted[0]]
    if len(hull) == 2 and (P[hull[0]] == P[hull[1]]).all():
        hull = hull[:1]

    changed = tol > 0
    while changed and len(hull) >= 3:
        changed = False
        for k in range(len(hull)):
            ia, ic, ib = hull[k - 1], hull[k], hull[(k + 1) % len(hull)]
            ex = xs[ib] - xs[ia]
            ey = ys[ib] - ys[ia]
            L2 = ex * ex + ey * ey
            if L2 == 0.0:
                hull.pop(k)
                changed = True
                break
            wx = xs[ic] - xs[ia]
            wy = ys[ic] - ys[ia]
            t = (wx * ex + wy * ey) / L2
            off = abs(ex * wy - ey * wx) / math.sqrt(L2)
            if 0.0 <= t <= 1.0 and off <= tol:
                hull.pop(k)
                changed = True
                break
    return np.array(hull, dtype=np.intp)


def min_enclosing_circle(P: np.ndarray):
    """Smallest circle containing all points: (center (2,), radius).

    Incremental Welzl with a fixed-seed shuffle: deterministic for a given
    input order, expected linear time.
    """
    P = as_points(P)
    pts = [tuple(p) for p in P]
    rng = random.Random(0x5EED ^ len(pts))
    rng.shuffle(pts)
    c = None
    for i, p in enumerate(pts):
        if c is None or not _in_circle(c, p):
            c = _circle_one(pts[: i + 1], p)
    if c is None:
        raise ValueError("no points")
    return np.array(c[0]), c[1]


def _in_circle(c, p, slack: float = 1e-12) -> bool:
    (cx, cy), r = c
    return np.hypot(p[0] - cx, p[1] - cy) <= r * (1 + slack) + 1e-14


def _circle_one(pts, p):
    c = (p, 0.0)
    for i, q in enumerate(pts):
        if not _in_circle(c, q):
            if c[1] == 0.0:
                c = _circum2(p, q)
            else:
                c = _circle_two(pts[: i + 1], p, q)
    return c


def _circle_two(pts, p, q):
    c = _circum2(p, q)
    for r in pts:
        if not _in_circle(c, r):
            c = _circum3(p, q, r)
    return c


def _circum2(p, q):
    cx = (p[0] + q[0]) / 2.0
    cy = (p[1] + q[1]) / 2.0
    r = max(np.hypot(p[0] - cx, p[1] - cy), np.hypot(q[0] - cx, q[1] - cy))
    return ((cx, cy), float(r))


def _circum3(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        # collinear: fall back to the diametral circle of the farthest pair
        pairs = [(a, b), (a, c), (b, c)]
        far = max(pairs, key=lambda pq: np.hypot(pq[0][0] - pq[1][0], pq[0][1] - pq[1][1]))
        return _circum2(*far)
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(np.hypot(ax - ux, ay - uy), np.hypot(bx - ux, by - uy), np.hypot(cx - ux, cy - uy))
    return ((ux, uy), float(r))


# ---------------------------------------------------------------------------
# rays


def ray_first_hits(origin: np.ndarray, dirs: np.ndarray, A: np.ndarray, B: np.ndarray,
                   t_min: float = 0.0, pad: float = 1e-12):
    """First boundary hit of each ray origin + t*dirs[k] against segments [A,B].

    Returns (t (R,), edge_index (R,)); t is inf where a ray escapes (for a
    closed polygon around the origin that does not happen).
    """
    s = B - A                                    # (E,2)
    w = A - origin                               # (E,2)
    # origin + t*d = A + u*s  =>  t = (w x s)/(d x s),  u = (w x d)/(d x s)
    denom = dirs[:, 0][:, None] * s[:, 1][None, :] - dirs[:, 1][:, None] * s[:, 0][None, :]
    wxs = w[:, 0] * s[:, 1] - w[:, 1] * s[:, 0]  # (E,)
    t_num = np.broadcast_to(wxs[None, :], denom.shape)
    u_num = w[:, 0][None, :] * dirs[:, 1][:, None] - w[:, 1][None, :] * dirs[:, 0][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        u = u_num / denom
    valid = (denom != 0) & (u >= -pad) & (u <= 1 + pad) & (t > t_min)
    t = np.where(valid, t, np.inf)
    idx = np.argmin(t, axis=1)
    return t[np.arange(t.shape[0]), idx], idx
