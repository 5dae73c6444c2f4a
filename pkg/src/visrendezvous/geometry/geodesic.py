"""Shortest paths and geodesic convex hulls inside the contracted region.

Paths are polylines in the polyline approximation of the region; they bend
only at concave boundary samples.  The geodesic hull of a point set starts
from the Euclidean hull and trades every straight edge that leaves the region
for the geodesic between its endpoints, inserting left-out points and
dropping anchors that stop being strict corners until the boundary is stable.

A degenerate hull (all points on one geodesic) is kept as a doubled walk, so
its perimeter is twice the chain length with no special casing downstream.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import core
from .contraction import ContractedRegion


@dataclass(frozen=True)
class GeodesicHull:
    boundary: np.ndarray            # (B,2) closed walk, implicit wrap
    anchor_indices: tuple[int, ...]  # indices into the input point set
    anchor_points: np.ndarray       # (k,2) the strict hull corners, CCW
    perimeter: float
    degenerate: bool
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def contains(self, P, tol: float = 0.0) -> np.ndarray:
        P = core.as_points(P)
        return _closed_walk_contains(self.boundary, P, tol)


def _closed_walk_contains(W: np.ndarray, P: np.ndarray, tol: float) -> np.ndarray:
    if len(W) == 1:
        return np.hypot(*(P - W[0]).T) <= tol
    A, B = core.poly_edges(W)
    on = core.points_segs_dist(P, A, B).min(axis=1) <= tol
    # winding by accumulated turn angle; robust for the doubled degenerate walks
    rel = W[None, :, :] - P[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    d = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    winding = np.abs(d.sum(axis=1)) > np.pi
    return on | winding


# ---------------------------------------------------------------------------
# segment-in-region tests against the polyline approximation


def _segments_inside(region: ContractedRegion, P0: np.ndarray, P1: np.ndarray) -> np.ndarray:
    """True where [P0[k], P1[k]] stays inside the approx polygon.

    Exact up to the tie policy: no strict edge crossing, and every gap
    between boundary contacts probes inside.
    """
    V = region.approx
    A, B = region.approx_edges
    tol = core.scale_tol(region.diameter)
    K = len(P0)
    r = P1 - P0
    s = B - A
    denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    w = A[None, :, :] - P0[:, None, :]
    t_num = w[..., 0] * s[None, :, 1] - w[..., 1] * s[None, :, 0]
    u_num = w[..., 0] * r[:, None, 1] - w[..., 1] * r[:, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        u = u_num / denom
    seg_len = np.maximum(np.hypot(*r.T), 1e-300)
    edge_len = np.maximum(np.hypot(*s.T), 1e-300)
    # strictness margin in absolute units, mapped back to params
    mt = tol / seg_len
    mu = tol / edge_len
    crossing = (denom != 0) & (t > mt[:, None]) & (t < 1 - mt[:, None]) \
        & (u > mu[None, :]) & (u < 1 - mu[None, :])
    ok = ~np.any(crossing, axis=1)

    # vertex contacts split the segment; probe each gap midpoint
    dv = core.points_segs_dist(V, P0, P1)          # (M,K)
    contact = dv.T <= tol                          # (K,M)
    out = np.zeros(K, dtype=bool)
    plain = ok & ~np.any(contact, axis=1)
    if np.any(plain):
        mids = 0.5 * (P0[plain] + P1[plain])
        inside = core.points_in_polygon(V, mids)
        near = core.points_segs_dist(mids, A, B).min(axis=1) <= tol
        out[plain] = inside | near
    for k in np.nonzero(ok & np.any(contact, axis=1))[0]:
        touched = V[contact[k]]
        tq = ((touched - P0[k]) @ r[k]) / (seg_len[k] ** 2)
        ts = np.sort(np.concatenate([[0.0], np.clip(tq, 0, 1), [1.0]]))
        probes = P0[k] + (0.5 * (ts[:-1] + ts[1:]))[:, None] * r[k]
        long_enough = (ts[1:] - ts[:-1]) * seg_len[k] > 2 * tol
        probes = probes[long_enough]
        if len(probes) == 0:
            out[k] = True
            continue
        inside = core.points_in_polygon(V, probes)
        near = core.points_segs_dist(probes, A, B).min(axis=1) <= tol
        out[k] = bool(np.all(inside | near))
    return out


def _segment_inside(region: ContractedRegion, a, b) -> bool:
    return bool(_segments_inside(region, core.as_point(a)[None, :],
                                 core.as_point(b)[None, :])[0])


# ---------------------------------------------------------------------------
# shortest paths


def _geo_nodes(region: ContractedRegion) -> np.ndarray:
    if "geo_nodes" not in region._cache:
        region._cache["geo_nodes"] = region.approx[region.reflex_sample_indices]
    return region._cache["geo_nodes"]


def _geo_adjacency(region: ContractedRegion):
    """Symmetric length matrix between concave boundary samples (inf = blocked)."""
    if "geo_adj" not in region._cache:
        N = _geo_nodes(region)
        R = len(N)
        W = np.full((R, R), np.inf)
        if R > 1:
            ii, jj = np.triu_indices(R, k=1)
            vis = _segments_inside(region, N[ii], N[jj])
            d = np.hypot(*(N[ii] - N[jj]).T)
            W[ii[vis], jj[vis]] = d[vis]
            W[jj[vis], ii[vis]] = d[vis]
        region._cache["geo_adj"] = W
    return region._cache["geo_adj"]


def geodesic_path(region: ContractedRegion, a, b) -> np.ndarray:
    """Shortest polyline from a to b; a straight segment whenever one fits."""
    a = core.as_point(a)
    b = core.as_point(b)
    if _segment_inside(region, a, b):
        return np.stack([a, b])
    N = _geo_nodes(region)
    R = len(N)
    if R == 0:
        raise ValueError("no path: segment blocked in a region without concavities")
    W = _geo_adjacency(region)
    ends = np.stack([a, b])
    vis_a = _segments_inside(region, np.repeat(a[None, :], R, axis=0), N)
    vis_b = _segments_inside(region, np.repeat(b[None, :], R, axis=0), N)
    da = np.hypot(*(N - a).T)
    db = np.hypot(*(N - b).T)

    # Dijkstra over nodes 0..R-1 plus source R (=a), target R+1 (=b)
    dist = {R: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, R)]
    target = R + 1
    seen = set()
    while heap:
        d0, u = heapq.heappop(heap)
        if u in seen:
            continue
        seen.add(u)
        if u == target:
            break
        if u == R:
            nbrs = [(int(i), float(da[i])) for i in np.nonzero(vis_a)[0]]
        else:
            nbrs = [(int(j), float(W[u, j])) for j in np.nonzero(np.isfinite(W[u]))[0]]
            if vis_b[u]:
                nbrs.append((target, float(db[u])))
        for v, w in nbrs:
            nd = d0 + w
            if nd < dist.get(v, np.inf) - 1e-15:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if target not in prev:
        raise ValueError("no geodesic path found (region connectivity broken?)")
    path = [target]
    while path[-1] != R:
        path.append(prev[path[-1]])
    path.reverse()
    pts = [a if i == R else (b if i == target else N[i]) for i in path]
    return np.array(pts)


def path_length(path: np.ndarray) -> float:
    return float(np.hypot(*np.diff(path, axis=0).T).sum())


# ---------------------------------------------------------------------------
# geodesic convex hull


def relative_convex_hull(points, region: ContractedRegion) -> GeodesicHull:
    P = core.as_points(points)
    tol = core.scale_tol(region.diameter)
    uniq_idx: list[int] = []
    for i in range(len(P)):
        if all(np.hypot(*(P[i] - P[j])) > tol for j in uniq_idx):
            uniq_idx.append(i)
    U = P[uniq_idx]

    if len(U) == 1:
        return GeodesicHull(boundary=U[:1].copy(), anchor_indices=(uniq_idx[0],),
                            anchor_points=U[:1].copy(), perimeter=0.0, degenerate=True)

    hull_local = core.convex_hull(U, tol=0.0)
    anchors = [int(i) for i in hull_local]

    # when every Euclidean hull edge stays inside the region, that hull is
    # already geodesically convex; one vectorized test avoids the whole
    # refinement loop, which matters for the tight clusters of the endgame
    if len(anchors) >= 2:
        Ha = U[anchors]
        Hb = U[[anchors[(k + 1) % len(anchors)] for k in range(len(anchors))]]
        if _segments_inside(region, Ha, Hb).all():
            boundary = U[anchors].copy()
            ai = tuple(uniq_idx[a] for a in anchors)
            if len(anchors) == 2:
                per = 2.0 * float(np.hypot(*(boundary[1] - boundary[0])))
                return GeodesicHull(boundary=boundary, anchor_indices=ai,
                                    anchor_points=boundary.copy(),
                                    perimeter=per, degenerate=True)
            per = float(core.polygon_perimeter(boundary))
            degenerate = abs(core.polygon_area(boundary)) <= (10 * tol) ** 2
            return GeodesicHull(boundary=boundary, anchor_indices=ai,
                                anchor_points=boundary.copy(),
                                perimeter=per, degenerate=degenerate)

    memo: dict[tuple[int, int], np.ndarray] = {}

    def leg_between(i: int, j: int) -> np.ndarray:
        key = (i, j) if i < j else (j, i)
        if key not in memo:
            memo[key] = geodesic_path(region, U[key[0]], U[key[1]])
        path = memo[key]
        return path if key == (i, j) else path[::-1]

    def prime_straight(pairs: list[tuple[int, int]]) -> None:
        todo = [(i, j) if i < j else (j, i) for i, j in pairs]
        todo = [k for k in set(todo) if k not in memo]
        if todo:
            P0 = U[[k[0] for k in todo]]
            P1 = U[[k[1] for k in todo]]
            ok = _segments_inside(region, P0, P1)
            for key, straight in zip(todo, ok):
                if straight:
                    memo[key] = np.stack([U[key[0]], U[key[1]]])

    max_iter = 4 * len(U) + 16
    legs: list[np.ndarray] = []
    for _ in range(max_iter):
        pairs = [(anchors[k], anchors[(k + 1) % len(anchors)]) for k in range(len(anchors))]
        prime_straight(pairs)
        legs = [leg_between(i, j) for i, j in pairs]
        if len(anchors) > 2:
            removed = False
            for k in range(len(anchors)):
                incoming = legs[k - 1]
                outgoing = legs[k]
                v_in = incoming[-1] - incoming[-2]
                v_out = outgoing[1] - outgoing[0]
                turn = core.cross2(v_in, v_out)
                scale = max(float(np.hypot(*v_in) * np.hypot(*v_out)), 1e-300)
                # drop pass-through and reflex anchors; a reversal (legs retrace
                # into a spike) marks the tip of a degenerate chain and stays
                if turn <= 1e-12 * scale and (v_in @ v_out > 0.0 or turn < -1e-12 * scale):
                    del anchors[k]
                    removed = True
                    break
            if removed:
                continue
        boundary = np.concatenate([leg[:-1] for leg in legs], axis=0)
        others = [i for i in range(len(U)) if i not in anchors]
        if others:
            inside = _closed_walk_contains(boundary, U[others], max(tol, 1e-12 * region.diameter))
            missing = [others[t] for t in np.nonzero(~inside)[0]]
        else:
            missing = []
        if not missing:
            per = float(sum(path_length(leg) for leg in legs))
            area = core.polygon_area(boundary) if len(boundary) >= 3 else 0.0
            degenerate = len(anchors) <= 2 or abs(area) <= (10 * tol) ** 2
            ai = tuple(uniq_idx[a] for a in anchors)
            return GeodesicHull(boundary=boundary, anchor_indices=ai,
                                anchor_points=U[anchors].copy(),
                                perimeter=per, degenerate=degenerate)
        # insert the farthest-out point at the position of least geodesic detour;
        # Euclidean leg distance misleads across obstacles
        far = max(missing, key=lambda m: float(
            core.points_segs_dist(U[m][None, :], boundary, np.roll(boundary, -1, axis=0)).min()))
        leg_len = [path_length(leg) for leg in legs]
        prime_straight([(a, far) for a in anchors])

        def splice_turns(k: int) -> float:
            """Smallest normalized turn among the three anchors a splice touches."""
            n = len(anchors)
            u, w = anchors[k], anchors[(k + 1) % n]
            lu, lw = leg_between(u, far), leg_between(far, w)
            worst = np.inf
            for v_in, v_out in [(legs[k - 1][-1] - legs[k - 1][-2], lu[1] - lu[0]),
                                (lu[-1] - lu[-2], lw[1] - lw[0]),
                                (lw[-1] - lw[-2],
                                 legs[(k + 1) % n][1] - legs[(k + 1) % n][0])]:
                scale = max(float(np.hypot(*v_in) * np.hypot(*v_out)), 1e-300)
                worst = min(worst, float(core.cross2(v_in, v_out)) / scale)
            return worst

        cands = []
        for k in range(len(legs)):
            u, w = anchors[k], anchors[(k + 1) % len(anchors)]
            detour = (path_length(leg_between(u, far))
                      + path_length(leg_between(far, w)) - leg_len[k])
            cands.append((detour, k))
        cands.sort()
        # near-tied splices can differ in cycle order; a reflex corner at the
        # splice marks the wrong order, so take the cheapest stable one
        pick = next((k for _, k in cands if splice_turns(k) >= -1e-9), cands[0][1])
        anchors.insert(pick + 1, far)
    raise RuntimeError("geodesic hull did not stabilize")
