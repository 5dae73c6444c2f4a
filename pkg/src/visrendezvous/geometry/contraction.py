"""Safety contraction of a workspace polygon.

The contracted region keeps every point at least ``epsilon`` away from the
boundary.  Its boundary is made of straight pieces (inward offsets of the
polygon edges) and circular arcs of radius ``epsilon`` centered at reflex
vertices; the arcs are the strict concavities that can block line of sight
and drive the constraint-set construction.

The region carries two representations: the exact primitives (arcs recorded
as :class:`StrictConcavity`) and a tagged polyline approximation whose
vertices remember which primitive they sample.  Membership and mutual
visibility are answered exactly from the source polygon, never from the
approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .environment import Environment

TAG_NONE = -1
TAG_EDGE = 0
TAG_ARC = 1


class ContractionError(ValueError):
    """Contraction came out empty, disconnected, or degenerate."""


@dataclass(frozen=True)
class StrictConcavity:
    """One maximal arc piece on the contracted boundary.

    ``vertex_index`` is the reflex vertex of the source polygon at the arc
    center.  The span [a0, a1] is counterclockwise with 0 < a1 - a0 < 2*pi;
    the boundary itself traverses the arc clockwise.
    """

    vertex_index: int
    center: np.ndarray
    radius: float
    a0: float
    a1: float

    def point_at(self, theta: float) -> np.ndarray:
        return self.center + self.radius * np.array([math.cos(theta), math.sin(theta)])

    def contains_angle(self, theta: float, pad: float = 0.0) -> bool:
        return ((theta - self.a0) % (2 * math.pi)) <= (self.a1 - self.a0) + pad

    def clamp_angle(self, theta: float) -> float:
        """Nearest angle of the span to theta (along the circle)."""
        if self.contains_angle(theta):
            return theta
        # distance to either span end, measured on the circle
        d0 = abs(_ang_diff(theta, self.a0))
        d1 = abs(_ang_diff(theta, self.a1))
        return self.a0 if d0 <= d1 else self.a1


def _ang_diff(a: float, b: float) -> float:
    return (a - b + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class ContractedRegion:
    env: Environment
    epsilon: float
    chord_dev: float
    approx: np.ndarray              # (M,2) CCW closed polyline (implicit wrap)
    tag_kind: np.ndarray            # (M,) TAG_EDGE / TAG_ARC
    tag_id: np.ndarray              # (M,) source edge or reflex vertex index
    concavities: tuple[StrictConcavity, ...]
    straight_pieces: tuple = ()     # exact boundary segments: (edge_id, p0, p1)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def exact_segments(self):
        """Arrays (S,2),(S,2),(S,) of the straight boundary pieces."""
        if "exact_segs" not in self._cache:
            Sa = np.array([p0 for _, p0, _ in self.straight_pieces]).reshape(-1, 2)
            Sb = np.array([p1 for _, _, p1 in self.straight_pieces]).reshape(-1, 2)
            sid = np.array([e for e, _, _ in self.straight_pieces], dtype=np.int32)
            self._cache["exact_segs"] = (Sa, Sb, sid)
        return self._cache["exact_segs"]

    @property
    def diameter(self) -> float:
        return self.env.diameter

    @property
    def tol(self) -> float:
        return core.scale_tol(self.diameter)

    @property
    def approx_edges(self):
        if "approx_edges" not in self._cache:
            self._cache["approx_edges"] = core.poly_edges(self.approx)
        return self._cache["approx_edges"]

    @property
    def reflex_sample_indices(self) -> np.ndarray:
        """Indices of approx vertices where the boundary turns right (concave)."""
        if "reflex_samples" not in self._cache:
            V = self.approx
            prev_dir = V - np.roll(V, 1, axis=0)
            next_dir = np.roll(V, -1, axis=0) - V
            turn = core.cross2(prev_dir, next_dir)
            self._cache["reflex_samples"] = np.nonzero(turn < -self.tol)[0]
        return self._cache["reflex_samples"]

    # -- exact predicates ---------------------------------------------------

    def contains(self, P) -> np.ndarray:
        P = core.as_points(P)
        d = self.env.boundary_dist(P)
        far_enough = d >= self.epsilon - self.tol
        return far_enough & (core.points_in_polygon(self.env.vertices, P) | (d <= self.tol))

    def contains_point(self, p) -> bool:
        return bool(self.contains(core.as_point(p)[None, :])[0])

    def segment_clearance(self, p, q) -> float:
        """Min distance from segment [p,q] to the workspace boundary."""
        A, B = self.env.edges
        return float(core.seg_segs_dist(core.as_point(p), core.as_point(q), A, B).min())

    def robustly_visible(self, p, q) -> bool:
        p = core.as_point(p)
        q = core.as_point(q)
        if not (self.contains_point(p) and self.contains_point(q)):
            return False
        return self.segment_clearance(p, q) >= self.epsilon - self.tol

    def visible_pairs(self, P: np.ndarray, pairs: np.ndarray) -> np.ndarray:
        """Vectorized robust visibility for index pairs into P (K,2)."""
        P = core.as_points(P)
        if len(pairs) == 0:
            return np.zeros(0, dtype=bool)
        inside = self.contains(P)
        A, B = self.env.edges
        P0 = P[pairs[:, 0]]
        P1 = P[pairs[:, 1]]
        dmin = _segpairs_edges_min_dist(P0, P1, A, B)
        return inside[pairs[:, 0]] & inside[pairs[:, 1]] & (dmin >= self.epsilon - self.tol)


def _segpairs_edges_min_dist(P0, P1, A, B):
    """Min distance from each segment [P0[k],P1[k]] to the edge set, (K,)."""
    d1 = core.points_segs_dist(P0, A, B)
    d2 = core.points_segs_dist(P1, A, B)
    d3 = core.points_segs_dist(A, P0, P1)  # note: (E,K) against the K segments
    d4 = core.points_segs_dist(B, P0, P1)
    dmin = np.minimum(np.minimum(d1, d2), np.minimum(d3.T, d4.T)).min(axis=1)
    # zero out proper crossings
    r = P1 - P0                              # (K,2)
    s = B - A                                # (E,2)
    denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    w = A[None, :, :] - P0[:, None, :]       # (K,E,2)
    t_num = w[..., 0] * s[None, :, 1] - w[..., 1] * s[None, :, 0]
    u_num = w[..., 0] * r[:, None, 1] - w[..., 1] * r[:, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        u = u_num / denom
    crossing = (denom != 0) & (t > 0) & (t < 1) & (u > 0) & (u < 1)
    dmin = dmin.copy()
    dmin[np.any(crossing, axis=1)] = 0.0
    return dmin


# ---------------------------------------------------------------------------
# construction


def contract(env: Environment, epsilon: float, chord_dev: float | None = None) -> ContractedRegion:
    """Erode the workspace by ``epsilon``.

    Raises :class:`ContractionError` when the result is empty, splits into
    several components, or the offset arrangement degenerates (boundary
    tangent to itself within tolerance).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if chord_dev is None:
        # capped by epsilon so regions contracted on a geometric anneal
        # schedule nest: the chord of an arc pokes at most chord_dev into
        # the excluded disk, and 0.02*eps < eps - 0.97*eps
        chord_dev = min(1e-3 * env.diameter, 0.02 * epsilon)
    scale = max(env.diameter, 1.0)
    keep_tol = core.REL_TOL * scale
    snap = 1e-7 * scale

    pieces = _valid_offset_pieces(env, epsilon, keep_tol, min_len=1e-10 * scale)
    if not pieces:
        raise ContractionError(f"contraction is empty at epsilon={epsilon}")
    loop = _chain_single_loop(pieces, snap, scale)
    verts, kinds, ids, concavities = _sample_loop(loop, epsilon, chord_dev, scale)
    if core.polygon_area(verts) <= 0:
        raise ContractionError("contracted boundary is degenerate")
    verts.setflags(write=False)
    kinds.setflags(write=False)
    ids.setflags(write=False)
    straights = tuple((src, p0, p1) for kind, src, p0, p1, _ in loop if kind == "seg")
    return ContractedRegion(env=env, epsilon=epsilon, chord_dev=float(chord_dev),
                            approx=verts, tag_kind=kinds, tag_id=ids,
                            concavities=tuple(concavities), straight_pieces=straights)


class _Seg:
    __slots__ = ("edge_id", "p0", "p1", "events")

    def __init__(self, edge_id, p0, p1):
        self.edge_id = edge_id
        self.p0 = p0
        self.p1 = p1
        self.events = []          # (param in (0,1), point)

    def point_at(self, t):
        return self.p0 + t * (self.p1 - self.p0)


class _Arc:
    __slots__ = ("vid", "center", "radius", "a_start", "sweep", "p0", "p1", "events")

    def __init__(self, vid, center, radius, a_start, sweep, p0, p1):
        self.vid = vid
        self.center = center
        self.radius = radius
        self.a_start = a_start
        self.sweep = sweep        # signed; clockwise (negative) on an erosion
        self.p0 = p0
        self.p1 = p1
        self.events = []

    def param_of_angle(self, theta, pad=1e-9):
        if self.sweep < 0:
            d = -((self.a_start - theta) % (2 * math.pi))
        else:
            d = (theta - self.a_start) % (2 * math.pi)
        s = d / self.sweep
        if -pad <= s <= 1 + pad:
            return min(max(s, 0.0), 1.0)
        return None

    def point_at(self, s):
        th = self.a_start + s * self.sweep
        return self.center + self.radius * np.array([math.cos(th), math.sin(th)])


def _valid_offset_pieces(env, epsilon, keep_tol, min_len):
    V = env.vertices
    n = len(V)
    A, B = env.edges
    edge_vec = B - A
    edge_len = np.hypot(*edge_vec.T)
    normals = np.stack([-edge_vec[:, 1], edge_vec[:, 0]], axis=1) / edge_len[:, None]

    segs = [_Seg(k, A[k] + epsilon * normals[k], B[k] + epsilon * normals[k]) for k in range(n)]
    arcs = []
    for j in env.reflex_indices:
        n_in = normals[(j - 1) % n]
        n_out = normals[j]
        sweep = math.atan2(core.cross2(n_in, n_out), float(np.dot(n_in, n_out)))
        # reflex turn: the offset direction rotates clockwise through the gap
        if sweep >= 0:
            sweep -= 2 * math.pi
        arcs.append(_Arc(j, V[j], epsilon, math.atan2(n_in[1], n_in[0]), sweep,
                         V[j] + epsilon * n_in, V[j] + epsilon * n_out))

    _collect_events(segs, arcs)

    candidates = []
    mids = []
    for s in segs:
        params = sorted({0.0, 1.0} | {t for t, _ in s.events})
        coords = {0.0: s.p0, 1.0: s.p1}
        coords.update({t: p for t, p in s.events})
        for t0, t1 in zip(params[:-1], params[1:]):
            if (t1 - t0) * np.hypot(*(s.p1 - s.p0)) <= min_len:
                continue
            candidates.append(("seg", s.edge_id, coords[t0], coords[t1], None))
            mids.append(s.point_at((t0 + t1) / 2))
    for a in arcs:
        params = sorted({0.0, 1.0} | {t for t, _ in a.events})
        coords = {0.0: a.p0, 1.0: a.p1}
        coords.update({t: p for t, p in a.events})
        for t0, t1 in zip(params[:-1], params[1:]):
            if (t1 - t0) * abs(a.sweep) * a.radius <= min_len:
                continue
            sub = (a.vid, a.center, a.radius,
                   a.a_start + t0 * a.sweep, (t1 - t0) * a.sweep)
            candidates.append(("arc", a.vid, coords[t0], coords[t1], sub))
            mids.append(a.point_at((t0 + t1) / 2))
    if not candidates:
        return []
    M = np.array(mids)
    ok = (env.boundary_dist(M) >= epsilon - keep_tol) & core.points_in_polygon(env.vertices, M)
    return [c for c, good in zip(candidates, ok) if good]


def _collect_events(segs, arcs):
    npc = len(segs)
    seg_A = np.array([s.p0 for s in segs])
    seg_B = np.array([s.p1 for s in segs])
    for i, s in enumerate(segs):
        mask, t, u = core.seg_intersections(s.p0, s.p1, seg_A[i + 1:], seg_B[i + 1:])
        for off in np.nonzero(mask)[0]:
            j = i + 1 + off
            pt = s.point_at(float(t[off]))
            s.events.append((float(t[off]), pt))
            segs[j].events.append((float(u[off]), pt))
    for a in arcs:
        # against every segment
        d = seg_B - seg_A
        w = seg_A - a.center
        qa = np.einsum("ij,ij->i", d, d)
        qb = 2 * np.einsum("ij,ij->i", w, d)
        qc = np.einsum("ij,ij->i", w, w) - a.radius ** 2
        disc = qb * qb - 4 * qa * qc
        for k in np.nonzero(disc > 0)[0]:
            sq = math.sqrt(disc[k])
            for root in ((-qb[k] - sq) / (2 * qa[k]), (-qb[k] + sq) / (2 * qa[k])):
                if -1e-12 <= root <= 1 + 1e-12:
                    pt = seg_A[k] + root * d[k]
                    th = math.atan2(pt[1] - a.center[1], pt[0] - a.center[0])
                    sarc = a.param_of_angle(th)
                    if sarc is not None:
                        a.events.append((sarc, pt))
                        segs[k].events.append((min(max(root, 0.0), 1.0), pt))
    for i, a in enumerate(arcs):
        for b in arcs[i + 1:]:
            for pt in _circle_circle(a.center, a.radius, b.center, b.radius):
                tha = math.atan2(pt[1] - a.center[1], pt[0] - a.center[0])
                thb = math.atan2(pt[1] - b.center[1], pt[0] - b.center[0])
                sa = a.param_of_angle(tha)
                sb = b.param_of_angle(thb)
                if sa is not None and sb is not None:
                    a.events.append((sa, pt))
                    b.events.append((sb, pt))


def _circle_circle(c1, r1, c2, r2):
    d = float(np.hypot(*(c2 - c1)))
    if d == 0.0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h2 = r1 * r1 - a * a
    if h2 < 0:
        return []
    h = math.sqrt(h2)
    m = c1 + a * (c2 - c1) / d
    perp = np.array([-(c2 - c1)[1], (c2 - c1)[0]]) / d
    if h == 0.0:
        return [m]
    return [m + h * perp, m - h * perp]


def _chain_single_loop(pieces, snap, scale):
    """Order surviving pieces into one closed CCW loop."""
    ends = []
    for p in pieces:
        ends.append(p[2])
        ends.append(p[3])
    ends = np.array(ends)
    labels = _cluster_points(ends, snap)
    start_node = labels[0::2]
    end_node = labels[1::2]

    out_by_node: dict[int, list[int]] = {}
    for idx, node in enumerate(start_node):
        out_by_node.setdefault(int(node), []).append(idx)

    used = np.zeros(len(pieces), dtype=bool)
    loops = []
    for seed in range(len(pieces)):
        if used[seed]:
            continue
        loop = [seed]
        used[seed] = True
        node = int(end_node[seed])
        first = int(start_node[seed])
        while node != first:
            nxt = [i for i in out_by_node.get(node, []) if not used[i]]
            if len(nxt) != 1:
                raise ContractionError("offset boundary is tangent to itself or broken")
            loop.append(nxt[0])
            used[nxt[0]] = True
            node = int(end_node[nxt[0]])
        loops.append(loop)

    real = []
    for loop in loops:
        poly = np.array([pieces[i][2] for i in loop])
        if abs(core.polygon_area(poly)) > (1e-6 * scale) ** 2:
            real.append((loop, core.polygon_area(poly)))
    if len(real) == 0:
        raise ContractionError("contraction is empty")
    if len(real) > 1:
        raise ContractionError(f"contraction splits into {len(real)} components")
    loop, area = real[0]
    if area < 0:
        raise ContractionError("contracted boundary is inverted")
    return [pieces[i] for i in loop]


def _cluster_points(P, snap):
    """Greedy tolerance clustering; fine for the few hundred points involved."""
    labels = -np.ones(len(P), dtype=int)
    nxt = 0
    for i in range(len(P)):
        if labels[i] >= 0:
            continue
        d = np.hypot(*(P - P[i]).T)
        members = (d <= snap) & (labels < 0)
        labels[members] = nxt
        nxt += 1
    return labels


def _sample_loop(loop, epsilon, chord_dev, scale):
    verts: list[np.ndarray] = []
    kinds: list[int] = []
    ids: list[int] = []
    concavities: list[StrictConcavity] = []

    if chord_dev < epsilon:
        dtheta = 2 * math.acos(max(-1.0, 1.0 - chord_dev / epsilon))
    else:
        dtheta = 2 * math.pi / 3
    dtheta = max(dtheta, 1e-3)

    for kind, src, p0, p1, sub in loop:
        if kind == "seg":
            verts.append(p0)
            kinds.append(TAG_EDGE)
            ids.append(src)
        else:
            vid, center, radius, a_start, sweep = sub
            steps = max(1, math.ceil(abs(sweep) / dtheta))
            for k in range(steps):
                th = a_start + sweep * k / steps
                if k == 0:
                    verts.append(p0)
                else:
                    verts.append(center + radius * np.array([math.cos(th), math.sin(th)]))
                kinds.append(TAG_ARC)
                ids.append(vid)
            # emit the arc end too so the junction vertex carries the arc tag;
            # the next piece's duplicate start gets merged away below
            verts.append(p1)
            kinds.append(TAG_ARC)
            ids.append(vid)
            lo, hi = sorted((a_start, a_start + sweep))
            lo = _ang_diff(lo, 0.0)       # normalize start into (-pi, pi]
            concavities.append(StrictConcavity(vertex_index=vid, center=center.copy(),
                                               radius=radius, a0=lo, a1=lo + abs(sweep)))

    V = np.array(verts)
    # merge numerically duplicate consecutive vertices
    keep = np.hypot(*(V - np.roll(V, 1, axis=0)).T) > 1e-12 * scale
    if not np.all(keep):
        V = V[keep]
        kinds = [k for k, m in zip(kinds, keep) if m]
        ids = [i for i, m in zip(ids, keep) if m]
    return V, np.array(kinds, dtype=np.int8), np.array(ids, dtype=np.int32), concavities
