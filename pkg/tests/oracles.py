"""Independent reference implementations used only to check the package.

Everything here favors obviousness over speed: shapely for polygon set
operations, scipy for spanning trees, brute-force enumeration for graphs,
and a dense Dijkstra over the point-to-vertex visibility graph for shortest
paths around corners.  Nothing in src/ imports this module.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import unary_union


# ---------------------------------------------------------------------------
# polygon membership / clearance


def shapely_polygon(vertices) -> Polygon:
    return Polygon(np.asarray(vertices, dtype=float))


def inside(poly: Polygon, p, tol: float = 0.0) -> bool:
    return poly.distance(Point(*p)) <= tol if not poly.contains(Point(*p)) else True


def eroded(poly: Polygon, eps: float):
    """The clearance-eps free space as a shapely geometry (may be empty or
    split into pieces)."""
    return poly.buffer(-eps, quad_segs=256)


def boundary_clearance(poly: Polygon, p) -> float:
    return poly.exterior.distance(Point(*p))


def segment_inside(poly: Polygon, a, b, slack: float = 1e-9) -> bool:
    return poly.buffer(slack).contains(LineString([tuple(a), tuple(b)]))


def mutually_visible(poly: Polygon, eps: float, a, b, slack: float = 1e-9) -> bool:
    """Segment visibility inside the eroded region, the slow obvious way."""
    region = eroded(poly, eps)
    seg = LineString([tuple(a), tuple(b)])
    return region.buffer(slack).contains(seg)


# ---------------------------------------------------------------------------
# graphs


def union_find_components(n: int, edges) -> list:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in np.asarray(edges, dtype=int).reshape(-1, 2):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[ra] = rb
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(sorted(g) for g in groups.values())


def scipy_emst_edges(P: np.ndarray) -> set:
    """Euclidean minimum spanning forest edge set via scipy."""
    from scipy.sparse.csgraph import minimum_spanning_tree
    P = np.asarray(P, dtype=float)
    n = len(P)
    d = np.hypot(*(P[:, None] - P[None, :]).transpose(2, 0, 1))
    tree = minimum_spanning_tree(d).tocoo()
    return {(min(int(a), int(b)), max(int(a), int(b)))
            for a, b in zip(tree.row, tree.col)}


def graph_emst_edges(P: np.ndarray, edges) -> set:
    """Minimum spanning forest restricted to the given edge set (Kruskal)."""
    P = np.asarray(P, dtype=float)
    E = sorted(((float(np.hypot(*(P[a] - P[b]))), int(a), int(b))
                for a, b in np.asarray(edges, dtype=int).reshape(-1, 2)))
    parent = list(range(len(P)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    out = set()
    for w, a, b in E:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            out.add((min(a, b), max(a, b)))
    return out


def maximal_cliques(n: int, edges) -> list:
    """All maximal cliques by subset enumeration (fine for n <= 12)."""
    adj = [set() for _ in range(n)]
    for a, b in np.asarray(edges, dtype=int).reshape(-1, 2):
        adj[int(a)].add(int(b))
        adj[int(b)].add(int(a))
    cliques = []
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            if all(b in adj[a] for a, b in itertools.combinations(sub, 2)):
                cliques.append(set(sub))
    return [c for c in cliques
            if not any(c < other for other in cliques)]


def brute_locally_cliqueless(P: np.ndarray, edges) -> set:
    """Keep edge (i,j) unless, in EVERY maximal clique containing both ends,
    (i,j) fails to be a minimum-spanning-forest edge of that clique."""
    P = np.asarray(P, dtype=float)
    n = len(P)
    E = {(min(int(a), int(b)), max(int(a), int(b)))
         for a, b in np.asarray(edges, dtype=int).reshape(-1, 2)}
    cliques = [c for c in maximal_cliques(n, list(E)) if len(c) >= 2]
    keep = set()
    for a, b in E:
        for c in cliques:
            if a in c and b in c:
                idx = sorted(c)
                sub = P[idx]
                sub_edges = [(idx.index(x), idx.index(y)) for x, y in E
                             if x in c and y in c]
                mst = graph_emst_edges(sub, sub_edges)
                ia, ib = idx.index(a), idx.index(b)
                if (min(ia, ib), max(ia, ib)) in mst:
                    keep.add((a, b))
                    break
    return keep


# ---------------------------------------------------------------------------
# shortest paths around corners


def geodesic_distance(poly: Polygon, a, b, slack: float = 1e-9) -> float:
    """Dijkstra over the visibility graph of {a, b} and the polygon vertices."""
    verts = [tuple(a), tuple(b)] + list(poly.exterior.coords[:-1])
    n = len(verts)
    fat = poly.buffer(slack)
    dist = np.full((n, n), np.inf)
    for i in range(n):
        dist[i, i] = 0.0
        for j in range(i + 1, n):
            seg = LineString([verts[i], verts[j]])
            if fat.contains(seg):
                dist[i, j] = dist[j, i] = math.dist(verts[i], verts[j])
    from scipy.sparse.csgraph import dijkstra
    d = dijkstra(np.where(np.isfinite(dist), dist, 0.0), directed=False,
                 indices=0, unweighted=False)
    return float(d[1])


def min_enclosing_circle_brute(P: np.ndarray):
    """Smallest circle over all 2- and 3-point candidate circles."""
    P = np.asarray(P, dtype=float)
    n = len(P)
    best = None
    slack = 1e-9

    def covers(c, r):
        return all(math.dist(c, p) <= r + slack for p in P)

    for i in range(n):
        for j in range(i, n):
            c = (P[i] + P[j]) / 2
            r = math.dist(P[i], P[j]) / 2
            if covers(c, r) and (best is None or r < best[1]):
                best = (tuple(c), r)
    for i, j, k in itertools.combinations(range(n), 3):
        ax, ay = P[i]
        bx, by = P[j]
        cx, cy = P[k]
        d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if abs(d) < 1e-14:
            continue
        ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay)
              + (cx**2 + cy**2) * (ay - by)) / d
        uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx)
              + (cx**2 + cy**2) * (bx - ax)) / d
        r = math.dist((ux, uy), P[i])
        if covers((ux, uy), r) and (best is None or r < best[1]):
            best = ((ux, uy), r)
    return best


# ---------------------------------------------------------------------------
# random geometry


def random_simple_polygon(rng, n_target: int = 10, spikiness: float = 0.45):
    """Random star-shaped polygon around the origin (always simple)."""
    n = int(rng.integers(max(4, n_target - 3), n_target + 4))
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    if np.min(np.diff(angles, append=angles[0] + 2 * np.pi)) < 1e-3:
        angles = np.linspace(0, 2 * np.pi, n, endpoint=False)
    radii = rng.uniform(1 - spikiness, 1 + spikiness, n) * 10.0
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


def sample_inside(rng, geom, k: int, lo, hi):
    """Rejection-sample k points inside a shapely geometry."""
    pts = []
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    while len(pts) < k:
        cand = lo + (hi - lo) * rng.random((4 * k, 2))
        for p in cand:
            if geom.contains(Point(*p)):
                pts.append(p)
                if len(pts) == k:
                    break
    return np.array(pts)


def hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two convex polygons' boundaries."""
    pa = Polygon(np.asarray(A, dtype=float))
    pb = Polygon(np.asarray(B, dtype=float))
    return float(shapely.hausdorff_distance(pa, pb, densify=0.02))


def walk_perimeter(points: np.ndarray, order) -> float:
    pts = np.asarray(points, dtype=float)[list(order)]
    return float(sum(math.dist(pts[i], pts[(i + 1) % len(pts)])
                     for i in range(len(pts))))
