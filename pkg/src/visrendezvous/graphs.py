"""Proximity graphs over robot positions and their sparsifications.

Graphs are plain (n, edges) pairs: edges is an (E,2) int array with i < j per
row, rows sorted lexicographically.  All tie-breaking is by (length, i, j) so
every construction is deterministic and consistent between the spanning-tree
and clique views of the same point set.
"""

from __future__ import annotations

import numpy as np

from .geometry import core
from .geometry.contraction import ContractedRegion


def normalize_edges(edges) -> np.ndarray:
    E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    E = np.sort(E, axis=1)
    if len(E) == 0:
        return E
    E = np.unique(E, axis=0)
    return E[np.lexsort((E[:, 1], E[:, 0]))]


def all_pairs(n: int) -> np.ndarray:
    i, j = np.triu_indices(n, k=1)
    return np.stack([i, j], axis=1)


def edge_lengths(P: np.ndarray, edges: np.ndarray) -> np.ndarray:
    P = core.as_points(P)
    if len(edges) == 0:
        return np.zeros(0)
    d = P[edges[:, 0]] - P[edges[:, 1]]
    return np.hypot(d[:, 0], d[:, 1])


def adjacency(n: int, edges: np.ndarray) -> np.ndarray:
    M = np.zeros((n, n), dtype=bool)
    if len(edges):
        M[edges[:, 0], edges[:, 1]] = True
        M[edges[:, 1], edges[:, 0]] = True
    return M


# ---------------------------------------------------------------------------
# proximity graphs


def disk_graph(P, radius: float) -> np.ndarray:
    """Edges between points at distance <= radius (inclusive)."""
    P = core.as_points(P)
    pairs = all_pairs(len(P))
    keep = edge_lengths(P, pairs) <= radius
    return pairs[keep]


def visibility_graph(region: ContractedRegion, P) -> np.ndarray:
    """Edges between mutually robustly visible points."""
    P = core.as_points(P)
    pairs = all_pairs(len(P))
    return pairs[region.visible_pairs(P, pairs)]


def range_visibility_graph(region: ContractedRegion, P, radius: float) -> np.ndarray:
    """Robust visibility limited to the sensing radius."""
    P = core.as_points(P)
    pairs = all_pairs(len(P))
    near = edge_lengths(P, pairs) <= radius
    keep = near.copy()
    keep[near] = region.visible_pairs(P, pairs[near])
    return pairs[keep]


# ---------------------------------------------------------------------------
# components


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def component_labels(n: int, edges: np.ndarray) -> np.ndarray:
    """Component id per vertex; ids are the smallest member index."""
    uf = _UnionFind(n)
    for i, j in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        uf.union(int(i), int(j))
    return np.array([uf.find(v) for v in range(n)], dtype=np.int64)


def connected_components(n: int, edges: np.ndarray) -> list[np.ndarray]:
    labels = component_labels(n, edges)
    return [np.nonzero(labels == root)[0] for root in np.unique(labels)]


# ---------------------------------------------------------------------------
# spanning forests and the locally cliqueless reduction


def minimum_spanning_forest(P, edges=None) -> np.ndarray:
    """Kruskal forest over the given edges (complete graph when edges is None).

    Weights are Euclidean lengths with (length, i, j) tie order, which keeps
    forests of overlapping vertex subsets consistent with each other.
    """
    P = core.as_points(P)
    E = all_pairs(len(P)) if edges is None else normalize_edges(edges)
    if len(E) == 0:
        return E
    w = edge_lengths(P, E)
    order = np.lexsort((E[:, 1], E[:, 0], w))
    uf = _UnionFind(len(P))
    keep = [k for k in order if uf.union(int(E[k, 0]), int(E[k, 1]))]
    return normalize_edges(E[keep])


def _maximal_cliques(adj: np.ndarray, cand: list[int]) -> list[tuple[int, ...]]:
    """Maximal cliques of the subgraph induced on cand, ascending vertex order."""
    out: list[tuple[int, ...]] = []

    def bk(R: list[int], Pset: list[int], Xset: list[int]) -> None:
        if not Pset and not Xset:
            out.append(tuple(R))
            return
        for v in list(Pset):
            nbr = adj[v]
            bk(R + [v], [u for u in Pset if nbr[u]], [u for u in Xset if nbr[u]])
            Pset.remove(v)
            Xset.append(v)

    bk([], sorted(cand), [])
    return out


def cliques_containing_edge(adj: np.ndarray, i: int, j: int) -> list[tuple[int, ...]]:
    """Maximal cliques of the graph that contain edge (i, j), sorted members."""
    common = [v for v in range(adj.shape[0]) if v != i and v != j and adj[i, v] and adj[j, v]]
    if not common:
        return [tuple(sorted((i, j)))]
    sub = [tuple(sorted(c + (i, j))) for c in _maximal_cliques(adj, common)]
    return sorted(sub)


def locally_cliqueless(P, edges: np.ndarray) -> np.ndarray:
    """Keep an edge only if every maximal clique through it uses it in its own
    spanning forest."""
    P = core.as_points(P)
    E = normalize_edges(edges)
    adj = adjacency(len(P), E)
    keep = np.ones(len(E), dtype=bool)
    for k, (i, j) in enumerate(E):
        for clique in cliques_containing_edge(adj, int(i), int(j)):
            members = np.array(clique, dtype=np.int64)
            local = minimum_spanning_forest(P[members])
            tree = {(int(members[a]), int(members[b])) for a, b in local}
            if (int(i), int(j)) not in tree:
                keep[k] = False
                break
    return E[keep]
