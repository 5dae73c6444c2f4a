"""One synchronous round of the perimeter minimizing motion rule.

Every robot, from the same committed snapshot: intersect the pairwise link
constraints toward its constraint-graph neighbors with the geodesic hull of
its sensed cluster, then step toward the circumcenter of that convex set,
clamped to the maximum step size.  The commit is a single simultaneous swap.

The round preserves every constraint-graph edge in the next sensing graph,
never increases the number of sensing components, and never increases the
perimeter of the geodesic hull of the whole configuration.  Those three
facts are recomputed and recorded on every step, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graphs
from .constraints import link_constraint
from .geometry import core
from .geometry.contraction import ContractedRegion, contract
from .geometry.convex import (ConvexRegion, active_halfplanes, circumcenter,
                              clip_loop_tagged,
                              edge_halfplanes, intersect_convex,
                              region_from_points)
from .geometry.environment import validate_environment
from .geometry.geodesic import relative_convex_hull
from .geometry.visibility import visibility_region

CONSTRAINT_GRAPHS = ("sensing", "locally_cliqueless")


@dataclass(frozen=True)
class AlgoParams:
    """Per-run knobs shared by all robots."""

    comm_radius: float
    epsilon: float
    s_max: float
    constraint_graph: str = "sensing"
    disk_segments: int = 64

    def __post_init__(self):
        if self.comm_radius <= 0 or self.epsilon <= 0 or self.s_max <= 0:
            raise ValueError("comm_radius, epsilon and s_max must be positive")
        if self.constraint_graph not in CONSTRAINT_GRAPHS:
            raise ValueError(f"constraint_graph must be one of {CONSTRAINT_GRAPHS}")


@dataclass(frozen=True)
class StepReport:
    """Everything one committed round produced, diagnostics included."""

    positions: np.ndarray           # (n,2) committed positions after the round
    targets: np.ndarray             # (n,2) circumcenter of each motion set
    moves: np.ndarray               # (n,2) executed displacement, |move| <= s_max
    motion_sets: list               # ConvexRegion per robot
    sensing_edges: np.ndarray       # (E,2) before the round
    constraint_edges: np.ndarray    # (Ec,2) subset actually constrained
    perimeter_before: float
    perimeter_after: float
    components_before: int
    components_after: int
    edges_preserved: bool
    pinned: tuple = ()              # robots whose motion set was {p_i}
                                    # despite non-coincident neighbors


def check_configuration(P, region: ContractedRegion) -> np.ndarray:
    """Validate an (n,2) configuration: finite and inside the free space."""
    P = core.as_points(P)
    if P.ndim != 2 or P.shape[1] != 2 or len(P) == 0:
        raise ValueError("configuration must be a nonempty (n,2) array")
    if not np.isfinite(P).all():
        raise ValueError("configuration has non-finite coordinates")
    inside = region.contains(P)
    if not inside.all():
        bad = np.nonzero(~inside)[0]
        raise ValueError(f"robots outside the contracted free space: {bad.tolist()}")
    return P


def constraint_edges(P: np.ndarray, sensing: np.ndarray, params: AlgoParams) -> np.ndarray:
    if params.constraint_graph == "locally_cliqueless":
        return graphs.locally_cliqueless(P, sensing)
    return sensing


def _point_region(p: np.ndarray) -> ConvexRegion:
    V = np.array(p, dtype=float).reshape(1, 2)
    V.setflags(write=False)
    return ConvexRegion(vertices=V)


def _clip_hull(hull, C: ConvexRegion, p_i: np.ndarray, tol: float) -> ConvexRegion:
    """Intersect a geodesic hull with a convex set containing p_i.

    The true intersection is convex, so the hull of the clipped walk is it.
    Every surviving vertex lies in C, hence so does the returned region;
    p_i is appended to keep the robot inside its own motion set when the
    walk clips down to tolerance slivers.
    """
    W = hull.boundary
    for h in active_halfplanes(C, W, tol):
        W, _, _ = clip_loop_tagged(W, None, None, h, tol)
        if len(W) == 0:
            break
    pts = np.concatenate([W, p_i[None, :]]) if len(W) else p_i[None, :]
    return region_from_points(pts, tol)


def motion_set(i: int, P, params: AlgoParams, region: ContractedRegion,
               sensing: np.ndarray | None = None,
               constrained: np.ndarray | None = None,
               pair_sets: dict | None = None,
               star=None, hull_cache: dict | None = None) -> ConvexRegion:
    """Convex set of admissible next positions for robot ``i``.

    Intersection of the link constraints toward the constraint-graph
    neighbors with the geodesic hull of the sensed cluster.  An isolated
    robot gets the degenerate set {p_i} and therefore holds.  ``pair_sets``
    lets a round share one constraint set per unordered pair.
    """
    P = core.as_points(P)
    if sensing is None:
        sensing = graphs.range_visibility_graph(region, P, params.comm_radius)
    if constrained is None:
        constrained = constraint_edges(P, sensing, params)
    p_i = P[i]
    ns = sensing[(sensing == i).any(axis=1)]
    ns = np.unique(ns[ns != i])
    if len(ns) == 0:
        return _point_region(p_i)
    nc = constrained[(constrained == i).any(axis=1)]
    nc = np.unique(nc[nc != i])
    if len(nc) == 0:
        # cannot happen for a component-preserving constraint graph
        return _point_region(p_i)

    tol = region.tol
    C: ConvexRegion | None = None
    for j in nc:
        key = (min(i, int(j)), max(i, int(j)))
        if pair_sets is not None and key in pair_sets:
            L = pair_sets[key]
        else:
            L = link_constraint(region, P[key[0]], P[key[1]], params.comm_radius,
                                params.disk_segments, star=star).region
            if pair_sets is not None:
                pair_sets[key] = L
        C = L if C is None else intersect_convex(C, L, tol)
        if C.is_empty:
            return _point_region(p_i)
    if C.is_degenerate:
        # a segment-thin intersection pins the robot: clipping the walk by
        # edge planes of a segment would leak past its endpoints
        return _point_region(p_i)

    cluster = np.sort(np.append(ns, i))
    key = cluster.tobytes()
    hull = hull_cache.get(key) if hull_cache is not None else None
    if hull is None:
        hull = relative_convex_hull(P[cluster], region)
        if hull_cache is not None:
            hull_cache[key] = hull
    X = _clip_hull(hull, C, p_i, tol)
    if X.is_empty:
        return _point_region(p_i)
    return X


def step_target(i: int, P, params: AlgoParams, region: ContractedRegion,
                X: ConvexRegion | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenter target and clamped move for robot ``i``."""
    P = core.as_points(P)
    if X is None:
        X = motion_set(i, P, params, region)
    target = circumcenter(X)
    d = target - P[i]
    dist = float(np.hypot(*d))
    move = d if dist <= params.s_max else d * (params.s_max / dist)
    return target, move


def lyapunov(P, region: ContractedRegion) -> float:
    """Perimeter of the geodesic hull of the configuration.

    Zero iff all robots coincide; a degenerate hull counts its chain twice.
    """
    return relative_convex_hull(core.as_points(P), region).perimeter


@dataclass(frozen=True)
class RoundPlan:
    """One uncommitted simultaneous round: every target computed from the
    same snapshot, nothing moved yet.  Callers that modify moves before
    committing (speed scaling, noise, collision rules) start from here."""

    sensing: np.ndarray             # (E,2) sensing edges of the snapshot
    constrained: np.ndarray         # (Ec,2) edges that received constraints
    targets: np.ndarray             # (n,2) circumcenter of each motion set
    moves: np.ndarray               # (n,2) clamped displacement, 0 for non-actors
    motion_sets: list               # ConvexRegion per actor, None elsewhere
    pinned: tuple = ()


def plan_round(P, params: AlgoParams, region: ContractedRegion,
               sensing: np.ndarray | None = None,
               constrained: np.ndarray | None = None,
               actors=None) -> RoundPlan:
    """Plan one simultaneous round for ``actors`` (default: all robots).

    Shares one visibility region per robot and one constraint set per
    unordered pair, computed from the lower-index endpoint.  Non-actors
    keep their positions and get no motion set.
    """
    P = check_configuration(P, region)
    n = len(P)
    if sensing is None:
        sensing = graphs.range_visibility_graph(region, P, params.comm_radius)
    if constrained is None:
        constrained = constraint_edges(P, sensing, params)
    act = range(n) if actors is None else sorted(int(a) for a in actors)
    act_set = set(act)

    stars: dict[int, object] = {}

    def star_for(k: int):
        def build():
            if k not in stars:
                stars[k] = visibility_region(region, P[k])
            return stars[k]
        return build

    hulls: dict[bytes, object] = {}
    pair_sets: dict[tuple[int, int], ConvexRegion] = {}
    for a, b in constrained:
        key = (int(a), int(b))
        if key[0] in act_set or key[1] in act_set:
            pair_sets[key] = link_constraint(
                region, P[key[0]], P[key[1]], params.comm_radius,
                params.disk_segments, star=star_for(key[0])).region

    motion_sets: list = [None] * n
    targets = P.copy()
    moves = np.zeros((n, 2))
    holds = []
    for i in act:
        X = motion_set(i, P, params, region, sensing, constrained, pair_sets,
                       hull_cache=hulls)
        motion_sets[i] = X
        t, u = step_target(i, P, params, region, X)
        targets[i] = t
        moves[i] = u
        if len(X.vertices) == 1 and len(sensing):
            # constraints can legitimately pin a robot for a round, e.g. when
            # its feasible lens lies outside the cluster hull; recorded for
            # diagnostics, trivial coincident clusters excluded
            ns = sensing[(sensing == i).any(axis=1)]
            ns = ns[ns != i]
            if len(ns) and np.hypot(*(P[ns] - P[i]).T).max() > 10 * region.tol:
                holds.append(i)

    return RoundPlan(sensing=sensing, constrained=constrained, targets=targets,
                     moves=moves, motion_sets=motion_sets, pinned=tuple(holds))


def pma_step(P, params: AlgoParams, region: ContractedRegion,
             perimeter_before: float | None = None) -> StepReport:
    """Execute one simultaneous round for all robots.

    All per-robot targets are computed from the same snapshot; the commit
    is atomic.  Raises if any committed position leaves the free space,
    which would contradict the constraint construction.
    """
    P = check_configuration(P, region)
    n = len(P)
    if perimeter_before is None:
        perimeter_before = lyapunov(P, region)
    plan = plan_round(P, params, region)
    sensing, constrained = plan.sensing, plan.constrained
    comp_before = len(graphs.connected_components(n, sensing))
    motion_sets, targets, moves = plan.motion_sets, plan.targets, plan.moves
    holds = plan.pinned

    new_P = P + moves
    inside = region.contains(new_P)
    if not inside.all():
        bad = np.nonzero(~inside)[0]
        raise RuntimeError(f"step left the free space for robots {bad.tolist()}")

    sensing_after = graphs.range_visibility_graph(region, new_P, params.comm_radius)
    after = {(int(a), int(b)) for a, b in sensing_after}
    preserved = all((int(a), int(b)) in after for a, b in constrained)
    comp_after = len(graphs.connected_components(n, sensing_after))
    peri_after = lyapunov(new_P, region)

    new_P.setflags(write=False)
    return StepReport(positions=new_P, targets=targets, moves=moves,
                      motion_sets=motion_sets, sensing_edges=sensing,
                      constraint_edges=constrained,
                      perimeter_before=float(perimeter_before),
                      perimeter_after=float(peri_after),
                      components_before=comp_before,
                      components_after=comp_after,
                      edges_preserved=preserved,
                      pinned=tuple(holds))


def rigid_transform(theta: float, shift) -> tuple[np.ndarray, np.ndarray]:
    """Rotation matrix and offset for a planar rigid motion."""
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    return R, np.asarray(shift, dtype=float)


def frame_transform_check(P, params: AlgoParams, region: ContractedRegion,
                          rotation: float, translation,
                          rel_tol: float = 1e-6) -> bool:
    """Does stepping commute with a rigid motion of the whole scene?

    The motion rule uses no global frame, so transforming environment and
    robots by the same rotation and translation must transform the committed
    round. Compared per robot against rel_tol times the workspace diameter.
    """
    R, t = rigid_transform(rotation, translation)
    env2 = validate_environment(region.env.vertices @ R.T + t)
    region2 = contract(env2, region.epsilon, region.chord_dev)
    P = core.as_points(P)
    rep1 = pma_step(P, params, region)
    rep2 = pma_step(P @ R.T + t, params, region2)
    err = np.hypot(*(rep2.positions - (rep1.positions @ R.T + t)).T).max()
    return bool(err <= rel_tol * region.diameter)
