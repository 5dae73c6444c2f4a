"""Experiment engine around the perimeter-minimizing motion law.

Runs a robot team inside a polygonal workspace under a geometric annealing
schedule for the clearance parameter, in synchronous rounds or asynchronously
on per-robot clocks, optionally with multiplicative range noise and additive
bearing noise on sensing and actuation, and optionally with finite-size disk
robots that swerve around or yield to colliding neighbors.  Every run is a
pure function of its configuration and seed: randomness comes from four named
streams (placement, clocks, sensing, actuation) so that switching one source
on or off never shifts the draws of another.

The engine records a trace (one frame per time instant), a per-robot step
count, the Lyapunov perimeter curve, and any invariant violations; violations
either abort the run or are logged, per configuration.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import graphs
from .constraints import link_constraint
from .geometry import core
from .geometry.contraction import ContractedRegion, ContractionError, contract
from .geometry.environment import (Environment, InvalidEnvironment,
                                   builtin_environment, load_environment,
                                   validate_environment)
from .geometry.geodesic import relative_convex_hull
from .geometry.visibility import visibility_region
from .rendezvous import (AlgoParams, constraint_edges, motion_set, plan_round,
                         step_target)

BUILTIN_ENVIRONMENTS = ("square", "lshape", "floorplan", "pinwheel")

# the clearance parameter is never annealed below this, whatever the schedule
# says: a zero-clearance contraction is the workspace itself and the geometry
# kernel wants a positive erosion radius
EPSILON_MIN = 1e-6

METRICS_HEADER = ("run_id,seed,mode,mean_steps,edges_preserved,"
                  "components_initial,components_final,cohesive_groups")


# ---------------------------------------------------------------------------
# configuration


class ConfigError(ValueError):
    """A configuration document failed validation at ``path``."""

    def __init__(self, path: str, message: str):
        self.path = path or "<config>"
        self.message = message
        super().__init__(f"{self.path}: {message}")


@dataclass(frozen=True)
class EpsilonSchedule:
    initial: float = 3.0
    decay: float = 0.97
    floor: float = 0.0


@dataclass(frozen=True)
class NoiseModel:
    dist_rel: float = 0.0           # range error is uniform in +-dist_rel, relative
    dir_deg: float = 0.0            # bearing error is uniform in +-dir_deg degrees

    @property
    def enabled(self) -> bool:
        return self.dist_rel > 0.0 or self.dir_deg > 0.0


@dataclass(frozen=True)
class RobotModel:
    kind: str = "point"             # "point" or "disk"
    radius: float = 0.2


@dataclass(frozen=True)
class ReflexSlowdown:
    dist_threshold: float = 2.0     # in multiples of the current clearance
    factor: float = 0.5


@dataclass(frozen=True)
class Termination:
    diameter_tol: float = 0.05
    max_steps: int = 5000


@dataclass(frozen=True)
class SimConfig:
    environment: str                # builtin name or path to an environment file
    n: int
    seed: int
    r: float = 30.0
    s_max: float = 0.5
    initial_positions: object = "random"   # "random" or ((x,y), ...)
    require_connected: bool = False
    epsilon_schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    mode: str = "sync"
    noise: NoiseModel = field(default_factory=NoiseModel)
    robot_model: RobotModel = field(default_factory=RobotModel)
    reflex_slowdown: ReflexSlowdown = field(default_factory=ReflexSlowdown)
    termination: Termination = field(default_factory=Termination)
    constraint_graph: str = "sensing"
    invariant_mode: str = "log"     # "log" or "abort"


def resolve_environment(name_or_path: str) -> Environment:
    """A builtin workspace name, or a path to an environment JSON file."""
    if name_or_path in BUILTIN_ENVIRONMENTS:
        return builtin_environment(name_or_path)
    return load_environment(name_or_path)


def _req(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return data[key]


def _num(value, path: str, *, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(path, f"must be {'<' if hi_open else '<='} {hi}")
    return v


def _int(value, path: str, *, lo=None, hi=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}")
    if hi is not None and value > hi:
        raise ConfigError(path, f"must be <= {hi}")
    return value


def _choice(value, path: str, options) -> str:
    if value not in options:
        raise ConfigError(path, f"must be one of {sorted(options)}, got {value!r}")
    return value


def _subdict(data: dict, key: str, path: str) -> dict:
    sub = data.get(key, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"{path}{key}", "expected an object")
    return dict(sub)


def _reject_unknown(sub: dict, known, path: str) -> None:
    for k in sub:
        if k not in known:
            raise ConfigError(f"{path}{k}", "unknown key")


def config_from_dict(data: dict, base_dir=None) -> SimConfig:
    """Validate a configuration document; errors name the offending key path."""
    if not isinstance(data, dict):
        raise ConfigError("", "configuration must be a JSON object")
    known = {"environment", "n", "seed", "r", "s_max", "initial_positions",
             "require_connected", "epsilon_schedule", "mode", "noise",
             "robot_model", "reflex_slowdown", "termination",
             "constraint_graph", "invariant_mode"}
    _reject_unknown(data, known, "")

    env_spec = _req(data, "environment", "")
    if not isinstance(env_spec, str) or not env_spec:
        raise ConfigError("environment", "expected a builtin name or a file path")
    if env_spec not in BUILTIN_ENVIRONMENTS:
        import os
        if base_dir is not None and not os.path.isabs(env_spec):
            env_spec = os.path.join(str(base_dir), env_spec)
        if not os.path.exists(env_spec):
            raise ConfigError("environment", f"no such file: {env_spec} "
                              f"(builtins: {', '.join(BUILTIN_ENVIRONMENTS)})")

    n = _int(_req(data, "n", ""), "n", lo=1)
    seed = _int(_req(data, "seed", ""), "seed", lo=0, hi=2**64 - 1)
    r = _num(data.get("r", 30.0), "r", lo=0, lo_open=True)
    s_max = _num(data.get("s_max", 0.5), "s_max", lo=0, lo_open=True)

    init = data.get("initial_positions", "random")
    if init != "random":
        if not isinstance(init, (list, tuple)):
            raise ConfigError("initial_positions", 'expected "random" or a list of [x, y] pairs')
        if len(init) != n:
            raise ConfigError("initial_positions", f"expected {n} positions, got {len(init)}")
        rows = []
        for k, row in enumerate(init):
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                raise ConfigError(f"initial_positions[{k}]", "expected an [x, y] pair")
            rows.append((_num(row[0], f"initial_positions[{k}][0]"),
                         _num(row[1], f"initial_positions[{k}][1]")))
        init = tuple(rows)

    require_connected = data.get("require_connected", False)
    if not isinstance(require_connected, bool):
        raise ConfigError("require_connected", "expected true or false")

    sub = _subdict(data, "epsilon_schedule", "")
    _reject_unknown(sub, {"initial", "decay", "floor"}, "epsilon_schedule.")
    schedule = EpsilonSchedule(
        initial=_num(sub.get("initial", 3.0), "epsilon_schedule.initial", lo=0, lo_open=True),
        decay=_num(sub.get("decay", 0.97), "epsilon_schedule.decay", lo=0, lo_open=True, hi=1),
        floor=_num(sub.get("floor", 0.0), "epsilon_schedule.floor", lo=0))

    mode = _choice(data.get("mode", "sync"), "mode", ("sync", "async"))

    sub = _subdict(data, "noise", "")
    _reject_unknown(sub, {"dist_rel", "dir_deg"}, "noise.")
    noise = NoiseModel(
        dist_rel=_num(sub.get("dist_rel", 0.0), "noise.dist_rel", lo=0, hi=1, hi_open=True),
        dir_deg=_num(sub.get("dir_deg", 0.0), "noise.dir_deg", lo=0, hi=180))

    sub = _subdict(data, "robot_model", "")
    _reject_unknown(sub, {"kind", "radius"}, "robot_model.")
    kind = _choice(sub.get("kind", "point"), "robot_model.kind", ("point", "disk"))
    model = RobotModel(kind=kind,
                       radius=_num(sub.get("radius", 0.2), "robot_model.radius",
                                   lo=0, lo_open=True))

    sub = _subdict(data, "reflex_slowdown", "")
    _reject_unknown(sub, {"dist_threshold", "factor"}, "reflex_slowdown.")
    slowdown = ReflexSlowdown(
        dist_threshold=_num(sub.get("dist_threshold", 2.0), "reflex_slowdown.dist_threshold", lo=0),
        factor=_num(sub.get("factor", 0.5), "reflex_slowdown.factor", lo=0, hi=1))

    sub = _subdict(data, "termination", "")
    _reject_unknown(sub, {"diameter_tol", "max_steps"}, "termination.")
    termination = Termination(
        diameter_tol=_num(sub.get("diameter_tol", 0.05), "termination.diameter_tol",
                          lo=0, lo_open=True),
        max_steps=_int(sub.get("max_steps", 5000), "termination.max_steps", lo=0))

    cgraph = _choice(data.get("constraint_graph", "sensing"), "constraint_graph",
                     ("sensing", "locally_cliqueless"))
    if cgraph == "locally_cliqueless" and noise.enabled:
        raise ConfigError("constraint_graph",
                          "locally_cliqueless needs consistent shared positions and "
                          "is not supported together with sensing noise")
    inv_mode = _choice(data.get("invariant_mode", "log"), "invariant_mode",
                       ("log", "abort"))

    return SimConfig(environment=env_spec, n=n, seed=seed, r=r, s_max=s_max,
                     initial_positions=init, require_connected=require_connected,
                     epsilon_schedule=schedule, mode=mode, noise=noise,
                     robot_model=model, reflex_slowdown=slowdown,
                     termination=termination, constraint_graph=cgraph,
                     invariant_mode=inv_mode)


def load_config(path) -> SimConfig:
    import os
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON in {path}: {e}") from None
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# named random streams

_STREAM_TAGS = {"placement": 0, "clocks": 1, "sensing": 2, "actuation": 3}


def named_streams(seed: int, ic: int = 0, rep: int = 0) -> dict:
    """Independent generators per purpose.

    The placement stream depends on the initial-condition index only, so a
    batch reuses the same starting configuration across repeats; the dynamics
    streams additionally depend on the repeat index.
    """
    out = {}
    for name, tag in _STREAM_TAGS.items():
        key = (tag, ic) if name == "placement" else (tag, ic, rep)
        out[name] = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
    return out


# ---------------------------------------------------------------------------
# run products


@dataclass(frozen=True)
class TraceFrame:
    time: float
    positions: np.ndarray           # (n,2)
    edges: np.ndarray               # (E,2) sensing edges at this instant
    epsilon: float


@dataclass(frozen=True)
class Metrics:
    steps_per_robot: tuple
    mean_steps: float
    edges_preserved_fraction: float
    components_initial: int
    components_final: int
    v_perim_trace: tuple
    cohesive_groups_final: int | None = None


@dataclass(frozen=True)
class RunResult:
    config: SimConfig
    status: str                     # "converged", "max_steps", or "aborted"
    metrics: Metrics
    frames: list
    violations: tuple               # invariant regressions (can abort the run)
    events: tuple                   # operational holds: failed perceptions, blocked swerves
    positions: np.ndarray           # final configuration


class SimulationError(RuntimeError):
    """The run could not be set up or continued (not a config syntax error)."""


# ---------------------------------------------------------------------------
# placement


def random_placement(region: ContractedRegion, n: int, comm_radius: float,
                     rng, require_connected: bool, max_tries: int = 500) -> np.ndarray:
    """Rejection-sample n points uniformly over the free space.

    With ``require_connected``, whole configurations are redrawn until the
    sensing graph is connected.
    """
    env = region.env
    lo = env.vertices.min(axis=0)
    span = env.vertices.max(axis=0) - lo
    for _ in range(max_tries):
        pts: list[np.ndarray] = []
        guard = 0
        while len(pts) < n:
            cand = lo + span * rng.random((4 * n, 2))
            good = cand[region.contains(cand)]
            pts.extend(good[:n - len(pts)])
            guard += 1
            if guard > 200:
                raise SimulationError("free space too small to place robots")
        P = np.array(pts)
        if not require_connected:
            return P
        edges = graphs.range_visibility_graph(region, P, comm_radius)
        if len(graphs.connected_components(n, edges)) == 1:
            return P
    raise SimulationError(
        f"no connected initial configuration found in {max_tries} attempts")


# ---------------------------------------------------------------------------
# geometry helpers


def project_inside(region: ContractedRegion, q, anchor=None) -> np.ndarray:
    """Nearest interior point of the free space to ``q``.

    Candidates are the projections onto the exact boundary pieces (straight
    segments and clearance arcs), nudged a few tolerances inward; if all fail
    the exact membership test, fall back to the last interior point on the
    segment from ``anchor``.
    """
    q = core.as_point(q)
    if region.contains_point(q):
        return q
    tol = region.tol
    cand: list[np.ndarray] = []
    for _, p0, p1 in region.straight_pieces:
        e = p1 - p0
        L2 = float(e @ e)
        if L2 <= 0.0:
            continue
        t = min(1.0, max(0.0, float((q - p0) @ e) / L2))
        foot = p0 + t * e
        # boundary runs counterclockwise, interior on its left
        nrm = np.array([-e[1], e[0]]) / math.sqrt(L2)
        cand.append(foot + 3.0 * tol * nrm)
    for c in region.concavities:
        v = q - c.center
        rr = float(np.hypot(*v))
        th = math.atan2(v[1], v[0]) if rr > 0 else c.a0
        pt = c.point_at(c.clamp_angle(th))
        cand.append(pt + 3.0 * tol * (pt - c.center) / c.radius)
    if cand:
        C = np.array(cand)
        ok = region.contains(C)
        if ok.any():
            C = C[ok]
            d = np.hypot(*(C - q).T)
            return C[int(np.argmin(d))]
    if anchor is not None:
        a = core.as_point(anchor)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if region.contains_point(a + mid * (q - a)):
                lo = mid
            else:
                hi = mid
        return a + lo * (q - a)
    raise SimulationError("no interior point found near the requested position")


def _rotate(u: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])


def _range_bearing_noise(origin: np.ndarray, Q: np.ndarray, err: np.ndarray,
                         dist_rel: float, dir_rad: float) -> np.ndarray:
    """Re-measure points from ``origin`` with noisy range and bearing."""
    d = Q - origin
    rng_ = np.hypot(d[:, 0], d[:, 1])
    ang = np.arctan2(d[:, 1], d[:, 0]) + dir_rad * err[:, 1]
    rng2 = rng_ * (1.0 + dist_rel * err[:, 0])
    return origin + np.stack([rng2 * np.cos(ang), rng2 * np.sin(ang)], axis=1)


@dataclass(frozen=True)
class Perception:
    """What one robot believes the world looks like for one wake."""

    region: ContractedRegion | None
    environment: Environment | None
    positions: np.ndarray | None    # (n,2); entries for self and sensed robots
    failure: str | None = None


def apply_sensing_noise(rng, env: Environment, epsilon: float, p_i: np.ndarray,
                        neighbor_idx: np.ndarray, P: np.ndarray,
                        noise: NoiseModel) -> Perception:
    """One perception: noisy range/bearing per sensed robot, then per workspace
    vertex (ascending index), the boundary rebuilt from the measured vertices.

    Failures (perceived boundary invalid, empty contraction, own position
    outside the perceived free space) are reported, not raised.
    """
    m = len(neighbor_idx)
    err = rng.uniform(-1.0, 1.0, size=(m + env.n, 2))
    dir_rad = math.radians(noise.dir_deg)
    pos = np.array(P, dtype=float)
    if m:
        pos[neighbor_idx] = _range_bearing_noise(p_i, P[neighbor_idx], err[:m],
                                                 noise.dist_rel, dir_rad)
    verts = _range_bearing_noise(p_i, env.vertices, err[m:], noise.dist_rel, dir_rad)
    try:
        env_i = validate_environment(verts)
    except InvalidEnvironment as e:
        return Perception(None, None, None, failure=f"perceived boundary invalid ({e})")
    try:
        region_i = contract(env_i, epsilon)
    except ContractionError as e:
        return Perception(None, None, None, failure=f"perceived free space empty ({e})")
    if not region_i.contains_point(p_i):
        return Perception(None, None, None,
                          failure="own position outside perceived free space")
    if m:
        inside = region_i.contains(pos[neighbor_idx])
        for j in neighbor_idx[~inside]:
            pos[j] = project_inside(region_i, pos[j], anchor=p_i)
    return Perception(region_i, env_i, pos)


def apply_actuation_noise(rng, u: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Scale the commanded displacement's magnitude and shift its direction."""
    err = rng.uniform(-1.0, 1.0, size=2)
    if u[0] == 0.0 and u[1] == 0.0:
        return u
    return _rotate(u, math.radians(noise.dir_deg) * err[1]) * (1.0 + noise.dist_rel * err[0])


# ---------------------------------------------------------------------------
# disk-robot rules


def _point_to_segment(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(core.points_segs_dist(q[None, :], a[None, :], b[None, :])[0, 0])


def _path_collides(p: np.ndarray, tip: np.ndarray, q: np.ndarray,
                   radius: float, s_max: float) -> bool:
    """Does the move from p to tip bring the robot's body into the motion disc
    of the neighbor at q more than standing still already does?

    Counting the start point would freeze any pair closer than the threshold
    in every direction, including directly apart, so only a strict incursion
    along the path counts.
    """
    d_min = _point_to_segment(q, p, tip)
    return d_min <= (radius + s_max) + radius and \
        d_min < float(np.hypot(*(q - p))) - 1e-12


def colliding_neighbors(i: int, P: np.ndarray, move: np.ndarray,
                        neighbor_idx, radius: float, s_max: float) -> list[int]:
    """Sensing neighbors whose motion disc overlaps robot i's motion disc and
    whose motion disc the intended path newly encroaches on."""
    motion_r = radius + s_max
    p = P[i]
    tip = p + move
    return [j for j in sorted(int(j) for j in neighbor_idx)
            if float(np.hypot(*(P[j] - p))) <= 2.0 * motion_r
            and _path_collides(p, tip, P[j], radius, s_max)]


def swerve_move(i: int, P: np.ndarray, u: np.ndarray, neighbor_idx,
                radius: float, s_max: float,
                region: ContractedRegion) -> np.ndarray | None:
    """Smallest rotation (up to 90 degrees, 5-degree increments, alternating
    sides) of the half-speed step whose collision set is empty and that stays
    inside the free space.

    The whole neighborhood is re-checked, not just the neighbor that triggered
    the swerve: a rotation that dodges one robot must not plow into another.
    """
    base = 0.5 * u
    angles = [0.0]
    for k in range(1, 19):
        angles.extend([math.radians(5 * k), -math.radians(5 * k)])
    for th in angles:
        cand = _rotate(base, th)
        if region.contains_point(P[i] + cand) and \
                not colliding_neighbors(i, P, cand, neighbor_idx, radius, s_max):
            return cand
    return None


def cohesive_groups(P: np.ndarray, edges: np.ndarray, motion_radius: float) -> int:
    """Per sensing component, the number of connected pieces of the
    motion-disc intersection graph, summed over components."""
    P = core.as_points(P)
    total = 0
    for comp in graphs.connected_components(len(P), edges):
        sub = P[comp]
        k = len(comp)
        pairs = [(a, b) for a in range(k) for b in range(a + 1, k)
                 if float(np.hypot(*(sub[a] - sub[b]))) <= 2.0 * motion_radius]
        total += len(graphs.connected_components(k, np.array(pairs, dtype=np.int64).reshape(-1, 2)))
    return total


# ---------------------------------------------------------------------------
# the engine


def _pairwise_diameter(Q: np.ndarray) -> float:
    if len(Q) < 2:
        return 0.0
    d = Q[:, None, :] - Q[None, :, :]
    return float(np.hypot(d[..., 0], d[..., 1]).max())


def _edge_set(edges: np.ndarray) -> set:
    return {(int(a), int(b)) for a, b in np.asarray(edges, dtype=np.int64).reshape(-1, 2)}


class _Run:
    """State for one seeded run; drives both execution modes."""

    def __init__(self, config: SimConfig, streams: dict | None = None):
        self.cfg = config
        self.env = resolve_environment(config.environment)
        self.streams = streams if streams is not None else named_streams(config.seed)
        self._regions: dict[float, ContractedRegion] = {}
        self.frames: list[TraceFrame] = []
        self.v_trace: list[float] = []
        self.violations: list[str] = []
        self.events: list[str] = []
        self.steps = np.zeros(config.n, dtype=np.int64)
        floor = max(config.epsilon_schedule.floor, EPSILON_MIN)
        if config.robot_model.kind == "disk":
            # free movement of a finite body needs clearance at least its radius
            floor = max(floor, config.robot_model.radius)
        self._floor = floor
        self._reflex_true = self.env.vertices[list(self.env.reflex_indices)] \
            if self.env.reflex_indices else np.zeros((0, 2))

    # -- schedule and caches ------------------------------------------------

    def epsilon_at(self, k: int) -> float:
        sched = self.cfg.epsilon_schedule
        return max(self._floor, sched.initial * sched.decay ** k)

    def region_at(self, eps: float) -> ContractedRegion:
        reg = self._regions.get(eps)
        if reg is None:
            try:
                reg = contract(self.env, eps)
            except ContractionError as e:
                raise SimulationError(
                    f"free space empty at clearance {eps:g}: {e}") from None
            self._regions[eps] = reg
        return reg

    def params_at(self, eps: float) -> AlgoParams:
        return AlgoParams(comm_radius=self.cfg.r, epsilon=eps,
                          s_max=self.cfg.s_max,
                          constraint_graph=self.cfg.constraint_graph)

    # -- setup --------------------------------------------------------------

    def initial_positions(self) -> np.ndarray:
        cfg = self.cfg
        region = self.region_at(self.epsilon_at(0))
        if cfg.initial_positions == "random":
            return random_placement(region, cfg.n, cfg.r, self.streams["placement"],
                                    cfg.require_connected)
        P = np.array(cfg.initial_positions, dtype=float)
        inside = region.contains(P)
        if not inside.all():
            bad = np.nonzero(~inside)[0].tolist()
            raise ConfigError("initial_positions",
                              f"positions outside the initial free space: {bad}")
        if cfg.require_connected:
            edges = graphs.range_visibility_graph(region, P, cfg.r)
            if len(graphs.connected_components(cfg.n, edges)) != 1:
                raise ConfigError("initial_positions",
                                  "sensing graph of the given positions is not connected")
        return P

    # -- per-instant evaluation --------------------------------------------

    def _components(self, P: np.ndarray, edges: np.ndarray) -> list[np.ndarray]:
        return graphs.connected_components(len(P), edges)

    def _terminal(self, P: np.ndarray, comp: np.ndarray) -> bool:
        if self.cfg.robot_model.kind == "disk":
            sub = P[comp]
            k = len(comp)
            motion_r = self.cfg.robot_model.radius + self.cfg.s_max
            pairs = [(a, b) for a in range(k) for b in range(a + 1, k)
                     if float(np.hypot(*(sub[a] - sub[b]))) <= 2.0 * motion_r]
            return len(graphs.connected_components(
                k, np.array(pairs, dtype=np.int64).reshape(-1, 2))) == 1
        return _pairwise_diameter(P[comp]) < self.cfg.termination.diameter_tol

    def _lyapunov_sum(self, P: np.ndarray, comps, region: ContractedRegion) -> float:
        total = 0.0
        for comp in comps:
            if len(comp) >= 2:
                total += relative_convex_hull(P[comp], region).perimeter
        return total

    def _record_instant(self, time: float, P: np.ndarray, edges: np.ndarray,
                        eps_frame: float, V: float) -> None:
        Pc = P.copy()
        Pc.setflags(write=False)
        self.frames.append(TraceFrame(time=float(time), positions=Pc,
                                      edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
                                      epsilon=float(eps_frame)))
        self.v_trace.append(float(V))

    def _check_invariants(self, label: str, prev, edges_now: np.ndarray,
                          ncomp_now: int, V_now: float) -> None:
        """Compare one instant against the previous one; log what regressed."""
        if prev is None:
            return
        prev_edges, prev_ncomp, prev_V = prev
        missing = sorted(prev_edges - _edge_set(edges_now))
        if missing:
            self.violations.append(f"{label}: constrained edges dropped {missing}")
        if ncomp_now > prev_ncomp:
            self.violations.append(
                f"{label}: components increased {prev_ncomp} -> {ncomp_now}")
        if V_now > prev_V + 1e-6 * self.env.diameter:
            self.violations.append(
                f"{label}: hull perimeter increased {prev_V:.9g} -> {V_now:.9g}")

    # -- move post-processing ----------------------------------------------

    def _slowdown_factor(self, p: np.ndarray, eps: float,
                         reflex_pts: np.ndarray) -> float:
        cfg = self.cfg.reflex_slowdown
        if cfg.factor >= 1.0 or cfg.dist_threshold <= 0.0 or not len(reflex_pts):
            return 1.0
        d = float(np.hypot(*(reflex_pts - p).T).min())
        return cfg.factor if d < cfg.dist_threshold * eps else 1.0

    def _apply_disk_rules(self, label: str, P: np.ndarray, moves: np.ndarray,
                          actors, neighbor_map: dict,
                          region_of: dict) -> np.ndarray:
        cfg = self.cfg
        radius = cfg.robot_model.radius
        out = moves.copy()
        for i in actors:
            u = out[i]
            if u[0] == 0.0 and u[1] == 0.0:
                continue
            nbrs = neighbor_map.get(i, ())
            coll = colliding_neighbors(i, P, u, nbrs, radius, cfg.s_max)
            if not coll:
                continue
            if len(coll) <= 2:
                nu = swerve_move(i, P, u, nbrs, radius, cfg.s_max, region_of[i])
                if nu is None:
                    self.events.append(
                        f"{label} robot {i}: no swerve clears neighbors {coll}, holding")
                    out[i] = 0.0
                else:
                    out[i] = nu
            else:
                out[i] = 0.0
        return out

    def _commit(self, label: str, P: np.ndarray, moves: np.ndarray, actors,
                region_of: dict) -> np.ndarray:
        """Apply actuation noise, clamp into the free space, move the batch."""
        cfg = self.cfg
        new_P = P.copy()
        for i in actors:
            u = moves[i]
            if cfg.noise.enabled:
                u = apply_actuation_noise(self.streams["actuation"], u, cfg.noise)
            q = P[i] + u
            region = region_of[i]
            if not region.contains_point(q):
                if not cfg.noise.enabled:
                    self.violations.append(
                        f"{label} robot {i}: planned step left the free space")
                q = project_inside(region, q, anchor=P[i])
            new_P[i] = q
        if cfg.robot_model.kind == "disk":
            d = new_P[:, None, :] - new_P[None, :, :]
            dist = np.hypot(d[..., 0], d[..., 1])
            iu = np.triu_indices(len(new_P), k=1)
            bad = dist[iu] < 2.0 * cfg.robot_model.radius - 1e-9
            for a, b in zip(iu[0][bad], iu[1][bad]):
                self.violations.append(
                    f"{label}: disc overlap between robots {int(a)} and {int(b)} "
                    f"(distance {dist[a, b]:.4f})")
        return new_P

    # -- per-robot noisy planning -------------------------------------------

    def _plan_noisy(self, label: str, i: int, P: np.ndarray, eps: float,
                    neighbor_idx: np.ndarray) -> np.ndarray:
        """One wake of one robot on its own perceived scene; zero on failure."""
        cfg = self.cfg
        perc = apply_sensing_noise(self.streams["sensing"], self.env, eps, P[i],
                                   neighbor_idx, P, cfg.noise)
        if perc.failure is not None:
            self.events.append(f"{label} robot {i} holds: {perc.failure}")
            return np.zeros(2)
        region = perc.region
        params = self.params_at(eps)
        star_box: dict[int, object] = {}

        def own_star():
            if 0 not in star_box:
                star_box[0] = visibility_region(region, P[i])
            return star_box[0]

        try:
            rows = np.array([[min(i, int(j)), max(i, int(j))] for j in neighbor_idx],
                            dtype=np.int64)
            pair_sets = {}
            for j in sorted(int(j) for j in neighbor_idx):
                key = (min(i, j), max(i, j))
                pair_sets[key] = link_constraint(
                    region, perc.positions[i], perc.positions[j], cfg.r,
                    params.disk_segments, star=own_star).region
            X = motion_set(i, perc.positions, params, region, sensing=rows,
                           constrained=rows, pair_sets=pair_sets)
            _, u = step_target(i, perc.positions, params, region, X)
        except (ValueError, RuntimeError) as e:
            self.events.append(f"{label} robot {i} holds: perception step failed ({e})")
            return np.zeros(2)
        reflex = perc.environment.vertices[list(perc.environment.reflex_indices)] \
            if perc.environment.reflex_indices else np.zeros((0, 2))
        return u * self._slowdown_factor(P[i], eps, reflex)

    # -- main loops ----------------------------------------------------------

    def run_sync(self) -> RunResult:
        cfg = self.cfg
        n = cfg.n
        P = self.initial_positions()
        prev = None
        status = None
        t = 0
        while True:
            eps = self.epsilon_at(t)
            region = self.region_at(eps)
            label = f"t={t}"
            sensing = graphs.range_visibility_graph(region, P, cfg.r)
            comps = self._components(P, sensing)
            V = self._lyapunov_sum(P, comps, region)
            self._record_instant(t, P, sensing, eps, V)
            self._check_invariants(label, prev, sensing, len(comps), V)
            if cfg.invariant_mode == "abort" and self.violations:
                status = "aborted"
                break
            terminal = [self._terminal(P, comp) for comp in comps]
            if all(terminal):
                status = "converged"
                break
            if t >= cfg.termination.max_steps:
                status = "max_steps"
                break

            active = np.zeros(n, dtype=bool)
            for comp, done in zip(comps, terminal):
                if not done:
                    active[comp] = True
            actors = np.nonzero(active)[0]
            params = self.params_at(eps)
            constrained = constraint_edges(P, sensing, params)

            if cfg.noise.enabled:
                nbr = {int(i): sensing[(sensing == i).any(axis=1)] for i in actors}
                nbr = {i: np.unique(e[e != i]) for i, e in nbr.items()}
                moves = np.zeros((n, 2))
                for i in actors:
                    moves[i] = self._plan_noisy(label, int(i), P, eps, nbr[int(i)])
                used_edges = {(min(i, int(j)), max(i, int(j)))
                              for i in nbr for j in nbr[i]}
            else:
                plan = plan_round(P, params, region, sensing=sensing,
                                  constrained=constrained, actors=actors)
                moves = plan.moves.copy()
                for i in actors:
                    moves[i] *= self._slowdown_factor(P[i], eps, self._reflex_true)
                mask = np.isin(constrained, actors).any(axis=1)
                used_edges = _edge_set(constrained[mask])

            region_of = {int(i): region for i in actors}
            if cfg.robot_model.kind == "disk":
                nbr_map = {}
                for a, b in sensing:
                    nbr_map.setdefault(int(a), []).append(int(b))
                    nbr_map.setdefault(int(b), []).append(int(a))
                moves = self._apply_disk_rules(label, P, moves, actors, nbr_map,
                                               region_of)
            P = self._commit(label, P, moves, actors, region_of)
            self.steps[actors] += 1
            prev = (used_edges, len(comps), V)
            t += 1
        return self._finish(status, P)

    def run_async(self, clock_speeds=None) -> RunResult:
        cfg = self.cfg
        n = cfg.n
        P = self.initial_positions()
        if clock_speeds is None:
            speeds = 0.9 + 0.1 * self.streams["clocks"].random(n)
        else:
            speeds = np.asarray(clock_speeds, dtype=float)
            if speeds.shape != (n,) or (speeds <= 0).any():
                raise ValueError("clock_speeds must be n positive numbers")
        wakes = np.zeros(n, dtype=np.int64)
        heap = [(0.0, i) for i in range(n)]
        heapq.heapify(heap)
        prev = None
        status = None
        while True:
            tau = heap[0][0]
            batch = []
            while heap and heap[0][0] == tau:
                batch.append(heapq.heappop(heap)[1])
            batch.sort()
            label = f"t={tau:g}"

            eps_eval = min(self.epsilon_at(int(k)) for k in wakes)
            region_eval = self.region_at(eps_eval)
            sensing_eval = graphs.range_visibility_graph(region_eval, P, cfg.r)
            comps = self._components(P, sensing_eval)
            V = self._lyapunov_sum(P, comps, region_eval)
            eps_batch = min(self.epsilon_at(int(wakes[i])) for i in batch)
            self._record_instant(tau, P, sensing_eval, eps_batch, V)
            self._check_invariants(label, prev, sensing_eval, len(comps), V)
            if cfg.invariant_mode == "abort" and self.violations:
                status = "aborted"
                break
            if all(self._terminal(P, comp) for comp in comps):
                status = "converged"
                break
            if tau >= cfg.termination.max_steps:
                status = "max_steps"
                break

            # caches shared within the batch, keyed by the clearance in use
            sens_cache = {eps_eval: sensing_eval}
            constr_cache: dict[float, np.ndarray] = {}
            star_cache: dict[tuple, object] = {}
            pair_cache: dict[float, dict] = {}
            hull_cache: dict[float, dict] = {}
            moves = np.zeros((n, 2))
            actors = []
            region_of = {}
            used_edges = set()
            nbr_map: dict[int, list] = {}
            for i in batch:
                eps_i = self.epsilon_at(int(wakes[i]))
                region_i = self.region_at(eps_i)
                region_of[i] = region_i
                params = self.params_at(eps_i)
                if eps_i not in sens_cache:
                    sens_cache[eps_i] = graphs.range_visibility_graph(region_i, P, cfg.r)
                sensing_i = sens_cache[eps_i]
                comp_i = next(c for c in self._components(P, sensing_i) if i in c)
                wakes[i] += 1
                heapq.heappush(heap, (float(wakes[i]) * float(speeds[i]), i))
                if self._terminal(P, comp_i):
                    continue
                actors.append(i)
                self.steps[i] += 1
                row = sensing_i[(sensing_i == i).any(axis=1)]
                row = np.unique(row[row != i])
                nbr_map[i] = list(row)
                if cfg.noise.enabled:
                    moves[i] = self._plan_noisy(label, i, P, eps_i, row)
                    used_edges |= {(min(i, int(j)), max(i, int(j))) for j in row}
                    continue
                if eps_i not in constr_cache:
                    constr_cache[eps_i] = constraint_edges(P, sensing_i, params)
                constrained = constr_cache[eps_i]
                pairs = pair_cache.setdefault(eps_i, {})
                hulls = hull_cache.setdefault(eps_i, {})
                for a, b in constrained:
                    key = (int(a), int(b))
                    if i in key and key not in pairs:
                        sk = (eps_i, key[0])

                        def build(sk=sk, reg=region_i):
                            if sk not in star_cache:
                                star_cache[sk] = visibility_region(reg, P[sk[1]])
                            return star_cache[sk]

                        pairs[key] = link_constraint(
                            region_i, P[key[0]], P[key[1]], cfg.r,
                            params.disk_segments, star=build).region
                        used_edges.add(key)
                X = motion_set(i, P, params, region_i, sensing=sensing_i,
                               constrained=constrained, pair_sets=pairs,
                               hull_cache=hulls)
                _, u = step_target(i, P, params, region_i, X)
                moves[i] = u * self._slowdown_factor(P[i], eps_i, self._reflex_true)

            if cfg.robot_model.kind == "disk":
                moves = self._apply_disk_rules(label, P, moves, actors, nbr_map,
                                               region_of)
            P = self._commit(label, P, moves, actors, region_of)
            prev = (used_edges, len(comps), V)
        return self._finish(status, P)

    # -- wrap-up -------------------------------------------------------------

    def _finish(self, status: str, P: np.ndarray) -> RunResult:
        cfg = self.cfg
        cohesive = None
        if cfg.robot_model.kind == "disk":
            cohesive = cohesive_groups(P, self.frames[-1].edges,
                                       cfg.robot_model.radius + cfg.s_max)
        metrics = compute_metrics(self.frames, steps_per_robot=self.steps,
                                  v_perim_trace=self.v_trace,
                                  cohesive_groups_final=cohesive)
        Pc = P.copy()
        Pc.setflags(write=False)
        return RunResult(config=cfg, status=status, metrics=metrics,
                         frames=self.frames, violations=tuple(self.violations),
                         events=tuple(self.events), positions=Pc)


def run_sync(config: SimConfig, streams: dict | None = None) -> RunResult:
    """Synchronous rounds: every robot plans from the same snapshot."""
    if config.mode != "sync":
        raise ValueError("config.mode must be 'sync'")
    return _Run(config, streams).run_sync()


def run_async(config: SimConfig, streams: dict | None = None,
              clock_speeds=None) -> RunResult:
    """Event-queue execution: robots wake at integer multiples of their own
    clock speed; simultaneous wakes commit as one batch, ordered by index.

    ``clock_speeds`` overrides the drawn speeds (all ones reproduces the
    synchronous trajectory exactly)."""
    if config.mode != "async":
        raise ValueError("config.mode must be 'async'")
    return _Run(config, streams).run_async(clock_speeds=clock_speeds)


def run(config: SimConfig, streams: dict | None = None) -> RunResult:
    return run_sync(config, streams) if config.mode == "sync" \
        else run_async(config, streams)


def run_indexed(config: SimConfig, ic: int, rep: int = 0) -> RunResult:
    """One cell of an experiment grid: initial condition ``ic``, repeat ``rep``.

    All repeats of an initial condition share its placement draw; the clock,
    sensing, and actuation draws differ per repeat.
    """
    return run(config, streams=named_streams(config.seed, ic, rep))


# ---------------------------------------------------------------------------
# metrics and file formats


def compute_metrics(frames, steps_per_robot=None, v_perim_trace=(),
                    cohesive_groups_final=None) -> Metrics:
    """Summarize a trace: edge retention, component counts, mean steps."""
    if not frames:
        raise ValueError("empty trace")
    first, last = frames[0], frames[-1]
    n = len(first.positions)
    initial = _edge_set(first.edges)
    final = _edge_set(last.edges)
    fraction = 1.0 if not initial else len(initial & final) / len(initial)
    if steps_per_robot is None:
        steps_per_robot = np.zeros(n, dtype=np.int64)
    steps = tuple(int(s) for s in steps_per_robot)
    return Metrics(steps_per_robot=steps,
                   mean_steps=float(np.mean(steps)) if steps else 0.0,
                   edges_preserved_fraction=float(fraction),
                   components_initial=len(graphs.connected_components(n, first.edges)),
                   components_final=len(graphs.connected_components(n, last.edges)),
                   v_perim_trace=tuple(float(v) for v in v_perim_trace),
                   cohesive_groups_final=cohesive_groups_final)


def metrics_csv_row(run_id: str, seed: int, mode: str, metrics: Metrics) -> str:
    coh = "" if metrics.cohesive_groups_final is None \
        else str(metrics.cohesive_groups_final)
    return (f"{run_id},{seed},{mode},{metrics.mean_steps:.4f},"
            f"{metrics.edges_preserved_fraction:.6f},"
            f"{metrics.components_initial},{metrics.components_final},{coh}")


@dataclass(frozen=True)
class Trace:
    """A trace file in memory: optional workspace header plus the frames."""

    frames: list
    environment: np.ndarray | None = None   # workspace vertices, if embedded
    robot_radius: float | None = None


def write_trace(frames, path, environment=None, robot_radius=None) -> None:
    """JSONL: an optional workspace header line, then one frame per line
    (time, epsilon, positions, sensing edges)."""
    with open(path, "w") as f:
        if environment is not None:
            verts = environment.vertices if isinstance(environment, Environment) \
                else np.asarray(environment, dtype=float)
            head = {"environment": {"vertices": verts.tolist()}}
            if robot_radius is not None:
                head["robot_radius"] = float(robot_radius)
            f.write(json.dumps(head))
            f.write("\n")
        for fr in frames:
            f.write(json.dumps({"time": fr.time, "epsilon": fr.epsilon,
                                "positions": np.asarray(fr.positions).tolist(),
                                "edges": np.asarray(fr.edges).tolist()}))
            f.write("\n")


def read_trace(path) -> Trace:
    frames = []
    env = None
    radius = None
    with open(path) as f:
        for ln, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                if "environment" in data:
                    if ln != 1 or env is not None:
                        raise ValueError("workspace header allowed on line 1 only")
                    env = np.array(data["environment"]["vertices"],
                                   dtype=float).reshape(-1, 2)
                    radius = data.get("robot_radius")
                    radius = None if radius is None else float(radius)
                    continue
                frame = TraceFrame(
                    time=float(data["time"]),
                    positions=np.array(data["positions"], dtype=float).reshape(-1, 2),
                    edges=np.array(data["edges"], dtype=np.int64).reshape(-1, 2),
                    epsilon=float(data["epsilon"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: malformed trace line {ln}: {e}") from None
            if frames and frame.time < frames[-1].time:
                raise ValueError(f"{path}: malformed trace line {ln}: time goes backwards")
            frames.append(frame)
    if not frames:
        raise ValueError(f"{path}: empty trace")
    return Trace(frames=frames, environment=env, robot_radius=radius)
