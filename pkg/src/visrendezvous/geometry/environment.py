"""Workspace polygons: validation, orientation, reflex structure, file IO.

An environment is a simple polygon without holes.  Validation normalizes the
vertex order to counterclockwise and records the reflex vertices (interior
angle strictly greater than pi); those are the only boundary features that can
block line of sight after contraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import core


class InvalidEnvironment(ValueError):
    """Raised with the full list of validation failures."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class Environment:
    vertices: np.ndarray                 # (n,2) float64, CCW, read-only
    reflex_indices: tuple[int, ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def kappa(self) -> int:
        return len(self.reflex_indices)

    @property
    def edges(self):
        if "edges" not in self._cache:
            self._cache["edges"] = core.poly_edges(self.vertices)
        return self._cache["edges"]

    @property
    def diameter(self) -> float:
        if "diam" not in self._cache:
            self._cache["diam"] = core.bbox_diameter(self.vertices)
        return self._cache["diam"]

    @property
    def tol(self) -> float:
        return core.scale_tol(self.diameter)

    def boundary_dist(self, P) -> np.ndarray:
        A, B = self.edges
        return core.points_segs_dist(core.as_points(P), A, B).min(axis=1)

    def contains(self, P) -> np.ndarray:
        """Strictly-inside test for points (boundary counts as inside within tol)."""
        P = core.as_points(P)
        inside = core.points_in_polygon(self.vertices, P)
        near = self.boundary_dist(P) <= self.tol
        return inside | near


def validate_environment(raw_vertices) -> Environment:
    """Check a raw vertex list and build an :class:`Environment`.

    Errors collected (all reported at once): fewer than 3 vertices, non-finite
    coordinates, repeated consecutive vertices, zero area, self-intersection.
    Either orientation of the input is accepted.
    """
    errors: list[str] = []
    V = np.asarray(raw_vertices, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != 2:
        raise InvalidEnvironment([f"vertex array must have shape (n,2), got {V.shape}"])
    if len(V) < 3:
        errors.append(f"need at least 3 vertices, got {len(V)}")
        raise InvalidEnvironment(errors)
    if not np.all(np.isfinite(V)):
        errors.append("non-finite coordinate")
        raise InvalidEnvironment(errors)

    scale = max(core.bbox_diameter(V), 1.0)
    tol = core.REL_TOL * scale

    dup = np.hypot(*(np.roll(V, -1, axis=0) - V).T) <= tol
    if np.any(dup):
        errors.append(f"repeated consecutive vertices at indices {np.nonzero(dup)[0].tolist()}")

    area = core.polygon_area(V)
    if abs(area) <= tol * scale:
        errors.append("polygon area is zero")

    if not errors:
        errors.extend(_simplicity_errors(V, tol))
    if errors:
        raise InvalidEnvironment(errors)

    if area < 0:
        V = np.concatenate([V[:1], V[1:][::-1]])  # reverse, keep first vertex first

    reflex = _reflex_indices(V)
    V = V.copy()
    V.setflags(write=False)
    return Environment(vertices=V, reflex_indices=tuple(reflex))


def _simplicity_errors(V: np.ndarray, tol: float) -> list[str]:
    errors = []
    n = len(V)
    A, B = core.poly_edges(V)
    for i in range(n):
        # strict crossings with non-adjacent edges
        others = [j for j in range(n) if j not in (i, (i - 1) % n, (i + 1) % n)]
        if others:
            oa, ob = A[others], B[others]
            if np.any(core.segs_cross(A[i], B[i], oa, ob)):
                errors.append(f"edge {i} crosses another edge")
                continue
            # vertex-on-edge contact also breaks simplicity
            d = core.segs_point_dist(oa, ob, A[i])
            if np.any(d <= tol):
                errors.append(f"vertex {i} touches a non-adjacent edge")
    for i in range(n):
        # fold-back onto the previous edge
        prev_dir = V[i] - V[(i - 1) % n]
        next_dir = V[(i + 1) % n] - V[i]
        if abs(core.cross2(prev_dir, next_dir)) <= tol * max(np.hypot(*prev_dir), 1.0) \
                and np.dot(prev_dir, next_dir) < 0:
            errors.append(f"edges fold back at vertex {i}")
    return errors


def _reflex_indices(V: np.ndarray) -> list[int]:
    n = len(V)
    prev_dir = V - np.roll(V, 1, axis=0)
    next_dir = np.roll(V, -1, axis=0) - V
    turn = core.cross2(prev_dir, next_dir)
    scale = np.hypot(*prev_dir.T) * np.hypot(*next_dir.T)
    return [i for i in range(n) if turn[i] < -core.REL_TOL * max(scale[i], 1.0)]


# ---------------------------------------------------------------------------
# IO


def load_environment(path) -> Environment:
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict) or "vertices" not in data:
        raise InvalidEnvironment([f"{path}: expected an object with a 'vertices' key"])
    return validate_environment(data["vertices"])


def save_environment(env: Environment, path) -> None:
    with open(path, "w") as f:
        json.dump({"vertices": env.vertices.tolist()}, f, indent=2)
        f.write("\n")


def builtin_environment(name: str) -> Environment:
    """Load one of the packaged workspaces: square, lshape, floorplan, pinwheel."""
    try:
        text = resources.files("visrendezvous.data").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise KeyError(f"no builtin environment named {name!r}") from None
    return validate_environment(json.loads(text)["vertices"])
