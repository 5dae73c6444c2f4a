"""Workspace polygon validation, orientation, and containment."""
import json

import numpy as np
import pytest

from visrendezvous.geometry import core
from visrendezvous.geometry.environment import (Environment, InvalidEnvironment,
                                                builtin_environment,
                                                load_environment,
                                                save_environment,
                                                validate_environment)

import oracles


def test_builtin_square_shape(square_env):
    assert square_env.n == 4
    assert square_env.kappa == 0
    assert square_env.diameter == pytest.approx(np.sqrt(200.0))
    np.testing.assert_allclose(square_env.vertices[0], [0.0, 0.0])


def test_builtin_reflex_counts(square_env, lshape_env, floorplan_env, pinwheel_env):
    assert square_env.kappa == 0
    assert lshape_env.kappa == 1
    assert floorplan_env.kappa == 6
    assert pinwheel_env.kappa == 8


def test_unknown_builtin_name_raises():
    with pytest.raises(KeyError):
        builtin_environment("moebius")


def test_validation_normalizes_to_ccw():
    cw = [[0, 0], [0, 10], [10, 10], [10, 0]]
    env = validate_environment(cw)
    assert core.polygon_area(env.vertices) > 0


def test_validation_keeps_ccw_input_order():
    ccw = [[0, 0], [10, 0], [10, 10], [0, 10]]
    env = validate_environment(ccw)
    np.testing.assert_allclose(env.vertices, np.asarray(ccw, dtype=float))


@pytest.mark.parametrize("bad, why", [
    ([[0, 0], [1, 0]], "fewer than three vertices"),
    ([[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]], "repeated vertex"),
    ([[0, 0], [10, 10], [10, 0], [0, 10]], "self-intersection"),
    ([[0, 0], [10, 0], [5, 0], [10, 10], [0, 10]], "fold-back spike"),
    ([[0, 0], [10, 0], [10, 10], [5, 0]], "vertex on non-adjacent edge"),
])
def test_invalid_polygons_rejected(bad, why):
    with pytest.raises(InvalidEnvironment):
        validate_environment(bad)


def test_flat_collinear_vertex_is_accepted():
    env = validate_environment([[0, 0], [5, 0], [10, 0], [10, 10], [0, 10]])
    assert env.n == 5
    assert env.kappa == 0


def test_invalid_environment_lists_all_problems():
    try:
        validate_environment([[0, 0], [10, 10], [10, 0], [0, 10], [0, 10]])
    except InvalidEnvironment as e:
        assert len(e.errors) >= 2
    else:
        pytest.fail("expected rejection")


def test_containment_matches_reference(rng, floorplan_env):
    poly = oracles.shapely_polygon(floorplan_env.vertices)
    lo = floorplan_env.vertices.min(axis=0)
    hi = floorplan_env.vertices.max(axis=0)
    P = rng.uniform(lo, hi, size=(400, 2))
    got = floorplan_env.contains(P)
    tol = floorplan_env.tol
    for p, g in zip(P, got):
        clear = oracles.boundary_clearance(poly, p)
        if abs(clear) <= 2 * tol:
            continue  # too close to the boundary for the predicates to owe agreement
        assert g == oracles.inside(poly, p)


def test_boundary_dist_matches_reference(rng, lshape_env):
    poly = oracles.shapely_polygon(lshape_env.vertices)
    P = rng.uniform([-2, -2], [22, 22], size=(200, 2))
    got = lshape_env.boundary_dist(P)
    want = np.array([abs(oracles.boundary_clearance(poly, p)) for p in P])
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_save_load_round_trip(tmp_path, floorplan_env):
    path = tmp_path / "env.json"
    save_environment(floorplan_env, path)
    again = load_environment(path)
    assert isinstance(again, Environment)
    np.testing.assert_array_equal(again.vertices, floorplan_env.vertices)


def test_load_rejects_invalid_file(tmp_path):
    path = tmp_path / "bow.json"
    path.write_text(json.dumps({"vertices": [[0, 0], [10, 10], [10, 0], [0, 10]]}))
    with pytest.raises(InvalidEnvironment):
        load_environment(path)


def test_random_star_polygons_validate(rng):
    for _ in range(25):
        V = oracles.random_simple_polygon(rng, n_target=12)
        env = validate_environment(V)
        assert env.n >= 3
        assert core.polygon_area(env.vertices) > 0
