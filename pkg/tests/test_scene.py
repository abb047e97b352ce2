import json

import numpy as np
import pytest

from src.errors import FileFormatError, MissingReferenceError
from src.scene import (
    Box,
    HalfSpace,
    InvalidPrimitiveError,
    Scene,
    Sphere,
    load_scene,
    save_scene,
    scene_from_dict,
    sdf_eval,
    sdf_gradient,
)
from tests.conftest import CONFIGS
from tests.helpers import central_difference, relative_error

UNIT_SPHERE = Sphere(center=[0.0, 0.0, 0.0], radius=0.5)


def test_sphere_distance_and_gradient():
    scene = Scene((UNIT_SPHERE,))
    assert sdf_eval(scene, [1.0, 0.0, 0.0]) == pytest.approx(0.5)
    assert sdf_eval(scene, [0.0, 0.0, 0.0]) == pytest.approx(-0.5)
    np.testing.assert_allclose(sdf_gradient(scene, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(sdf_gradient(scene, [0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])


def test_union_takes_the_nearest_primitive():
    floor = HalfSpace(point=[0.0, 0.0, 0.0], normal=[0.0, 0.0, 2.0])
    scene = Scene((UNIT_SPHERE, floor))
    assert sdf_eval(scene, [3.0, 0.0, 0.1]) == pytest.approx(0.1)
    np.testing.assert_allclose(sdf_gradient(scene, [3.0, 0.0, 0.1]), [0.0, 0.0, 1.0])


def test_ties_go_to_the_first_primitive():
    left = Sphere(center=[-1.0, 0.0, 0.0], radius=0.5)
    right = Sphere(center=[1.0, 0.0, 0.0], radius=0.5)
    np.testing.assert_allclose(sdf_gradient(Scene((left, right)), [0.0, 1.0, 0.0]),
                               np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0))
    np.testing.assert_allclose(sdf_gradient(Scene((right, left)), [0.0, 1.0, 0.0]),
                               np.array([-1.0, 1.0, 0.0]) / np.sqrt(2.0))


def test_empty_scene_is_infinitely_far():
    scene = Scene()
    assert scene.is_empty
    assert sdf_eval(scene, [0.0, 0.0, 0.0]) == np.inf
    np.testing.assert_array_equal(sdf_gradient(scene, [1.0, 2.0, 3.0]), np.zeros(3))


@pytest.mark.parametrize("point, distance, gradient", [
    ([2.0, 0.0, 0.0], 1.0, [1.0, 0.0, 0.0]),
    ([0.5, 0.0, 0.0], -0.5, [1.0, 0.0, 0.0]),
    ([0.0, -0.8, 0.1], -0.2, [0.0, -1.0, 0.0]),
    ([2.0, 2.0, 0.0], np.sqrt(2.0), [np.sqrt(0.5), np.sqrt(0.5), 0.0]),
])
def test_box_distance_and_gradient(point, distance, gradient):
    scene = Scene((Box(center=[0.0, 0.0, 0.0], half_extents=[1.0, 1.0, 1.0]),))
    assert sdf_eval(scene, point) == pytest.approx(distance)
    np.testing.assert_allclose(sdf_gradient(scene, point), gradient, atol=1e-12)


def test_primitive_gradients_match_finite_differences(rng):
    primitives = [
        Sphere(center=[0.2, -0.1, 0.4], radius=0.3),
        Box(center=[0.0, 0.5, 0.0], half_extents=[0.4, 0.2, 0.6]),
        HalfSpace(point=[0.0, 0.0, 0.1], normal=[0.1, 0.2, 1.0]),
    ]
    for primitive in primitives:
        for point in rng.uniform(-1.5, 1.5, size=(10, 3)):
            numeric = central_difference(lambda p: float(primitive.distance(p[None])[0]), point)
            assert relative_error(primitive.gradient(point[None])[0], numeric) < 1e-6


MIXED = (
    Sphere(center=[0.2, -0.1, 0.4], radius=0.3),
    Box(center=[0.0, 0.5, 0.0], half_extents=[0.4, 0.2, 0.6]),
    HalfSpace(point=[0.0, 0.0, -0.5], normal=[0.1, 0.2, 1.0]),
)


@pytest.mark.parametrize("scene", [Scene((p,)) for p in MIXED] + [Scene(MIXED)],
                         ids=["sphere", "box", "half_space", "union"])
def test_distances_are_one_lipschitz(scene, rng):
    a = rng.uniform(-1.5, 1.5, size=(500, 3))
    b = a + rng.normal(scale=0.3, size=a.shape)
    change = np.abs(scene.distances(a) - scene.distances(b))
    assert np.all(change <= np.linalg.norm(a - b, axis=-1) + 1e-12)


def test_union_is_never_farther_than_a_member(rng):
    points = rng.uniform(-2.0, 2.0, size=(500, 3))
    union = Scene(MIXED).distances(points)
    for primitive in MIXED:
        assert np.all(union <= primitive.distance(points))


def test_invalid_primitives():
    with pytest.raises(InvalidPrimitiveError):
        Sphere(center=[0.0, 0.0, 0.0], radius=0.0)
    with pytest.raises(InvalidPrimitiveError):
        Box(center=[0.0, 0.0, 0.0], half_extents=[1.0, -1.0, 1.0])
    with pytest.raises(InvalidPrimitiveError):
        HalfSpace(point=[0.0, 0.0, 0.0], normal=[0.0, 0.0, 0.0])
    with pytest.raises(InvalidPrimitiveError):
        Sphere(center=[0.0, 0.0], radius=1.0)


def test_load_bundled_scene():
    scene = load_scene(CONFIGS / "scenes" / "chair.json")
    assert len(scene) == 2
    assert {p.shape for p in scene.primitives} == {"box", "half_space"}


def test_scene_file_round_trip(tmp_path):
    scene = Scene((UNIT_SPHERE, Box(center=[1.0, 0.0, 0.5], half_extents=[0.2, 0.2, 0.5])))
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    assert load_scene(path).to_dict() == scene.to_dict()


def test_scene_file_errors(tmp_path):
    with pytest.raises(MissingReferenceError):
        load_scene(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[")
    with pytest.raises(FileFormatError):
        load_scene(bad)
    with pytest.raises(FileFormatError):
        scene_from_dict({"primitives": [{"shape": "cone"}]})
    with pytest.raises(FileFormatError):
        scene_from_dict({"primitives": [{"shape": "sphere", "centre": [0, 0, 0], "radius": 1}]})
    with pytest.raises(FileFormatError):
        scene_from_dict({"objects": []})
    bad.write_text(json.dumps({"primitives": "sphere"}))
    with pytest.raises(FileFormatError):
        load_scene(bad)
