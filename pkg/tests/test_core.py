import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from generators import random_transform
from scenec.core import (
    Aabb,
    AssetRequest,
    RigidTransform,
    SupportKind,
    SupportRelation,
    aabb_of_points,
    se3_compose,
)
from scenec.errors import EmptyInput, InvalidValue

seeds = st.integers(0, 2**32 - 1)


def test_identity_composition():
    t = RigidTransform.from_yaw(0.3, [1, 2, 3])
    assert (RigidTransform.identity() @ t).is_close(t)


@given(seeds)
def test_compose_with_inverse_is_identity(seed):
    t = random_transform(np.random.default_rng(seed))
    assert (t @ t.inverse()).is_close(RigidTransform.identity())


@given(seeds)
def test_compose_matches_homogeneous_product(seed):
    rng = np.random.default_rng(seed)
    a, b = random_transform(rng), random_transform(rng)
    ab = se3_compose(a, b)
    assert np.allclose(ab.as_matrix(), a.as_matrix() @ b.as_matrix(), atol=1e-12)
    p = rng.normal(size=(5, 3))
    assert np.allclose(ab.apply(p), a.apply(b.apply(p)), atol=1e-12)


@given(seeds)
def test_compose_is_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_transform(rng) for _ in range(3))
    assert ((a @ b) @ c).is_close(a @ (b @ c))


@given(seeds)
def test_rigid_motion_preserves_distances(seed):
    rng = np.random.default_rng(seed)
    t = random_transform(rng)
    p, q = rng.normal(size=(2, 3))
    moved = t.apply(np.stack([p, q]))
    assert np.linalg.norm(moved[0] - moved[1]) == pytest.approx(np.linalg.norm(p - q), abs=1e-9)


def test_reflection_rejected():
    with pytest.raises(InvalidValue):
        RigidTransform(np.diag([-1.0, 1.0, 1.0]), np.zeros(3))


def test_non_orthonormal_rejected():
    with pytest.raises(InvalidValue):
        RigidTransform(np.diag([1.0, 1.0, 1.001]), np.zeros(3))


@given(seeds)
def test_quaternion_json_round_trip_is_exact(seed):
    t = random_transform(np.random.default_rng(seed))
    back = RigidTransform.from_dict(json.loads(json.dumps(t.to_dict())))
    assert back == t
    assert back.to_dict() == t.to_dict()


def test_quaternion_order_is_xyzw():
    t = RigidTransform.from_yaw(np.pi / 2)
    q = RigidTransform.from_dict(RigidTransform.from_yaw(np.pi / 2).to_dict()).quaternion()
    assert np.allclose(q, [0, 0, np.sqrt(0.5), np.sqrt(0.5)])
    assert np.allclose(t.apply([1, 0, 0]), [0, 1, 0])


def test_aabb_of_two_points():
    box = aabb_of_points([(0, 0, 0), (1, 1, 1)])
    assert box.min.tolist() == [0, 0, 0] and box.max.tolist() == [1, 1, 1]


def test_aabb_of_single_point():
    box = aabb_of_points([(0.5, -2, 3)])
    assert np.array_equal(box.min, box.max)


def test_aabb_of_nothing():
    with pytest.raises(EmptyInput):
        aabb_of_points([])


def test_aabb_min_exceeds_max():
    with pytest.raises(InvalidValue):
        Aabb([1, 0, 0], [0, 1, 1])


@given(seeds)
def test_aabb_is_tight(seed):
    pts = np.random.default_rng(seed).normal(size=(1000, 3))
    box = aabb_of_points(pts)
    assert box.contains(pts).all()
    eps = 1e-9
    for axis in range(3):
        for side in (0, 1):
            lo, hi = box.min.copy(), box.max.copy()
            if side:
                hi[axis] -= eps
            else:
                lo[axis] += eps
            assert not Aabb(lo, hi).contains(pts).all()


def test_support_parent_rule():
    with pytest.raises(InvalidValue):
        SupportRelation(SupportKind.OBJECT)
    with pytest.raises(InvalidValue):
        SupportRelation(SupportKind.GROUND, "table")
    assert SupportRelation(SupportKind.OBJECT, "table").to_dict() == {"kind": "object", "parent_id": "table"}


@pytest.mark.parametrize("dims", [[0, 1, 1], [1, 1, 21], [0.0005, 1, 1], [1, 1]])
def test_request_dims_bounds(dims):
    with pytest.raises(InvalidValue):
        AssetRequest("a", "table", "", dims)


def test_request_round_trip():
    req = AssetRequest(
        "lamp",
        "lamp",
        "a brass desk lamp",
        [0.2, 0.2, 0.45],
        "modern",
        RigidTransform.from_quaternion([0, 0, 0.3, 0.9], [1, 2, 0.7]),
        SupportRelation(SupportKind.OBJECT, "desk"),
    )
    assert AssetRequest.from_dict(json.loads(json.dumps(req.to_dict()))) == req


def test_empty_id_rejected():
    with pytest.raises(InvalidValue):
        AssetRequest("", "table", "", [1, 1, 1])
