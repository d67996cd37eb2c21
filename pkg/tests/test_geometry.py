from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bapsolver import (
    AffineSubspace,
    Ball,
    Box,
    CartesianProduct,
    Halfspace,
    Hyperplane,
    Polyhedron,
    WholeSpace,
    distance,
    project,
    scale,
    support,
    supporting_halfspace,
)

_vec2 = st.lists(
    st.floats(-10, 10, allow_nan=False, allow_infinity=False), min_size=2, max_size=2
).map(np.asarray)


def test_halfspace_normal_is_normalized_and_offset_rescaled() -> None:
    h = Halfspace(np.array([3.0, 4.0]), 10.0)
    assert np.allclose(h.normal, [0.6, 0.8])
    assert h.offset == pytest.approx(2.0)


def test_halfspace_projection_hand_values() -> None:
    h = Halfspace(np.array([1.0, 0.0]), 0.0)
    res = project(h, np.array([2.0, 3.0]))
    assert np.allclose(res.x, [0.0, 3.0])
    assert np.allclose(res.y, [2.0, 0.0])
    inside = project(h, np.array([-1.0, 5.0]))
    assert np.allclose(inside.x, [-1.0, 5.0])
    assert inside.halfspace is None


def test_hyperplane_projection_moves_both_sides() -> None:
    hp = Hyperplane(np.array([0.0, 1.0]), 2.0)
    assert np.allclose(project(hp, np.array([7.0, 5.0])).x, [7.0, 2.0])
    assert np.allclose(project(hp, np.array([7.0, -5.0])).x, [7.0, 2.0])


def test_box_projection_clips_componentwise() -> None:
    b = Box(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    assert np.allclose(project(b, np.array([-1.0, 5.0])).x, [0.0, 2.0])


def test_ball_projection_radial() -> None:
    s = Ball(np.array([1.0, 0.0]), 2.0)
    assert np.allclose(project(s, np.array([6.0, 0.0])).x, [3.0, 0.0])
    assert np.allclose(project(s, np.array([1.5, 0.5])).x, [1.5, 0.5])


def test_affine_subspace_projection_and_orthonormalization() -> None:
    # Span given with redundant, non-orthogonal directions.
    a = AffineSubspace(
        point=np.array([0.0, 0.0, 1.0]),
        directions=np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.0, 0.0]]),
    )
    assert a.directions.shape == (2, 3)
    res = project(a, np.array([3.0, 4.0, 9.0]))
    assert np.allclose(res.x, [3.0, 4.0, 1.0])


def test_whole_space_projection_is_identity() -> None:
    res = project(WholeSpace(), np.array([1.0, -2.0]))
    assert np.allclose(res.x, [1.0, -2.0])
    assert res.halfspace is None


def test_polyhedron_projection_dispatches_to_qp_via_distance() -> None:
    p = Polyhedron(
        (Halfspace(np.array([1.0, 0.0]), 0.0), Halfspace(np.array([0.0, 1.0]), 0.0))
    )
    assert distance(p, np.array([3.0, 4.0])) == pytest.approx(5.0)
    with pytest.raises(TypeError):
        project(p, np.array([3.0, 4.0]))


def test_cartesian_product_projects_blockwise() -> None:
    c = CartesianProduct(
        (Halfspace(np.array([1.0]), 0.0), Ball(np.array([0.0, 0.0]), 1.0))
    )
    assert c.dim == 3
    res = project(c, np.array([2.0, 3.0, 4.0]))
    assert np.allclose(res.x, [0.0, 0.6, 0.8])
    assert support(c, np.array([1.0, 0.0, 1.0])) == pytest.approx(1.0)


def test_supporting_halfspace_passes_through_projection() -> None:
    s = Ball(np.array([0.0, 0.0]), 1.0)
    z = np.array([3.0, 0.0])
    x = project(s, z).x
    h = supporting_halfspace(z, x)
    assert np.allclose(h.normal, [1.0, 0.0])
    assert h.offset == pytest.approx(1.0)
    assert isinstance(supporting_halfspace(z, z), WholeSpace)


def test_support_hand_values_and_infinite_directions() -> None:
    h = Halfspace(np.array([0.0, 1.0]), 2.0)
    assert support(h, np.array([0.0, 3.0])) == pytest.approx(6.0)
    assert math.isinf(support(h, np.array([1.0, 0.0])))
    assert math.isinf(support(h, np.array([0.0, -1.0])))
    assert support(h, np.zeros(2)) == 0.0
    b = Box(np.array([-1.0, 0.0]), np.array([2.0, 1.0]))
    assert support(b, np.array([1.0, -1.0])) == pytest.approx(2.0)
    ball = Ball(np.array([1.0, 1.0]), 2.0)
    assert support(ball, np.array([3.0, 4.0])) == pytest.approx(7.0 + 10.0)


def test_polyhedron_support_lp() -> None:
    p = Polyhedron(
        (
            Halfspace(np.array([1.0, 0.0]), 1.0),
            Halfspace(np.array([-1.0, 0.0]), 0.0),
            Halfspace(np.array([0.0, 1.0]), 2.0),
            Halfspace(np.array([0.0, -1.0]), 0.0),
        )
    )
    assert support(p, np.array([1.0, 1.0])) == pytest.approx(3.0)
    unbounded = Polyhedron((Halfspace(np.array([1.0, 0.0]), 1.0),))
    assert math.isinf(support(unbounded, np.array([0.0, 1.0])))


def test_scale_commutes_with_projection_on_a_ball() -> None:
    s = Ball(np.array([1.0, 0.0]), 1.0)
    z = np.array([4.0, 2.0])
    lhs = project(scale(s, 3.0), 3.0 * z).x
    rhs = 3.0 * project(s, z).x
    # scaling the set by t maps P_{tC}(t z) = t P_C(z)
    assert np.allclose(lhs, rhs)


@settings(max_examples=50, deadline=None)
@given(z=_vec2, w=_vec2)
def test_projection_is_nonexpansive_and_idempotent(z: np.ndarray, w: np.ndarray) -> None:
    for s in (
        Halfspace(np.array([1.0, 2.0]), 1.0),
        Ball(np.array([0.5, -0.5]), 1.5),
        Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        Hyperplane(np.array([1.0, -1.0]), 0.5),
    ):
        px, pw = project(s, z).x, project(s, w).x
        assert np.linalg.norm(px - pw) <= np.linalg.norm(z - w) + 1e-12
        assert np.allclose(project(s, px).x, px, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(z=_vec2, y=_vec2)
def test_support_dominates_inner_products_with_members(z: np.ndarray, y: np.ndarray) -> None:
    for s in (
        Halfspace(np.array([1.0, 2.0]), 1.0),
        Ball(np.array([0.5, -0.5]), 1.5),
        Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
    ):
        x = project(s, z).x  # a member of the set
        assert float(y @ x) <= support(s, y) + 1e-9 * max(1.0, float(np.linalg.norm(y)))


def test_dimension_mismatch_raises() -> None:
    with pytest.raises(ValueError):
        project(Ball(np.array([0.0, 0.0]), 1.0), np.array([1.0, 2.0, 3.0]))


def test_invalid_descriptors_raise() -> None:
    with pytest.raises(ValueError):
        Halfspace(np.array([0.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        Box(np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        Ball(np.array([0.0]), -1.0)
    with pytest.raises(ValueError):
        Polyhedron(())
    with pytest.raises(ValueError):
        scale(Ball(np.array([0.0]), 1.0), 0.0)
