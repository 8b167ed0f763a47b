"""
Tests for boundary curves, signed distance and transfer-path anchoring.
"""
import numpy as np
import pytest

from unfitted_hdg.core.errors import BoundaryDefinitionError, ExpressionError
from unfitted_hdg.geometry.boundary import (
    anchor_point,
    anchor_points,
    boundary_from_config,
    ellipse,
    kite,
    level_set,
    signed_distance,
)
from unfitted_hdg.geometry.expressions import compile_expression, parse_expression


def test_circle_signed_distance(unit_circle):
    points = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, -1.0], [0.3, 0.4]])
    assert signed_distance(unit_circle, points) == pytest.approx([-1.0, 1.0, 0.0, -0.5], abs=1e-12)
    assert signed_distance(unit_circle, np.array([0.6, 0.0])) == pytest.approx(-0.4, abs=1e-12)


@pytest.mark.parametrize("radius", [0.05, 0.1, 0.2, 0.3, 0.5])
def test_signed_distance_deep_inside_the_circle(unit_circle, radius):
    angles = np.linspace(0.0, 2.0 * np.pi, 13)[:-1] + 0.1
    points = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    assert signed_distance(unit_circle, points) == pytest.approx(np.full(12, radius - 1.0), abs=1e-12)


def test_signed_distance_on_a_grid_inside_the_kite():
    boundary = kite()
    xs, ys = np.meshgrid(np.linspace(-0.8, 0.6, 15), np.linspace(-0.8, 0.8, 15))
    points = np.column_stack([xs.ravel(), ys.ravel()])
    values = signed_distance(boundary, points)
    polyline_distance = np.min(np.linalg.norm(points[:, None, :] - boundary.polyline[None], axis=2), axis=1)
    assert np.all(np.isfinite(values))
    assert np.all(np.abs(values) <= polyline_distance + 1e-12)
    assert np.all(polyline_distance - np.abs(values) < 5e-4)


def test_circle_area_and_diameter(unit_circle):
    assert unit_circle.area == pytest.approx(np.pi, rel=1e-12)
    assert unit_circle.diameter == pytest.approx(2.0, rel=1e-6)


def test_anchor_point_on_circle(unit_circle):
    result = anchor_point(unit_circle, np.array([0.5, 0.0]), np.array([1.0, 0.0]))
    assert result.length == pytest.approx(0.5, abs=1e-10)
    assert result.anchor == pytest.approx([1.0, 0.0], abs=1e-10)


def test_anchor_of_boundary_point_has_zero_length(unit_circle):
    batch = anchor_points(unit_circle, np.array([[0.0, 1.0]]), np.array([[0.0, 1.0]]))
    assert batch.lengths[0] == 0.0
    assert not batch.multiple_roots[0]


def test_batched_anchors_lie_on_the_kite(rng):
    boundary = kite()
    angles = rng.uniform(0.0, 2.0 * np.pi, size=25)
    origins = 0.3 * rng.uniform(-1.0, 1.0, size=(25, 2))
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    batch = anchor_points(boundary, origins, directions)
    assert np.all(batch.lengths > 0)
    assert np.abs(boundary.signed_distance(batch.anchors)).max() < 1e-9


def test_level_set_matches_circle(unit_circle):
    boundary = level_set("x**2 + y**2 - 1").validate()
    points = np.array([[0.0, 0.2], [0.9, -0.1], [1.5, 1.5]])
    assert boundary.signed_distance(points) == pytest.approx(unit_circle.signed_distance(points), abs=1e-9)
    assert boundary.area == pytest.approx(np.pi, rel=1e-6)


def test_ellipse_normals_point_outward():
    boundary = ellipse(a=1.0, b=0.5)
    points, normals = boundary.sample_arclength(0.1)
    assert np.all(np.einsum("nd,nd->n", points, normals) > 0)
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0)


def test_boundary_from_config_catalog():
    boundary = boundary_from_config({"kind": "circle", "center": [0.5, -0.5], "radius": 2.0})
    assert boundary.area == pytest.approx(4.0 * np.pi, rel=1e-10)
    assert signed_distance(boundary, np.array([0.5, -0.5])) == pytest.approx(-2.0, abs=1e-10)


def test_parametric_curve_from_config():
    boundary = boundary_from_config({"kind": "parametric", "x": "2*cos(2*pi*t)", "y": "sin(2*pi*t)"})
    assert boundary.area == pytest.approx(2.0 * np.pi, rel=1e-10)


def test_open_curve_is_rejected():
    with pytest.raises(BoundaryDefinitionError):
        boundary_from_config({"kind": "parametric", "x": "t", "y": "t**2"})


def test_clockwise_curve_is_rejected():
    with pytest.raises(BoundaryDefinitionError):
        boundary_from_config({"kind": "parametric", "x": "cos(2*pi*t)", "y": "-sin(2*pi*t)"})


def test_unknown_kind_names_the_field():
    with pytest.raises(BoundaryDefinitionError) as info:
        boundary_from_config({"kind": "square"})
    assert info.value.field == "boundary.kind"


def test_expression_grammar():
    f = compile_expression("2 + sin(u)^2", ("u",))
    assert f(np.array([0.0, np.pi / 2])) == pytest.approx([2.0, 3.0])
    with pytest.raises(ExpressionError):
        parse_expression("x + z", ("x", "y"))
    with pytest.raises(ExpressionError):
        parse_expression("", ("x",))


def test_constant_expressions_broadcast():
    f = compile_expression("3", ("x", "y"))
    assert f(np.zeros((2, 5)), np.zeros((2, 5))).shape == (2, 5)
