import logging
import math

import numpy as np
import pytest

from clearance_waves.errors import ConfigurationError, ResolutionError, ResourceError
from clearance_waves.scene import (
    BOUNDARY,
    FREE,
    OBSTACLE_INTERIOR,
    build_lattice,
    builtin_scene,
    free_component_count,
    region_from_spec,
    scene_from_spec,
)
from clearance_waves.systems import builtin_system


def _class_at(lattice, point):
    return int(lattice.node_class[lattice.nearest(point)])


def test_unknown_scene_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        builtin_scene('maze')


@pytest.mark.parametrize('point, expected', [
    ((-1.0, -0.5), BOUNDARY),
    ((-2.0, 0.0), BOUNDARY),
    ((2.0, 1.0), BOUNDARY),
    ((-0.5, -0.5), FREE),
    ((-3.0, 2.0), FREE),
    ((-2.0, -1.0), OBSTACLE_INTERIOR),
    ((2.5, 0.0), OBSTACLE_INTERIOR),
])
def test_galaga_corner_node_classes(galaga_lattice, point, expected):
    assert _class_at(galaga_lattice, point) == expected


def test_box_extremes_are_lattice_nodes(galaga_lattice):
    assert galaga_lattice.axes[0][0] == -6.0
    assert galaga_lattice.axes[0][-1] == 3.0
    assert galaga_lattice.axes[1][-1] == 4.0
    assert galaga_lattice.shape == (181, 141)


def test_spacing_is_adjusted_to_fit_the_box(caplog):
    with caplog.at_level(logging.WARNING):
        lattice = build_lattice(builtin_scene('horiz-corner'), 0.3)
    assert lattice.spacing[0] == pytest.approx(3.5 / 12)
    assert lattice.axes[0][-1] == 2.5
    assert 'spacing adjusted' in caplog.text


def test_node_cap_is_a_resource_error():
    with pytest.raises(ResourceError):
        build_lattice(builtin_scene('galaga-corner'), 0.05, max_nodes=1000)


def test_nonpositive_spacing_is_rejected():
    with pytest.raises(ConfigurationError):
        build_lattice(builtin_scene('galaga-point'), [0.1, 0.0])


def test_topology_must_match_the_scene():
    dubins = builtin_system('dubins')
    with pytest.raises(ConfigurationError):
        build_lattice(builtin_scene('galaga-corner'), 0.1, dubins.axis_topology)


def test_circle_axis_wraps_neighbors():
    dubins = builtin_system('dubins')
    lattice = build_lattice(builtin_scene('dubins-corner'), [0.1, 0.1, 2 * math.pi / 16],
                            dubins.axis_topology)
    assert lattice.shape[2] == 16
    assert lattice.axes[2][0] == pytest.approx(-math.pi)
    node = lattice.nearest([1.0, 1.0, -math.pi])
    neighbors = lattice.neighbor_ids([node])[0]
    headings = lattice.coords(neighbors[4:])[:, 2]
    assert sorted(np.round(headings, 9)) == sorted(np.round([math.pi - 2 * math.pi / 16, -math.pi + 2 * math.pi / 16], 9))


def test_ball_is_open(galaga_lattice):
    ball = galaga_lattice.ball([-0.5, -0.5], 0.1)
    points = {tuple(np.round(p, 9)) for p in galaga_lattice.coords(ball)}
    assert (-0.45, -0.45) in points
    assert (-0.5, -0.5) in points
    assert (-0.4, -0.5) not in points
    assert (-0.5, -0.6) not in points


def test_nearest_outside_the_box_raises(galaga_lattice):
    with pytest.raises(ConfigurationError):
        galaga_lattice.nearest([10.0, 0.0])


def test_node_id_marks_outside_points(galaga_lattice):
    ids = galaga_lattice.node_id([[0.0, 0.0], [0.0, 50.0]])
    assert ids[0] >= 0
    assert ids[1] == -1


def test_custom_halfspace_scene():
    scene = scene_from_spec({
        'box': [[-1, 1], [-1, 1]],
        'obstacle': {'halfspace': {'normal': [1, 0], 'offset': 0}},
    })
    lattice = build_lattice(scene, 0.25)
    assert _class_at(lattice, (-0.5, 0.0)) == OBSTACLE_INTERIOR
    assert _class_at(lattice, (0.0, 0.0)) == BOUNDARY
    assert _class_at(lattice, (0.5, 0.0)) == FREE


def test_complement_swaps_closed_and_interior():
    region = region_from_spec({'complement': {'box': [[0, 1], [0, 1]]}}, 2)
    points = np.array([[0.5, 0.5], [0.0, 0.5], [2.0, 2.0]])
    assert region.closed(points).tolist() == [False, True, True]
    assert region.interior(points).tolist() == [False, False, True]


def test_union_and_intersection():
    union = region_from_spec({'union': [{'box': [[0, 1], [0, 1]]}, {'box': [[2, 3], [0, 1]]}]}, 2)
    both = region_from_spec({'intersection': [{'box': [[0, 2], [0, 1]]}, {'box': [[1, 3], [0, 1]]}]}, 2)
    points = np.array([[0.5, 0.5], [1.5, 0.5], [2.5, 0.5]])
    assert union.closed(points).tolist() == [True, False, True]
    assert both.closed(points).tolist() == [False, True, False]


@pytest.mark.parametrize('spec', [
    {'sphere': {'radius': 1}},
    {'box': [[0, 1]]},
    {'box': [[1, 0], [0, 1]]},
    {'halfspace': {'normal': [0, 0]}},
    [1, 2],
])
def test_malformed_regions_are_rejected(spec):
    with pytest.raises(ConfigurationError):
        region_from_spec(spec, 2)


def test_missed_obstacle_is_flagged():
    lattice = build_lattice(builtin_scene('galaga-point'), 0.3)
    assert lattice.obstacle_missed
    assert len(lattice.boundary_ids) == 0


def test_point_obstacle_is_a_single_boundary_node():
    lattice = build_lattice(builtin_scene('galaga-point'), 0.05)
    assert not lattice.obstacle_missed
    assert lattice.coords(lattice.boundary_ids).tolist() == [[0.0, 0.0]]


@pytest.mark.parametrize('point', [(-1.05, 0.1), (-1.15, 0.3), (-1.35, 0.7), (-2.5, 3.0)])
def test_nodes_on_the_slanted_wall_are_boundary(point):
    lattice = build_lattice(builtin_scene('galaga-slant'), 0.05)
    assert lattice.node_class[lattice.nearest(point)] == BOUNDARY


def test_halfspace_face_nodes_are_boundary():
    scene = scene_from_spec({
        'box': [[-1, 1], [-1, 1]],
        'obstacle': {'halfspace': {'normal': [2.0, 1.0], 'offset': -0.2}},
    })
    lattice = build_lattice(scene, 0.05)
    assert lattice.node_class[lattice.nearest((-0.15, 0.1))] == BOUNDARY
    assert lattice.node_class[lattice.nearest((-0.15, 0.15))] == FREE


def test_free_components_around_the_corner(galaga_lattice):
    assert free_component_count(galaga_lattice, [-1.0, 0.0], 0.4) == 1


def test_zero_width_slit_splits_the_ball(slit_lattice):
    assert free_component_count(slit_lattice, [0.0, 0.0], 0.3) == 2


def test_component_radius_below_resolution(galaga_lattice):
    with pytest.raises(ResolutionError):
        free_component_count(galaga_lattice, [-1.0, 0.0], 0.05)
