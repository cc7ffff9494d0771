import math

import numpy as np
import pytest

from clearance_waves.errors import (
    DegenerateGraphError,
    InvalidSourceError,
    InvalidTargetError,
    NoPathError,
    UndefinedDistanceError,
)
from clearance_waves.reach import (
    COST_SCALE,
    INF_TICKS,
    build_graph,
    cost_from,
    cost_to,
    default_tau,
    extract_trajectory,
    hausdorff_distance,
    node_chain,
    reachable_set,
    rim_field,
    ticks_to_costs,
    to_ticks,
)
from clearance_waves.scene import BOUNDARY, OBSTACLE_INTERIOR, build_lattice, builtin_scene
from clearance_waves.systems import builtin_system


def _edge_costs(graph, a, b):
    lattice = graph.lattice
    pos = graph.edge_index([lattice.nearest(a)], [lattice.nearest(b)])[0]
    return None if pos < 0 else int(graph.cost_ticks[pos])


def test_tick_conversion():
    assert to_ticks(0.5) == 500_000
    assert to_ticks(math.inf) == INF_TICKS
    assert ticks_to_costs(np.array([COST_SCALE, INF_TICKS])).tolist() == [1.0, math.inf]


def test_edges_are_unique_per_node_pair(galaga_graph):
    keys = galaga_graph.src * galaga_graph.lattice.n_nodes + galaga_graph.dst
    assert len(np.unique(keys)) == galaga_graph.n_edges
    assert np.all(np.diff(keys) > 0)


def test_edge_costs_are_positive_ticks(galaga_graph):
    assert galaga_graph.cost_ticks.dtype == np.int64
    assert galaga_graph.min_edge_ticks >= 1


@pytest.mark.parametrize('target', [(-0.5, -0.95), (-0.55, -0.95), (-0.45, -0.95)])
def test_galaga_primitives_move_one_cell_up(galaga_graph, target):
    assert _edge_costs(galaga_graph, (-0.5, -1.0), target) == 50_000


def test_galaga_never_moves_down(galaga_graph):
    assert _edge_costs(galaga_graph, (-0.5, -1.0), (-0.5, -1.05)) is None


def test_no_edge_ends_in_the_obstacle_interior(galaga_graph):
    classes = galaga_graph.lattice.node_class
    assert not np.any(classes[galaga_graph.dst] == OBSTACLE_INTERIOR)
    assert not np.any(classes[galaga_graph.src] == OBSTACLE_INTERIOR)


def test_truncated_primitives_end_on_the_boundary(galaga_graph):
    truncated = galaga_graph.duration < galaga_graph.primitive_duration - 1e-12
    classes = galaga_graph.lattice.node_class[galaga_graph.dst[truncated]]
    assert np.all(classes == BOUNDARY)


def test_top_row_is_rim(galaga_graph):
    lattice = galaga_graph.lattice
    assert galaga_graph.rim[lattice.nearest((0.0, 4.0))]
    assert not galaga_graph.rim[lattice.nearest((0.0, 0.0))]


def test_edges_do_not_depend_on_worker_count(galaga, galaga_lattice, galaga_graph):
    threaded = build_graph(galaga, galaga_lattice, tau=galaga_graph.primitive_duration, workers=4)
    for name in ('src', 'dst', 'control_index', 'cost_ticks', 'duration', 'rim'):
        assert np.array_equal(getattr(threaded, name), getattr(galaga_graph, name)), name


def test_default_tau_is_clamped(galaga, galaga_lattice):
    tau = default_tau(galaga, galaga_lattice)
    fastest = math.sqrt(2)
    assert 0.05 / fastest <= tau <= 3 * 0.05 / fastest + 1e-12


def test_default_tau_moves_whole_cells(galaga, galaga_lattice, horizontal, horizontal_graph):
    assert default_tau(galaga, galaga_lattice) == pytest.approx(0.05)
    assert default_tau(horizontal, horizontal_graph.lattice) == pytest.approx(0.05)


def test_default_tau_keeps_horizontal_clearance_exact(horizontal, horizontal_graph):
    graph = build_graph(horizontal, horizontal_graph.lattice)
    assert graph.primitive_duration == pytest.approx(0.05)
    lattice = graph.lattice
    start = lattice.nearest((0.5, -0.5))
    assert cost_to(graph, lattice.boundary_ids).costs[start] == pytest.approx(0.5, abs=1e-6)


def test_tiny_tau_gives_a_degenerate_graph(galaga):
    lattice = build_lattice(builtin_scene('galaga-point'), 0.1)
    with pytest.raises(DegenerateGraphError):
        build_graph(galaga, lattice, tau=1e-4)


def test_distance_to_the_top_of_the_passage(galaga_graph):
    field = cost_from(galaga_graph, (-0.5, -1.0))
    assert field.value_at((-0.5, 0.0)) == pytest.approx(1.0, abs=0.1)
    assert field.value_at((-0.5, -2.0)) == math.inf


def test_search_engines_agree(galaga_graph):
    scipy_field = cost_from(galaga_graph, (-0.5, -1.0), engine='scipy', limit=1.5)
    heap_field = cost_from(galaga_graph, (-0.5, -1.0), engine='heap', limit=1.5)
    assert np.array_equal(scipy_field.ticks, heap_field.ticks)


def test_reverse_field_matches_forward_distance(galaga_graph):
    lattice = galaga_graph.lattice
    a, b = (-0.5, -1.0), (0.3, 0.2)
    forward = cost_from(galaga_graph, a)
    reverse = cost_to(galaga_graph, [lattice.nearest(b)])
    assert reverse.ticks[lattice.nearest(a)] == forward.ticks[lattice.nearest(b)]


def test_interior_source_is_rejected(galaga_graph):
    with pytest.raises(InvalidSourceError):
        cost_from(galaga_graph, (-3.0, -2.0))


def test_empty_target_set_is_rejected(galaga_graph):
    with pytest.raises(InvalidTargetError):
        cost_to(galaga_graph, [])


def test_interior_only_targets_are_rejected(galaga_graph):
    with pytest.raises(InvalidTargetError):
        cost_to(galaga_graph, [galaga_graph.lattice.nearest((-3.0, -2.0))])


def test_reachable_set_stays_in_the_upward_cone(galaga_graph):
    field = cost_from(galaga_graph, (-0.5, -1.0))
    points = galaga_graph.lattice.coords(reachable_set(field, 0.2))
    assert len(points) > 1
    assert np.all(points[:, 1] >= -1.0 - 1e-9)
    assert np.all(np.abs(points[:, 0] + 0.5) <= points[:, 1] + 1.0 + 1e-9)


def test_reachable_sets_are_nested(galaga_graph):
    field = cost_from(galaga_graph, (-0.5, -1.0))
    small = set(reachable_set(field, 0.2).tolist())
    large = set(reachable_set(field, 0.4).tolist())
    assert small < large


def test_extracted_trajectory_cost_is_the_field_value(galaga_graph):
    lattice = galaga_graph.lattice
    field = cost_from(galaga_graph, (-0.5, -1.0))
    end = lattice.nearest((0.0, 0.0))
    traj = extract_trajectory(field, end)
    assert traj.cost_ticks == field.ticks[end]
    assert traj.nodes[0] == lattice.nearest((-0.5, -1.0))
    assert traj.nodes[-1] == end
    assert traj.total_cost == pytest.approx(field.value(end))
    assert len(traj.segment_costs) == len(traj.nodes) - 1


def test_unreachable_node_has_no_chain(galaga_graph):
    field = cost_from(galaga_graph, (-0.5, -1.0))
    with pytest.raises(NoPathError):
        node_chain(field, galaga_graph.lattice.nearest((-0.5, -2.0)))


def test_hausdorff_of_an_empty_set_is_undefined(galaga_lattice):
    with pytest.raises(UndefinedDistanceError):
        hausdorff_distance(galaga_lattice, [], [0])


def test_hausdorff_on_a_line_lattice(galaga_lattice):
    a = [galaga_lattice.nearest((0.0, 0.0))]
    b = [galaga_lattice.nearest((0.3, 0.4)), galaga_lattice.nearest((0.0, 0.05))]
    assert hausdorff_distance(galaga_lattice, a, b) == pytest.approx(0.5)


def test_hausdorff_wraps_the_circle_axis():
    dubins = builtin_system('dubins')
    lattice = build_lattice(builtin_scene('dubins-corner'), [0.1, 0.1, 2 * math.pi / 16],
                            dubins.axis_topology)
    first = lattice.nearest([1.0, 1.0, -math.pi])
    last = lattice.nearest([1.0, 1.0, math.pi - 2 * math.pi / 16])
    assert hausdorff_distance(lattice, [first], [last]) == pytest.approx(2 * math.pi / 16)


def test_rim_field_measures_the_way_out_of_the_box(galaga_graph):
    rim = rim_field(galaga_graph)
    assert len(galaga_graph.rim_ids) > 0
    assert np.all(rim.ticks[galaga_graph.rim_ids] == 0)
    lattice = galaga_graph.lattice
    assert rim.costs[lattice.nearest((-2.0, 3.5))] == pytest.approx(0.5, abs=0.06)
