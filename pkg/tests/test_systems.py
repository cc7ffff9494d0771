import math

import numpy as np
import pytest

from clearance_waves.errors import (
    CertificateInfeasibleError,
    ConfigurationError,
    DomainExitError,
)
from clearance_waves.systems import (
    ARCLENGTH_FLOOR,
    best_direction,
    builtin_system,
    compute_certificate,
    estimate_constants,
    fibonacci_directions,
    integrate_trajectory,
    min_hamiltonian,
    random_schedule,
    state_distance,
    uniform_control_samples,
    wrap_states,
)


def test_unknown_system_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        builtin_system('unicycle')


def test_unknown_running_cost_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        builtin_system('galaga', running_cost='fuel')


def test_control_samples_cover_the_control_box(galaga):
    samples = galaga.control_samples
    assert samples.shape == (32, 1)
    assert samples[0, 0] == -1.0
    assert samples[-1, 0] == 1.0


def test_product_grid_is_lexicographic():
    samples = uniform_control_samples(((-1.0, 1.0), (0.0, 1.0)), 3)
    assert samples.shape == (9, 2)
    assert samples[:3].tolist() == [[-1.0, 0.0], [-1.0, 0.5], [-1.0, 1.0]]


def test_galaga_always_climbs_at_unit_speed(galaga):
    velocities = galaga.sampled_velocities([0.3, -0.7])
    assert np.all(velocities[:, 1] == 1.0)
    assert np.all(np.abs(velocities[:, 0]) <= 1.0)


def test_dubins_heading_sets_planar_velocity():
    dubins = builtin_system('dubins', control_samples=9)
    velocities = dubins.sampled_velocities([0.0, 0.0, math.pi / 2])
    assert np.allclose(velocities[:, 0], 0.0, atol=1e-12)
    assert np.allclose(velocities[:, 1], 1.0)
    assert velocities[:, 2].tolist() == pytest.approx(np.linspace(-1, 1, 9).tolist())


def test_horizontal_is_flagged_nonconvex(horizontal):
    assert horizontal.convex_velocity_sets is False
    assert builtin_system('galaga').convex_velocity_sets is True


def test_planar_arclength_has_a_floor():
    system = builtin_system('gen-galaga', control_samples=5, running_cost='planar-arclength')
    state = np.array([[0.0, 0.0, 0.0]])
    velocity = system.velocity(state, np.array([[0.0, 0.5]]))
    assert system.running_cost(state, velocity)[0] == ARCLENGTH_FLOOR


@pytest.mark.parametrize('value, wrapped', [
    (3 * math.pi / 2, -math.pi / 2),
    (math.pi, -math.pi),
    (-math.pi, -math.pi),
    (0.25, 0.25),
])
def test_wrap_states_folds_the_circle_axis(value, wrapped):
    topology = builtin_system('dubins').axis_topology
    assert wrap_states([0.0, 0.0, value], topology)[2] == pytest.approx(wrapped)


def test_state_distance_takes_the_short_arc():
    topology = builtin_system('dubins').axis_topology
    a = [0.0, 0.0, -math.pi + 0.1]
    b = [0.0, 0.0, math.pi - 0.1]
    assert state_distance(a, b, topology) == pytest.approx(0.2)


@pytest.mark.parametrize('xi, expected', [((0, 1), 1.0), ((1, 0), -1.0), ((0, -1), -1.0)])
def test_min_hamiltonian_galaga(galaga, xi, expected):
    assert min_hamiltonian(galaga, [0.0, 0.0], xi) == pytest.approx(expected)


def test_best_direction_points_up_for_galaga(galaga):
    xi, value = best_direction(galaga, [0.0, 0.0])
    assert value == pytest.approx(1.0)
    assert xi == pytest.approx([0.0, 1.0], abs=1e-12)


def test_horizontal_has_no_strictly_positive_direction(horizontal):
    xi, value = best_direction(horizontal, [0.0, 0.0])
    assert value == 0.0
    assert min_hamiltonian(horizontal, [0.0, 0.0], xi) == 0.0


def test_round_off_hamiltonian_is_zero(horizontal):
    xi = [math.cos(math.pi / 2), 1.0]
    assert 0 < xi[0] < 1e-15
    assert min_hamiltonian(horizontal, [0.0, 0.0], xi) == 0.0
    assert min_hamiltonian(horizontal, [0.0, 0.0], [0.0, 1.0]) == 0.0


@pytest.mark.parametrize('dim', [1, 2, 3, 4])
def test_fibonacci_directions_are_unit(dim):
    fan = fibonacci_directions(dim, 40)
    assert fan.shape[1] == dim
    assert np.allclose(np.linalg.norm(fan, axis=1), 1.0)


def test_straight_ascent_is_exact(galaga):
    traj = integrate_trajectory(galaga, [0.0, 0.0], [((0.0,), 1.0)])
    assert traj.endpoint == pytest.approx([0.0, 1.0])
    assert traj.total_cost == pytest.approx(1.0)
    assert traj.duration == 1.0


def test_segment_costs_are_reported_per_segment(galaga):
    traj = integrate_trajectory(galaga, [0.0, 0.0], [((1.0,), 0.5), ((-1.0,), 0.5)])
    assert traj.endpoint == pytest.approx([0.0, 1.0])
    assert traj.segment_costs == pytest.approx([0.5, 0.5])
    assert len(traj.controls) == len(traj.states)


def test_leaving_the_box_keeps_the_partial_trajectory(galaga):
    with pytest.raises(DomainExitError) as excinfo:
        integrate_trajectory(galaga, [0.0, 0.0], [((0.0,), 2.0)], box=((-1, 1), (-1, 1)))
    partial = excinfo.value.trajectory
    assert partial is not None
    assert partial.endpoint[1] <= 1.0 + 1e-9
    assert partial.duration < 2.0


def test_nonpositive_durations_are_rejected(galaga):
    with pytest.raises(ConfigurationError):
        integrate_trajectory(galaga, [0.0, 0.0], [((0.0,), 0.0)])


def test_galaga_constants(galaga):
    velocity_bound, lipschitz, psi = estimate_constants(galaga, [0.0, 0.0], 0.4, count=500)
    assert velocity_bound == pytest.approx(math.sqrt(2))
    assert lipschitz == 0.0
    assert psi == 1.0


def test_certificate_radii_respect_their_bounds(galaga):
    cert = compute_certificate(galaga, [-1.0, 0.0], [0.0, 1.0], 0.2, sample_box_count=500)
    m, k = cert.velocity_bound, cert.lipschitz_bound
    assert cert.hamiltonian_value == pytest.approx(0.2)
    assert cert.target_point == pytest.approx([-1.0, 0.2])
    assert 0 < cert.neighborhood_radius < cert.hamiltonian_value / (2 * (m + 3 * 0.2 * k))
    assert 0 < cert.horizon < cert.neighborhood_radius / m
    assert 0.5 < cert.shrink_factor(cert.horizon) < 1.0
    assert set(cert.to_dict()) >= {'anchor', 'direction', 'horizon', 'shrink_at_horizon'}


def test_certificate_scale_of_xi_does_not_matter(galaga):
    a = compute_certificate(galaga, [-1.0, 0.0], [0.0, 1.0], 0.2, sample_box_count=200)
    b = compute_certificate(galaga, [-1.0, 0.0], [0.0, 5.0], 0.2, sample_box_count=200)
    assert a.hamiltonian_value == pytest.approx(b.hamiltonian_value)
    assert a.target_point == pytest.approx(b.target_point)


def test_certificate_needs_a_positive_hamiltonian(horizontal):
    with pytest.raises(CertificateInfeasibleError):
        compute_certificate(horizontal, [0.5, 0.5], [0.0, 1.0], 0.2, sample_box_count=200)


def test_random_schedule_lasts_the_horizon(galaga):
    rng = np.random.default_rng(3)
    for _ in range(20):
        schedule = random_schedule(galaga, 0.7, rng)
        assert sum(duration for _, duration in schedule) == pytest.approx(0.7)
        for control, _ in schedule:
            assert any(np.array_equal(control, row) for row in galaga.control_samples)
