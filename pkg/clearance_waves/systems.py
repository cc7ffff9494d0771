"""
Control systems as sampled velocity multifunctions with running costs.

A system is evaluated in batches: ``velocity(states, controls)`` takes arrays of
shape (N, state_dim) and (N, control_dim) and returns (N, state_dim). Everything
downstream (primitive integration, Hamiltonians, certificates) relies on that.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from clearance_waves.errors import (
    CertificateInfeasibleError,
    ConfigurationError,
    DomainExitError,
)

# Configure logging
logger = logging.getLogger(__name__)

DEFAULT_CONTROL_SAMPLES = 32
DEFAULT_STEP = 0.01
SAFETY_FACTOR = 0.9
CERTIFICATE_SAMPLES = 10_000
DEFAULT_FAN_SIZE = 64
DOMAIN_HALF_WIDTH = 1.0e3
ARCLENGTH_FLOOR = 1.0e-3
# relative to max speed times |xi|; smaller Hamiltonian values count as zero
HAMILTONIAN_TOLERANCE = 1.0e-9


@dataclass(frozen=True)
class AxisTopology:
    kind: str = 'line'
    period: Optional[float] = None

    @property
    def is_circle(self):
        return self.kind == 'circle'


LINE = AxisTopology()


def circle(period):
    return AxisTopology('circle', float(period))


@dataclass(eq=False)
class ControlSystem:
    name: str
    state_dim: int
    axis_topology: Tuple[AxisTopology, ...]
    velocity: Callable[[np.ndarray, np.ndarray], np.ndarray]
    control_samples: np.ndarray
    running_cost: Callable[[np.ndarray, np.ndarray], np.ndarray]
    control_bounds: Tuple[Tuple[float, float], ...]
    convex_velocity_sets: bool = True
    domain: Tuple[Tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        self.control_samples = np.atleast_2d(np.asarray(self.control_samples, dtype=float))
        if not self.domain:
            self.domain = tuple(
                (-axis.period / 2, axis.period / 2) if axis.is_circle
                else (-DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH)
                for axis in self.axis_topology
            )

    @property
    def control_dim(self):
        return self.control_samples.shape[1]

    @property
    def has_circle_axes(self):
        return any(axis.is_circle for axis in self.axis_topology)

    def sampled_velocities(self, x):
        """Velocity set F(x) over the control samples, shape (J, state_dim)"""
        x = np.asarray(x, dtype=float)
        states = np.broadcast_to(x, (len(self.control_samples), self.state_dim))
        return self.velocity(states, self.control_samples)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    total_cost: float
    duration: float
    segment_costs: List[float] = field(default_factory=list)
    nodes: Optional[np.ndarray] = None
    cost_ticks: Optional[int] = None

    @property
    def samples(self):
        return list(zip(self.times, self.states, self.controls))

    @property
    def endpoint(self):
        return self.states[-1]

    def __len__(self):
        return len(self.times)


@dataclass(eq=False)
class DirectionalityCertificate:
    anchor: np.ndarray
    direction: np.ndarray
    target_radius: float
    target_point: np.ndarray
    hamiltonian_value: float
    velocity_bound: float
    lipschitz_bound: float
    neighborhood_radius: float
    horizon: float
    shrink_factor: Callable[[float], float]
    cost_bound: float

    def shrink_radius(self, rho):
        """Radius r(rho) of the ball around the anchor that cost rho must escape"""
        t = min(self.horizon, rho / self.cost_bound)
        return self.target_radius - self.shrink_factor(t) * self.target_radius

    def to_dict(self):
        return {
            'anchor': self.anchor.tolist(),
            'direction': self.direction.tolist(),
            'target_radius': self.target_radius,
            'target_point': self.target_point.tolist(),
            'hamiltonian_value': self.hamiltonian_value,
            'velocity_bound': self.velocity_bound,
            'lipschitz_bound': self.lipschitz_bound,
            'neighborhood_radius': self.neighborhood_radius,
            'horizon': self.horizon,
            'shrink_at_horizon': self.shrink_factor(self.horizon),
            'cost_bound': self.cost_bound,
        }


# Topology helpers

def wrap_states(states, topology):
    """Wrap circle axes of (..., d) states into [-P/2, P/2)"""
    states = np.array(states, dtype=float, copy=True)
    for axis, topo in enumerate(topology):
        if topo.is_circle:
            half = topo.period / 2
            states[..., axis] = np.mod(states[..., axis] + half, topo.period) - half
    return states


def state_difference(a, b, topology):
    """b - a with circle components taken as the shortest signed arc"""
    diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    for axis, topo in enumerate(topology):
        if topo.is_circle:
            half = topo.period / 2
            diff[..., axis] = np.mod(diff[..., axis] + half, topo.period) - half
    return diff


def state_distance(a, b, topology):
    return np.linalg.norm(state_difference(a, b, topology), axis=-1)


def uniform_control_samples(bounds, per_dim):
    """Uniform product grid over the control box, lexicographic order"""
    axes = [np.linspace(low, high, per_dim) for low, high in bounds]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=1)


# Built-in systems

def _unit_cost(states, velocities):
    return np.ones(len(states))


def _planar_arclength(states, velocities):
    return np.maximum(np.linalg.norm(velocities[:, :2], axis=1), ARCLENGTH_FLOOR)


RUNNING_COSTS = {
    'unit': _unit_cost,
    'planar-arclength': _planar_arclength,
}


def _galaga_velocity(states, controls):
    return np.stack([controls[:, 0], np.ones(len(states))], axis=1)


def _gen_galaga_velocity(states, controls):
    return np.stack([controls[:, 0], states[:, 2], controls[:, 1]], axis=1)


def _dubins_velocity(states, controls):
    heading = states[:, 2]
    return np.stack([np.cos(heading), np.sin(heading), controls[:, 0]], axis=1)


def _horizontal_velocity(states, controls):
    return np.stack([np.cos(controls[:, 0]), np.sin(controls[:, 0])], axis=1)


BUILTIN_SYSTEMS = {
    'galaga': {
        'state_dim': 2,
        'topology': (LINE, LINE),
        'velocity': _galaga_velocity,
        'control_bounds': ((-1.0, 1.0),),
    },
    'gen-galaga': {
        'state_dim': 3,
        'topology': (LINE, LINE, LINE),
        'velocity': _gen_galaga_velocity,
        'control_bounds': ((-1.0, 1.0), (-1.0, 1.0)),
    },
    'dubins': {
        'state_dim': 3,
        'topology': (LINE, LINE, circle(2 * math.pi)),
        'velocity': _dubins_velocity,
        'control_bounds': ((-1.0, 1.0),),
    },
    'horizontal': {
        'state_dim': 2,
        'topology': (LINE, LINE),
        'velocity': _horizontal_velocity,
        'control_bounds': ((0.0, math.pi),),
        # upper unit semicircle, not convex
        'convex': False,
    },
}


def builtin_system(name, control_samples=DEFAULT_CONTROL_SAMPLES, running_cost='unit'):
    """
    Look up a built-in control system by name

    Args:
        name: one of galaga, gen-galaga, dubins, horizontal
        control_samples: uniform samples per control dimension
        running_cost: 'unit' (psi = 1) or 'planar-arclength'

    Returns:
        ControlSystem
    """
    spec = BUILTIN_SYSTEMS.get(name)
    if spec is None:
        raise ConfigurationError(f"Unknown system: {name}")
    cost = RUNNING_COSTS.get(running_cost)
    if cost is None:
        raise ConfigurationError(f"Unknown running cost: {running_cost}")
    if int(control_samples) < 2:
        raise ConfigurationError("control_samples must be at least 2 per dimension")

    system = ControlSystem(
        name=name,
        state_dim=spec['state_dim'],
        axis_topology=spec['topology'],
        velocity=spec['velocity'],
        control_samples=uniform_control_samples(spec['control_bounds'], int(control_samples)),
        running_cost=cost,
        control_bounds=spec['control_bounds'],
        convex_velocity_sets=spec.get('convex', True),
    )
    if not system.convex_velocity_sets:
        logger.warning(f"System {name} has nonconvex velocity sets; SH1 is reported as failed")
    return system


# Hamiltonian and directions

def _snap_round_off(values, velocities, directions):
    scale = np.max(np.linalg.norm(velocities, axis=1)) * np.linalg.norm(directions, axis=-1)
    return np.where(np.abs(values) <= HAMILTONIAN_TOLERANCE * scale, 0.0, values)


def min_hamiltonian(system, x, xi):
    """min over sampled u of <f(x,u), xi>, with round-off snapped to zero"""
    velocities = system.sampled_velocities(x)
    xi = np.asarray(xi, dtype=float)
    return float(_snap_round_off(np.min(velocities @ xi), velocities, xi))


def fibonacci_directions(dim, count=DEFAULT_FAN_SIZE):
    """Roughly uniform unit directions on the sphere S^(dim-1)"""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if dim == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        radius = np.sqrt(1 - z ** 2)
        phi = math.pi * (3 - math.sqrt(5)) * np.arange(count)
        return np.stack([radius * np.cos(phi), radius * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(dim)
    fan = rng.normal(size=(count, dim))
    return fan / np.linalg.norm(fan, axis=1, keepdims=True)


def best_direction(system, x, fan=None):
    """Fan direction maximizing the minimal Hamiltonian (first index wins ties)"""
    if fan is None:
        fan = fibonacci_directions(system.state_dim)
    velocities = system.sampled_velocities(x)
    values = _snap_round_off(np.min(velocities @ fan.T, axis=0), velocities, fan)
    best = int(np.argmax(values))
    return fan[best], float(values[best])


# Integration

def rk4_step(system, x, u, cost, dt):
    """One RK4 step of the state augmented with accumulated running cost"""
    def derivative(state):
        v = system.velocity(state, u)
        return v, system.running_cost(state, v)

    k1, c1 = derivative(x)
    k2, c2 = derivative(x + 0.5 * dt * k1)
    k3, c3 = derivative(x + 0.5 * dt * k2)
    k4, c4 = derivative(x + dt * k3)
    x_next = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    cost_next = cost + dt / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)
    return x_next, cost_next


def outside_box(states, bounds, topology):
    mask = np.zeros(len(states), dtype=bool)
    for axis, (low, high) in enumerate(bounds):
        if topology[axis].is_circle:
            continue
        mask |= (states[:, axis] < low) | (states[:, axis] > high)
    return mask


def integrate_trajectory(system, x0, schedule, step=DEFAULT_STEP, box=None):
    """
    Fixed-step RK4 integration of a piecewise-constant control schedule

    Args:
        system: ControlSystem
        x0: initial state
        schedule: list of (control, duration) pairs
        step: nominal integration step; each segment uses ceil(duration/step)
            equal steps
        box: per-axis (low, high) bounds, defaults to the system domain

    Returns:
        Trajectory with one sample per integration node
    """
    if step <= 0:
        raise ConfigurationError("step must be positive")
    bounds = box if box is not None else system.domain
    topology = system.axis_topology

    x = wrap_states(np.asarray(x0, dtype=float).reshape(1, -1), topology)
    times = [0.0]
    states = [x[0].copy()]
    controls = []
    segment_costs = []
    t = 0.0

    def partial():
        applied = controls + [controls[-1] if controls else np.zeros(system.control_dim)]
        return Trajectory(
            times=np.array(times), states=np.array(states), controls=np.array(applied),
            total_cost=float(sum(segment_costs)), duration=times[-1],
            segment_costs=list(segment_costs),
        )

    for control, duration in schedule:
        if duration <= 0:
            raise ConfigurationError("schedule durations must be positive")
        u = np.asarray(control, dtype=float).reshape(1, -1)
        n_steps = max(1, int(math.ceil(duration / step - 1e-9)))
        dt = duration / n_steps
        cost = np.zeros(1)
        for i in range(n_steps):
            x_next, cost_next = rk4_step(system, x, u, cost, dt)
            x_next = wrap_states(x_next, topology)
            if outside_box(x_next, bounds, topology)[0]:
                segment_costs.append(float(cost[0]))
                raise DomainExitError(
                    f"Trajectory left the state box at t={t + (i + 1) * dt:.4f}",
                    trajectory=partial(),
                )
            x, cost = x_next, cost_next
            controls.append(u[0].copy())
            times.append(t + (i + 1) * dt)
            states.append(x[0].copy())
        t += duration
        # last node lands exactly on the segment end
        times[-1] = t
        segment_costs.append(float(cost[0]))

    return partial()


# Certificates

def _ball_samples(system, center, radius, count, rng):
    d = system.state_dim
    directions = rng.normal(size=(count, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / d)
    points = np.asarray(center, dtype=float) + directions * radii[:, None]
    return wrap_states(points, system.axis_topology)


def estimate_constants(system, center, radius, count=CERTIFICATE_SAMPLES, seed=0):
    """
    Sampled estimates of the velocity bound M, Lipschitz bound K and cost bound
    psi* over the ball of the given radius

    Returns:
        (M, K, psi_max) as floats
    """
    rng = np.random.default_rng(seed)
    points = np.vstack([np.asarray(center, dtype=float), _ball_samples(system, center, radius, count, rng)])
    controls = system.control_samples
    n_controls = len(controls)

    velocity_max = 0.0
    psi_max = 0.0
    chunk = max(1, 2 ** 20 // n_controls)
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        states = np.repeat(block, n_controls, axis=0)
        velocities = system.velocity(states, np.tile(controls, (len(block), 1)))
        velocity_max = max(velocity_max, float(np.max(np.linalg.norm(velocities, axis=1))))
        psi_max = max(psi_max, float(np.max(system.running_cost(states, velocities))))

    # Hausdorff-type Lipschitz ratio over disjoint sample pairs
    lipschitz = 0.0
    first, second = points[1::2], points[2::2]
    n_pairs = min(len(first), len(second))
    chunk = max(1, 2 ** 20 // (n_controls * n_controls))
    for start in range(0, n_pairs, chunk):
        a = first[start:min(start + chunk, n_pairs)]
        b = second[start:min(start + chunk, n_pairs)]
        fa = system.velocity(np.repeat(a, n_controls, axis=0), np.tile(controls, (len(a), 1)))
        fb = system.velocity(np.repeat(b, n_controls, axis=0), np.tile(controls, (len(b), 1)))
        fa = fa.reshape(len(a), n_controls, -1)
        fb = fb.reshape(len(b), n_controls, -1)
        gaps = np.linalg.norm(fa[:, :, None, :] - fb[:, None, :, :], axis=-1)
        spread = np.max(np.min(gaps, axis=2), axis=1)
        separation = state_distance(a, b, system.axis_topology)
        valid = separation > 0
        if np.any(valid):
            lipschitz = max(lipschitz, float(np.max(spread[valid] / separation[valid])))

    return velocity_max, lipschitz, psi_max


def compute_certificate(system, x, xi, r_star, sample_box_count=CERTIFICATE_SAMPLES, seed=0):
    """
    Directionality certificate at x for direction xi and target radius r_star

    Constants M, K and psi* are sampled over the ball of radius 2*r_star; R and
    t* apply the safety factor to the strict inequalities they must satisfy.
    """
    xi = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(xi))
    if r_star <= 0 or norm == 0:
        raise ConfigurationError("r_star must be positive and xi nonzero")
    anchor = np.asarray(x, dtype=float)
    target = wrap_states(anchor + (r_star / norm) * xi, system.axis_topology)
    h0 = min_hamiltonian(system, anchor, state_difference(anchor, target, system.axis_topology))
    if h0 <= 0:
        raise CertificateInfeasibleError(
            f"Minimal Hamiltonian {h0:.6g} is not positive at {anchor.tolist()} for xi={xi.tolist()}"
        )

    velocity_bound, lipschitz_bound, cost_bound = estimate_constants(
        system, anchor, 2 * r_star, sample_box_count, seed
    )
    radius = SAFETY_FACTOR * h0 / (2 * (velocity_bound + 3 * r_star * lipschitz_bound))
    horizon = SAFETY_FACTOR * radius / velocity_bound

    def shrink_factor(t):
        lower = math.sqrt(max(0.0, 1.0 - t * h0 / r_star ** 2))
        return 0.5 * (lower + 1.0)

    logger.info(
        f"Certificate at {anchor.tolist()}: h0={h0:.4g} M={velocity_bound:.4g} "
        f"K={lipschitz_bound:.4g} R={radius:.4g} t*={horizon:.4g}"
    )
    return DirectionalityCertificate(
        anchor=anchor,
        direction=xi,
        target_radius=float(r_star),
        target_point=target,
        hamiltonian_value=h0,
        velocity_bound=velocity_bound,
        lipschitz_bound=lipschitz_bound,
        neighborhood_radius=radius,
        horizon=horizon,
        shrink_factor=shrink_factor,
        cost_bound=cost_bound,
    )


def random_schedule(system, horizon, rng, max_segments=4):
    """Piecewise-constant schedule of random sampled controls lasting horizon"""
    n_segments = int(rng.integers(1, max_segments + 1))
    cuts = np.sort(rng.random(n_segments - 1)) * horizon
    edges = np.concatenate([[0.0], cuts, [horizon]])
    durations = np.diff(edges)
    picks = rng.integers(0, len(system.control_samples), size=n_segments)
    return [
        (system.control_samples[p], float(d))
        for p, d in zip(picks, durations) if d > 0
    ]
