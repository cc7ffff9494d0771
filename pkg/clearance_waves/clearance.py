"""
Clearance field, witness map, propagating waves and the wave envelope.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from clearance_waves.errors import ConfigurationError, NoObstacleError
from clearance_waves.reach import (
    COST_SCALE,
    INF_TICKS,
    cost_to,
    probe_states,
    rim_field,
    sampled_velocities,
    ticks_to_costs,
    to_ticks,
)
from clearance_waves.scene import EDGE_TOLERANCE, shift_mask
from clearance_waves.systems import best_direction

# Configure logging
logger = logging.getLogger(__name__)

KAPPA_FACTOR = 4.0


@dataclass(eq=False)
class ClearanceField:
    graph: object
    field: object
    rim: object

    @property
    def lattice(self):
        return self.graph.lattice

    @property
    def ticks(self):
        return self.field.ticks

    @property
    def values(self):
        return self.field.costs

    @cached_property
    def witness(self):
        """Boundary node each optimal chain ends at, -1 for infinite clearance"""
        return self.field.origin()

    @cached_property
    def lower_bound_ticks(self):
        """min(clr, cost to the lattice rim): a lower bound of the untruncated clearance"""
        return np.minimum(self.field.ticks, self.rim.ticks)

    def value(self, node):
        return self.field.value(node)

    def value_at(self, point):
        return self.field.value_at(point)

    def witness_at(self, point):
        node = self.lattice.nearest(point)
        w = int(self.witness[node])
        return None if w < 0 else self.lattice.coords([w])[0]


def clearance_field(graph, lattice=None, engine='scipy'):
    """
    Multi-source reverse search from every BOUNDARY node

    Args:
        graph: PrimitiveGraph
        lattice: defaults to the graph's lattice
        engine: search engine name

    Returns:
        ClearanceField
    """
    lattice = lattice if lattice is not None else graph.lattice
    targets = lattice.boundary_ids
    if len(targets) == 0:
        raise NoObstacleError(f"Scene {lattice.scene.name} has no BOUNDARY node at this spacing")
    field = cost_to(graph, targets, engine=engine)
    rim = rim_field(graph, engine=engine)
    cf = ClearanceField(graph=graph, field=field, rim=rim)
    free = lattice.free_mask
    finite = free & field.finite
    logger.info(
        f"Clearance field: {int(finite.sum())} of {int(free.sum())} FREE nodes finite, "
        f"{len(targets)} boundary targets"
    )
    return cf


def wave(cf, rho):
    """FREE nodes with clearance strictly below rho"""
    if rho <= 0:
        raise ConfigurationError("rho must be positive")
    return np.flatnonzero(cf.lattice.free_mask & (cf.ticks < to_ticks(rho)))


@dataclass(eq=False)
class EnvelopeMap:
    rho_min: np.ndarray
    rho_max: np.ndarray
    envelope: np.ndarray
    boundary_adjacent: np.ndarray
    kappa: float

    @property
    def jump(self):
        """Local clearance oscillation rho_max - rho_min in cost units"""
        jump = np.zeros(len(self.rho_min))
        finite_min = self.rho_min != INF_TICKS
        finite_max = self.rho_max != INF_TICKS
        both = finite_min & finite_max
        jump[both] = (self.rho_max[both] - self.rho_min[both]) / COST_SCALE
        jump[finite_min & ~finite_max] = np.inf
        return jump

    @property
    def envelope_ids(self):
        return np.flatnonzero(self.envelope)

    @property
    def boundary_adjacent_ids(self):
        return np.flatnonzero(self.boundary_adjacent)

    def flagged(self, node):
        return bool(self.envelope[node] or self.boundary_adjacent[node])


def default_kappa(system, lattice, n_probe=256):
    """
    Jump threshold 4 * h * psi_max * M_max / h0_est

    h0_est is the best minimal Hamiltonian over the direction fan at the box
    center, or the slowest nonzero sampled speed when that is not positive.
    """
    states = probe_states(lattice, n_probe)
    velocities = sampled_velocities(system, states)
    speeds = np.linalg.norm(velocities, axis=1)
    velocity_max = float(speeds.max())
    psi_max = float(np.max(system.running_cost(
        np.repeat(states, len(system.control_samples), axis=0), velocities
    )))
    center = np.array([(axis[0] + axis[-1]) / 2 for axis in lattice.axes])
    _, h0_est = best_direction(system, center)
    if h0_est <= 0:
        nonzero = speeds[speeds > 1e-12]
        h0_est = float(nonzero.min()) if len(nonzero) else 1.0
    kappa = KAPPA_FACTOR * lattice.max_spacing * psi_max * velocity_max / h0_est
    logger.info(f"Default kappa={kappa:.4g} (M={velocity_max:.4g}, psi={psi_max:.4g}, h0={h0_est:.4g})")
    return kappa


def envelope(cf, kappa=None):
    """
    Flag FREE nodes whose clearance jumps by more than kappa to a face-neighbor

    rho_min is the clearance itself; rho_max also takes the rim lower bound of
    every FREE face-neighbor, so +inf only propagates from neighbors that
    cannot leave the lattice either.
    """
    lattice = cf.lattice
    if kappa is None:
        kappa = default_kappa(cf.graph.system, lattice)
    if kappa <= 0:
        raise ConfigurationError("kappa must be positive")

    clr = cf.ticks
    free_grid = lattice.grid(lattice.free_mask)
    bound_grid = lattice.grid(cf.lower_bound_ticks)
    rho_max = lattice.grid(clr).copy()
    for a, topo in enumerate(lattice.axis_topology):
        for offset in (-1, 1):
            neighbor_free = shift_mask(free_grid, a, offset, topo.is_circle)
            neighbor_value = shift_mask(bound_grid, a, offset, topo.is_circle, fill=-1)
            np.maximum(rho_max, np.where(neighbor_free, neighbor_value, -1), out=rho_max)
    rho_max = rho_max.ravel()

    finite = clr != INF_TICKS
    gap = np.zeros(len(clr), dtype=np.int64)
    gap[finite] = rho_max[finite] - clr[finite]
    flagged = lattice.free_mask & finite & (gap > to_ticks(kappa))
    near_boundary = lattice.has_neighbor_in(lattice.boundary_mask)

    em = EnvelopeMap(
        rho_min=clr.copy(),
        rho_max=rho_max,
        envelope=flagged & ~near_boundary,
        boundary_adjacent=flagged & near_boundary,
        kappa=float(kappa),
    )
    logger.info(
        f"Envelope (kappa={kappa:.4g}): {int(em.envelope.sum())} nodes, "
        f"{int(em.boundary_adjacent.sum())} boundary-adjacent"
    )
    return em


def summarize(cf, em=None):
    """Summary document of a clearance field and its envelope"""
    lattice = cf.lattice
    free = lattice.free_mask
    values = cf.values[free]
    finite = values[np.isfinite(values)]
    summary = {
        'nodes': lattice.n_nodes,
        'shape': list(lattice.shape),
        'spacing': lattice.spacing.tolist(),
        'free_nodes': int(free.sum()),
        'boundary_nodes': int(lattice.boundary_mask.sum()),
        'interior_nodes': int(lattice.n_nodes - free.sum() - lattice.boundary_mask.sum()),
        'obstacle_missed': bool(lattice.obstacle_missed),
        'finite_clearance_nodes': int(len(finite)),
        'infinite_clearance_nodes': int(len(values) - len(finite)),
        'min_finite_clearance': float(finite.min()) if len(finite) else None,
        'max_finite_clearance': float(finite.max()) if len(finite) else None,
        'rim_nodes': int(cf.graph.rim.sum()),
    }
    if em is not None:
        summary.update({
            'kappa': em.kappa,
            'envelope_nodes': int(em.envelope.sum()),
            'boundary_adjacent_nodes': int(em.boundary_adjacent.sum()),
        })
    return summary


def closed_form_clearance(name, points):
    """
    Analytic clearance of the built-in planar examples, +inf where unreachable

    Supports 'horizontal' (horiz-corner), 'galaga-corner' and 'galaga-slant'.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x1, x2 = points[:, 0], points[:, 1]
    if name == 'horizontal':
        return np.where(x2 <= EDGE_TOLERANCE, np.maximum(x1, 0.0), np.inf)
    if name == 'galaga-corner':
        # the left passage wall is only reachable from below the line x1 + x2 = -1
        passage = (x1 >= -1 - EDGE_TOLERANCE) & (x1 + x2 <= -1 + EDGE_TOLERANCE)
        right = 2 - x1
        return np.where(passage, np.minimum(x1 + 1, right), np.minimum(right, x1 + 5))
    if name == 'galaga-slant':
        return np.maximum(x1 + 1, 2 * x1 + 2 + x2)
    raise ConfigurationError(f"No closed-form clearance for {name}")


def ticks_to_value(ticks):
    return math.inf if ticks == INF_TICKS else ticks / COST_SCALE


__all__ = [
    'ClearanceField', 'EnvelopeMap', 'clearance_field', 'wave', 'envelope',
    'default_kappa', 'summarize', 'closed_form_clearance', 'ticks_to_costs',
]
