"""
Checks run on computed fields: clearance behavior along trajectories, the
principle of optimality, envelope propagation, shelf/cliff classification of
boundary nodes, the H1/H2 hypotheses, envelope-generator detection,
persistent boundary points, uniform penetration and the exact graph-level
property suite.

Every check returns a report dict built by format_report. A failed verdict is
a report with passed False, never an exception.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from clearance_waves.clearance import closed_form_clearance, wave
from clearance_waves.errors import (
    CertificateInfeasibleError,
    ConfigurationError,
    DomainExitError,
    InadmissibleTrajectoryError,
    ResolutionError,
)
from clearance_waves.export_utils import jsonable
from clearance_waves.reach import (
    COST_SCALE,
    INF_TICKS,
    cost_from,
    cost_from_nodes,
    cost_to,
    distance_rows,
    extract_trajectory,
    hausdorff_distance,
    node_chain,
    probe_states,
    reachable_set,
    sampled_velocities,
    to_ticks,
)
from clearance_waves.scene import (
    BOUNDARY,
    OBSTACLE_INTERIOR,
    free_component_count,
    shift_mask,
)
from clearance_waves.systems import (
    DEFAULT_STEP,
    best_direction,
    compute_certificate,
    estimate_constants,
    integrate_trajectory,
    min_hamiltonian,
    random_schedule,
    state_distance,
    wrap_states,
)

# Configure logging
logger = logging.getLogger(__name__)

PASSED = 'passed'
FAILED = 'failed'
NOT_APPLICABLE = 'not-applicable'

SHELF = 'SHELF'
CLIFF = 'CLIFF'
PROBE_FACTOR = 10.0
GENERATOR_LEVELS = (8.0, 4.0, 2.0)
PROPAGATION_FRACTION = 0.8
CERTIFICATE_CHECK_SAMPLES = 2_000


def format_report(check, passed, message, parameters=None, evidence=None, status=None):
    """
    Uniform report envelope returned by every check
    """
    if status is None:
        status = NOT_APPLICABLE if passed is None else (PASSED if passed else FAILED)
    return jsonable({
        'check': check,
        'passed': passed,
        'status': status,
        'message': message,
        'parameters': parameters or {},
        'evidence': evidence or {},
    })


def not_applicable(check, message, parameters=None, evidence=None):
    return format_report(check, None, message, parameters, evidence, status=NOT_APPLICABLE)


def _as_node(lattice, x):
    """Node id for a node id or a state"""
    if isinstance(x, (int, np.integer)):
        return int(x)
    return lattice.nearest(x)


def _coords(lattice, node):
    return lattice.coords([node])[0].tolist()


def _value(ticks):
    return math.inf if ticks == INF_TICKS else ticks / COST_SCALE


# Clearance along trajectories

def trajectory_nodes(lattice, traj):
    """Lattice nodes visited by a trajectory, consecutive repeats removed"""
    if traj.nodes is not None:
        return np.asarray(traj.nodes, dtype=np.int64)
    ids = lattice.node_id(traj.states)
    if np.any(ids < 0):
        raise InadmissibleTrajectoryError("Trajectory leaves the lattice box")
    keep = np.ones(len(ids), dtype=bool)
    keep[1:] = ids[1:] != ids[:-1]
    return ids[keep]


def straight_trajectory(system, x0, control, duration, step=DEFAULT_STEP):
    """Constant-control trajectory, used for the ascent checks"""
    return integrate_trajectory(system, x0, [(np.atleast_1d(control), duration)], step=step)


def _pair_ticks(graph, a, b):
    """Edge cost a->b, or the graph cost-distance when no single edge joins them"""
    edges = graph.edge_index(a, b)
    ticks = np.where(edges >= 0, graph.cost_ticks[np.maximum(edges, 0)], INF_TICKS)
    missing = np.flatnonzero(edges < 0)
    if len(missing):
        sources, inverse = np.unique(a[missing], return_inverse=True)
        rows = distance_rows(graph, sources)
        ticks[missing] = rows[inverse, b[missing]]
    return ticks


def check_clearance_along(cf, traj, graph=None, kappa=None):
    """
    Clearance may drop by at most the step cost along an admissible trajectory
    and may jump upward; upward jumps above kappa are listed
    """
    check = 'clearance_along'
    graph = graph if graph is not None else cf.graph
    lattice = graph.lattice
    nodes = trajectory_nodes(lattice, traj)
    if np.any(lattice.node_class[nodes] == OBSTACLE_INTERIOR):
        raise InadmissibleTrajectoryError("Trajectory visits an obstacle-interior node")
    kappa_ticks = to_ticks(kappa) if kappa is not None else None
    parameters = {'kappa': kappa, 'nodes': len(nodes), 'start': _coords(lattice, nodes[0])}
    if len(nodes) < 2:
        return format_report(check, True, 'Zero-length trajectory', parameters,
                             {'jumps': [], 'violations': []})

    a, b = nodes[:-1], nodes[1:]
    step_ticks = _pair_ticks(graph, a, b)
    if np.any(step_ticks == INF_TICKS):
        bad = int(np.flatnonzero(step_ticks == INF_TICKS)[0])
        raise InadmissibleTrajectoryError(
            f"No admissible graph path between consecutive nodes at index {bad}"
        )
    clr_a, clr_b = cf.ticks[a], cf.ticks[b]

    violations = []
    jumps = []
    for i in range(len(a)):
        ta, tb = int(clr_a[i]), int(clr_b[i])
        if ta == INF_TICKS and tb == INF_TICKS:
            continue
        if ta != INF_TICKS and tb != INF_TICKS and ta - tb > int(step_ticks[i]):
            violations.append({'index': i, 'drop': (ta - tb) / COST_SCALE,
                               'step_cost': int(step_ticks[i]) / COST_SCALE})
        if kappa_ticks is None or ta == INF_TICKS:
            continue
        if tb == INF_TICKS or tb - ta > kappa_ticks:
            jumps.append({
                'index': i + 1,
                'node': _coords(lattice, b[i]),
                'from': _value(ta),
                'to': _value(tb),
            })

    values = [_value(int(t)) for t in cf.ticks[nodes]]
    finite = [v for v in values if math.isfinite(v)]
    evidence = {
        'jumps': jumps,
        'violations': violations,
        'first_clearance': values[0],
        'last_clearance': values[-1],
        'min_clearance': min(finite) if finite else None,
        'max_clearance': max(finite) if finite else None,
    }
    passed = not violations
    message = f"{len(jumps)} upward jumps above kappa, {len(violations)} downward violations"
    return format_report(check, passed, message, parameters, evidence)


def check_optimality_principle(cf, x):
    """clr(x) - clr(pi(t_i)) equals the prefix cost at every node of the witness chain"""
    check = 'optimality_principle'
    lattice = cf.lattice
    node = _as_node(lattice, x)
    parameters = {'x': _coords(lattice, node)}
    if cf.ticks[node] == INF_TICKS:
        return not_applicable(check, 'Clearance is infinite at x', parameters)
    traj = extract_trajectory(cf.field, node)
    edges = cf.graph.edge_index(traj.nodes[:-1], traj.nodes[1:])
    prefix = np.concatenate([[0], np.cumsum(cf.graph.cost_ticks[edges])]).astype(np.int64)
    deviation = (int(cf.ticks[node]) - cf.ticks[traj.nodes]) - prefix
    worst = int(np.max(np.abs(deviation)))
    evidence = {
        'clearance': _value(int(cf.ticks[node])),
        'chain_length': len(traj.nodes),
        'witness': _coords(lattice, traj.nodes[-1]),
        'max_deviation_ticks': worst,
    }
    passed = worst == 0 and lattice.node_class[traj.nodes[-1]] == BOUNDARY
    return format_report(check, passed, f"Chain of {len(traj.nodes)} nodes, deviation {worst} ticks",
                         parameters, evidence)


def check_envelope_propagation(cf, em, x, min_fraction=PROPAGATION_FRACTION):
    """Fraction of the witness chain's interior nodes that stay on the envelope"""
    check = 'envelope_propagation'
    lattice = cf.lattice
    node = _as_node(lattice, x)
    parameters = {'x': _coords(lattice, node), 'min_fraction': min_fraction}
    if cf.ticks[node] == INF_TICKS:
        return not_applicable(check, 'Clearance is infinite at x', parameters)
    if not em.flagged(node):
        return format_report(check, False, 'x is not flagged as an envelope node', parameters)
    chain = node_chain(cf.field, node)
    interior = chain[1:-1]
    if len(interior) == 0:
        return format_report(check, True, 'Witness one edge away', parameters,
                             {'fraction': 1.0, 'chain_length': len(chain)})
    on_envelope = em.envelope[interior] | em.boundary_adjacent[interior]
    fraction = float(on_envelope.mean())
    evidence = {
        'fraction': fraction,
        'chain_length': len(chain),
        'witness': _coords(lattice, chain[-1]),
        'off_envelope': [_coords(lattice, n) for n in interior[~on_envelope]],
    }
    return format_report(check, fraction >= min_fraction,
                         f"{fraction:.2%} of interior chain nodes flagged", parameters, evidence)


# Boundary structure

@dataclass(eq=False)
class BoundaryClassification:
    lattice: object
    boundary_ids: np.ndarray
    inflow_ticks: np.ndarray
    rho_probe: float

    @property
    def shelf(self):
        return self.inflow_ticks >= to_ticks(self.rho_probe)

    @property
    def shelf_mask(self):
        mask = np.zeros(self.lattice.n_nodes, dtype=bool)
        mask[self.boundary_ids[self.shelf]] = True
        return mask

    def label(self, node):
        pos = np.searchsorted(self.boundary_ids, node)
        if pos >= len(self.boundary_ids) or self.boundary_ids[pos] != node:
            raise ConfigurationError(f"Node {node} is not a BOUNDARY node")
        return SHELF if self.shelf[pos] else CLIFF

    def label_at(self, point):
        return self.label(self.lattice.nearest(point))

    def to_dict(self):
        return {
            'rho_probe': self.rho_probe,
            'boundary_nodes': len(self.boundary_ids),
            'shelf_nodes': int(self.shelf.sum()),
            'cliff_nodes': int((~self.shelf).sum()),
        }


def default_rho_probe(system, lattice):
    """10 * h * psi_max"""
    states = probe_states(lattice)
    velocities = sampled_velocities(system, states)
    psi_max = float(np.max(system.running_cost(
        np.repeat(states, len(system.control_samples), axis=0), velocities
    )))
    return PROBE_FACTOR * lattice.max_spacing * psi_max


def classify_boundary(graph, lattice=None, rho_probe=None, engine='scipy'):
    """
    Label BOUNDARY nodes SHELF (no FREE node reaches them within rho_probe) or CLIFF

    Args:
        graph: PrimitiveGraph
        lattice: defaults to the graph's lattice
        rho_probe: probe cost, default_rho_probe() when None

    Returns:
        BoundaryClassification
    """
    lattice = lattice if lattice is not None else graph.lattice
    if rho_probe is None:
        rho_probe = default_rho_probe(graph.system, lattice)
    if rho_probe <= 0:
        raise ConfigurationError("rho_probe must be positive")
    boundary = lattice.boundary_ids
    free = lattice.free_ids
    if len(free) == 0:
        inflow = np.full(len(boundary), INF_TICKS, dtype=np.int64)
    else:
        field = cost_from_nodes(graph, free, engine=engine, limit=rho_probe)
        inflow = field.ticks[boundary]
    bc = BoundaryClassification(
        lattice=lattice, boundary_ids=boundary, inflow_ticks=inflow, rho_probe=float(rho_probe),
    )
    logger.info(
        f"Boundary classification at rho_probe={rho_probe:.4g}: "
        f"{int(bc.shelf.sum())} shelf, {int((~bc.shelf).sum())} cliff"
    )
    return bc


def check_H1(system, graph, bc, y0, xi=None, r_star=0.2, seed=0,
             certificate_samples=CERTIFICATE_CHECK_SAMPLES):
    """
    H1(a): the minimal Hamiltonian at y0 along xi is positive.
    H1(b): every BOUNDARY node in the open ball B_{r*}(y*) is a shelf node.
    """
    check = 'h1'
    lattice = graph.lattice
    node = _as_node(lattice, y0)
    y = lattice.coords([node])[0]
    searched = xi is None
    if searched:
        xi, _ = best_direction(system, y)
    xi = np.asarray(xi, dtype=float)
    parameters = {'y0': y.tolist(), 'xi': xi.tolist(), 'r_star': r_star, 'fan_searched': searched}
    if not np.any(xi):
        raise ConfigurationError("xi must be nonzero")
    if lattice.node_class[node] != BOUNDARY:
        return format_report(check, False, 'y0 is not a BOUNDARY node', parameters)

    hamiltonian = min_hamiltonian(system, y, xi)
    h1a = hamiltonian > 0
    target = wrap_states(y + (r_star / np.linalg.norm(xi)) * xi, lattice.axis_topology)
    ball = lattice.ball(target, r_star)
    in_ball = ball[lattice.node_class[ball] == BOUNDARY]
    shelf = bc.shelf_mask[in_ball]
    h1b = bool(np.all(shelf))

    evidence = {
        'h1a': bool(h1a),
        'hamiltonian': hamiltonian,
        'h1b': h1b,
        'target_point': target.tolist(),
        'boundary_in_ball': len(in_ball),
        'cliff_in_ball': [_coords(lattice, n) for n in in_ball[~shelf][:20]],
        'certificate': None,
    }
    if h1a:
        try:
            cert = compute_certificate(system, y, xi, r_star, certificate_samples, seed)
            evidence['certificate'] = cert.to_dict()
        except CertificateInfeasibleError as e:
            evidence['certificate_error'] = str(e)
    failing = [name for name, ok in (('H1(a)', h1a), ('H1(b)', h1b)) if not ok]
    message = 'H1 holds' if not failing else f"{', '.join(failing)} failed"
    return format_report(check, h1a and h1b, message, parameters, evidence)


def check_H2(lattice, y0, radii):
    """Free space is locally connected: one FREE component in every ball B_r(y0)"""
    check = 'h2'
    node = _as_node(lattice, y0)
    center = lattice.coords([node])[0]
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ConfigurationError("H2 radii must be positive and decreasing")
    counts = [free_component_count(lattice, center, r) for r in radii]
    parameters = {'y0': center.tolist(), 'radii': radii}
    evidence = {'component_counts': counts}
    if any(c == 0 for c in counts):
        return format_report(check, False, 'No FREE node near y0 (isolated boundary)',
                             parameters, evidence, status='isolated-boundary')
    passed = all(c == 1 for c in counts)
    return format_report(check, passed, f"Component counts {counts}", parameters, evidence)


def check_accessibility(graph, y0, rho, engine='scipy'):
    """
    Forward: y0 reaches some FREE node at cost below rho.
    Reverse: some FREE node reaches y0 at cost below rho.
    """
    check = 'accessibility'
    lattice = graph.lattice
    node = _as_node(lattice, y0)
    free = lattice.free_mask
    limit_ticks = to_ticks(rho)
    forward = cost_from(graph, lattice.coords([node])[0], engine=engine, limit=rho)
    reverse = cost_to(graph, [node], engine=engine, limit=rho)
    fwd = forward.ticks[free]
    rev = reverse.ticks[free]
    forward_cost = int(fwd.min()) if len(fwd) else INF_TICKS
    reverse_cost = int(rev.min()) if len(rev) else INF_TICKS
    forward_ok = forward_cost < limit_ticks
    reverse_ok = reverse_cost < limit_ticks
    parameters = {'y0': _coords(lattice, node), 'rho': rho}
    evidence = {
        'forward': bool(forward_ok),
        'reverse': bool(reverse_ok),
        'forward_cost': _value(forward_cost),
        'reverse_cost': _value(reverse_cost),
    }
    failing = [name for name, ok in (('forward', forward_ok), ('reverse', reverse_ok)) if not ok]
    message = 'y0 is forward and reverse accessible' if not failing else f"{' and '.join(failing)} accessibility failed"
    return format_report(check, forward_ok and reverse_ok, message, parameters, evidence)


# Envelope generators

@dataclass(eq=False)
class EnvGenReport:
    candidate: List[float]
    radii: List[float]
    thresholds: List[float]
    hits: List[Optional[dict]]
    verdict: bool
    h1_result: Optional[dict] = None
    h2_result: Optional[dict] = None
    accessibility_result: Optional[dict] = None
    inherited_from: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def failing_hypotheses(self):
        failing = []
        if self.h1_result is not None:
            evidence = self.h1_result['evidence']
            if not evidence.get('h1a', True):
                failing.append('H1(a)')
            if not evidence.get('h1b', True):
                failing.append('H1(b)')
        if self.h2_result is not None and not self.h2_result['passed']:
            failing.append('H2')
        if self.accessibility_result is not None:
            evidence = self.accessibility_result['evidence']
            if not evidence['forward']:
                failing.append('forward accessibility')
            if not evidence['reverse']:
                failing.append('reverse accessibility')
        return failing

    def to_report(self, check='envelope_generator'):
        parameters = {'y0': self.candidate, 'radii': self.radii, 'thresholds': self.thresholds}
        evidence = {
            'verdict': self.verdict,
            'hits': self.hits,
            'failing_hypotheses': self.failing_hypotheses,
            'h1': self.h1_result,
            'h2': self.h2_result,
            'accessibility': self.accessibility_result,
            'inherited_from': self.inherited_from,
        }
        evidence.update(self.extra)
        found = sum(1 for hit in self.hits if hit is not None)
        message = f"Envelope generator: {self.verdict} ({found}/{len(self.hits)} levels hit)"
        return format_report(check, self.verdict, message, parameters, evidence)


def default_generator_levels(kappa):
    levels = [factor * kappa for factor in GENERATOR_LEVELS]
    return levels, list(levels)


def detect_envelope_generator(cf, em, y0, radii=None, thresholds=None):
    """
    For every level k look for an envelope node in B_{r_k}(y0) with clr < rho_k

    Args:
        cf: ClearanceField
        em: EnvelopeMap
        y0: BOUNDARY node id or state
        radii: decreasing radii, default {8, 4, 2} * kappa
        thresholds: decreasing clearance thresholds, same default

    Returns:
        EnvGenReport
    """
    lattice = cf.lattice
    node = _as_node(lattice, y0)
    default_radii, default_thresholds = default_generator_levels(em.kappa)
    radii = [float(r) for r in (radii if radii is not None else default_radii)]
    thresholds = [float(t) for t in (thresholds if thresholds is not None else default_thresholds)]
    if len(radii) != len(thresholds) or not radii:
        raise ConfigurationError("radii and thresholds must be nonempty lists of equal length")
    for seq in (radii, thresholds):
        if any(b >= a for a, b in zip(seq, seq[1:])):
            raise ConfigurationError("radii and thresholds must be decreasing")
    if min(radii) < 3 * lattice.max_spacing:
        raise ResolutionError(
            f"Smallest radius {min(radii)} is below three lattice spacings ({3 * lattice.max_spacing})"
        )

    center = lattice.coords([node])[0]
    hits = []
    for r, rho in zip(radii, thresholds):
        ball = lattice.ball(center, r)
        candidates = ball[em.envelope[ball] & (cf.ticks[ball] < to_ticks(rho))]
        if len(candidates) == 0:
            hits.append(None)
            continue
        best = candidates[np.lexsort((candidates, cf.ticks[candidates]))[0]]
        hits.append({
            'node': _coords(lattice, best),
            'clearance': _value(int(cf.ticks[best])),
            'distance': float(state_distance(center, lattice.coords([best])[0], lattice.axis_topology)),
        })
    verdict = all(hit is not None for hit in hits)
    logger.info(f"Envelope generator at {center.tolist()}: {verdict}")
    return EnvGenReport(
        candidate=center.tolist(), radii=radii, thresholds=thresholds, hits=hits, verdict=verdict,
    )


def analyze_envelope_generator(cf, em, bc, y0, xi=None, r_star=0.2, h2_radii=None,
                               radii=None, thresholds=None, access_rho=None, seed=0):
    """Detection plus every hypothesis of the generator theorem, in one report"""
    graph = cf.graph
    lattice = cf.lattice
    node = _as_node(lattice, y0)
    report = detect_envelope_generator(cf, em, node, radii, thresholds)
    report.h1_result = check_H1(graph.system, graph, bc, node, xi=xi, r_star=r_star, seed=seed)
    if h2_radii is None:
        h2_radii = [2 * r_star, r_star, r_star / 2]
    h2_radii = [r for r in h2_radii if r >= 2 * lattice.max_spacing]
    if h2_radii:
        report.h2_result = check_H2(lattice, node, h2_radii)
    rho = access_rho if access_rho is not None else bc.rho_probe
    report.accessibility_result = check_accessibility(graph, node, rho)
    return report


def _circular_gap(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def sweep_envelope_generators(cf, em, bc, base_point, angles, axis=2, inherit=(),
                              **analysis_kwargs):
    """
    Run analyze_envelope_generator at base_point with one coordinate swept
    over angles; angles in inherit copy the verdict of the nearest swept angle
    (the larger one on ties)

    Returns:
        list of per-angle reports
    """
    if not angles:
        raise ConfigurationError("angles must be nonempty")
    reports = []
    swept = []
    for angle in angles:
        point = np.array(base_point, dtype=float)
        point[axis] = angle
        analysis_kwargs_local = dict(analysis_kwargs)
        xi = analysis_kwargs_local.pop('xi', None)
        if xi == 'heading':
            xi = [math.cos(angle), math.sin(angle), 0.0]
        report = analyze_envelope_generator(cf, em, bc, point, xi=xi, **analysis_kwargs_local)
        report.extra['angle'] = angle
        swept.append((angle, report))
        reports.append(report.to_report('generator_sweep_angle'))
    for angle in inherit:
        nearest_angle, nearest = min(swept, key=lambda pair: (round(_circular_gap(pair[0], angle), 9), -pair[0]))
        point = np.array(base_point, dtype=float)
        point[axis] = angle
        inherited = EnvGenReport(
            candidate=point.tolist(), radii=nearest.radii, thresholds=nearest.thresholds,
            hits=nearest.hits, verdict=nearest.verdict, inherited_from=nearest_angle,
            extra={'angle': angle},
        )
        report = inherited.to_report('generator_sweep_angle')
        report['status'] = 'inherited'
        reports.append(report)
    return reports


# Persistent boundary points and penetration

def discrete_boundary(lattice, values, rho_ticks):
    """Nodes with value <= rho that have an in-box face-neighbor with value > rho"""
    inside = values <= rho_ticks
    outside = lattice.grid(~inside)
    hit = np.zeros_like(outside)
    for a, topo in enumerate(lattice.axis_topology):
        for offset in (-1, 1):
            hit |= shift_mask(outside, a, offset, topo.is_circle, fill=False)
    return np.flatnonzero(inside & hit.ravel())


def check_persistent_boundary(graph, x, r, rho_list, xi=None, engine='scipy', seed=0):
    """
    Nodes z != x in B_r(x) on the discrete boundary of R_rho(x) (and of
    F_rho(x)) for every rho in rho_list
    """
    check = 'persistent_boundary'
    lattice = graph.lattice
    system = graph.system
    node = _as_node(lattice, x)
    center = lattice.coords([node])[0]
    rho_list = [float(rho) for rho in rho_list]
    parameters = {'x': center.tolist(), 'r': r, 'rho_list': rho_list}
    if not rho_list or any(b <= a for a, b in zip(rho_list, rho_list[1:])):
        raise ConfigurationError("rho_list must be nonempty and increasing")
    if xi is None:
        xi, _ = best_direction(system, center)
    try:
        cert = compute_certificate(system, center, xi, r, CERTIFICATE_CHECK_SAMPLES, seed)
    except CertificateInfeasibleError as e:
        return not_applicable(check, str(e), parameters)

    if to_ticks(rho_list[0]) < graph.min_edge_ticks:
        return format_report(
            check, None, 'First rho is below the cheapest edge; sets are {x} only',
            parameters, {'degenerate_radius': True, 'min_edge_cost': graph.min_edge_ticks / COST_SCALE},
            status='degenerate-radius',
        )

    ball = set(lattice.ball(center, r).tolist()) - {node}
    limit = rho_list[-1] * 1.5
    results = {}
    for name, field in (('reverse', cost_to(graph, [node], engine=engine, limit=limit)),
                        ('forward', cost_from(graph, center, engine=engine, limit=limit))):
        persistent = set(ball)
        for rho in rho_list:
            persistent &= set(discrete_boundary(lattice, field.ticks, to_ticks(rho)).tolist())
        ordered = sorted(persistent)
        results[name] = [_coords(lattice, n) for n in ordered]

    evidence = {
        'reverse_persistent': results['reverse'],
        'forward_persistent': results['forward'],
        'certificate': cert.to_dict(),
        'degenerate_radius': False,
    }
    passed = bool(results['reverse']) and bool(results['forward'])
    message = (f"{len(results['reverse'])} reverse and {len(results['forward'])} forward "
               f"persistent boundary nodes")
    return format_report(check, passed, message, parameters, evidence)


def check_uniform_penetration(system, cert, n_samples=500, seed=0, step=DEFAULT_STEP):
    """
    Random schedules from the anchor stay inside B_{eta*(t*) r*}(x*) at t*,
    approach x* monotonically, and leave B_{r(rho)}(anchor) once they cost rho.

    The integration tolerance only relaxes the monotone approach; the cost ball
    must be escaped with a non-negative margin, reported as min_escape_margin.
    """
    check = 'uniform_penetration'
    if cert is None:
        return not_applicable(check, 'No certificate')
    parameters = {'anchor': cert.anchor.tolist(), 'n_samples': n_samples, 'seed': seed, 'step': step}
    if n_samples == 0:
        return format_report(check, True, 'No samples requested', parameters, {'failures': 0})

    rng = np.random.default_rng(seed)
    topology = system.axis_topology
    radius = cert.shrink_factor(cert.horizon) * cert.target_radius
    tolerance = 10 * step * cert.velocity_bound
    failures = []
    max_endpoint = 0.0
    min_escape_margin = math.inf
    for i in range(n_samples):
        schedule = random_schedule(system, cert.horizon, rng)
        try:
            traj = integrate_trajectory(system, cert.anchor, schedule, step=step)
        except DomainExitError:
            failures.append({'sample': i, 'reason': 'domain exit'})
            continue
        to_target = state_distance(traj.states, cert.target_point, topology)
        endpoint_gap = float(to_target[-1])
        max_endpoint = max(max_endpoint, endpoint_gap)
        if not endpoint_gap < radius:
            failures.append({'sample': i, 'reason': 'endpoint outside ball', 'distance': endpoint_gap})
            continue
        if np.any(np.diff(to_target) > tolerance):
            failures.append({'sample': i, 'reason': 'approach not monotone'})
            continue
        # the cost ball must be left with no slack; tolerance only bounds the approach
        escape = float(state_distance(cert.anchor, traj.endpoint, topology))
        margin = escape - cert.shrink_radius(traj.total_cost)
        min_escape_margin = min(min_escape_margin, margin)
        if margin < 0:
            failures.append({'sample': i, 'reason': 'cost ball not escaped', 'distance': escape})

    evidence = {
        'failures': len(failures),
        'first_failures': failures[:10],
        'ball_radius': radius,
        'max_endpoint_distance': max_endpoint,
        'min_escape_margin': min_escape_margin if math.isfinite(min_escape_margin) else None,
        'horizon': cert.horizon,
    }
    return format_report(check, not failures, f"{n_samples - len(failures)}/{n_samples} schedules pass",
                         parameters, evidence)


def check_certificate(system, x, xi, r_star, expected=None, tolerance=0.05,
                      samples=None, seed=0):
    """Compute a certificate and compare its constants to expected values"""
    check = 'certificate'
    parameters = {'x': list(map(float, x)), 'xi': list(map(float, xi)), 'r_star': r_star,
                  'expected': expected or {}, 'tolerance': tolerance}
    try:
        cert = compute_certificate(system, x, xi, r_star,
                                   samples or CERTIFICATE_CHECK_SAMPLES * 5, seed)
    except CertificateInfeasibleError as e:
        return not_applicable(check, str(e), parameters)
    values = cert.to_dict()
    mismatches = {}
    for key, want in (expected or {}).items():
        got = values.get(key)
        if got is None:
            raise ConfigurationError(f"Unknown certificate field: {key}")
        scale = max(abs(want), 1e-12)
        if abs(got - want) > tolerance * scale and abs(got - want) > 1e-9:
            mismatches[key] = {'expected': want, 'actual': got}
    valid = (cert.hamiltonian_value > 0
             and cert.neighborhood_radius < cert.hamiltonian_value / (
                 2 * (cert.velocity_bound + 3 * r_star * cert.lipschitz_bound))
             and cert.horizon < cert.neighborhood_radius / cert.velocity_bound)
    eta = cert.shrink_factor(cert.horizon)
    valid = valid and 0 < eta < 1 and eta ** 2 > 1 - cert.horizon * cert.hamiltonian_value / r_star ** 2
    evidence = {'certificate': values, 'mismatches': mismatches, 'inequalities_hold': valid}
    return format_report(check, valid and not mismatches,
                         'Certificate constants match' if not mismatches else f"{len(mismatches)} mismatches",
                         parameters, evidence)


def check_velocity_bounds(system, lattice, count=CERTIFICATE_CHECK_SAMPLES, seed=0):
    """Sampled standing hypotheses: bounded velocities, Lipschitz bound, psi > 0, convexity flag"""
    check = 'velocity_bounds'
    center = np.array([(axis[0] + axis[-1]) / 2 for axis in lattice.axes])
    half_diagonal = 0.5 * float(np.linalg.norm([axis[-1] - axis[0] for axis in lattice.axes]))
    velocity_bound, lipschitz_bound, psi_max = estimate_constants(
        system, center, half_diagonal, count, seed
    )
    states = probe_states(lattice)
    velocities = sampled_velocities(system, states)
    psi = system.running_cost(np.repeat(states, len(system.control_samples), axis=0), velocities)
    evidence = {
        'velocity_bound': velocity_bound,
        'lipschitz_bound': lipschitz_bound,
        'psi_max': psi_max,
        'psi_min': float(psi.min()),
        'sh1_convex': bool(system.convex_velocity_sets),
    }
    passed = math.isfinite(velocity_bound) and float(psi.min()) > 0 and system.convex_velocity_sets
    message = 'Standing hypotheses hold on samples' if passed else 'Standing hypotheses violated (see evidence)'
    return format_report(check, passed, message, {'count': count, 'seed': seed}, evidence)


# Closed-form comparisons and envelope geometry

def _region_mask(lattice, region):
    coords = lattice.all_coords()
    mask = np.ones(lattice.n_nodes, dtype=bool)
    for a, bounds in enumerate(region or []):
        if bounds is None:
            continue
        low, high = bounds
        mask &= (coords[:, a] >= low - 1e-9) & (coords[:, a] <= high + 1e-9)
    return mask, coords


def check_clearance_oracle(cf, oracle, region=None, tol=None):
    """
    Compare FREE-node clearances in the region to a closed form

    Nodes where the closed form is +inf must report +inf; elsewhere the field
    must be finite and within tol (default 3h).
    """
    check = 'clearance_oracle'
    lattice = cf.lattice
    tol = 3 * lattice.max_spacing if tol is None else float(tol)
    mask, coords = _region_mask(lattice, region)
    nodes = np.flatnonzero(mask & lattice.free_mask)
    parameters = {'oracle': oracle, 'region': region, 'tol': tol}
    if len(nodes) == 0:
        return not_applicable(check, 'No FREE node in region', parameters)
    expected = closed_form_clearance(oracle, coords[nodes])
    actual = cf.values[nodes]
    infinite = np.isinf(expected)
    wrong_inf = infinite & np.isfinite(actual)
    finite = ~infinite
    errors = np.abs(actual[finite] - expected[finite])
    errors = np.where(np.isfinite(errors), errors, np.inf)
    max_error = float(errors.max()) if len(errors) else 0.0
    worst = nodes[finite][int(np.argmax(errors))] if len(errors) else None
    evidence = {
        'nodes': len(nodes),
        'finite_nodes': int(finite.sum()),
        'infinite_nodes': int(infinite.sum()),
        'max_error': max_error,
        'worst_node': _coords(lattice, worst) if worst is not None else None,
        'finite_where_infinite': int(wrong_inf.sum()),
    }
    passed = max_error <= tol and not np.any(wrong_inf)
    return format_report(check, passed, f"Max |clr - closed form| = {max_error:.4g}",
                         parameters, evidence)


def _segment_distance(points, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    t = np.clip(((points - a) @ ab) / float(ab @ ab), 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def check_envelope_near_segment(cf, em, a, b, max_clr, tol=None, flagged_points=()):
    """
    Every envelope node with clr < max_clr lies within tol (default 2h) of the
    segment [a, b]; each of flagged_points snaps to an envelope node
    """
    check = 'envelope_segment'
    lattice = cf.lattice
    tol = 2 * lattice.max_spacing if tol is None else float(tol)
    nodes = np.flatnonzero(em.envelope & (cf.ticks < to_ticks(max_clr)))
    parameters = {'a': list(a), 'b': list(b), 'max_clr': max_clr, 'tol': tol,
                  'flagged_points': [list(p) for p in flagged_points]}
    coords = lattice.coords(nodes)[:, :len(a)]
    distances = _segment_distance(coords, a, b) if len(nodes) else np.array([])
    far = nodes[distances > tol] if len(nodes) else nodes
    missing = [list(p) for p in flagged_points if not em.envelope[lattice.nearest(p)]]
    evidence = {
        'envelope_nodes': len(nodes),
        'max_distance': float(distances.max()) if len(distances) else 0.0,
        'off_segment': [_coords(lattice, n) for n in far[:20]],
        'unflagged_points': missing,
    }
    passed = len(far) == 0 and not missing
    return format_report(check, passed, f"{len(far)} envelope nodes off the segment", parameters, evidence)


# Graph-level properties

def _random_graph_nodes(rng, graph, count, mask=None):
    pool = graph.nodes if mask is None else np.flatnonzero(mask)
    if len(pool) == 0:
        return np.array([], dtype=np.int64)
    return pool[rng.integers(0, len(pool), size=count)]


def _pick_finite(rng, row, fallback):
    finite = np.flatnonzero(row != INF_TICKS)
    return int(finite[rng.integers(0, len(finite))]) if len(finite) else int(fallback)


def check_quasi_metric(graph, n_triples=100, seed=0, batch=10):
    """Nonnegativity, identity and the triangle inequality on random triples, exact"""
    check = 'quasi_metric'
    rng = np.random.default_rng(seed)
    starts = _random_graph_nodes(rng, graph, n_triples)
    violations = []
    checked = 0
    for lo in range(0, len(starts), batch):
        a = starts[lo:lo + batch]
        rows_a = distance_rows(graph, a)
        b = np.array([_pick_finite(rng, row, a_i) for row, a_i in zip(rows_a, a)], dtype=np.int64)
        rows_b = distance_rows(graph, b)
        c = np.array([_pick_finite(rng, row, b_i) for row, b_i in zip(rows_b, b)], dtype=np.int64)
        for i in range(len(a)):
            d_ab, d_bc, d_ac = int(rows_a[i, b[i]]), int(rows_b[i, c[i]]), int(rows_a[i, c[i]])
            if rows_a[i, a[i]] != 0 or min(d_ab, d_bc, d_ac) < 0:
                violations.append({'triple': [int(a[i]), int(b[i]), int(c[i])], 'reason': 'identity'})
            elif d_ab != INF_TICKS and d_bc != INF_TICKS and d_ac > d_ab + d_bc:
                violations.append({'triple': [int(a[i]), int(b[i]), int(c[i])], 'reason': 'triangle',
                                   'd_ac': d_ac, 'd_ab_plus_d_bc': d_ab + d_bc})
            checked += 1
    return format_report(check, not violations, f"{checked} triples, {len(violations)} violations",
                         {'n_triples': n_triples, 'seed': seed}, {'violations': violations[:10]})


def check_sublevel_continuity(field, rho, deltas):
    """
    Hausdorff distance between F_rho and F_{rho + delta} shrinks as delta
    shrinks (within one lattice spacing)
    """
    check = 'sublevel_continuity'
    lattice = field.lattice
    deltas = sorted((float(d) for d in deltas), reverse=True)
    base = reachable_set(field, rho)
    distances = [hausdorff_distance(lattice, base, reachable_set(field, rho + d)) for d in deltas]
    slack = lattice.max_spacing
    monotone = all(b <= a + slack for a, b in zip(distances, distances[1:]))
    parameters = {'rho': rho, 'deltas': deltas}
    evidence = {'distances': distances}
    return format_report(check, monotone, f"Hausdorff distances {[round(d, 4) for d in distances]}",
                         parameters, evidence)


def check_nesting_with_closure(field, rho, mu):
    """
    For rho < mu, every node of F_rho and every finite-valued face-neighbor of
    it in the free-space closure has value < mu
    """
    check = 'nesting_with_closure'
    if not rho < mu:
        raise ConfigurationError("rho must be below mu")
    lattice = field.lattice
    inner = reachable_set(field, rho)
    neighbors = lattice.neighbor_ids(inner).ravel()
    neighbors = neighbors[neighbors >= 0]
    neighbors = neighbors[lattice.node_class[neighbors] != OBSTACLE_INTERIOR]
    finite = neighbors[field.ticks[neighbors] != INF_TICKS]
    closure = np.union1d(inner, finite)
    outside = closure[field.ticks[closure] >= to_ticks(mu)]
    evidence = {
        'inner_nodes': len(inner),
        'closure_nodes': len(closure),
        'unreachable_neighbors': int(len(neighbors) - len(finite)),
        'outside_nodes': [_coords(lattice, n) for n in outside[:10]],
    }
    return format_report(check, len(outside) == 0, f"{len(outside)} closure nodes at value >= mu",
                         {'rho': rho, 'mu': mu}, evidence)


def check_lipschitz_in_x(graph, x, rho, offsets, max_ratio=10.0, engine='scipy'):
    """
    Hausdorff distance of sublevel sets F_rho(x) and F_rho(x + offset) over
    the offset length, bounded by max_ratio
    """
    check = 'lipschitz_in_x'
    lattice = graph.lattice
    x = np.asarray(x, dtype=float)
    base = reachable_set(cost_from(graph, x, engine=engine, limit=rho), rho)
    ratios = []
    for offset in offsets:
        offset = np.asarray(offset, dtype=float)
        y = wrap_states(x + offset, lattice.axis_topology)
        moved = reachable_set(cost_from(graph, y, engine=engine, limit=rho), rho)
        shift = float(state_distance(lattice.coords([lattice.nearest(x)])[0],
                                     lattice.coords([lattice.nearest(y)])[0], lattice.axis_topology))
        if shift == 0:
            continue
        ratios.append(hausdorff_distance(lattice, base, moved) / shift)
    parameters = {'x': x.tolist(), 'rho': rho, 'offsets': [list(map(float, o)) for o in offsets],
                  'max_ratio': max_ratio}
    evidence = {'ratios': ratios, 'substitution': 'sublevel sets F_rho in place of attainable sets'}
    passed = bool(ratios) and max(ratios) <= max_ratio
    return format_report(check, passed, f"Max Hausdorff ratio {max(ratios) if ratios else None}",
                         parameters, evidence)


def run_property_suite(graph, cf, em, seed=0, n_triples=100, n_chains=50, n_walks=50,
                       n_rho=5, walk_length=30):
    """
    Exact graph-level suite: quasi-metric triples, prefix optimality along
    witness chains, rho_min == clr, wave nesting, Bellman consistency of clr
    and no downward clearance jump beyond the edge cost along random walks
    """
    check = 'property_suite'
    rng = np.random.default_rng(seed)
    lattice = graph.lattice
    results = {}

    results['quasi_metric'] = check_quasi_metric(graph, n_triples, seed)['passed']

    finite_free = np.flatnonzero(lattice.free_mask & cf.field.finite)
    chain_failures = 0
    chain_starts = _random_graph_nodes(rng, graph, n_chains, lattice.free_mask & cf.field.finite)
    for node in chain_starts:
        if not check_optimality_principle(cf, int(node))['passed']:
            chain_failures += 1
    results['prefix_optimality'] = chain_failures == 0

    free = lattice.free_mask
    results['rho_min_equals_clr'] = bool(np.array_equal(em.rho_min[free], cf.ticks[free]))

    finite_values = cf.values[finite_free]
    nesting_ok = True
    if len(finite_values):
        top = float(finite_values.max()) + 1.0
        for _ in range(n_rho):
            lo, hi = sorted(rng.uniform(1e-3, top, size=2))
            small, large = wave(cf, lo), wave(cf, hi)
            duality = np.array_equal(small, np.flatnonzero(free & (cf.ticks < to_ticks(lo))))
            nesting_ok &= bool(duality and np.all(np.isin(small, large)))
    results['wave_nesting'] = nesting_ok

    src_clr, dst_clr = cf.ticks[graph.src], cf.ticks[graph.dst]
    finite_edges = dst_clr != INF_TICKS
    results['bellman'] = bool(np.all(src_clr[finite_edges] <= dst_clr[finite_edges] + graph.cost_ticks[finite_edges]))

    walk_failures = 0
    for start in _random_graph_nodes(rng, graph, n_walks, free):
        node = int(start)
        for _ in range(walk_length):
            edges = graph.out_edges(node)
            if len(edges) == 0:
                break
            edge = int(edges[rng.integers(0, len(edges))])
            nxt = int(graph.dst[edge])
            a, b = int(cf.ticks[node]), int(cf.ticks[nxt])
            if a != INF_TICKS and b != INF_TICKS and a - b > int(graph.cost_ticks[edge]):
                walk_failures += 1
            node = nxt
    results['no_downward_jump'] = walk_failures == 0

    passed = all(results.values())
    failing = [name for name, ok in results.items() if not ok]
    message = 'All graph-level properties hold' if passed else f"Failed: {', '.join(failing)}"
    return format_report(check, passed, message, {'seed': seed, 'n_triples': n_triples,
                                                  'n_chains': n_chains, 'n_walks': n_walks}, results)


__all__ = [
    'format_report', 'BoundaryClassification', 'EnvGenReport', 'classify_boundary',
    'check_clearance_along', 'check_optimality_principle', 'check_envelope_propagation',
    'check_H1', 'check_H2', 'check_accessibility', 'detect_envelope_generator',
    'analyze_envelope_generator', 'sweep_envelope_generators', 'check_persistent_boundary',
    'check_uniform_penetration', 'check_certificate', 'check_velocity_bounds',
    'check_clearance_oracle', 'check_envelope_near_segment', 'check_quasi_metric',
    'check_sublevel_continuity', 'check_nesting_with_closure', 'check_lipschitz_in_x',
    'run_property_suite', 'trajectory_nodes', 'straight_trajectory',
]
