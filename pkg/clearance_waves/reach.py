"""
Motion-primitive graph over a lattice and the shortest-path searches that give
cost-distance fields, reachable sets and optimal trajectories.

Edge costs are stored as integer ticks (COST_SCALE per cost unit) so that every
sum and comparison made on the graph is exact.
"""

import heapq
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from clearance_waves.errors import (
    ConfigurationError,
    DegenerateGraphError,
    InvalidSourceError,
    InvalidTargetError,
    NoPathError,
    UndefinedDistanceError,
)
from clearance_waves.scene import BOUNDARY, OBSTACLE_INTERIOR
from clearance_waves.systems import Trajectory, outside_box, rk4_step, wrap_states

# Configure logging
logger = logging.getLogger(__name__)

COST_SCALE = 10 ** 6
INF_TICKS = np.iinfo(np.int64).max
COLLISION_SUBSTEPS = 8
ENGINES = ('scipy', 'heap')
CHUNK_PRIMITIVES = 1 << 18
DEFAULT_WORKERS = int(os.environ.get('CLEARANCE_WORKERS', os.cpu_count() or 1))

RUNNING, CONTACT, EXITED = 0, 1, 2


def to_ticks(cost):
    """Cost in units to integer ticks, +inf to the sentinel"""
    if cost is None or math.isinf(cost):
        return INF_TICKS
    return int(round(cost * COST_SCALE))


def ticks_to_costs(ticks):
    ticks = np.asarray(ticks)
    costs = ticks.astype(float) / COST_SCALE
    costs[ticks == INF_TICKS] = np.inf
    return costs


@dataclass(eq=False)
class PrimitiveGraph:
    system: object
    lattice: object
    primitive_duration: float
    collision_substeps: int
    src: np.ndarray
    dst: np.ndarray
    control_index: np.ndarray
    cost_ticks: np.ndarray
    duration: np.ndarray
    rim: np.ndarray

    @property
    def n_edges(self):
        return len(self.src)

    @property
    def nodes(self):
        return np.flatnonzero(self.lattice.node_class != OBSTACLE_INTERIOR)

    @property
    def rim_ids(self):
        return np.flatnonzero(self.rim)

    @property
    def min_edge_ticks(self):
        return int(self.cost_ticks.min())

    @cached_property
    def matrix(self):
        n = self.lattice.n_nodes
        return sparse.csr_matrix(
            (self.cost_ticks.astype(np.float64), (self.src, self.dst)), shape=(n, n)
        )

    @cached_property
    def reverse_matrix(self):
        return self.matrix.T.tocsr()

    @cached_property
    def _keys(self):
        return self.src * np.int64(self.lattice.n_nodes) + self.dst

    def edge_index(self, a, b):
        """Edge positions for node pairs a -> b, -1 where no edge exists"""
        a = np.atleast_1d(np.asarray(a, dtype=np.int64))
        b = np.atleast_1d(np.asarray(b, dtype=np.int64))
        keys = a * np.int64(self.lattice.n_nodes) + b
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        return np.where(self._keys[pos] == keys, pos, -1)

    def out_edges(self, node):
        lo, hi = np.searchsorted(self.src, [node, node + 1])
        return np.arange(lo, hi)

    def to_dict(self):
        return {
            'system': self.system.name,
            'scene': self.lattice.scene.name,
            'primitive_duration': self.primitive_duration,
            'collision_substeps': self.collision_substeps,
            'edges': self.n_edges,
            'rim_nodes': int(self.rim.sum()),
        }


def probe_states(lattice, n_probe=256):
    """Evenly picked FREE node coordinates (all nodes when nothing is free)"""
    candidates = lattice.free_ids
    if len(candidates) == 0:
        candidates = np.arange(lattice.n_nodes)
    pick = np.linspace(0, len(candidates) - 1, min(n_probe, len(candidates))).astype(np.int64)
    return lattice.coords(candidates[pick])


def sampled_velocities(system, states):
    """All sampled velocities at the given states, shape (N * J, d)"""
    controls = system.control_samples
    return system.velocity(
        np.repeat(states, len(controls), axis=0), np.tile(controls, (len(states), 1))
    )


def default_tau(system, lattice, n_probe=256):
    """
    Primitive duration covering about 1.25 cells at the slowest sampled speed,
    rounded to a whole number of cells along the fastest axis motion and
    clamped so the fastest primitive crosses between one and three cells
    """
    velocities = sampled_velocities(system, probe_states(lattice, n_probe))
    speeds = np.linalg.norm(velocities, axis=1)
    nonzero = speeds[speeds > 1e-12]
    if len(nonzero) == 0:
        raise DegenerateGraphError(f"System {system.name} has no nonzero sampled speed")
    h = lattice.max_spacing
    tau = h / (0.8 * float(nonzero.min()))
    cells_per_second = float(np.max(np.abs(velocities) / lattice.spacing))
    tau = max(1, round(tau * cells_per_second)) / cells_per_second
    fastest = float(nonzero.max())
    return float(np.clip(tau, h / fastest, 3 * h / fastest))


def _integrate_chunk(system, lattice, node_ids, tau, substeps):
    controls = system.control_samples
    n_controls = len(controls)
    src = np.repeat(node_ids, n_controls)
    ctrl = np.tile(np.arange(n_controls, dtype=np.int32), len(node_ids))
    x = lattice.coords(src)
    u = controls[ctrl]
    cost = np.zeros(len(src))
    status = np.full(len(src), RUNNING, dtype=np.int8)
    stop_step = np.full(len(src), substeps, dtype=np.int64)
    topology = lattice.axis_topology
    dt = tau / substeps

    # primitives may overshoot the box by half a cell and still snap inside
    half = lattice.spacing / 2
    bounds = [(axis[0] - half[a], axis[-1] + half[a]) for a, axis in enumerate(lattice.axes)]

    for k in range(1, substeps + 1):
        alive = np.flatnonzero(status == RUNNING)
        if len(alive) == 0:
            break
        xa, ca = rk4_step(system, x[alive], u[alive], cost[alive], dt)
        xa = wrap_states(xa, topology)
        x[alive] = xa
        cost[alive] = ca
        exited = outside_box(xa, bounds, topology)
        hit = ~exited & lattice.scene.interior(xa)
        status[alive[exited]] = EXITED
        status[alive[hit]] = CONTACT
        stop_step[alive[hit]] = k

    dst = lattice.node_id(x)
    cls = lattice.node_class[np.maximum(dst, 0)]
    inside = dst >= 0
    full = (status == RUNNING) & inside & (cls != OBSTACLE_INTERIOR) & (dst != src)
    contact = (status == CONTACT) & inside & (cls == BOUNDARY) & (dst != src)
    keep = full | contact
    rim = np.unique(src[(status == EXITED) | ((status == RUNNING) & ~inside)])

    ticks = np.maximum(1, np.rint(cost[keep] * COST_SCALE)).astype(np.int64)
    return (
        src[keep], dst[keep], ctrl[keep], ticks,
        tau * stop_step[keep] / substeps, rim,
    )


def build_graph(system, lattice, tau=None, workers=1, substeps=COLLISION_SUBSTEPS):
    """
    Integrate every control sample from every FREE or BOUNDARY node for tau and
    snap the endpoints into edges

    Args:
        system: ControlSystem
        lattice: Lattice built with the system's axis topology
        tau: primitive duration, default_tau() when None
        workers: thread count; edges are identical for any value
        substeps: RK4 steps per primitive, each checked for obstacle contact

    Returns:
        PrimitiveGraph
    """
    if tau is None:
        tau = default_tau(system, lattice)
        logger.info(f"Using default primitive duration tau={tau:.4g}")
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    if substeps < 1:
        raise ConfigurationError("substeps must be at least 1")

    nodes = np.flatnonzero(lattice.node_class != OBSTACLE_INTERIOR)
    per_chunk = max(1, CHUNK_PRIMITIVES // len(system.control_samples))
    chunks = [nodes[i:i + per_chunk] for i in range(0, len(nodes), per_chunk)]

    started = time.perf_counter()

    def work(chunk):
        return _integrate_chunk(system, lattice, chunk, tau, substeps)

    if workers and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(work, chunks))
    else:
        results = [work(chunk) for chunk in chunks]

    if results:
        src, dst, ctrl, ticks, duration, rim_ids = (np.concatenate(parts) for parts in zip(*results))
    else:
        src = dst = ticks = rim_ids = np.array([], dtype=np.int64)
        ctrl = np.array([], dtype=np.int32)
        duration = np.array([], dtype=float)

    if len(src) == 0:
        raise DegenerateGraphError(
            f"No primitive edges for tau={tau} on spacing {lattice.spacing.tolist()}"
        )

    # keep the cheapest edge per (src, dst); ties go to the lowest control index
    order = np.lexsort((ctrl, ticks, dst, src))
    src, dst, ctrl, ticks, duration = (a[order] for a in (src, dst, ctrl, ticks, duration))
    first = np.ones(len(src), dtype=bool)
    first[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])

    rim = np.zeros(lattice.n_nodes, dtype=bool)
    rim[rim_ids.astype(np.int64)] = True

    graph = PrimitiveGraph(
        system=system,
        lattice=lattice,
        primitive_duration=float(tau),
        collision_substeps=int(substeps),
        src=src[first].astype(np.int64),
        dst=dst[first].astype(np.int64),
        control_index=ctrl[first],
        cost_ticks=ticks[first],
        duration=duration[first],
        rim=rim,
    )
    logger.info(
        f"Built graph {system.name}/{lattice.scene.name}: {graph.n_edges} edges over "
        f"{len(nodes)} nodes, {int(rim.sum())} rim nodes in {time.perf_counter() - started:.2f}s"
    )
    return graph


# Cost fields

@dataclass(eq=False)
class CostField:
    graph: PrimitiveGraph
    sources: np.ndarray
    direction: str
    ticks: np.ndarray
    predecessor: np.ndarray
    limit: Optional[float] = None

    @property
    def lattice(self):
        return self.graph.lattice

    @property
    def costs(self):
        return ticks_to_costs(self.ticks)

    @property
    def finite(self):
        return self.ticks != INF_TICKS

    def value(self, node):
        ticks = int(self.ticks[node])
        return math.inf if ticks == INF_TICKS else ticks / COST_SCALE

    def value_at(self, point):
        return self.value(self.lattice.nearest(point))

    def origin(self):
        """Source node each chain ends at (-1 where unreachable)"""
        root = np.where(self.predecessor >= 0, self.predecessor, np.arange(len(self.predecessor)))
        while True:
            nxt = root[root]
            if np.array_equal(nxt, root):
                break
            root = nxt
        return np.where(self.finite, root, -1)


def _scipy_search(graph, sources, reverse, limit_ticks):
    matrix = graph.reverse_matrix if reverse else graph.matrix
    limit = np.inf if limit_ticks is None else float(limit_ticks)
    dist, pred, _ = csgraph.dijkstra(
        matrix, directed=True, indices=sources, return_predecessors=True,
        min_only=True, limit=limit,
    )
    ticks = np.full(len(dist), INF_TICKS, dtype=np.int64)
    reached = np.isfinite(dist)
    ticks[reached] = np.rint(dist[reached]).astype(np.int64)
    pred = np.where(pred < 0, -1, pred).astype(np.int64)
    return ticks, pred


def _heap_search(graph, sources, reverse, limit_ticks):
    matrix = graph.reverse_matrix if reverse else graph.matrix
    indptr = matrix.indptr.tolist()
    indices = matrix.indices.tolist()
    weights = np.rint(matrix.data).astype(np.int64).tolist()
    n = matrix.shape[0]
    dist = [INF_TICKS] * n
    pred = [-1] * n
    done = [False] * n

    heap = [(0, int(s)) for s in sorted(set(int(s) for s in sources))]
    for _, s in heap:
        dist[s] = 0
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            nd = d + weights[k]
            if limit_ticks is not None and nd > limit_ticks:
                continue
            if nd < dist[w]:
                dist[w] = nd
                pred[w] = v
                heapq.heappush(heap, (nd, w))
    return np.array(dist, dtype=np.int64), np.array(pred, dtype=np.int64)


SEARCH_ENGINES = {
    'scipy': _scipy_search,
    'heap': _heap_search,
}


def _search(graph, sources, direction, engine, limit):
    search = SEARCH_ENGINES.get(engine)
    if search is None:
        raise ConfigurationError(f"Unknown search engine: {engine}")
    limit_ticks = None if limit is None else to_ticks(limit)
    started = time.perf_counter()
    ticks, pred = search(graph, np.asarray(sources, dtype=np.int64), direction == 'reverse', limit_ticks)
    logger.debug(
        f"{direction} search from {len(sources)} sources ({engine}) reached "
        f"{int((ticks != INF_TICKS).sum())} nodes in {time.perf_counter() - started:.3f}s"
    )
    return CostField(
        graph=graph, sources=np.asarray(sources, dtype=np.int64), direction=direction,
        ticks=ticks, predecessor=pred, limit=limit,
    )


def cost_from(graph, x, engine='scipy', limit=None):
    """Forward field d_c(x, .) from the node nearest x"""
    node = graph.lattice.nearest(x)
    if graph.lattice.node_class[node] == OBSTACLE_INTERIOR:
        raise InvalidSourceError(f"Source {list(x)} snaps to an obstacle-interior node")
    return _search(graph, [node], 'forward', engine, limit)


def cost_from_nodes(graph, nodes, engine='scipy', limit=None):
    """Multi-source forward field min over sources of d_c(source, .)"""
    nodes = np.unique(np.asarray(nodes, dtype=np.int64))
    if len(nodes) == 0:
        raise InvalidSourceError("Source set is empty")
    return _search(graph, nodes, 'forward', engine, limit)


def cost_to(graph, targets, engine='scipy', limit=None):
    """
    Reverse field min over targets y of d_c(., y)

    Predecessors of a reverse field point forward, toward the targets.
    """
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    if len(targets) == 0:
        raise InvalidTargetError("Target set is empty")
    targets = targets[graph.lattice.node_class[targets] != OBSTACLE_INTERIOR]
    if len(targets) == 0:
        raise InvalidTargetError("Every target lies in the obstacle interior")
    return _search(graph, targets, 'reverse', engine, limit)


def rim_field(graph, engine='scipy'):
    """Cost to reach any node whose primitives leave the lattice box"""
    rim_ids = graph.rim_ids
    if len(rim_ids) == 0:
        n = graph.lattice.n_nodes
        return CostField(
            graph=graph, sources=rim_ids, direction='reverse',
            ticks=np.full(n, INF_TICKS, dtype=np.int64), predecessor=np.full(n, -1, dtype=np.int64),
        )
    return cost_to(graph, rim_ids, engine=engine)


def distance_rows(graph, sources):
    """Forward tick rows d_c(s, .) for several sources at once, shape (k, n)"""
    sources = np.asarray(sources, dtype=np.int64)
    dist = csgraph.dijkstra(graph.matrix, directed=True, indices=sources)
    ticks = np.full(dist.shape, INF_TICKS, dtype=np.int64)
    reached = np.isfinite(dist)
    ticks[reached] = np.rint(dist[reached]).astype(np.int64)
    return ticks


def reachable_set(field, rho):
    """Nodes with value strictly below rho"""
    if rho <= 0:
        raise ConfigurationError("rho must be positive")
    return np.flatnonzero(field.ticks < to_ticks(rho))


def node_chain(field, endpoint):
    """Backpointer chain in travel order: source..endpoint (forward) or endpoint..target (reverse)"""
    endpoint = int(endpoint)
    if field.ticks[endpoint] == INF_TICKS:
        raise NoPathError(f"Node {endpoint} is unreachable in this field")
    chain = [endpoint]
    while field.predecessor[chain[-1]] >= 0:
        chain.append(int(field.predecessor[chain[-1]]))
    if field.direction == 'forward':
        chain.reverse()
    return np.array(chain, dtype=np.int64)


def extract_trajectory(field, endpoint):
    """
    Optimal trajectory along the backpointer chain through endpoint

    The cost in ticks is the exact sum of the chain's edge costs.
    """
    graph = field.graph
    nodes = node_chain(field, endpoint)
    edges = graph.edge_index(nodes[:-1], nodes[1:]) if len(nodes) > 1 else np.array([], dtype=np.int64)
    if np.any(edges < 0):
        raise NoPathError(f"Backpointer chain through {endpoint} uses a missing edge")
    durations = graph.duration[edges]
    times = np.concatenate([[0.0], np.cumsum(durations)])
    controls = graph.system.control_samples[graph.control_index[edges]]
    if len(controls):
        controls = np.vstack([controls, controls[-1:]])
    else:
        controls = np.zeros((1, graph.system.control_dim))
    ticks = int(graph.cost_ticks[edges].sum())
    segment_costs = (graph.cost_ticks[edges] / COST_SCALE).tolist()
    return Trajectory(
        times=times,
        states=graph.lattice.coords(nodes),
        controls=controls,
        total_cost=ticks / COST_SCALE,
        duration=float(times[-1]),
        segment_costs=segment_costs,
        nodes=nodes,
        cost_ticks=ticks,
    )


def _periodic_coords(lattice, ids):
    """Coordinates shifted into [0, L) with L large on line axes, for a toroidal KD-tree"""
    coords = lattice.coords(ids) - lattice.lows
    sizes = np.empty(lattice.dim)
    for a, topo in enumerate(lattice.axis_topology):
        if topo.is_circle:
            sizes[a] = topo.period
            wrapped = np.mod(coords[:, a], topo.period)
            coords[:, a] = np.where(wrapped >= topo.period, 0.0, wrapped)
        else:
            sizes[a] = 4 * (lattice.axes[a][-1] - lattice.axes[a][0]) + 1
    return coords, sizes


def hausdorff_distance(lattice, a, b):
    """Symmetric Hausdorff distance between two node sets in the state metric"""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if len(a) == 0 or len(b) == 0:
        raise UndefinedDistanceError("Hausdorff distance of an empty node set")
    pa, sizes = _periodic_coords(lattice, a)
    pb, _ = _periodic_coords(lattice, b)
    tree_a = cKDTree(pa, boxsize=sizes)
    tree_b = cKDTree(pb, boxsize=sizes)
    forward, _ = tree_b.query(pa)
    backward, _ = tree_a.query(pb)
    return float(max(forward.max(), backward.max()))
