"""
Scenes (state box plus closed obstacle) and their gridded lattices.

Node classes follow the obstacle predicates evaluated at node coordinates:
FREE outside the obstacle, BOUNDARY for obstacle nodes with a FREE face-neighbor,
OBSTACLE_INTERIOR for every other obstacle node.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from clearance_waves.errors import ConfigurationError, ResourceError, ResolutionError
from clearance_waves.systems import LINE, AxisTopology, state_distance

# Configure logging
logger = logging.getLogger(__name__)

FREE = 0
BOUNDARY = 1
OBSTACLE_INTERIOR = 2
CLASS_NAMES = {FREE: 'FREE', BOUNDARY: 'BOUNDARY', OBSTACLE_INTERIOR: 'OBSTACLE_INTERIOR'}

MAX_NODES = int(os.environ.get('CLEARANCE_MAX_NODES', 2_000_000))
BALL_TOLERANCE = 1e-9
COORDINATE_DECIMALS = 12
# lattice coordinates on a slanted face may be off by an ulp
EDGE_TOLERANCE = 1e-9


# Obstacle regions

class Region:
    """A set given by a closed membership predicate and a strict interior predicate"""

    def closed(self, points):
        raise NotImplementedError

    def interior(self, points):
        raise NotImplementedError


@dataclass
class PredicateRegion(Region):
    closed_fn: callable
    interior_fn: callable

    def closed(self, points):
        return self.closed_fn(points)

    def interior(self, points):
        return self.interior_fn(points)


@dataclass
class BoxRegion(Region):
    low: np.ndarray
    high: np.ndarray

    def closed(self, points):
        return np.all((points >= self.low) & (points <= self.high), axis=1)

    def interior(self, points):
        return np.all((points > self.low) & (points < self.high), axis=1)


@dataclass
class HalfSpace(Region):
    normal: np.ndarray
    offset: float

    def closed(self, points):
        return points @ self.normal <= self.offset + EDGE_TOLERANCE

    def interior(self, points):
        return points @ self.normal < self.offset - EDGE_TOLERANCE


@dataclass
class Union(Region):
    parts: list

    def closed(self, points):
        return np.any([p.closed(points) for p in self.parts], axis=0)

    def interior(self, points):
        # union of interiors; faces shared by two parts stay non-interior
        return np.any([p.interior(points) for p in self.parts], axis=0)


@dataclass
class Intersection(Region):
    parts: list

    def closed(self, points):
        return np.all([p.closed(points) for p in self.parts], axis=0)

    def interior(self, points):
        return np.all([p.interior(points) for p in self.parts], axis=0)


@dataclass
class Complement(Region):
    part: Region

    def closed(self, points):
        return ~self.part.interior(points)

    def interior(self, points):
        return ~self.part.closed(points)


@dataclass
class Scene:
    name: str
    box: Tuple[Tuple[float, float], ...]
    obstacle: Region

    @property
    def dim(self):
        return len(self.box)

    def contains(self, points):
        """Closed obstacle membership for (N, d) points"""
        return self.obstacle.closed(np.atleast_2d(np.asarray(points, dtype=float)))

    def interior(self, points):
        return self.obstacle.interior(np.atleast_2d(np.asarray(points, dtype=float)))


# Built-in scenes

def _galaga_corner_closed(p):
    x1, x2 = p[:, 0], p[:, 1]
    free = ((x1 > -1) & (x1 < 2) & (x2 <= 0)) | ((x1 > -5) & (x1 < 2) & (x2 > 0))
    return ~free


def _galaga_corner_interior(p):
    x1, x2 = p[:, 0], p[:, 1]
    return (x1 > 2) | ((x1 < -1) & (x2 < 0)) | (x1 < -5)


def _galaga_slant_closed(p):
    x1, x2 = p[:, 0], p[:, 1]
    return (x1 <= -1) & (x2 <= -2 * x1 - 2 + EDGE_TOLERANCE)


def _galaga_slant_interior(p):
    x1, x2 = p[:, 0], p[:, 1]
    return (x1 < -1) & (x2 < -2 * x1 - 2 - EDGE_TOLERANCE)


def _quadrant_closed(p):
    return (p[:, 0] <= 0) & (p[:, 1] <= 0)


def _quadrant_interior(p):
    return (p[:, 0] < 0) & (p[:, 1] < 0)


def _origin_closed(p):
    return (p[:, 0] == 0) & (p[:, 1] == 0)


def _nothing(p):
    return np.zeros(len(p), dtype=bool)


BUILTIN_SCENES = {
    'galaga-corner': (((-6.0, 3.0), (-3.0, 4.0)), _galaga_corner_closed, _galaga_corner_interior),
    'galaga-slant': (((-4.5, 3.0), (-3.0, 6.0)), _galaga_slant_closed, _galaga_slant_interior),
    'gen-galaga': (
        ((-6.0, 3.0), (-3.0, 4.0), (-1.0, 3.0)), _galaga_corner_closed, _galaga_corner_interior
    ),
    'dubins-corner': (
        ((-1.5, 1.475), (-1.5, 1.475), (-math.pi, math.pi)), _quadrant_closed, _quadrant_interior
    ),
    'horiz-corner': (((-1.0, 2.5), (-1.0, 1.0)), _quadrant_closed, _quadrant_interior),
    'galaga-point': (((-1.0, 1.0), (-1.0, 1.0)), _origin_closed, _nothing),
}


def builtin_scene(name, box=None):
    """
    Look up a built-in scene; box optionally replaces the default bounding box
    """
    entry = BUILTIN_SCENES.get(name)
    if entry is None:
        raise ConfigurationError(f"Unknown scene: {name}")
    default_box, closed_fn, interior_fn = entry
    if box is not None:
        box = _parse_box(box, len(default_box))
    return Scene(
        name=name,
        box=box or default_box,
        obstacle=PredicateRegion(closed_fn, interior_fn),
    )


def _parse_box(box, dim=None):
    try:
        parsed = tuple((float(low), float(high)) for low, high in box)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid box {box!r}: {e}")
    if dim is not None and len(parsed) != dim:
        raise ConfigurationError(f"Box has {len(parsed)} axes, expected {dim}")
    for low, high in parsed:
        if not low < high:
            raise ConfigurationError(f"Box axis ({low}, {high}) is empty")
    return parsed


def _parse_bound(value):
    # accepts '-inf' / 'inf' strings for unbounded obstacle boxes
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"Invalid bound {value!r}")


def region_from_spec(spec, dim):
    """Build a Region from its nested scenario-file description"""
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigurationError(f"Region spec must be a single-key mapping, got {spec!r}")
    kind, body = next(iter(spec.items()))
    if kind == 'box':
        if len(body) != dim:
            raise ConfigurationError(f"Obstacle box has {len(body)} axes, expected {dim}")
        low = np.array([_parse_bound(b[0]) for b in body])
        high = np.array([_parse_bound(b[1]) for b in body])
        if np.any(low > high):
            raise ConfigurationError(f"Obstacle box {body!r} has low > high")
        return BoxRegion(low, high)
    if kind == 'halfspace':
        normal = np.asarray(body.get('normal'), dtype=float)
        if normal.shape != (dim,) or not np.any(normal):
            raise ConfigurationError(f"Half-space normal must be a nonzero {dim}-vector")
        return HalfSpace(normal, float(body.get('offset', 0.0)))
    if kind == 'union':
        return Union([region_from_spec(s, dim) for s in body])
    if kind == 'intersection':
        return Intersection([region_from_spec(s, dim) for s in body])
    if kind == 'complement':
        return Complement(region_from_spec(body, dim))
    raise ConfigurationError(f"Unknown region kind: {kind}")


def scene_from_spec(spec):
    """Scene from a name or a custom mapping {name?, box, obstacle}"""
    if isinstance(spec, str):
        return builtin_scene(spec)
    if not isinstance(spec, dict):
        raise ConfigurationError(f"Scene spec must be a name or mapping, got {spec!r}")
    if 'obstacle' not in spec:
        return builtin_scene(spec.get('name', ''), box=spec.get('box'))
    box = _parse_box(spec.get('box'))
    return Scene(
        name=spec.get('name', 'custom'),
        box=box,
        obstacle=region_from_spec(spec['obstacle'], len(box)),
    )


# Lattice

def shift_mask(mask, axis, offset, wrap, fill=False):
    """mask shifted by offset along axis; entries shifted in from outside get fill"""
    if wrap:
        return np.roll(mask, offset, axis=axis)
    result = np.full_like(mask, fill)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if offset > 0:
        src[axis] = slice(None, -offset)
        dst[axis] = slice(offset, None)
    else:
        src[axis] = slice(-offset, None)
        dst[axis] = slice(None, offset)
    result[tuple(dst)] = mask[tuple(src)]
    return result


@dataclass(eq=False)
class Lattice:
    scene: Scene
    axis_topology: Tuple[AxisTopology, ...]
    spacing: np.ndarray
    shape: Tuple[int, ...]
    axes: list
    node_class: np.ndarray
    obstacle_missed: bool = False

    @property
    def dim(self):
        return len(self.shape)

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    @property
    def lows(self):
        return np.array([axis[0] for axis in self.axes])

    @property
    def max_spacing(self):
        return float(np.max(self.spacing))

    @property
    def free_mask(self):
        return self.node_class == FREE

    @property
    def boundary_mask(self):
        return self.node_class == BOUNDARY

    @property
    def boundary_ids(self):
        return np.flatnonzero(self.boundary_mask)

    @property
    def free_ids(self):
        return np.flatnonzero(self.free_mask)

    def coords(self, ids):
        multi = np.unravel_index(np.asarray(ids), self.shape)
        return np.stack([self.axes[a][multi[a]] for a in range(self.dim)], axis=-1)

    def all_coords(self):
        return self.coords(np.arange(self.n_nodes))

    def grid(self, values):
        return np.asarray(values).reshape(self.shape)

    def snap_indices(self, points):
        """Nearest per-axis indices for (N, d) points; line axes may fall outside"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.rint((points - self.lows) / self.spacing).astype(np.int64)
        for a, topo in enumerate(self.axis_topology):
            if topo.is_circle:
                idx[:, a] = np.mod(idx[:, a], self.shape[a])
        return idx

    def in_box(self, idx):
        return np.all((idx >= 0) & (idx < np.array(self.shape)), axis=1)

    def node_id(self, points):
        """Nearest-node ids for (N, d) points, -1 for points outside the box"""
        idx = self.snap_indices(points)
        inside = self.in_box(idx)
        ids = np.full(len(idx), -1, dtype=np.int64)
        if np.any(inside):
            ids[inside] = np.ravel_multi_index(tuple(idx[inside].T), self.shape)
        return ids

    def nearest(self, point):
        """Node id nearest a single state"""
        node = int(self.node_id(point)[0])
        if node < 0:
            raise ConfigurationError(f"Point {list(point)} lies outside the lattice box")
        return node

    def neighbor_ids(self, ids):
        """Face-neighbor ids, shape (N, 2d), -1 where the neighbor is off the box"""
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        multi = np.stack(np.unravel_index(ids, self.shape), axis=1)
        result = np.full((len(ids), 2 * self.dim), -1, dtype=np.int64)
        for a, topo in enumerate(self.axis_topology):
            for s, offset in enumerate((-1, 1)):
                moved = multi.copy()
                moved[:, a] += offset
                if topo.is_circle:
                    moved[:, a] = np.mod(moved[:, a], self.shape[a])
                valid = (moved[:, a] >= 0) & (moved[:, a] < self.shape[a])
                column = 2 * a + s
                result[valid, column] = np.ravel_multi_index(tuple(moved[valid].T), self.shape)
        return result

    def ball(self, center, radius):
        """Node ids strictly inside the open metric ball, ascending"""
        center = np.asarray(center, dtype=float)
        limit = radius * (1 - BALL_TOLERANCE)
        index_lists = []
        for a, topo in enumerate(self.axis_topology):
            reach = int(math.ceil(radius / self.spacing[a])) + 1
            c = int(np.rint((center[a] - self.axes[a][0]) / self.spacing[a]))
            if topo.is_circle:
                span = np.arange(c - reach, c + reach + 1)
                index_lists.append(np.unique(np.mod(span, self.shape[a])))
            else:
                index_lists.append(np.arange(max(0, c - reach), min(self.shape[a], c + reach + 1)))
        if any(len(lst) == 0 for lst in index_lists):
            return np.array([], dtype=np.int64)
        mesh = np.meshgrid(*index_lists, indexing='ij')
        ids = np.ravel_multi_index(tuple(m.ravel() for m in mesh), self.shape)
        dist = state_distance(center, self.coords(ids), self.axis_topology)
        return np.sort(ids[dist < limit])

    def has_neighbor_in(self, mask):
        """Per-node flag: some face-neighbor lies in the given node mask"""
        grid = self.grid(mask)
        hit = np.zeros_like(grid, dtype=bool)
        for a, topo in enumerate(self.axis_topology):
            for offset in (-1, 1):
                hit |= shift_mask(grid, a, offset, topo.is_circle)
        return hit.ravel()


def _fit_axis(low, high, h, topo):
    """Per-axis coordinates with extremes reproduced exactly"""
    if topo.is_circle:
        n = max(1, int(round(topo.period / h)))
        spacing = topo.period / n
        return low + spacing * np.arange(n), spacing
    n = max(1, int(round((high - low) / h)))
    spacing = (high - low) / n
    coords = np.round(np.linspace(low, high, n + 1), COORDINATE_DECIMALS)
    coords[0], coords[-1] = low, high
    return coords, spacing


def build_lattice(scene, spacing, axis_topology=None, max_nodes=None):
    """
    Grid the scene box and classify every node

    Args:
        scene: Scene
        spacing: scalar or per-axis spacing
        axis_topology: per-axis topology (usually the system's), line by default
        max_nodes: node-count cap, defaults to CLEARANCE_MAX_NODES

    Returns:
        Lattice
    """
    dim = scene.dim
    topology = tuple(axis_topology) if axis_topology is not None else (LINE,) * dim
    if len(topology) != dim:
        raise ConfigurationError(f"Scene {scene.name} has {dim} axes but the system has {len(topology)}")
    h = np.broadcast_to(np.asarray(spacing, dtype=float), (dim,)).copy()
    if np.any(h <= 0):
        raise ConfigurationError("spacing must be positive on every axis")
    cap = MAX_NODES if max_nodes is None else int(max_nodes)

    box = list(scene.box)
    counts = []
    for a, topo in enumerate(topology):
        low, high = box[a]
        if topo.is_circle:
            if not math.isclose(high - low, topo.period, rel_tol=1e-9):
                logger.warning(f"Axis {a} box ({low}, {high}) replaced by one circle period")
                box[a] = (-topo.period / 2, topo.period / 2)
            counts.append(max(1, int(round(topo.period / h[a]))))
        else:
            counts.append(max(1, int(round((high - low) / h[a]))) + 1)
    n_nodes = int(np.prod(counts))
    if n_nodes > cap:
        raise ResourceError(f"Lattice would have {n_nodes} nodes, cap is {cap}")

    axes = []
    fitted = np.empty(dim)
    for a, topo in enumerate(topology):
        coords, fitted[a] = _fit_axis(box[a][0], box[a][1], h[a], topo)
        if not math.isclose(fitted[a], h[a], rel_tol=1e-9):
            logger.warning(f"Axis {a} spacing adjusted from {h[a]:.6g} to {fitted[a]:.6g} to fit the box")
        axes.append(coords)
    shape = tuple(len(c) for c in axes)

    lattice = Lattice(
        scene=scene, axis_topology=topology, spacing=fitted, shape=shape, axes=axes,
        node_class=np.zeros(n_nodes, dtype=np.int8),
    )

    obstacle = np.zeros(n_nodes, dtype=bool)
    chunk = 1 << 18
    for start in range(0, n_nodes, chunk):
        ids = np.arange(start, min(start + chunk, n_nodes))
        obstacle[ids] = scene.contains(lattice.coords(ids))

    free = ~obstacle
    boundary = obstacle & lattice.has_neighbor_in(free)
    lattice.node_class[boundary] = BOUNDARY
    lattice.node_class[obstacle & ~boundary] = OBSTACLE_INTERIOR

    if not np.any(obstacle):
        lattice.obstacle_missed = True
        logger.warning(f"Obstacle of scene {scene.name} hits no lattice node at spacing {fitted.tolist()}")

    logger.info(
        f"Lattice {scene.name} shape={shape} free={int(free.sum())} "
        f"boundary={int(boundary.sum())} interior={int((obstacle & ~boundary).sum())}"
    )
    return lattice


def free_component_count(lattice, center, radius):
    """
    Number of face-connected components of FREE nodes inside the open ball
    """
    if radius < 2 * lattice.max_spacing:
        raise ResolutionError(
            f"Radius {radius} is below twice the lattice spacing {lattice.max_spacing}"
        )
    ids = lattice.ball(center, radius)
    free_ids = ids[lattice.node_class[ids] == FREE]
    if len(free_ids) == 0:
        return 0

    # relabel the ball onto a compact sub-grid, preserving adjacency order
    multi = np.stack(np.unravel_index(free_ids, lattice.shape), axis=1)
    sub_axes = []
    for a, topo in enumerate(lattice.axis_topology):
        values = np.unique(multi[:, a])
        if topo.is_circle and len(values) < lattice.shape[a]:
            # start the run after the largest gap so wrapped indices stay contiguous
            gaps = np.diff(np.concatenate([values, [values[0] + lattice.shape[a]]]))
            start = (int(np.argmax(gaps)) + 1) % len(values)
            first = values[start]
            ordered = np.mod(np.arange(first, first + lattice.shape[a]), lattice.shape[a])
            sub_axes.append(ordered)
        else:
            sub_axes.append(np.arange(values.min(), values.max() + 1) if not topo.is_circle
                            else np.arange(lattice.shape[a]))
    positions = []
    for a in range(lattice.dim):
        lookup = {int(v): i for i, v in enumerate(sub_axes[a])}
        positions.append(np.array([lookup[int(v)] for v in multi[:, a]]))
    sub_shape = tuple(len(s) for s in sub_axes)
    grid = np.zeros(sub_shape, dtype=bool)
    grid[tuple(positions)] = True

    structure = ndimage.generate_binary_structure(lattice.dim, 1)
    labels, count = ndimage.label(grid, structure=structure)

    # full circle axes: merge labels that meet across the seam
    parent = list(range(count + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, topo in enumerate(lattice.axis_topology):
        if topo.is_circle and sub_shape[a] == lattice.shape[a] and lattice.shape[a] > 2:
            first = np.take(labels, 0, axis=a)
            last = np.take(labels, sub_shape[a] - 1, axis=a)
            both = (first > 0) & (last > 0)
            for i, j in zip(first[both], last[both]):
                ri, rj = find(int(i)), find(int(j))
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    return len({find(i) for i in range(1, count + 1)})
