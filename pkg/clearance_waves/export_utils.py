"""
Run-directory writers: CSV field dumps, PGM heatmaps, JSON reports and the
manifest that lists every written file with its sha256.
"""

import hashlib
import json
import logging
import math
import os
import platform
from datetime import datetime, timezone

import numpy as np

from clearance_waves.reach import COST_SCALE, INF_TICKS

# Configure logging
logger = logging.getLogger(__name__)

# finite values map linearly onto 0..254; 255 is reserved for +inf
PGM_MAX_FINITE = 254
PGM_INF = 255


def jsonable(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def sha256_of_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()


def write_field_csv(path, lattice, ticks, backpointer=None, extra=None):
    """
    One row per node: id, coordinates, value, backpointer id

    Values are written with six decimals, +inf as null; extra maps column name
    to a per-node integer or boolean array.
    """
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    extra = extra or {}
    ticks = np.asarray(ticks, dtype=np.int64)
    header = ['node'] + [f"x{a + 1}" for a in range(lattice.dim)] + ['value']
    values = np.char.mod('%.6f', ticks / COST_SCALE)
    values[ticks == INF_TICKS] = 'null'
    columns = [np.char.mod('%d', np.arange(lattice.n_nodes))]
    columns.extend(np.char.mod('%.6f', lattice.all_coords().T))
    columns.append(values)
    if backpointer is not None:
        header.append('backpointer')
        columns.append(np.char.mod('%d', np.asarray(backpointer, dtype=np.int64)))
    header.extend(extra)
    columns.extend(np.char.mod('%d', np.asarray(col).astype(np.int64)) for col in extra.values())

    table = np.column_stack(columns)
    np.savetxt(path, table, fmt='%s', delimiter=',', header=','.join(header), comments='')
    logger.debug(f"Wrote {lattice.n_nodes} rows to {path}")
    return path


def gray_levels(ticks):
    """Map ticks to gray: finite min..max onto 0..254, +inf to 255"""
    ticks = np.asarray(ticks)
    gray = np.full(ticks.shape, PGM_INF, dtype=np.uint8)
    finite = ticks != INF_TICKS
    if np.any(finite):
        lo = int(ticks[finite].min())
        hi = int(ticks[finite].max())
        span = max(hi - lo, 1)
        scaled = np.rint((ticks[finite] - lo) * PGM_MAX_FINITE / span)
        gray[finite] = scaled.astype(np.uint8)
    return gray


def write_pgm(path, image):
    """Binary PGM (P5); row 0 is the top of the image"""
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    image = np.ascontiguousarray(image, dtype=np.uint8)
    height, width = image.shape
    with open(path, 'wb') as f:
        f.write(f"P5\n{width} {height}\n255\n".encode('ascii'))
        f.write(image.tobytes())
    return path


def planar_slice(lattice, values, slice_index=None):
    """
    2-D (x1, x2) slice of a per-node array, oriented with x2 increasing upward

    Axes beyond the second are fixed at slice_index (one index per extra axis).
    """
    grid = lattice.grid(values)
    if lattice.dim > 2:
        index = list(slice_index or [s // 2 for s in lattice.shape[2:]])
        grid = grid[(slice(None), slice(None)) + tuple(index)]
    return np.flipud(grid.T)


def write_heatmap(path, lattice, ticks, slice_index=None):
    return write_pgm(path, planar_slice(lattice, gray_levels(ticks), slice_index))


def write_mask(path, lattice, mask, slice_index=None):
    """Mask heatmap: flagged nodes white, others black"""
    image = np.where(np.asarray(mask), 255, 0).astype(np.uint8)
    return write_pgm(path, planar_slice(lattice, image, slice_index))


def write_json(path, payload):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w') as f:
        f.write(json.dumps(jsonable(payload), indent=2, sort_keys=True) + '\n')
    return path


def package_versions():
    versions = {'python': platform.python_version()}
    for name in ('numpy', 'scipy', 'yaml'):
        try:
            module = __import__(name)
            versions[name] = getattr(module, '__version__', 'unknown')
        except ImportError:
            versions[name] = None
    return versions


def build_manifest(out_dir, files, scenario, timings, probes, checks, error=None):
    """Manifest document listing every output file with its content hash"""
    entries = []
    for path in sorted(files):
        entries.append({
            'path': os.path.relpath(path, out_dir),
            'sha256': sha256_of_file(path),
            'bytes': os.path.getsize(path),
        })
    return {
        'scenario': scenario.name,
        'scenario_file': scenario.path,
        'parameters': scenario.parameters(),
        'seed': scenario.seed,
        'versions': package_versions(),
        'created': datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ'),
        'timings': timings,
        'probes': probes,
        'checks': checks,
        'files': entries,
        'error': error,
    }
