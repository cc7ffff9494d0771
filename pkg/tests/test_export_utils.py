import hashlib
import math

import numpy as np
import pytest

from clearance_waves.export_utils import (
    PGM_INF,
    build_manifest,
    gray_levels,
    jsonable,
    planar_slice,
    sha256_of_file,
    write_field_csv,
    write_heatmap,
    write_json,
)
from clearance_waves.reach import INF_TICKS
from clearance_waves.scenario import scenario_from_dict
from clearance_waves.scene import build_lattice, builtin_scene


@pytest.fixture(scope='module')
def small_lattice():
    return build_lattice(builtin_scene('galaga-point'), 0.5)


def test_jsonable_maps_infinity_to_null():
    payload = {'a': math.inf, 'b': np.float64(0.25), 'c': np.arange(3), 'd': (np.bool_(True),)}
    assert jsonable(payload) == {'a': None, 'b': 0.25, 'c': [0, 1, 2], 'd': [True]}


def test_field_csv_layout(tmp_path, small_lattice):
    ticks = np.arange(small_lattice.n_nodes, dtype=np.int64) * 250_000
    ticks[0] = INF_TICKS
    path = write_field_csv(str(tmp_path / 'fields' / 'demo.csv'), small_lattice, ticks,
                           backpointer=np.full(small_lattice.n_nodes, -1))
    lines = open(path).read().splitlines()
    assert lines[0] == 'node,x1,x2,value,backpointer'
    assert len(lines) == small_lattice.n_nodes + 1
    assert lines[1] == '0,-1.000000,-1.000000,null,-1'
    assert lines[2] == '1,-1.000000,-0.500000,0.250000,-1'
    assert open(path).read().endswith(',-1\n')


def test_field_csv_extra_columns(tmp_path, small_lattice):
    path = write_field_csv(str(tmp_path / 'demo.csv'), small_lattice,
                           np.zeros(small_lattice.n_nodes, dtype=np.int64),
                           extra={'class': small_lattice.node_class})
    lines = open(path).read().splitlines()
    assert lines[0] == 'node,x1,x2,value,class'
    center = small_lattice.nearest([0.0, 0.0])
    assert lines[center + 1].endswith(',1')


def test_gray_levels_reserve_white_for_infinity():
    gray = gray_levels(np.array([0, 500_000, 1_000_000, INF_TICKS], dtype=np.int64))
    assert gray.tolist() == [0, 127, 254, PGM_INF]


def test_gray_levels_of_a_constant_field():
    assert gray_levels(np.array([7, 7], dtype=np.int64)).tolist() == [0, 0]


def test_planar_slice_puts_x2_up(small_lattice):
    values = small_lattice.all_coords()[:, 1]
    image = planar_slice(small_lattice, values)
    assert image.shape == (5, 5)
    assert np.all(image[0] == 1.0)
    assert np.all(image[-1] == -1.0)


def test_heatmap_is_binary_pgm(tmp_path, small_lattice):
    ticks = np.zeros(small_lattice.n_nodes, dtype=np.int64)
    path = write_heatmap(str(tmp_path / 'h.pgm'), small_lattice, ticks)
    data = open(path, 'rb').read()
    assert data.startswith(b'P5\n5 5\n255\n')
    assert len(data) == len(b'P5\n5 5\n255\n') + 25


def test_sha256_of_file(tmp_path):
    path = tmp_path / 'abc.txt'
    path.write_bytes(b'abc')
    assert sha256_of_file(str(path)) == hashlib.sha256(b'abc').hexdigest()


def test_manifest_lists_files_with_hashes(tmp_path):
    scenario = scenario_from_dict({'system': 'galaga', 'scene': 'galaga-point', 'spacing': 0.5})
    report = write_json(str(tmp_path / 'reports' / 'x.json'), {'value': math.inf})
    manifest = build_manifest(str(tmp_path), [report], scenario, {'total': 0.1}, [], [])
    assert manifest['files'][0]['path'] == 'reports/x.json'
    assert manifest['files'][0]['sha256'] == sha256_of_file(report)
    assert manifest['seed'] == 0
    assert 'numpy' in manifest['versions']
    assert open(report).read().strip().endswith('}')
    assert '"value": null' in open(report).read()
