import json
import math
import os

import pytest

from clearance_waves import reach
from clearance_waves.cli import check_run, compare_expectations, main, matches, run
from clearance_waves.errors import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIGURATION,
    EXIT_OK,
    EXIT_RESOURCE,
    ConfigurationError,
)
from clearance_waves.export_utils import sha256_of_file

POINT_SCENARIO = """
name: point
system: galaga
scene: galaga-point
spacing: 0.1
tau: 0.1
seed: 5
"""

PROBE_CHECK = """
checks:
  - id: below
    op: probe
    x: [0.0, -0.5]
    expect:
      value: {approx: %s, tol: 0.05}
"""


def _scenario(tmp_path, body, name='point.scenario'):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def _manifest(out_dir):
    with open(os.path.join(out_dir, 'manifest.json')) as f:
        return json.load(f)


@pytest.mark.parametrize('actual, want, expected', [
    (0.52, {'approx': 0.5, 'tol': 0.05}, True),
    (0.6, {'approx': 0.5, 'tol': 0.05}, False),
    ([0.0, 0.01], {'near': [0.0, 0.0], 'tol': 0.02}, True),
    (None, None, True),
    (None, {'approx': 1.0}, False),
    (3, {'min': 1, 'max': 3}, True),
    ([1, 2], {'len': 2}, True),
    ([], {'min_len': 1}, False),
    (['H2', 'reverse accessibility'], {'contains': 'H2'}, True),
    ([True, False], [True, False], True),
    ([1.0, 2.0], [1.0], False),
    ('SHELF', 'SHELF', True),
    (1.0, 1, True),
])
def test_matches(actual, want, expected):
    assert matches(actual, want) is expected


def test_unknown_operator_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        matches(1.0, {'roughly': 1.0})


def test_expectations_fall_back_to_evidence():
    report = {'passed': True, 'status': 'passed',
              'evidence': {'verdict': True, 'hits': [{'clearance': 0.1}], 'failing': ['H2']}}
    result = compare_expectations(report, {
        'passed': True,
        'verdict': True,
        'hits.0.clearance': {'approx': 0.1},
        'evidence.failing': {'contains': 'H2'},
    })
    assert result == {'passed': True, 'mismatches': []}
    missing = compare_expectations(report, {'hits.3.clearance': 0.1})
    assert missing['passed'] is False
    assert missing['mismatches'][0]['actual'] == '<missing>'


def test_check_run_reports_each_mismatch():
    manifest = {
        'checks': [{'id': 'a', 'verdict': True}, {'id': 'b', 'verdict': False}],
        'probes': [{'field': 'clearance', 'x': [0.0, -0.5], 'value': 0.5}],
        'timings': {'total': 12.0},
    }
    expected = {
        'exit_code': 0,
        'checks': {'a': True, 'b': True},
        'probes': [{'x': [0.0, -0.5], 'value': {'approx': 0.5, 'tol': 0.01}},
                   {'field': 'from_start', 'x': [0.0, 0.0], 'value': 1.0}],
        'max_runtime': 10,
    }
    paths = {m['path'] for m in check_run(manifest, expected, exit_code=1)}
    assert paths == {'exit_code', 'checks.b', 'probes.from_start@[0.0, 0.0]', 'timings.total'}


def test_skipped_check_does_not_meet_an_expected_verdict():
    manifest = {'checks': [{'id': 'c', 'verdict': None, 'status': 'skipped', 'reason': 'not-applicable'}]}
    mismatches = check_run(manifest, {'checks': {'c': True}}, exit_code=0)
    assert mismatches == [{'path': 'checks.c', 'expected': True, 'actual': 'skipped'}]


def test_run_writes_the_run_directory(tmp_path):
    out_dir = str(tmp_path / 'run')
    exit_code = run(_scenario(tmp_path, POINT_SCENARIO + PROBE_CHECK % 0.5), out_dir, workers=1)
    assert exit_code == EXIT_OK
    manifest = _manifest(out_dir)
    paths = {entry['path'] for entry in manifest['files']}
    assert {'fields/clearance.csv', 'fields/envelope.csv', 'heatmaps/clearance.pgm',
            'reports/below.json', 'summary.json'} <= paths
    for entry in manifest['files']:
        assert entry['sha256'] == sha256_of_file(os.path.join(out_dir, entry['path']))
    assert manifest['checks'] == [{'id': 'below', 'op': 'probe', 'status': 'passed', 'verdict': True}]
    assert manifest['probes'][0]['value'] == pytest.approx(0.5)
    assert manifest['probes'][0]['witness'] == [0.0, 0.0]
    assert manifest['timings']['total'] > 0
    assert manifest['error'] is None


def test_failed_expectation_exits_one(tmp_path):
    out_dir = str(tmp_path / 'run')
    exit_code = run(_scenario(tmp_path, POINT_SCENARIO + PROBE_CHECK % 9.0), out_dir, workers=1)
    assert exit_code == EXIT_CHECK_FAILED
    with open(os.path.join(out_dir, 'reports', 'below.json')) as f:
        report = json.load(f)
    assert report['verdict'] is False
    assert report['expectation']['mismatches'][0]['path'] == 'value'


def test_check_that_does_not_apply_is_skipped(tmp_path):
    body = POINT_SCENARIO + """
checks:
  - id: far_away
    op: clearance_oracle
    oracle: galaga-corner
    region: [[5.0, 6.0], [5.0, 6.0]]
"""
    out_dir = str(tmp_path / 'run')
    assert run(_scenario(tmp_path, body), out_dir, workers=1) == EXIT_OK
    entry, = _manifest(out_dir)['checks']
    assert entry['status'] == 'skipped'
    assert entry['verdict'] is None
    assert entry['reason'] == 'not-applicable'


def test_unknown_check_exits_two(tmp_path):
    body = POINT_SCENARIO + 'checks:\n  - op: divination\n'
    out_dir = str(tmp_path / 'run')
    assert run(_scenario(tmp_path, body), out_dir, workers=1) == EXIT_CONFIGURATION
    assert 'divination' in _manifest(out_dir)['error']


def test_bad_check_parameters_exit_two(tmp_path):
    body = POINT_SCENARIO + 'checks:\n  - op: h2\n    y0: [0.0, 0.0]\n    radius: 0.3\n'
    assert run(_scenario(tmp_path, body), str(tmp_path / 'run'), workers=1) == EXIT_CONFIGURATION


def test_unparsable_scenario_still_writes_a_manifest(tmp_path):
    out_dir = str(tmp_path / 'run')
    os.makedirs(out_dir)
    assert run(_scenario(tmp_path, 'system: [galaga\n'), out_dir) == EXIT_CONFIGURATION
    manifest = _manifest(out_dir)
    assert manifest['files'] == []
    assert manifest['error'].startswith('ConfigurationError')


def test_oversized_lattice_exits_three(tmp_path):
    out_dir = str(tmp_path / 'run')
    assert run(_scenario(tmp_path, POINT_SCENARIO), out_dir, spacing='0.0005') == EXIT_RESOURCE


def test_scene_without_obstacle_nodes_is_reported(tmp_path):
    body = POINT_SCENARIO.replace('0.1', '0.3') + PROBE_CHECK % 0.5
    out_dir = str(tmp_path / 'run')
    assert run(_scenario(tmp_path, body), out_dir, workers=1) == EXIT_CHECK_FAILED
    with open(os.path.join(out_dir, 'reports', 'below.json')) as f:
        report = json.load(f)
    assert report['status'] == 'error'
    assert report['evidence']['error'] == 'NoObstacleError'


def test_runs_are_reproducible(tmp_path, monkeypatch):
    pools = []

    class RecordingPool(reach.ThreadPoolExecutor):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, **kwargs)
            pools.append(self._max_workers)

    # two nodes per chunk
    monkeypatch.setattr(reach, 'CHUNK_PRIMITIVES', 64)
    monkeypatch.setattr(reach, 'ThreadPoolExecutor', RecordingPool)
    path = _scenario(tmp_path, POINT_SCENARIO + PROBE_CHECK % 0.5)
    first, second = str(tmp_path / 'first'), str(tmp_path / 'second')
    assert run(path, first, workers=1) == EXIT_OK
    assert run(path, second, workers=4) == EXIT_OK
    assert pools == [4]
    for name in ('fields/clearance.csv', 'fields/envelope.csv', 'heatmaps/clearance.pgm'):
        assert sha256_of_file(os.path.join(first, name)) == sha256_of_file(os.path.join(second, name))


def test_main_parses_arguments(tmp_path):
    path = _scenario(tmp_path, POINT_SCENARIO)
    out_dir = str(tmp_path / 'cli')
    assert main(['--scenario', path, '--out', out_dir, '--workers', '1', '--seed', '9']) == EXIT_OK
    assert _manifest(out_dir)['seed'] == 9
    assert math.isclose(_manifest(out_dir)['parameters']['spacing'][0], 0.1)
