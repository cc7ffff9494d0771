import json
import os

import pytest

from clearance_waves.cli import check_run, run
from clearance_waves.export_utils import sha256_of_file
from clearance_waves.scenario import load_expected

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'scenarios')

QUICK = ['galaga-point', 'galaga-corner', 'galaga-slant', 'horiz-corner']
LONG = ['gen-galaga', 'dubins-sweep']


def _run_bundled(name, out_dir, workers=1):
    path = os.path.join(SCENARIO_DIR, f'{name}.scenario')
    exit_code = run(path, out_dir, workers=workers)
    with open(os.path.join(out_dir, 'manifest.json')) as f:
        manifest = json.load(f)
    expected = dict(load_expected(path))
    # wall-clock budgets belong to scripts/run_acceptance.py
    expected.pop('max_runtime', None)
    return check_run(manifest, expected, exit_code)


@pytest.mark.parametrize('name', QUICK)
def test_bundled_scenario_meets_expectations(tmp_path, name):
    assert _run_bundled(name, str(tmp_path / name)) == []


@pytest.mark.slow
@pytest.mark.parametrize('name', LONG)
def test_long_scenario_meets_expectations(tmp_path, name):
    assert _run_bundled(name, str(tmp_path / name)) == []


@pytest.mark.slow
def test_worker_count_does_not_change_outputs(tmp_path):
    first, second = str(tmp_path / 'one'), str(tmp_path / 'four')
    _run_bundled('galaga-corner', first, workers=1)
    _run_bundled('galaga-corner', second, workers=4)
    name = os.path.join('fields', 'clearance.csv')
    assert sha256_of_file(os.path.join(first, name)) == sha256_of_file(os.path.join(second, name))
