#!/usr/bin/env python3
"""
Script to run the bundled scenarios and compare every run against the
*.expected.yaml sidecar next to its scenario file
"""

import argparse
import glob
import json
import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from clearance_waves.cli import check_run, run  # noqa: E402
from clearance_waves.scenario import load_expected  # noqa: E402

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'scenarios')


def run_scenario(path, out_root, workers, seed=None):
    """Run one scenario; returns (name, mismatches)"""
    name = os.path.splitext(os.path.basename(path))[0]
    out_dir = os.path.join(out_root, name)
    exit_code = run(path, out_dir, workers=workers, seed=seed)
    expected = load_expected(path)
    if expected is None:
        print(f"No expectations for {name}, exit code {exit_code}")
        return name, [] if exit_code == 0 else [{'path': 'exit_code', 'expected': 0, 'actual': exit_code}]
    with open(os.path.join(out_dir, 'manifest.json')) as f:
        manifest = json.load(f)
    return name, check_run(manifest, expected, exit_code)


def main():
    parser = argparse.ArgumentParser(description='Run bundled scenarios against their expected values')
    parser.add_argument('--scenarios', nargs='*', help='Scenario files (default: every bundled scenario)')
    parser.add_argument('--out', default='runs/acceptance', help='Root directory for run outputs')
    parser.add_argument('--workers', type=int, default=1, help='Graph-construction workers')
    parser.add_argument('--seed', type=int, help='Seed override')
    parser.add_argument('--skip', nargs='*', default=[], help='Scenario names to skip')

    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING, format='%(levelname)s %(name)s: %(message)s')

    paths = args.scenarios or sorted(glob.glob(os.path.join(SCENARIO_DIR, '*.scenario')))
    failures = 0
    ran = 0
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        if name in args.skip:
            print(f"Skipped {name}")
            continue
        ran += 1
        name, mismatches = run_scenario(path, args.out, args.workers, args.seed)
        if mismatches:
            failures += 1
            print(f"FAIL {name}")
            for mismatch in mismatches:
                print(f"  {mismatch['path']}: expected {mismatch['expected']}, got {mismatch['actual']}")
        else:
            print(f"ok   {name}")
    print(f"{ran - failures}/{ran} scenarios match their expectations")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
