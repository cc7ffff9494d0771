"""
Scenario runner: loads a scenario file, builds lattice -> graph -> fields in
dependency order, runs the requested checks and writes the run directory

    fields/*.csv, heatmaps/*.pgm, reports/*.json, summary.json, manifest.json
"""

import argparse
import inspect
import logging
import math
import os
import time
from functools import cached_property

import numpy as np

from clearance_waves import analysis
from clearance_waves.clearance import clearance_field, envelope, summarize
from clearance_waves.errors import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIGURATION,
    EXIT_OK,
    CertificateInfeasibleError,
    ClearanceError,
    ConfigurationError,
    ResourceError,
)
from clearance_waves.export_utils import (
    build_manifest,
    write_field_csv,
    write_heatmap,
    write_json,
    write_mask,
)
from clearance_waves.reach import DEFAULT_WORKERS, build_graph, cost_from, cost_to
from clearance_waves.scenario import load_scenario
from clearance_waves.scene import CLASS_NAMES, build_lattice
from clearance_waves.systems import DEFAULT_STEP, best_direction, compute_certificate

# Configure logging
logger = logging.getLogger(__name__)

COMPUTATION_OPS = ('cost_from', 'cost_to')
BUILTIN_FIELDS = ('clearance', 'rim')
SKIPPED = 'skipped'
MATCH_KEYS = {'approx', 'tol', 'near', 'min', 'max', 'len', 'min_len', 'max_len', 'contains'}


class Pipeline:
    """Stages of one scenario run, each built on first use and timed"""

    def __init__(self, scenario, workers=1):
        self.scenario = scenario
        self.workers = workers
        self.timings = {}
        self.probes = []
        self._fields = {}

    def _timed(self, stage, fn, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        elapsed = time.perf_counter() - start
        self.timings[stage] = round(elapsed, 4)
        logger.info(f"Stage {stage} took {elapsed:.2f}s")
        return result

    @cached_property
    def system(self):
        return self.scenario.build_system()

    @cached_property
    def scene(self):
        return self.scenario.build_scene()

    @cached_property
    def lattice(self):
        spacing = self.scenario.spacing
        if len(spacing) not in (1, self.scene.dim):
            raise ConfigurationError(f"spacing has {len(spacing)} entries, scene has {self.scene.dim} axes")
        return self._timed('lattice', build_lattice, self.scene,
                           spacing if len(spacing) > 1 else spacing[0], self.system.axis_topology)

    @cached_property
    def graph(self):
        return self._timed('graph', build_graph, self.system, self.lattice,
                           tau=self.scenario.tau, workers=self.workers)

    @cached_property
    def clearance(self):
        return self._timed('clearance', clearance_field, self.graph, engine=self.scenario.engine)

    @cached_property
    def envelope_map(self):
        return self._timed('envelope', envelope, self.clearance, kappa=self.scenario.kappa)

    @cached_property
    def boundary(self):
        return self._timed('classify_boundary', analysis.classify_boundary, self.graph,
                           rho_probe=self.scenario.rho_probe, engine=self.scenario.engine)

    def computation(self, label):
        for spec in self.scenario.computations:
            if spec['label'] == label:
                return spec
        raise ConfigurationError(f"Unknown field label: {label}")

    def field(self, label):
        """CostField by label: 'clearance', 'rim' or a scenario computation"""
        if label == 'clearance':
            return self.clearance.field
        if label == 'rim':
            return self.clearance.rim
        if label not in self._fields:
            spec = self.computation(label)
            op = spec['op']
            limit = spec.get('limit')
            if op == 'cost_from':
                if 'x' not in spec:
                    raise ConfigurationError(f"Computation {label} needs x")
                self._fields[label] = self._timed(f"field:{label}", cost_from, self.graph, spec['x'],
                                                  engine=self.scenario.engine, limit=limit)
            elif op == 'cost_to':
                targets = spec.get('targets', 'boundary')
                if targets == 'boundary':
                    ids = self.lattice.boundary_ids
                else:
                    ids = [self.lattice.nearest(point) for point in targets]
                self._fields[label] = self._timed(f"field:{label}", cost_to, self.graph, ids,
                                                  engine=self.scenario.engine, limit=limit)
            else:
                raise ConfigurationError(f"Unknown computation op {op}, expected one of {COMPUTATION_OPS}")
        return self._fields[label]

    # Exports

    def default_exports(self):
        exports = ['clearance', 'envelope'] if len(self.lattice.boundary_ids) else []
        return exports + [f"{spec['op']}:{spec['label']}" for spec in self.scenario.computations]

    def slice_indices(self):
        """Heatmap slices for lattices with more than two axes, [None] otherwise"""
        if self.lattice.dim <= 2:
            return [None]
        slices = self.scenario.slices
        if not slices:
            return [[n // 2 for n in self.lattice.shape[2:]]]
        result = []
        for entry in slices:
            index = [int(i) for i in (entry if isinstance(entry, (list, tuple)) else [entry])]
            if len(index) != self.lattice.dim - 2:
                raise ConfigurationError(f"Slice {entry} needs {self.lattice.dim - 2} indices")
            for i, n in zip(index, self.lattice.shape[2:]):
                if not 0 <= i < n:
                    raise ConfigurationError(f"Slice index {i} outside 0..{n - 1}")
            result.append(index)
        return result

    def _heatmaps(self, out_dir, name, writer, values):
        paths = []
        for index in self.slice_indices():
            suffix = '' if index is None else '_s' + '-'.join(str(i) for i in index)
            path = os.path.join(out_dir, 'heatmaps', f"{name}{suffix}.pgm")
            paths.append(writer(path, self.lattice, values, index))
        return paths

    def write_exports(self, out_dir):
        exports = self.scenario.exports if self.scenario.exports is not None else self.default_exports()
        lattice = self.lattice
        files = []
        start = time.perf_counter()
        for name in exports:
            kind, _, label = name.partition(':')
            csv_path = os.path.join(out_dir, 'fields', f"{label or kind}.csv")
            if kind == 'clearance':
                cf = self.clearance
                files.append(write_field_csv(csv_path, lattice, cf.ticks, cf.field.predecessor,
                                             {'class': lattice.node_class, 'witness': cf.witness}))
                files.extend(self._heatmaps(out_dir, 'clearance', write_heatmap, cf.ticks))
            elif kind == 'envelope':
                em = self.envelope_map
                files.append(write_field_csv(csv_path, lattice, em.rho_max, None,
                                             {'envelope': em.envelope,
                                              'boundary_adjacent': em.boundary_adjacent}))
                files.extend(self._heatmaps(out_dir, 'envelope', write_mask,
                                            em.envelope | em.boundary_adjacent))
            elif kind == 'rim':
                rim = self.clearance.rim
                files.append(write_field_csv(csv_path, lattice, rim.ticks, rim.predecessor))
                files.extend(self._heatmaps(out_dir, 'rim', write_heatmap, rim.ticks))
            elif kind in COMPUTATION_OPS and label:
                if self.computation(label)['op'] != kind:
                    raise ConfigurationError(f"Export {name} does not match computation {label}")
                field = self.field(label)
                files.append(write_field_csv(csv_path, lattice, field.ticks, field.predecessor))
                files.extend(self._heatmaps(out_dir, label, write_heatmap, field.ticks))
            else:
                raise ConfigurationError(f"Unknown export: {name}")
        self.timings['exports'] = round(time.perf_counter() - start, 4)
        return files

    # Checks

    def run_checks(self, out_dir):
        """Run every configured check; returns (summary entries, report paths)"""
        entries = []
        files = []
        for index, check in enumerate(self.scenario.checks):
            op = check['op']
            handler = CHECK_HANDLERS.get(op)
            if handler is None:
                raise ConfigurationError(f"Unsupported check: {op}")
            check_id = str(check.get('id', f"{index:02d}_{op}"))
            params = {k: v for k, v in check.items() if k not in ('op', 'id', 'expect')}
            try:
                inspect.signature(handler).bind(self, **params)
            except TypeError as e:
                raise ConfigurationError(f"Check {check_id}: {e}")

            try:
                report = self._timed(f"check:{check_id}", handler, self, **params)
            except (ConfigurationError, ResourceError):
                raise
            except ClearanceError as e:
                logger.error(f"Check {check_id} raised {type(e).__name__}: {e}", exc_info=True)
                report = analysis.format_report(op, False, str(e), params,
                                                {'error': type(e).__name__}, status='error')

            if 'expect' in check:
                expectation = compare_expectations(report, check['expect'])
                report['expectation'] = expectation
                verdict = expectation['passed']
            else:
                # None: the check did not apply
                verdict = report['passed']
            report['verdict'] = verdict
            files.append(write_json(os.path.join(out_dir, 'reports', f"{check_id}.json"), report))
            entry = {'id': check_id, 'op': op, 'status': report['status'], 'verdict': verdict}
            if verdict is None:
                entry.update(status=SKIPPED, reason=report['status'])
            entries.append(entry)
            if verdict is None:
                logger.warning(f"Check {check_id} skipped ({report['status']}): {report['message']}")
            elif verdict:
                logger.info(f"Check {check_id}: {report['message']}")
            else:
                logger.warning(f"Check {check_id} did not pass: {report['message']}")
        return entries, files

    def summary(self, checks):
        document = {
            'scenario': self.scenario.name,
            'graph': self.graph.to_dict(),
            'checks': checks,
        }
        if len(self.lattice.boundary_ids):
            document['clearance'] = summarize(self.clearance, self.envelope_map)
        if 'boundary' in self.__dict__:
            document['boundary'] = self.boundary.to_dict()
        return document


# Expectations

def _lookup(report, path):
    parts = str(path).split('.')
    if parts[0] not in report:
        parts = ['evidence'] + parts
    value = report
    for part in parts:
        if isinstance(value, list):
            try:
                value = value[int(part)]
            except (ValueError, IndexError):
                raise KeyError(path)
        elif isinstance(value, dict) and part in value:
            value = value[part]
        else:
            raise KeyError(path)
    return value


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def matches(actual, want):
    """
    Compare one report value to an expectation

    Plain values compare by equality (numbers with a 1e-9 tolerance, lists
    element-wise); mappings use the operators approx/tol, near/tol, min, max,
    len, min_len, max_len and contains. +inf appears in reports as null.
    """
    if isinstance(want, dict):
        unknown = set(want) - MATCH_KEYS
        if unknown:
            raise ConfigurationError(f"Unknown expectation operators: {sorted(unknown)}")
        tol = float(want.get('tol', 1e-6))
        ok = True
        if 'approx' in want:
            ok = ok and _is_number(actual) and abs(actual - want['approx']) <= tol
        if 'near' in want:
            ok = (ok and isinstance(actual, list) and len(actual) == len(want['near'])
                  and math.dist(actual, want['near']) <= tol)
        if 'min' in want:
            ok = ok and _is_number(actual) and actual >= want['min']
        if 'max' in want:
            ok = ok and _is_number(actual) and actual <= want['max']
        if 'len' in want:
            ok = ok and actual is not None and len(actual) == want['len']
        if 'min_len' in want:
            ok = ok and actual is not None and len(actual) >= want['min_len']
        if 'max_len' in want:
            ok = ok and actual is not None and len(actual) <= want['max_len']
        if 'contains' in want:
            ok = ok and actual is not None and want['contains'] in actual
        return bool(ok)
    if isinstance(want, list):
        return (isinstance(actual, list) and len(actual) == len(want)
                and all(matches(a, w) for a, w in zip(actual, want)))
    if _is_number(want) and _is_number(actual):
        return math.isclose(actual, want, rel_tol=0, abs_tol=1e-9)
    return actual == want


def compare_expectations(report, expect):
    if not isinstance(expect, dict):
        raise ConfigurationError(f"expect must be a mapping, got {expect!r}")
    mismatches = []
    for path, want in expect.items():
        try:
            actual = _lookup(report, path)
        except KeyError:
            mismatches.append({'path': path, 'expected': want, 'actual': '<missing>'})
            continue
        if not matches(actual, want):
            mismatches.append({'path': path, 'expected': want, 'actual': actual})
    return {'passed': not mismatches, 'mismatches': mismatches}


def check_run(manifest, expected, exit_code):
    """
    Compare a finished run against an expected-value sidecar

    Sidecar keys: exit_code, checks (id -> verdict), probes (list of
    {field, x, <key>: expectation}), max_runtime (seconds).

    Returns:
        list of mismatch dicts, empty when the run matches
    """
    mismatches = []
    if 'exit_code' in expected and exit_code != expected['exit_code']:
        mismatches.append({'path': 'exit_code', 'expected': expected['exit_code'], 'actual': exit_code})
    verdicts = {entry['id']: entry['verdict'] for entry in manifest.get('checks') or []}
    for check_id, want in (expected.get('checks') or {}).items():
        if check_id in verdicts and verdicts[check_id] is None:
            mismatches.append({'path': f"checks.{check_id}", 'expected': want, 'actual': SKIPPED})
        elif verdicts.get(check_id) != want:
            mismatches.append({'path': f"checks.{check_id}", 'expected': want,
                               'actual': verdicts.get(check_id, '<missing>')})
    probes = manifest.get('probes') or []
    for want in expected.get('probes') or []:
        field = want.get('field', 'clearance')
        found = [p for p in probes if p['field'] == field and matches(p['x'], want['x'])]
        if not found:
            mismatches.append({'path': f"probes.{field}@{want['x']}", 'expected': 'a probe', 'actual': '<missing>'})
            continue
        for key, value in want.items():
            if key in ('field', 'x'):
                continue
            actual = found[0].get(key, '<missing>')
            if not matches(actual, value):
                mismatches.append({'path': f"probes.{field}@{want['x']}.{key}", 'expected': value,
                                   'actual': actual})
    if 'max_runtime' in expected:
        total = (manifest.get('timings') or {}).get('total')
        if total is None or total > expected['max_runtime']:
            mismatches.append({'path': 'timings.total', 'expected': {'max': expected['max_runtime']},
                               'actual': total})
    return mismatches


# Check handlers: (pipeline, **params) -> report

def _seed(run, seed):
    return run.scenario.seed if seed is None else int(seed)


def _direction(run, xi, point):
    """xi as given, the heading direction for 'heading', or None for a fan search"""
    if xi == 'heading':
        node = run.lattice.nearest(point)
        theta = run.lattice.coords([node])[0][2]
        return [math.cos(theta), math.sin(theta), 0.0]
    return xi


def _angles(radians, pi_fractions):
    angles = [float(a) for a in (radians or [])]
    angles += [float(f) * math.pi for f in (pi_fractions or [])]
    return angles


def probe(run, x, field='clearance'):
    lattice = run.lattice
    node = lattice.nearest(x)
    cost_field = run.field(field)
    evidence = {
        'node': lattice.coords([node])[0].tolist(),
        'class': CLASS_NAMES[int(lattice.node_class[node])],
        'value': cost_field.value(node),
    }
    if field == 'clearance':
        witness = run.clearance.witness_at(x)
        evidence['witness'] = None if witness is None else witness.tolist()
    report = analysis.format_report('probe', True, f"{field} at {evidence['node']} = {evidence['value']}",
                                    {'x': list(x), 'field': field}, evidence)
    run.probes.append({'field': field, 'x': list(x), **report['evidence']})
    return report


def clearance_along(run, start, control, duration, step=DEFAULT_STEP, kappa=None):
    traj = analysis.straight_trajectory(run.system, np.asarray(start, dtype=float), control, duration, step)
    em = run.envelope_map
    return analysis.check_clearance_along(run.clearance, traj, run.graph,
                                          kappa=em.kappa if kappa is None else kappa)


def optimality_principle(run, x):
    return analysis.check_optimality_principle(run.clearance, x)


def envelope_propagation(run, x, min_fraction=analysis.PROPAGATION_FRACTION):
    return analysis.check_envelope_propagation(run.clearance, run.envelope_map, x, min_fraction)


def classify_boundary(run, rho_probe=None, points=()):
    if rho_probe is None or rho_probe == run.scenario.rho_probe:
        bc = run.boundary
    else:
        bc = analysis.classify_boundary(run.graph, rho_probe=rho_probe, engine=run.scenario.engine)
    labels = [bc.label_at(point) for point in points]
    evidence = dict(bc.to_dict(), labels=labels)
    return analysis.format_report('classify_boundary', True,
                                  f"{evidence['shelf_nodes']} shelf, {evidence['cliff_nodes']} cliff",
                                  {'rho_probe': bc.rho_probe, 'points': [list(p) for p in points]}, evidence)


def h1(run, y0, xi=None, r_star=0.2, seed=None):
    return analysis.check_H1(run.system, run.graph, run.boundary, y0, xi=_direction(run, xi, y0),
                             r_star=r_star, seed=_seed(run, seed))


def h2(run, y0, radii):
    return analysis.check_H2(run.lattice, y0, radii)


def accessibility(run, y0, rho):
    return analysis.check_accessibility(run.graph, y0, rho, engine=run.scenario.engine)


def envelope_generator(run, y0, radii=None, thresholds=None, full=True, xi=None, r_star=0.2,
                       h2_radii=None, access_rho=None, seed=None):
    if not full:
        report = analysis.detect_envelope_generator(run.clearance, run.envelope_map, y0, radii, thresholds)
    else:
        report = analysis.analyze_envelope_generator(
            run.clearance, run.envelope_map, run.boundary, y0, xi=_direction(run, xi, y0),
            r_star=r_star, h2_radii=h2_radii, radii=radii, thresholds=thresholds,
            access_rho=access_rho, seed=_seed(run, seed),
        )
    return report.to_report()


def generator_sweep(run, base, angles=None, angles_pi=None, inherit=None, inherit_pi=None, axis=2,
                    xi=None, r_star=0.2, h2_radii=None, radii=None, thresholds=None,
                    access_rho=None, seed=None):
    swept = _angles(angles, angles_pi)
    inherited = _angles(inherit, inherit_pi)
    reports = analysis.sweep_envelope_generators(
        run.clearance, run.envelope_map, run.boundary, base, swept, axis=axis, inherit=inherited,
        xi=xi, r_star=r_star, h2_radii=h2_radii, radii=radii, thresholds=thresholds,
        access_rho=access_rho, seed=_seed(run, seed),
    )
    evidence = {
        'angles': swept + inherited,
        'verdicts': [r['evidence']['verdict'] for r in reports],
        'failing_hypotheses': [r['evidence']['failing_hypotheses'] for r in reports],
        'reports': reports,
    }
    verdicts = ''.join('T' if v else 'F' for v in evidence['verdicts'])
    return analysis.format_report('generator_sweep', True, f"Verdicts {verdicts}",
                                  {'base': list(base), 'axis': axis}, evidence)


def persistent_boundary(run, x, r, rho_list, xi=None, seed=None):
    return analysis.check_persistent_boundary(run.graph, x, r, rho_list, xi=xi,
                                              engine=run.scenario.engine, seed=_seed(run, seed))


def uniform_penetration(run, x, xi=None, r_star=0.2, n_samples=500, step=DEFAULT_STEP, seed=None):
    system = run.system
    x = np.asarray(x, dtype=float)
    if xi is None:
        xi, _ = best_direction(system, x)
    seed = _seed(run, seed)
    try:
        cert = compute_certificate(system, x, xi, r_star, analysis.CERTIFICATE_CHECK_SAMPLES, seed)
    except CertificateInfeasibleError as e:
        return analysis.not_applicable('uniform_penetration', str(e), {'x': x.tolist(), 'r_star': r_star})
    return analysis.check_uniform_penetration(system, cert, n_samples=n_samples, seed=seed, step=step)


def certificate(run, x, xi, r_star, expected=None, tolerance=0.05, samples=None, seed=None):
    return analysis.check_certificate(run.system, x, xi, r_star, expected=expected, tolerance=tolerance,
                                      samples=samples, seed=_seed(run, seed))


def velocity_bounds(run, count=analysis.CERTIFICATE_CHECK_SAMPLES, seed=None):
    return analysis.check_velocity_bounds(run.system, run.lattice, count, _seed(run, seed))


def clearance_oracle(run, oracle, region=None, tol=None):
    return analysis.check_clearance_oracle(run.clearance, oracle, region, tol)


def envelope_segment(run, a, b, max_clr, tol=None, flagged_points=()):
    return analysis.check_envelope_near_segment(run.clearance, run.envelope_map, a, b, max_clr, tol,
                                                flagged_points)


def quasi_metric(run, n_triples=100, seed=None):
    return analysis.check_quasi_metric(run.graph, n_triples, _seed(run, seed))


def property_suite(run, seed=None, n_triples=100, n_chains=50, n_walks=50, n_rho=5, walk_length=30):
    return analysis.run_property_suite(run.graph, run.clearance, run.envelope_map, _seed(run, seed),
                                       n_triples, n_chains, n_walks, n_rho, walk_length)


def reachable_continuity(run, rho, deltas, field='clearance', mu=None, x=None, offsets=None,
                         max_ratio=10.0):
    cost_field = run.field(field)
    reports = [analysis.check_sublevel_continuity(cost_field, rho, deltas)]
    if mu is not None:
        reports.append(analysis.check_nesting_with_closure(cost_field, rho, mu))
    if x is not None and offsets:
        reports.append(analysis.check_lipschitz_in_x(run.graph, x, rho, offsets, max_ratio,
                                                     engine=run.scenario.engine))
    passed = all(report['passed'] is not False for report in reports)
    evidence = {report['check']: report for report in reports}
    return analysis.format_report('reachable_continuity', passed,
                                  '; '.join(report['message'] for report in reports),
                                  {'field': field, 'rho': rho}, evidence)


CHECK_HANDLERS = {
    'probe': probe,
    'clearance_along': clearance_along,
    'optimality_principle': optimality_principle,
    'envelope_propagation': envelope_propagation,
    'classify_boundary': classify_boundary,
    'h1': h1,
    'h2': h2,
    'accessibility': accessibility,
    'envelope_generator': envelope_generator,
    'generator_sweep': generator_sweep,
    'persistent_boundary': persistent_boundary,
    'uniform_penetration': uniform_penetration,
    'certificate': certificate,
    'velocity_bounds': velocity_bounds,
    'clearance_oracle': clearance_oracle,
    'envelope_segment': envelope_segment,
    'quasi_metric': quasi_metric,
    'property_suite': property_suite,
    'reachable_continuity': reachable_continuity,
}


def run(scenario_file, out_dir, workers=None, spacing=None, seed=None):
    """
    Run one scenario into out_dir

    Args:
        scenario_file: path to the YAML scenario
        out_dir: run directory, created if missing
        workers: graph-construction workers, CLEARANCE_WORKERS/cpu count when None
        spacing: optional spacing override (scalar, list or comma string)
        seed: optional seed override

    Returns:
        exit code: 0 all checks pass, 1 check failure, 2 configuration, 3 resource
    """
    started = time.perf_counter()
    scenario = None
    pipeline = None
    files = []
    checks = []
    error = None
    exit_code = EXIT_OK
    try:
        scenario = load_scenario(scenario_file, overrides={'spacing': spacing, 'seed': seed})
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"Cannot create run directory {out_dir}: {e}")
        pipeline = Pipeline(scenario, workers=workers or DEFAULT_WORKERS)
        files.extend(pipeline.write_exports(out_dir))
        checks, reports = pipeline.run_checks(out_dir)
        files.extend(reports)
        files.append(write_json(os.path.join(out_dir, 'summary.json'), pipeline.summary(checks)))
        failed = [entry['id'] for entry in checks if entry['verdict'] is False]
        if failed:
            logger.warning(f"{len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")
            exit_code = EXIT_CHECK_FAILED
    except ClearanceError as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        error = f"{type(e).__name__}: {e}"
        exit_code = e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        error = f"{type(e).__name__}: {e}"
        exit_code = EXIT_CHECK_FAILED

    timings = dict(pipeline.timings) if pipeline is not None else {}
    timings['total'] = round(time.perf_counter() - started, 4)
    try:
        manifest_path = os.path.join(out_dir, 'manifest.json')
        if scenario is None:
            write_json(manifest_path, {'scenario_file': scenario_file, 'error': error, 'files': []})
        else:
            manifest = build_manifest(out_dir, files, scenario, timings,
                                      pipeline.probes if pipeline else [], checks, error)
            write_json(manifest_path, manifest)
    except OSError as e:
        logger.error(f"Cannot write manifest: {e}")
        exit_code = exit_code or EXIT_CONFIGURATION
    logger.info(f"Run finished with exit code {exit_code} in {timings['total']:.2f}s")
    return exit_code


def main(argv=None):
    parser = argparse.ArgumentParser(description='Compute clearance fields and wave envelopes for a scenario')
    parser.add_argument('--scenario', required=True, help='Scenario YAML file')
    parser.add_argument('--out', help='Run directory (default: runs/<scenario name>)')
    parser.add_argument('--workers', type=int, help='Graph-construction workers')
    parser.add_argument('--spacing', help='Lattice spacing override, scalar or comma-separated per axis')
    parser.add_argument('--seed', type=int, help='Seed override')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    if args.workers is not None and args.workers < 1:
        parser.error('--workers must be at least 1')
    out_dir = args.out or os.path.join('runs', os.path.splitext(os.path.basename(args.scenario))[0])
    return run(args.scenario, out_dir, workers=args.workers, spacing=args.spacing, seed=args.seed)


if __name__ == '__main__':
    raise SystemExit(main())
