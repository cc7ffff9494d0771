"""
Scenario files: YAML documents naming a system, a scene, the lattice
resolution and the computations and checks to run.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import yaml

from clearance_waves.errors import ConfigurationError
from clearance_waves.scene import scene_from_spec
from clearance_waves.systems import DEFAULT_CONTROL_SAMPLES, builtin_system

# Configure logging
logger = logging.getLogger(__name__)

KNOWN_KEYS = {
    'name', 'description', 'system', 'scene', 'spacing', 'tau', 'control_samples',
    'running_cost', 'kappa', 'rho_probe', 'seed', 'engine', 'exports', 'computations',
    'checks', 'slices',
}
ENGINES = ('scipy', 'heap')


@dataclass
class Scenario:
    name: str
    path: Optional[str]
    system: dict
    scene: object
    spacing: List[float]
    tau: Optional[float] = None
    kappa: Optional[float] = None
    rho_probe: Optional[float] = None
    seed: int = 0
    engine: str = 'scipy'
    exports: Optional[List[str]] = None
    computations: List[dict] = field(default_factory=list)
    checks: List[dict] = field(default_factory=list)
    slices: Optional[List[int]] = None

    def build_system(self):
        return builtin_system(
            self.system['name'],
            control_samples=self.system.get('control_samples', DEFAULT_CONTROL_SAMPLES),
            running_cost=self.system.get('running_cost', 'unit'),
        )

    def build_scene(self):
        return scene_from_spec(self.scene)

    def parameters(self):
        return {
            'system': self.system,
            'scene': self.scene if isinstance(self.scene, str) else self.scene.get('name', 'custom'),
            'spacing': self.spacing,
            'tau': self.tau,
            'kappa': self.kappa,
            'rho_probe': self.rho_probe,
            'engine': self.engine,
            'checks': [check.get('op') for check in self.checks],
        }


def _positive(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number, got {value!r}")
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return value


def parse_spacing(value):
    """Scalar, list, or comma-separated string of per-axis spacings"""
    if isinstance(value, str):
        value = [part for part in value.split(',') if part.strip()]
    if isinstance(value, (list, tuple)):
        return [_positive('spacing', v) for v in value]
    return [_positive('spacing', value)]


def scenario_from_dict(document, path=None, overrides=None):
    """
    Validate a parsed scenario document; overrides (spacing, seed) come from the CLI
    """
    if not isinstance(document, dict):
        raise ConfigurationError("Scenario file must contain a mapping")
    unknown = set(document) - KNOWN_KEYS
    if unknown:
        raise ConfigurationError(f"Unknown scenario keys: {sorted(unknown)}")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    system = document.get('system')
    if isinstance(system, str):
        system = {'name': system}
    if not isinstance(system, dict) or 'name' not in system:
        raise ConfigurationError("Scenario needs a system name")
    system = dict(system)
    for key in ('control_samples', 'running_cost'):
        if key in document:
            system[key] = document[key]

    if 'scene' not in document:
        raise ConfigurationError("Scenario needs a scene")
    if 'spacing' not in document and 'spacing' not in overrides:
        raise ConfigurationError("Scenario needs a spacing")

    name = document.get('name') or (os.path.splitext(os.path.basename(path))[0] if path else 'scenario')
    engine = document.get('engine', 'scipy')
    if engine not in ENGINES:
        raise ConfigurationError(f"Unknown search engine: {engine}")

    scenario = Scenario(
        name=name,
        path=path,
        system=system,
        scene=document['scene'],
        spacing=parse_spacing(overrides.get('spacing', document.get('spacing'))),
        tau=_positive('tau', document['tau']) if document.get('tau') is not None else None,
        kappa=_positive('kappa', document['kappa']) if document.get('kappa') is not None else None,
        rho_probe=(_positive('rho_probe', document['rho_probe'])
                   if document.get('rho_probe') is not None else None),
        seed=int(overrides.get('seed', document.get('seed', 0))),
        engine=engine,
        exports=document.get('exports'),
        computations=list(document.get('computations') or []),
        checks=list(document.get('checks') or []),
        slices=document.get('slices'),
    )
    for check in scenario.checks:
        if not isinstance(check, dict) or 'op' not in check:
            raise ConfigurationError(f"Every check needs an op, got {check!r}")
    for computation in scenario.computations:
        if not isinstance(computation, dict) or 'label' not in computation or 'op' not in computation:
            raise ConfigurationError(f"Every computation needs a label and an op, got {computation!r}")

    # resolve names now so a typo fails before any heavy work
    scenario.build_system()
    scenario.build_scene()
    return scenario


def load_scenario(path, overrides=None):
    """Read and validate a scenario file"""
    try:
        with open(path) as f:
            document = yaml.safe_load(f)
    except OSError as e:
        raise ConfigurationError(f"Cannot read scenario {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Cannot parse scenario {path}: {e}")
    scenario = scenario_from_dict(document, path=path, overrides=overrides)
    logger.info(f"Loaded scenario {scenario.name} from {path}")
    return scenario


def expected_path(scenario_path):
    base, _ = os.path.splitext(scenario_path)
    return f"{base}.expected.yaml"


def load_expected(scenario_path):
    """Expected-value sidecar next to a scenario file, or None"""
    path = expected_path(scenario_path)
    if not os.path.exists(path):
        return None
    with open(path) as f:
        try:
            return yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse expectations {path}: {e}")
