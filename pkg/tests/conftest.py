import pytest

from clearance_waves.clearance import clearance_field, envelope
from clearance_waves.reach import build_graph
from clearance_waves.scene import build_lattice, builtin_scene, scene_from_spec
from clearance_waves.systems import builtin_system

GALAGA_SPACING = 0.05
GALAGA_TAU = 0.05


@pytest.fixture(scope='module')
def galaga():
    return builtin_system('galaga')


@pytest.fixture(scope='module')
def horizontal():
    return builtin_system('horizontal')


@pytest.fixture(scope='module')
def galaga_lattice(galaga):
    return build_lattice(builtin_scene('galaga-corner'), GALAGA_SPACING, galaga.axis_topology)


@pytest.fixture(scope='module')
def galaga_graph(galaga, galaga_lattice):
    return build_graph(galaga, galaga_lattice, tau=GALAGA_TAU)


@pytest.fixture(scope='module')
def galaga_clearance(galaga_graph):
    return clearance_field(galaga_graph)


@pytest.fixture(scope='module')
def galaga_envelope(galaga_clearance):
    return envelope(galaga_clearance)


@pytest.fixture(scope='module')
def slant_graph(galaga):
    lattice = build_lattice(builtin_scene('galaga-slant'), GALAGA_SPACING, galaga.axis_topology)
    return build_graph(galaga, lattice, tau=GALAGA_TAU)


@pytest.fixture(scope='module')
def slant_clearance(slant_graph):
    return clearance_field(slant_graph)


@pytest.fixture(scope='module')
def horizontal_graph(horizontal):
    lattice = build_lattice(builtin_scene('horiz-corner'), GALAGA_SPACING, horizontal.axis_topology)
    return build_graph(horizontal, lattice, tau=GALAGA_TAU)


@pytest.fixture(scope='module')
def horizontal_clearance(horizontal_graph):
    return clearance_field(horizontal_graph)


@pytest.fixture(scope='module')
def horizontal_envelope(horizontal_clearance):
    return envelope(horizontal_clearance, kappa=0.2)


@pytest.fixture(scope='module')
def point_graph(galaga):
    lattice = build_lattice(builtin_scene('galaga-point'), GALAGA_SPACING, galaga.axis_topology)
    return build_graph(galaga, lattice, tau=GALAGA_TAU)


@pytest.fixture(scope='module')
def slit_lattice():
    # zero-width wall along x1 = 0 splitting the box in two
    scene = scene_from_spec({
        'name': 'slit',
        'box': [[-1, 1], [-1, 1]],
        'obstacle': {'box': [[0, 0], ['-inf', 'inf']]},
    })
    return build_lattice(scene, 0.05)
