import pytest

from lapkit.grid_ops import interior_states
from shared.models import ConjugateSpec, GridSpec, PotentialSpec, PowerProfile

SEED = 1234


@pytest.fixture
def grid_1d():
    """Acceptance-size 1-D grid."""
    return GridSpec(n=1, N=512, L=20.0)


@pytest.fixture
def small_grid():
    return GridSpec(n=1, N=128, L=20.0)


@pytest.fixture
def tiny_grid():
    """Small enough for dense resolvents and eigensolves in milliseconds."""
    return GridSpec(n=1, N=64, L=20.0)


@pytest.fixture
def radial_grid():
    return GridSpec(n=3, N=256, L=20.0, geometry="radial")


@pytest.fixture
def grid_2d():
    return GridSpec(n=2, N=32, L=10.0)


@pytest.fixture
def dilation():
    return ConjugateSpec(kind="dilation")


@pytest.fixture
def bracket_potential():
    """V = <x>^-4."""
    return PotentialSpec(real=PowerProfile(amplitude=1.0, exponent=4.0))


@pytest.fixture
def states_1d(grid_1d):
    return interior_states(grid_1d, 8, SEED)


@pytest.fixture
def radial_states(radial_grid):
    return interior_states(radial_grid, 100, SEED)
