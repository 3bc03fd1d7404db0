import numpy as np
import pytest

from fermibose import fock, lattice


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small2():
    """d=2 gas with 5 particles, the smallest nontrivial geometry."""
    return lattice.GasConfig(d=2, fermi_radius_sq=1, alpha=-1.0)


@pytest.fixture
def small3():
    return lattice.GasConfig(d=3, fermi_radius_sq=1, alpha=-1.0)


@pytest.fixture
def unit4():
    return fock.unit_potential(2)


@pytest.fixture
def unit6():
    return fock.unit_potential(3)
