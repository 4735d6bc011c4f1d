import sys
from pathlib import Path

import pytest

# Add parent directory to path to import project modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.discretize import DomainSpec, build_grid  # noqa: E402
from src.potentials import PotentialSpec  # noqa: E402


@pytest.fixture
def harmonic():
    return PotentialSpec.harmonic()


@pytest.fixture
def harmonic_grid():
    """h = 0.02 on [-10, 10]"""
    return build_grid(DomainSpec.box(10.0, 1001))


@pytest.fixture
def pt_scarf():
    """sech*tanh member at mu = 1, lambda_tilde = 3: levels -3.75, -0.75 and a zero mode"""
    return PotentialSpec.poeschl_teller(1, mu=1.0, lambda_tilde=3.0)


@pytest.fixture
def pt_well():
    """pure sech^2 member at mu = 1, lambda_tilde = 3: levels -3.75, -0.75"""
    return PotentialSpec.poeschl_teller(2, mu=1.0, lambda_tilde=3.0)


@pytest.fixture
def sech_grid():
    return build_grid(DomainSpec.box(15.0, 1201))


@pytest.fixture
def cubic():
    """x^2 + i x^3"""
    return PotentialSpec.harmonic().with_params(g=1.0)
