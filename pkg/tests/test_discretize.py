import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.discretize import (DomainSpec, GridKind, Stencil, assemble_hamiltonian, build_grid,
                            default_domain)
from src.eigensolve import dense_eigenvalues
from src.errors import DomainError, GridError
from src.potentials import Family, PotentialSpec

FREE = PotentialSpec.custom(lambda x: np.zeros_like(x, dtype=complex), label="free")


def test_symmetric_box():
    grid = build_grid(DomainSpec.box(10.0, 2001))
    assert grid.kind is GridKind.FULL_LINE_BOX
    assert grid.h == pytest.approx(0.01)
    assert grid.x[1000] == 0.0
    assert_array_equal(grid.x, -grid.x[::-1])


def test_half_line():
    grid = build_grid(DomainSpec.half_line(0.01, 10.0, 1000))
    assert grid.kind is GridKind.HALF_LINE_CUTOFF
    assert grid.x[0] == 0.01
    assert grid.x[-1] == 10.0
    assert grid.eps == 0.01


@pytest.mark.parametrize("domain", [
    DomainSpec.box(5.0, 4),
    DomainSpec(-5.0, 4.0, 101),
    DomainSpec.half_line(0.0, 10.0, 100),
    DomainSpec.half_line(-0.1, 10.0, 100),
    DomainSpec.half_line(12.0, 10.0, 100),
    DomainSpec(1.0, 1.0, 11, symmetric=False),
    DomainSpec.box(5.0, 1),
])
def test_invalid_domains(domain):
    with pytest.raises(GridError):
        build_grid(domain)


def test_grid_nodes_are_read_only():
    grid = build_grid(DomainSpec.box(1.0, 11))
    with pytest.raises(ValueError):
        grid.x[0] = 3.0


def test_refined_keeps_old_nodes():
    grid = build_grid(DomainSpec.box(2.0, 21))
    fine = grid.refined()
    assert fine.n == 41
    assert fine.h == pytest.approx(grid.h / 2)
    assert_allclose(fine.x[::2], grid.x, atol=1e-15)


def test_enlarged_keeps_spacing():
    grid = build_grid(DomainSpec.box(8.0, 161))
    wide = grid.enlarged(1.25)
    assert wide.is_symmetric
    assert wide.h == pytest.approx(grid.h)
    assert wide.x_max == pytest.approx(10.0)

    half = build_grid(DomainSpec.half_line(0.1, 8.1, 81))
    wide = half.enlarged(1.25)
    assert wide.x[0] == 0.1
    assert wide.h == pytest.approx(half.h)
    assert wide.x_max == pytest.approx(10.1)


def test_with_cutoff_only_on_half_line():
    half = build_grid(DomainSpec.half_line(0.1, 10.0, 100))
    moved = half.with_cutoff(0.001)
    assert moved.x[0] == 0.001
    assert moved.n == 100
    with pytest.raises(GridError):
        build_grid(DomainSpec.box(5.0, 11)).with_cutoff(0.1)


def test_default_domains():
    ip = PotentialSpec(Family.INVERSE_POWER_1, {"lambda": 1.0})
    assert default_domain(ip) == DomainSpec.half_line(0.01, 10.0, 2000)
    assert default_domain(ip, eps=0.001).eps == 0.001
    pt = PotentialSpec.poeschl_teller(1, lam=1.0)
    assert default_domain(pt) == DomainSpec.box(15.0, 3001)
    # an even count on a symmetric box is refused, not rounded
    assert default_domain(PotentialSpec.harmonic(), n=400).n == 400
    with pytest.raises(GridError):
        build_grid(default_domain(PotentialSpec.harmonic(), n=400))


def test_free_three_point_matrix():
    grid = build_grid(DomainSpec(0.0, 4.0, 5, symmetric=False))
    dense = assemble_hamiltonian(FREE, grid, Stencil.THREE_POINT).to_dense()
    expected = np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]], dtype=complex)
    assert_array_equal(dense, expected)


def test_five_point_wall_closure():
    grid = build_grid(DomainSpec.box(1.0, 11))
    m = assemble_hamiltonian(PotentialSpec.harmonic(), grid, Stencil.FIVE_POINT)
    h = grid.h
    assert m.bandwidth == 2
    assert m.diagonals[0][0] == pytest.approx(29.0 / (12 * h ** 2) + grid.x[1] ** 2)
    assert m.diagonals[0][4] == pytest.approx(30.0 / (12 * h ** 2) + grid.x[5] ** 2)
    dense = m.to_dense()
    assert_array_equal(dense, dense.T)


@pytest.mark.parametrize("stencil", [Stencil.THREE_POINT, Stencil.FIVE_POINT])
@pytest.mark.parametrize("spec", [
    PotentialSpec.harmonic(),
    PotentialSpec(Family.CUBIC, {"mu": 0.0, "g": 1.0}),
    PotentialSpec.poeschl_teller(1, mu=1.0, lam=2.5),
    PotentialSpec(Family.QUARTIC),
    PotentialSpec(Family.SHIFTED_QUARTIC_1),
    PotentialSpec(Family.SHIFTED_QUARTIC_2),
], ids=lambda s: s.name)
def test_matrix_is_pt_symmetric(spec, stencil):
    grid = build_grid(DomainSpec.box(5.0, 101))
    m = assemble_hamiltonian(spec, grid, stencil)
    assert m.is_pt_symmetric()


def test_banded_storage_matches_dense():
    grid = build_grid(DomainSpec.box(2.0, 9))
    m = assemble_hamiltonian(PotentialSpec.harmonic().with_params(g=1.0), grid, Stencil.FIVE_POINT)
    ab = m.to_banded()
    dense = m.to_dense()
    for i in range(m.order):
        for j in range(max(0, i - 2), min(m.order, i + 3)):
            assert ab[2 + i - j, j] == dense[i, j]


def test_singular_node_is_named():
    spec = PotentialSpec(Family.INVERSE_POWER_1, {"lambda": 1.0})
    with pytest.raises(DomainError, match="node 4"):
        assemble_hamiltonian(spec, build_grid(DomainSpec.box(5.0, 11)))


def _lowest_free(n: int, stencil: Stencil) -> float:
    grid = build_grid(DomainSpec.box(1.0, n))
    m = assemble_hamiltonian(FREE, grid, stencil)
    return dense_eigenvalues(m).eigenvalues[0].real


@pytest.mark.parametrize("stencil, order", [(Stencil.THREE_POINT, 1.9), (Stencil.FIVE_POINT, 3.8)])
def test_stencil_convergence_order(stencil, order):
    exact = (np.pi / 2) ** 2
    coarse = abs(_lowest_free(41, stencil) - exact)
    fine = abs(_lowest_free(81, stencil) - exact)
    assert np.log2(coarse / fine) >= order
