import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import sparse

from src.errors import DomainError, GridError
from src.potentials import Family, PotentialSpec

logger = logging.getLogger(__name__)


class GridKind(str, Enum):
    FULL_LINE_BOX = "FullLineBox"
    HALF_LINE_CUTOFF = "HalfLineCutoff"
    INTERVAL = "Interval"


class Stencil(str, Enum):
    THREE_POINT = "3pt"
    FIVE_POINT = "5pt"


# Box half-width and node count used when the caller gives none
DEFAULT_BOX = {
    Family.POESCHL_TELLER_1: (15.0, 3001),
    Family.POESCHL_TELLER_2: (15.0, 3001),
    Family.SHIFTED_QUARTIC_1: (8.0, 1601),
    Family.SHIFTED_QUARTIC_2: (8.0, 1601),
    Family.INVERSE_POWER_1: (10.0, 2000),
    Family.INVERSE_POWER_2: (10.0, 2000),
}
DEFAULT_CONFINING_BOX = (10.0, 2001)
DEFAULT_CUTOFF = 1e-2


@dataclass(frozen=True)
class DomainSpec:
    """Requested truncation of the real line; eps selects a half-line cutoff grid"""
    x_min: float
    x_max: float
    n: int
    symmetric: bool = True
    eps: Optional[float] = None

    @classmethod
    def box(cls, half_width: float, n: int) -> "DomainSpec":
        return cls(-half_width, half_width, n, symmetric=True)

    @classmethod
    def half_line(cls, eps: float, x_max: float, n: int) -> "DomainSpec":
        return cls(eps, x_max, n, symmetric=False, eps=eps)


def default_domain(spec: PotentialSpec, half_width: Optional[float] = None,
                   n: Optional[int] = None, eps: Optional[float] = None) -> DomainSpec:
    """Family-dependent defaults, overridable per field"""
    L, count = DEFAULT_BOX.get(spec.family, DEFAULT_CONFINING_BOX)
    L = half_width if half_width is not None else L
    count = n if n is not None else count
    if spec.singular_at_origin:
        return DomainSpec.half_line(eps if eps is not None else DEFAULT_CUTOFF, L, count)
    return DomainSpec.box(L, count)


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int
    kind: GridKind
    eps: Optional[float] = None
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind is GridKind.FULL_LINE_BOX:
            m = (self.n - 1) // 2
            nodes = (self.x_max / m) * np.arange(-m, m + 1, dtype=float)
        else:
            nodes = self.x_min + self.h * np.arange(self.n, dtype=float)
            nodes[-1] = self.x_max
        nodes.setflags(write=False)
        object.__setattr__(self, "x", nodes)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def interior(self) -> np.ndarray:
        return self.x[1:-1]

    @property
    def is_symmetric(self) -> bool:
        return self.kind is GridKind.FULL_LINE_BOX

    def refined(self) -> "Grid":
        """Same bounds, n -> 2n - 1 (every old node is kept)"""
        return Grid(self.x_min, self.x_max, 2 * self.n - 1, self.kind, self.eps)

    def enlarged(self, factor: float = 1.25) -> "Grid":
        """Grow the box by factor at fixed spacing h"""
        h = self.h
        if self.kind is GridKind.FULL_LINE_BOX:
            m = int(round(factor * (self.n - 1) / 2))
            return Grid(-h * m, h * m, 2 * m + 1, self.kind)
        steps = int(round(factor * (self.n - 1)))
        return Grid(self.x_min, self.x_min + h * steps, steps + 1, self.kind, self.eps)

    def with_cutoff(self, eps: float) -> "Grid":
        """Same x_max and n with the wall moved to eps"""
        if self.kind is not GridKind.HALF_LINE_CUTOFF:
            raise GridError("only half-line grids have a cutoff")
        return build_grid(DomainSpec.half_line(eps, self.x_max, self.n))


def build_grid(domain: DomainSpec) -> Grid:
    """
    Build a uniform grid from a domain request.

    Raises:
        GridError: inconsistent bounds, bad cutoff, or even n on a symmetric request
    """
    if domain.n < 3:
        raise GridError(f"need at least 3 nodes, got {domain.n}")
    if not np.isfinite(domain.x_min) or not np.isfinite(domain.x_max) or domain.x_min >= domain.x_max:
        raise GridError(f"need finite x_min < x_max, got [{domain.x_min}, {domain.x_max}]")

    if domain.eps is not None:
        if domain.eps <= 0:
            raise GridError(f"cutoff eps must be > 0, got {domain.eps}")
        if domain.eps >= domain.x_max:
            raise GridError(f"cutoff eps={domain.eps} must lie below x_max={domain.x_max}")
        return Grid(domain.eps, domain.x_max, domain.n, GridKind.HALF_LINE_CUTOFF, domain.eps)

    if domain.symmetric:
        if domain.x_min != -domain.x_max:
            raise GridError(f"symmetric grid needs x_min = -x_max, got [{domain.x_min}, {domain.x_max}]")
        if domain.n % 2 == 0:
            raise GridError(f"symmetric grid needs odd n so that x = 0 is a node, got {domain.n}")
        return Grid(domain.x_min, domain.x_max, domain.n, GridKind.FULL_LINE_BOX)

    return Grid(domain.x_min, domain.x_max, domain.n, GridKind.INTERVAL)


@dataclass(frozen=True)
class ComplexBandedMatrix:
    """
    Complex symmetric banded matrix acting on the interior nodes.

    diagonals[0] is the main diagonal, diagonals[k] the k-th off-diagonal
    (shared by the upper and lower band).
    """
    diagonals: Tuple[np.ndarray, ...]

    def __post_init__(self):
        for d in self.diagonals:
            d.setflags(write=False)

    @property
    def order(self) -> int:
        return self.diagonals[0].size

    @property
    def bandwidth(self) -> int:
        return len(self.diagonals) - 1

    def to_sparse(self, fmt: str = "csc") -> sparse.spmatrix:
        data = [self.diagonals[0]]
        offsets = [0]
        for k, d in enumerate(self.diagonals[1:], start=1):
            data += [d, d]
            offsets += [k, -k]
        return sparse.diags(data, offsets, shape=(self.order, self.order), format=fmt, dtype=complex)

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def to_banded(self) -> np.ndarray:
        """LAPACK band storage for scipy.linalg.solve_banded with (l, u) = (bandwidth, bandwidth)"""
        bw = self.bandwidth
        ab = np.zeros((2 * bw + 1, self.order), dtype=complex)
        ab[bw] = self.diagonals[0]
        for k in range(1, bw + 1):
            ab[bw - k, k:] = self.diagonals[k]
            ab[bw + k, :-k] = self.diagonals[k]
        return ab

    def pt_image(self) -> "ComplexBandedMatrix":
        """J conj(M) J with J the index-reversal permutation"""
        return ComplexBandedMatrix(tuple(np.conj(d[::-1]).copy() for d in self.diagonals))

    def is_pt_symmetric(self, rel_tol: float = 1e-12) -> bool:
        """J conj(M) J == M up to rounding in the potential samples"""
        image = self.pt_image()
        return all(np.allclose(a, b, rtol=0.0, atol=rel_tol * (1.0 + np.max(np.abs(a), initial=0.0)))
                   for a, b in zip(self.diagonals, image.diagonals))

    def shifted(self, sigma: complex) -> "ComplexBandedMatrix":
        """M + sigma I"""
        diagonals = list(self.diagonals)
        diagonals[0] = diagonals[0] + sigma
        return ComplexBandedMatrix(tuple(d.copy() for d in diagonals))


def potential_on_nodes(spec: PotentialSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate V on grid nodes, naming the first offending node on failure"""
    try:
        return spec(x)
    except DomainError:
        for j, xj in enumerate(x):
            try:
                spec(np.array([xj]))
            except DomainError as e:
                raise DomainError(f"node {j} (x = {xj!r}): {e}") from e
        raise


def assemble_hamiltonian(spec: PotentialSpec, grid: Grid,
                         stencil: Stencil = Stencil.THREE_POINT) -> ComplexBandedMatrix:
    """
    Discretise H = -d^2/dx^2 + V on the interior nodes with Dirichlet walls.

    The 5-point stencil closes at the node next to each wall with an
    odd-reflected ghost node, which keeps the matrix complex symmetric.
    """
    stencil = Stencil(stencil)
    v = potential_on_nodes(spec, grid.interior)
    order = v.size
    inv_h2 = 1.0 / grid.h ** 2

    if stencil is Stencil.THREE_POINT:
        main = 2.0 * inv_h2 + v
        off = np.full(order - 1, -inv_h2, dtype=complex)
        return ComplexBandedMatrix((main, off))

    if order < 3:
        raise GridError(f"5-point stencil needs at least 3 interior nodes, got {order}")
    c = inv_h2 / 12.0
    main = 30.0 * c + v
    main[0] -= c
    main[-1] -= c
    off1 = np.full(order - 1, -16.0 * c, dtype=complex)
    off2 = np.full(order - 2, c, dtype=complex)
    return ComplexBandedMatrix((main, off1, off2))
