import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from src.discretize import (ComplexBandedMatrix, Grid, GridKind, Stencil,
                            assemble_hamiltonian, potential_on_nodes)
from src.errors import ConvergenceError, DomainError
from src.potentials import PotentialSpec

logger = logging.getLogger(__name__)

DENSE_CAP = 4000
RESCALE_AT = 1e150


class EigenClass(str, Enum):
    REAL = "Real"
    CONJUGATE_PAIR = "ConjugatePairMember"
    UNPAIRED = "Unpaired"
    SPURIOUS = "Spurious"


@dataclass
class SolverOptions:
    """Tolerances and switches shared by the spectral pipeline"""
    stencil: Stencil = Stencil.THREE_POINT
    method: str = "dense"  # dense | shooting | richardson
    dense_cap: int = DENSE_CAP
    levels: int = 10
    tau_real_raw: float = 1e-4
    tau_real_refined: float = 1e-7
    boundary_fraction: float = 0.05
    boundary_mass_threshold: float = 0.1
    box_factor: float = 1.25
    drift_factor: float = 100.0
    shoot_step_tol: float = 1e-10
    shoot_residual_tol: float = 1e-8
    max_iter: int = 50
    search_radius: float = 1.0

    def __post_init__(self):
        self.stencil = Stencil(self.stencil)
        if self.method not in ("dense", "shooting", "richardson"):
            raise ValueError(f"method must be dense, shooting or richardson, got {self.method!r}")


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by real part, ties by imaginary part"""
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    grid: Optional[Grid] = None

    def __len__(self) -> int:
        return self.eigenvalues.size


def sort_order(values: np.ndarray) -> np.ndarray:
    """Indices ordering values by real part, ties by imaginary part"""
    return np.lexsort((values.imag, values.real))


def conjugation_gap(values: np.ndarray) -> float:
    """Largest distance from an eigenvalue to the nearest conjugate of the spectrum"""
    if values.size == 0:
        return 0.0
    tree = cKDTree(np.column_stack([values.real, -values.imag]))
    distance, _ = tree.query(np.column_stack([values.real, values.imag]))
    return float(np.max(distance))


def _real_form_eig(a: np.ndarray, vectors: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Eigenpairs of a PT-symmetric M = A + iB through the real matrix A + JB.

    S = (I + iJ)/sqrt(2) is unitary and S^H M S = A + JB, so the spectrum is
    unchanged and real LAPACK returns its complex values as exact
    conjugate pairs. Eigenvectors map back as S w. A and B are first
    projected onto their even and odd parts to drop rounding in the samples.
    """
    even = 0.5 * (a.real + a.real[::-1, ::-1])
    real_form = even + 0.5 * (a.imag[::-1, :] - a.imag[:, ::-1])
    if not vectors:
        return scipy.linalg.eigvals(real_form, overwrite_a=True).astype(complex), None
    w, z = scipy.linalg.eig(real_form, right=True, overwrite_a=True)
    return w.astype(complex), (z + 1j * z[::-1, :]) / math.sqrt(2.0)


def dense_eigenvalues(m: ComplexBandedMatrix, vectors: bool = False,
                      dense_cap: int = DENSE_CAP, grid: Optional[Grid] = None) -> Spectrum:
    """
    All eigenvalues of the discretised operator via LAPACK (balance,
    Hessenberg reduction, shifted QR).

    Real matrices go to the symmetric solver and PT-symmetric ones
    to their real form, so neither can lose conjugation symmetry to rounding.

    Raises:
        ValueError: matrix order above dense_cap
        ConvergenceError: QR iteration failed; the message names the index
    """
    if m.order > dense_cap:
        raise ValueError(f"matrix order {m.order} exceeds the dense cap {dense_cap}")
    a = m.to_dense()
    try:
        if not np.any(a.imag):
            # real symmetric: Hermitian solver keeps the eigenvalues exactly real
            if vectors:
                w, v = scipy.linalg.eigh(a.real)
            else:
                w, v = scipy.linalg.eigvalsh(a.real), None
            w = w.astype(complex)
        elif m.is_pt_symmetric():
            w, v = _real_form_eig(a, vectors)
        elif vectors:
            w, v = scipy.linalg.eig(a, right=True, overwrite_a=True)
        else:
            w, v = scipy.linalg.eigvals(a, overwrite_a=True), None
    except scipy.linalg.LinAlgError as e:
        found = re.search(r"(\d+)", str(e))
        index = found.group(1) if found else "?"
        raise ConvergenceError(f"QR iteration did not converge at eigenvalue index {index}: {e}") from e

    order = sort_order(w)
    w = w[order]
    if v is not None:
        v = v[:, order]
    logger.debug(f"Dense solve of order {m.order}: lowest Re E = {w[0].real:.6g}")
    return Spectrum(w, v, grid)


def backward_error(m: ComplexBandedMatrix, E: complex, v: np.ndarray) -> float:
    """||M v - E v|| / (||M|| ||v||) in the 1-norm"""
    a = m.to_sparse()
    norm_m = abs(a).sum(axis=0).max()
    return float(np.linalg.norm(a @ v - E * v, 1) / (norm_m * np.linalg.norm(v, 1)))


def solve_grid(spec: PotentialSpec, grid: Grid, options: SolverOptions,
               vectors: bool = False) -> Spectrum:
    """
    Dense spectrum of spec on grid.

    Args:
        spec: potential to discretise
        grid: nodes; only the interior ones enter the matrix
        options: stencil and dense cap
        vectors: also return right eigenvectors

    Returns:
        Spectrum sorted by sort_order
    """
    m = assemble_hamiltonian(spec, grid, options.stencil)
    return dense_eigenvalues(m, vectors=vectors, dense_cap=options.dense_cap, grid=grid)


def inverse_iteration(m: ComplexBandedMatrix, sigma: complex, tol: float = 1e-10,
                      max_iter: int = 50) -> complex:
    """
    Eigenvalue nearest sigma by shifted inverse iteration.

    Uses the unconjugated Rayleigh quotient v^T M v / v^T v, the natural one
    for complex symmetric matrices.
    """
    a = m.to_sparse("csr")
    bw = m.bandwidth
    shifted = m.shifted(-sigma).to_banded()
    # no parity, so odd and even states are both reachable
    v = np.linspace(1.0, 2.0, m.order) + 0.3j
    estimate = sigma
    for _ in range(max_iter):
        try:
            v = scipy.linalg.solve_banded((bw, bw), shifted, v, check_finite=False)
        except scipy.linalg.LinAlgError:
            # sigma is an eigenvalue to working precision
            return complex(sigma)
        v /= np.linalg.norm(v)
        new = complex((v @ (a @ v)) / (v @ v))
        if abs(new - estimate) < tol * (1 + abs(new)):
            return new
        estimate = new
    raise ConvergenceError(f"inverse iteration near {sigma} did not converge in {max_iter} steps")


def extrapolate(columns: Sequence[np.ndarray], orders: Sequence[int]) -> np.ndarray:
    """
    Romberg table over estimates at h, h/2, h/4, ...

    Args:
        columns: one array of estimates per grid, coarsest first
        orders: error exponents eliminated in turn, len(columns) - 1 of them

    Returns:
        The fully extrapolated estimates
    """
    if len(orders) != len(columns) - 1:
        raise ValueError(f"need {len(columns) - 1} error orders, got {len(orders)}")
    table = [np.asarray(c, dtype=complex) for c in columns]
    for p in orders:
        factor = 2.0 ** p
        table = [(factor * fine - coarse) / (factor - 1.0) for coarse, fine in zip(table, table[1:])]
    return table[0]


def richardson_eigenvalues(spec: PotentialSpec, grid: Grid, options: SolverOptions,
                           seeds: Optional[np.ndarray] = None, depth: int = 1) -> np.ndarray:
    """
    Combine grids n, 2n - 1, ... to cancel the leading discretisation errors.

    The stencils have even error expansions, so each extra grid removes the
    next even power of h.

    Args:
        seeds: coarse-grid eigenvalues to extrapolate (default: lowest
               options.levels of the dense coarse spectrum)
        depth: number of refinements; 1 is the classic (n, 2n - 1) pair
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if seeds is None:
        seeds = solve_grid(spec, grid, options).eigenvalues[:options.levels]
    leading = 2 if options.stencil is Stencil.THREE_POINT else 4
    columns = [np.asarray(seeds, dtype=complex)]
    fine = grid
    for _ in range(depth):
        fine = fine.refined()
        matrix = assemble_hamiltonian(spec, fine, options.stencil)
        columns.append(np.array([inverse_iteration(matrix, E) for E in columns[-1]], dtype=complex))
    return extrapolate(columns, [leading + 2 * k for k in range(depth)])


def matching_index(spec: PotentialSpec, grid: Grid) -> int:
    """Node nearest the bottom of Re V; ties go to the node nearest the centre"""
    re_v = potential_on_nodes(spec, grid.x).real
    spread = np.max(re_v) - np.min(re_v)
    candidates = np.flatnonzero(re_v <= np.min(re_v) + 1e-12 * (1.0 + spread))
    centre = (grid.n - 1) / 2
    index = int(candidates[np.argmin(np.abs(candidates - centre))])
    margin = max(2, grid.n // 10)
    return min(max(index, margin), grid.n - 1 - margin)


def _integrate(v_nodes: Sequence[complex], v_mid: Sequence[complex], E: complex, h: float,
               start: int, stop: int) -> Tuple[complex, complex]:
    """
    Fixed-step RK4 for u'' = (V - E) u from node start to node stop,
    starting from u = 0, u' = h. Rescales instead of overflowing.
    """
    step = 1 if stop > start else -1
    dx = step * h
    u, p = 0j, complex(h)
    for j in range(start, stop, step):
        q0 = v_nodes[j] - E
        qm = v_mid[j if step > 0 else j - 1] - E
        q1 = v_nodes[j + step] - E
        k1u, k1p = p, q0 * u
        k2u, k2p = p + 0.5 * dx * k1p, qm * (u + 0.5 * dx * k1u)
        k3u, k3p = p + 0.5 * dx * k2p, qm * (u + 0.5 * dx * k2u)
        k4u, k4p = p + dx * k3p, q1 * (u + dx * k3u)
        u += dx / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        p += dx / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        size = abs(u) + abs(p)
        if size > RESCALE_AT:
            u /= size
            p /= size
    return u, p


@dataclass(frozen=True)
class ShootingProblem:
    """Potential samples on nodes and midpoints, reused across energies"""
    grid: Grid
    v_nodes: List[complex]
    v_mid: List[complex]
    match: int

    @classmethod
    def build(cls, spec: PotentialSpec, grid: Grid, match: Optional[int] = None) -> "ShootingProblem":
        x = grid.x
        # plain Python complex lists keep the scalar RK4 loop fast
        v_nodes = potential_on_nodes(spec, x).tolist()
        v_mid = potential_on_nodes(spec, 0.5 * (x[:-1] + x[1:])).tolist()
        if match is None:
            match = matching_index(spec, grid)
        if not 0 < match < grid.n - 1:
            raise ValueError(f"matching node {match} must lie strictly inside the grid")
        return cls(grid, v_nodes, v_mid, match)

    def residual(self, E: complex) -> complex:
        E = complex(E)
        if not (math.isfinite(E.real) and math.isfinite(E.imag)):
            raise ValueError(f"energy must be finite, got {E}")
        h = self.grid.h
        ul, pl = _integrate(self.v_nodes, self.v_mid, E, h, 0, self.match)
        ur, pr = _integrate(self.v_nodes, self.v_mid, E, h, self.grid.n - 1, self.match)
        wronskian = ul * pr - pl * ur
        scale = math.hypot(abs(ul), abs(pl)) * math.hypot(abs(ur), abs(pr))
        value = wronskian / scale
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise DomainError(f"shooting produced a non-finite residual at E = {E}")
        return value


def shooting_residual(spec: PotentialSpec, grid: Grid, E: complex,
                      match: Optional[int] = None) -> complex:
    """
    Normalised Wronskian of the left- and right-integrated solutions at the
    matching node; zero exactly at eigenvalues of the truncated problem.
    """
    return ShootingProblem.build(spec, grid, match).residual(E)


def refine_eigen_shooting(spec: PotentialSpec, grid: Grid, E0: complex,
                          options: Optional[SolverOptions] = None,
                          problem: Optional[ShootingProblem] = None) -> complex:
    """
    Complex secant iteration on the shooting residual, seeded at E0.

    Raises:
        ConvergenceError: no convergence within options.max_iter, or the
            iterate left the disc of radius options.search_radius around E0
    """
    options = options or SolverOptions()
    problem = problem or ShootingProblem.build(spec, grid)
    E0 = complex(E0)
    e_prev = E0
    f_prev = problem.residual(e_prev)
    e_cur = E0 + 1e-6 * (1.0 + abs(E0))
    for iteration in range(options.max_iter):
        f_cur = problem.residual(e_cur)
        step = abs(e_cur - e_prev)
        if step < options.shoot_step_tol * (1.0 + abs(e_cur)) and abs(f_cur) < options.shoot_residual_tol:
            logger.debug(f"Shooting converged to {e_cur} after {iteration + 1} iterations")
            return e_cur
        slope = f_cur - f_prev
        if slope == 0:
            if abs(f_cur) < options.shoot_residual_tol:
                return e_cur
            raise ConvergenceError(f"shooting stalled at E = {e_cur} (residual {abs(f_cur):.3e})")
        e_next = e_cur - f_cur * (e_cur - e_prev) / slope
        if abs(e_next - E0) > options.search_radius:
            raise ConvergenceError(
                f"shooting left the search box: |{e_next} - {E0}| > {options.search_radius}"
            )
        e_prev, f_prev, e_cur = e_cur, f_cur, e_next
    raise ConvergenceError(f"shooting did not converge from E0 = {E0} in {options.max_iter} iterations")


def extrapolated_shooting(spec: PotentialSpec, grid: Grid, E0: complex,
                          options: Optional[SolverOptions] = None, depth: int = 2) -> complex:
    """
    Shooting eigenvalue with the RK4 step error extrapolated away.

    Shoots on grid and depth successive refinements, each seeded from the
    previous result, with the matching node held at the same x.

    Args:
        spec: potential to solve
        grid: coarsest grid
        E0: seed, usually the matrix eigenvalue
        options: secant tolerances and search radius
        depth: number of refinements

    Returns:
        The extrapolated eigenvalue of the truncated problem
    """
    options = options or SolverOptions()
    match = matching_index(spec, grid)
    columns = []
    current, E = grid, complex(E0)
    for level in range(depth + 1):
        problem = ShootingProblem.build(spec, current, match * 2 ** level)
        E = refine_eigen_shooting(spec, current, E, options, problem)
        columns.append(np.array([E]))
        if level < depth:
            current = current.refined()
    # RK4 is not symmetric, so odd powers of h survive
    return complex(extrapolate(columns, [4 + k for k in range(depth)])[0])


def scan_rectangle(spec: PotentialSpec, grid: Grid, re_range: Tuple[float, float],
                   im_range: Tuple[float, float], n_re: int = 41,
                   n_im: int = 21) -> Tuple[np.ndarray, np.ndarray]:
    """
    |residual| on a rectangle of the complex E plane, for validating that the
    matrix seeds miss no eigenvalue. Returns (energies, magnitudes).
    """
    problem = ShootingProblem.build(spec, grid)
    re = np.linspace(re_range[0], re_range[1], n_re)
    im = np.linspace(im_range[0], im_range[1], n_im)
    energies = re[None, :] + 1j * im[:, None]
    magnitudes = np.empty(energies.shape)
    for idx, E in np.ndenumerate(energies):
        magnitudes[idx] = abs(problem.residual(E))
    return energies, magnitudes


@dataclass
class Entry:
    E: complex
    cls: EigenClass
    partner: Optional[int] = None
    boundary_mass: Optional[float] = None
    box_stability: Optional[float] = None
    bound: bool = True
    refined: bool = False
    engine_gap: Optional[float] = None

    @property
    def retained(self) -> bool:
        return self.cls is not EigenClass.SPURIOUS and self.bound


@dataclass
class SpectrumReport:
    entries: List[Entry] = field(default_factory=list)
    threshold: Optional[float] = None
    # max distance from a raw eigenvalue to the nearest conjugate; symmetric boxes only
    conjugation_gap: Optional[float] = None

    @property
    def retained(self) -> List[Entry]:
        return [e for e in self.entries if e.retained]

    def retained_levels(self, count: Optional[int] = None) -> List[Entry]:
        levels = self.retained
        return levels if count is None else levels[:count]

    @property
    def all_retained_real(self) -> bool:
        return all(e.cls is EigenClass.REAL for e in self.retained)


def boundary_mass(vector: np.ndarray, grid: Optional[Grid], fraction: float = 0.05) -> float:
    """
    Share of |psi|^2 in the outer fraction of nodes. Half-line grids only
    count the far edge; the cutoff wall belongs to the model.
    """
    weight = np.abs(vector) ** 2
    total = weight.sum()
    if total == 0:
        return 0.0
    k = max(1, int(math.ceil(fraction * weight.size)))
    outer = weight[-k:].sum()
    if grid is None or grid.kind is not GridKind.HALF_LINE_CUTOFF:
        outer += weight[:k].sum()
    return float(outer / total)


def box_drift(values: np.ndarray, enlarged: np.ndarray) -> np.ndarray:
    """Relative distance from each eigenvalue to the nearest one in the enlarged box"""
    if enlarged.size == 0:
        return np.full(values.size, np.inf)
    distance = np.abs(values[:, None] - enlarged[None, :]).min(axis=1)
    return distance / (1.0 + np.abs(values))


def classify_spectrum(s: Spectrum, options: Optional[SolverOptions] = None,
                      enlarged: Optional[Spectrum] = None,
                      refined_mask: Optional[Sequence[bool]] = None,
                      threshold: Optional[float] = None) -> SpectrumReport:
    """
    Label each eigenvalue Real, ConjugatePairMember, Unpaired or Spurious.

    Args:
        s: spectrum to classify (eigenvectors enable boundary-mass scoring)
        enlarged: spectrum of the same problem in a larger box, for drift scoring
        refined_mask: entries already refined by shooting use the tighter tolerance
        threshold: continuum edge; only entries with Re E below it count as bound
    """
    options = options or SolverOptions()
    values = s.eigenvalues
    count = values.size
    refined = np.zeros(count, dtype=bool) if refined_mask is None else np.asarray(refined_mask, dtype=bool)
    tau = np.where(refined, options.tau_real_refined, options.tau_real_raw)

    masses: List[Optional[float]] = [None] * count
    if s.eigenvectors is not None:
        masses = [boundary_mass(s.eigenvectors[:, i], s.grid, options.boundary_fraction)
                  for i in range(count)]
    drifts: List[Optional[float]] = [None] * count
    if enlarged is not None:
        drifts = [float(d) for d in box_drift(values, enlarged.eigenvalues)]

    entries = []
    for i, E in enumerate(values):
        spurious = (
            (masses[i] is not None and masses[i] > options.boundary_mass_threshold)
            or (drifts[i] is not None and drifts[i] > options.drift_factor * tau[i])
        )
        if spurious:
            cls = EigenClass.SPURIOUS
        elif abs(E.imag) < tau[i] * (1.0 + abs(E.real)):
            cls = EigenClass.REAL
        else:
            cls = EigenClass.UNPAIRED
        bound = True if threshold is None else bool(E.real < threshold)
        entries.append(Entry(complex(E), cls, None, masses[i], drifts[i], bound, bool(refined[i])))

    # greedy pairing of the remaining complex eigenvalues, closest pairs first
    complex_idx = [i for i, e in enumerate(entries) if e.cls is EigenClass.UNPAIRED]
    candidates = []
    for a_pos, i in enumerate(complex_idx):
        for j in complex_idx[a_pos + 1:]:
            gap = abs(values[i] - np.conj(values[j]))
            if gap < max(tau[i], tau[j]) * (1.0 + abs(values[i])):
                candidates.append((gap, i, j))
    for _, i, j in sorted(candidates):
        if entries[i].partner is None and entries[j].partner is None:
            entries[i].cls = entries[j].cls = EigenClass.CONJUGATE_PAIR
            entries[i].partner, entries[j].partner = j, i

    return SpectrumReport(entries, threshold)


def continuum_threshold(spec: PotentialSpec, grid: Grid) -> float:
    """
    Energy above which box states stand in for a continuum.

    Per edge: Re V where it is attractive, otherwise the larger of Re V and
    |Im V| (a purely imaginary confining wall still confines). Half-line
    grids only use the far edge, full-line grids the lower of the two.
    """
    v = potential_on_nodes(spec, np.array([grid.x[0], grid.x[-1]]))
    edges = np.where(v.real < 0, v.real, np.maximum(v.real, np.abs(v.imag)))
    if grid.kind is GridKind.HALF_LINE_CUTOFF:
        return float(edges[1])
    return float(np.min(edges))


def solve_spectrum(spec: PotentialSpec, grid: Grid,
                   options: Optional[SolverOptions] = None) -> SpectrumReport:
    """
    Full pipeline: dense solve with eigenvectors, enlarged-box comparison,
    classification, then optional refinement of the lowest retained levels.
    """
    options = options or SolverOptions()
    spectrum = solve_grid(spec, grid, options, vectors=True)
    wide = grid.enlarged(options.box_factor)
    enlarged = None
    if wide.n - 2 <= options.dense_cap:
        enlarged = solve_grid(spec, wide, options)
    else:
        logger.info(f"{spec.name}: enlarged box of order {wide.n - 2} exceeds the dense cap, skipping drift scoring")
    threshold = continuum_threshold(spec, grid)
    report = classify_spectrum(spectrum, options, enlarged, threshold=threshold)
    if grid.is_symmetric:
        report.conjugation_gap = conjugation_gap(spectrum.eigenvalues)
    if options.method == "dense":
        return report

    targets = [i for i, e in enumerate(report.entries) if e.retained][:options.levels]
    values = spectrum.eigenvalues.copy()
    refined = np.zeros(values.size, dtype=bool)
    gaps = {}
    if options.method == "richardson":
        improved = richardson_eigenvalues(spec, grid, options, seeds=values[targets])
        for i, value in zip(targets, improved):
            gaps[i] = abs(value - values[i])
            values[i] = value
            refined[i] = True
    else:
        # both engines are pushed to the h -> 0 limit before they are compared
        references = richardson_eigenvalues(spec, grid, options, seeds=values[targets], depth=2)
        for i, reference in zip(targets, references):
            try:
                value = extrapolated_shooting(spec, grid, values[i], options)
            except ConvergenceError as e:
                logger.warning(f"{spec.name}: keeping matrix value {values[i]}: {e}")
                continue
            gaps[i] = abs(value - reference)
            if gaps[i] > 1e-6:
                logger.warning(f"{spec.name}: engines disagree at E = {value:.10g} by {gaps[i]:.3e}")
            values[i] = value
            refined[i] = True

    # refinement can reorder levels; metadata follows its eigenvalue
    order = sort_order(values)
    # box drift was judged on the matrix values; refined values only tighten the reality test
    merged = classify_spectrum(replace(spectrum, eigenvalues=values[order], eigenvectors=None),
                               options, refined_mask=refined[order], threshold=threshold)
    merged.conjugation_gap = report.conjugation_gap
    spurious = set()
    for k, entry in enumerate(merged.entries):
        source = int(order[k])
        entry.boundary_mass = report.entries[source].boundary_mass
        entry.box_stability = report.entries[source].box_stability
        entry.engine_gap = gaps.get(source)
        if report.entries[source].cls is EigenClass.SPURIOUS:
            spurious.add(k)
    for k in spurious:
        entry = merged.entries[k]
        if entry.partner is not None and entry.partner not in spurious:
            merged.entries[entry.partner].cls = EigenClass.UNPAIRED
            merged.entries[entry.partner].partner = None
        entry.cls = EigenClass.SPURIOUS
        entry.partner = None
    return merged
