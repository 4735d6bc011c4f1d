import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.discretize import Grid, GridKind, assemble_hamiltonian, potential_on_nodes
from src.eigensolve import (EigenClass, Entry, SolverOptions, SpectrumReport,
                            inverse_iteration, solve_spectrum)
from src.errors import PTSpecError, PropagationError
from src.potentials import (PotentialSpec, SignPattern, SymmetryReport, im_sign_pattern,
                            partner_superpotential, susy_partner_pair, symmetry_report)

logger = logging.getLogger(__name__)

CUTOFF_SCAN = (1e-1, 1e-2, 1e-3)


class WellKind(str, Enum):
    WELL = "Well"
    CONFINING = "Confining"
    EDGE = "Edge"
    NONE = "None"


@dataclass
class WellMinimum:
    x: float
    value: float


@dataclass
class WellReport:
    """Shape of Re V on the grid: interior minima below the edge value, and how V behaves at the edges"""
    well_minima: List[WellMinimum]
    asymptotic_value: float
    well_depths: List[float]
    im_sign_pattern: SignPattern
    kind: WellKind


def _rising_at(re_v: np.ndarray, x: np.ndarray, edge: int, spread: float) -> bool:
    """Re V still grows between 80% of the way to the edge and the edge itself"""
    inner = int(np.argmin(np.abs(x - 0.8 * x[edge])))
    return bool(re_v[edge] - re_v[inner] > 1e-3 * spread)


def well_profile(spec: PotentialSpec, grid: Grid) -> WellReport:
    """
    Locate the wells of Re V.

    Minima are strict local minima found from the sign change of the first
    difference, kept only when they lie below Re V at the far edge.
    """
    x = grid.x
    v = potential_on_nodes(spec, x)
    re_v = v.real
    asymptotic = float(re_v[-1])
    spread = float(np.max(re_v) - np.min(re_v))

    d = np.diff(re_v)
    minima_idx = np.flatnonzero((d[:-1] < 0) & (d[1:] > 0)) + 1
    minima = [WellMinimum(float(x[j]), float(re_v[j])) for j in minima_idx if re_v[j] < asymptotic]
    depths = [asymptotic - m.value for m in minima]
    pattern = im_sign_pattern(v, x)

    far_edges = [grid.n - 1] if grid.kind is GridKind.HALF_LINE_CUTOFF else [0, grid.n - 1]
    if spread > 0 and all(_rising_at(re_v, x, e, spread) for e in far_edges):
        kind = WellKind.CONFINING
    elif minima:
        kind = WellKind.WELL
    elif spread > 0 and int(np.argmin(re_v)) in (0, grid.n - 1):
        kind = WellKind.EDGE
    else:
        kind = WellKind.NONE
    logger.debug(f"{spec.name}: {kind.value} with {len(minima)} minima")
    return WellReport(minima, asymptotic, depths, pattern, kind)


@dataclass
class LevelShift:
    k: int
    shift: complex


@dataclass
class CutoffEntry:
    eps: float
    levels: List[complex]
    retained_count: int
    reality_verdict: bool
    h_over_eps: float
    # the first node off the wall has to sit inside the cutoff scale
    resolved: bool = field(init=False)

    def __post_init__(self):
        self.resolved = self.h_over_eps < 1.0


@dataclass
class StabilityReport:
    base_verdict: bool
    refined_verdict: bool
    enlarged_verdict: bool
    stable: bool = field(init=False)

    def __post_init__(self):
        self.stable = self.base_verdict == self.refined_verdict == self.enlarged_verdict


@dataclass
class ClaimReport:
    family: str
    params: dict
    symmetry: SymmetryReport
    well: WellReport
    full_spectrum: SpectrumReport
    realpart_spectrum: SpectrumReport
    reality_verdict: bool
    level_shifts: List[LevelShift]
    levels: int
    retained_count: int
    cutoff_scan: List[CutoffEntry] = field(default_factory=list)
    stability: Optional[StabilityReport] = None
    # no level below the continuum threshold, so the verdict holds trivially
    vacuous: bool = field(init=False)

    def __post_init__(self):
        self.vacuous = self.retained_count == 0


def reality_verdict(report: SpectrumReport, levels: int) -> bool:
    """True iff every retained level among the lowest `levels` is Real"""
    return all(e.cls is EigenClass.REAL for e in report.retained_levels(levels))


def _with_context(spec: PotentialSpec, e: PTSpecError) -> PTSpecError:
    if isinstance(e, PropagationError):
        return e
    return type(e)(f"{spec.name}: {e}")


def claim_check(spec: PotentialSpec, grid: Grid, options: Optional[SolverOptions] = None,
                scan_cutoffs: bool = True, check_stability: bool = False) -> ClaimReport:
    """
    Compare the spectrum of V with the spectrum of Re V on the same grid and
    solver, and decide whether every retained level is real.

    Args:
        spec: potential to examine
        grid: discretisation shared by both spectra
        options: solver options; options.levels bounds the levels judged
        scan_cutoffs: also report spectra at several cutoffs (half-line grids)
        check_stability: also recompute the verdict on refined and enlarged grids

    Returns:
        ClaimReport
    """
    options = options or SolverOptions()
    try:
        symmetry = symmetry_report(spec, grid)
        well = well_profile(spec, grid)
        full = solve_spectrum(spec, grid, options)
        realpart = solve_spectrum(spec.real_part(), grid, options)
    except PTSpecError as e:
        raise _with_context(spec, e) from e

    full_levels = full.retained_levels(options.levels)
    real_levels = realpart.retained_levels(options.levels)
    shifts = [LevelShift(k, a.E - b.E) for k, (a, b) in enumerate(zip(full_levels, real_levels))]
    verdict = reality_verdict(full, options.levels)

    report = ClaimReport(
        family=spec.name,
        params=dict(spec.params),
        symmetry=symmetry,
        well=well,
        full_spectrum=full,
        realpart_spectrum=realpart,
        reality_verdict=verdict,
        level_shifts=shifts,
        levels=options.levels,
        retained_count=len(full.retained),
    )
    if scan_cutoffs and grid.kind is GridKind.HALF_LINE_CUTOFF:
        report.cutoff_scan = cutoff_scan(spec, grid, options)
    if check_stability:
        report.stability = stability_check(spec, grid, options, base=full)
    logger.info(f"{spec.name}: verdict {verdict} over {len(full_levels)} retained levels")
    return report


def cutoff_scan(spec: PotentialSpec, grid: Grid, options: Optional[SolverOptions] = None,
                cutoffs: Sequence[float] = CUTOFF_SCAN) -> List[CutoffEntry]:
    """
    Spectrum of a half-line problem at each cutoff, same x_max and n.

    Args:
        spec: potential singular at the origin
        grid: half-line grid supplying x_max and n
        options: solver options shared by every cutoff
        cutoffs: wall positions, largest first

    Returns:
        One CutoffEntry per cutoff; rows with h >= eps are flagged unresolved
    """
    options = options or SolverOptions()
    entries = []
    for eps in cutoffs:
        try:
            cut = grid.with_cutoff(eps)
            report = solve_spectrum(spec, cut, options)
        except PTSpecError as e:
            raise _with_context(spec, e) from e
        levels = report.retained_levels(options.levels)
        entry = CutoffEntry(eps, [e.E for e in levels], len(report.retained),
                            reality_verdict(report, options.levels), cut.h / eps)
        if not entry.resolved:
            logger.warning(f"{spec.name}: cutoff {eps:g} is below the grid spacing {cut.h:.3g}")
        entries.append(entry)
    return entries


def stability_check(spec: PotentialSpec, grid: Grid, options: Optional[SolverOptions] = None,
                    base: Optional[SpectrumReport] = None) -> StabilityReport:
    """
    Recompute the verdict under n -> 2n - 1 and L -> 1.25 L.

    A refined matrix above the dense cap is checked by inverse iteration
    seeded from the retained base levels.
    """
    options = options or SolverOptions()
    base = base or solve_spectrum(spec, grid, options)
    base_verdict = reality_verdict(base, options.levels)

    fine = grid.refined()
    if fine.n - 2 <= options.dense_cap:
        refined_verdict = reality_verdict(solve_spectrum(spec, fine, options), options.levels)
    else:
        matrix = assemble_hamiltonian(spec, fine, options.stencil)
        tau = options.tau_real_raw
        refined_verdict = True
        for entry in base.retained_levels(options.levels):
            E = inverse_iteration(matrix, entry.E)
            refined_verdict &= abs(E.imag) < tau * (1.0 + abs(E.real))

    enlarged_verdict = reality_verdict(
        solve_spectrum(spec, grid.enlarged(options.box_factor), options), options.levels
    )
    return StabilityReport(base_verdict, bool(refined_verdict), enlarged_verdict)


@dataclass
class IsospectralityReport:
    pairs: List[Tuple[complex, complex]]
    unpaired_minus: List[complex]
    unpaired_plus: List[complex]
    max_mismatch: float
    unpaired_count: int = field(init=False)
    # neither partner has a level to compare
    vacuous: bool = field(init=False)

    def __post_init__(self):
        self.unpaired_count = len(self.unpaired_minus) + len(self.unpaired_plus)
        self.vacuous = not self.pairs and self.unpaired_count == 0


def _window(retained: List[Entry], limit: int) -> float:
    # a truncated list says nothing about energies above its last kept level
    return retained[limit - 1].E.real if len(retained) > limit else math.inf


def partner_isospectrality(v_minus: PotentialSpec, v_plus: PotentialSpec, grid: Grid,
                           options: Optional[SolverOptions] = None) -> IsospectralityReport:
    """
    Greedy closest-first matching of the retained levels of two partner
    potentials, within the energy window both spectra cover.
    """
    options = options or SolverOptions()
    minus = solve_spectrum(v_minus, grid, options).retained
    plus = solve_spectrum(v_plus, grid, options).retained
    window = min(_window(minus, options.levels), _window(plus, options.levels))
    slack = 1e-9 * (1.0 + abs(window)) if math.isfinite(window) else 0.0
    a = [e.E for e in minus[:options.levels] if e.E.real <= window + slack]
    b = [e.E for e in plus[:options.levels] if e.E.real <= window + slack]

    candidates = sorted((abs(ea - eb), i, j) for i, ea in enumerate(a) for j, eb in enumerate(b))
    used_a, used_b, pairs = set(), set(), []
    mismatch = 0.0
    for gap, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((a[i], b[j]))
        mismatch = max(mismatch, gap)
    pairs.sort(key=lambda p: (p[0].real, p[0].imag))
    report = IsospectralityReport(
        pairs,
        [e for i, e in enumerate(a) if i not in used_a],
        [e for j, e in enumerate(b) if j not in used_b],
        mismatch,
    )
    logger.info(f"{v_minus.name} / {v_plus.name}: {len(pairs)} pairs, "
                f"{report.unpaired_count} unpaired, max mismatch {mismatch:.3e}")
    return report


def potential_profile(spec: PotentialSpec, grid: Grid) -> Tuple[List[str], List[np.ndarray]]:
    """
    Columns x, Re V, Im V on the grid nodes, plus the SUSY partner of V
    when the family has a known superpotential.
    """
    x = grid.x
    v = potential_on_nodes(spec, x)
    columns = ["x", "re_V", "im_V"]
    table = [x, v.real, v.imag]
    found = partner_superpotential(spec)
    if found is not None:
        w, branch = found
        v_minus, v_plus = susy_partner_pair(w)
        partner = potential_on_nodes(v_plus if branch == "-" else v_minus, x)
        columns += ["re_partner", "im_partner"]
        table += [partner.real, partner.imag]
    return columns, table
