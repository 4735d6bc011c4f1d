import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.analysis import (CUTOFF_SCAN, WellKind, claim_check, cutoff_scan,
                          partner_isospectrality, potential_profile, stability_check,
                          well_profile)
from src.discretize import DomainSpec, Stencil, build_grid, default_domain
from src.eigensolve import EigenClass, SolverOptions
from src.potentials import (Family, PotentialSpec, SignPattern, linear_superpotential,
                            partner_superpotential, poeschl_teller_superpotential,
                            susy_partner_pair)

FIVE_POINT = SolverOptions(stencil=Stencil.FIVE_POINT)

BUILTIN_FAMILIES = [f for f in Family if f is not Family.CUSTOM]


@pytest.fixture
def half_line():
    return build_grid(DomainSpec.half_line(0.01, 10.0, 1000))


def test_sech_tanh_well(pt_scarf):
    well = well_profile(pt_scarf, build_grid(DomainSpec.box(15.0, 301)))
    assert well.kind is WellKind.WELL
    assert len(well.well_minima) == 1
    assert well.well_minima[0].x == 0.0
    assert well.well_minima[0].value == pytest.approx(-6.75, abs=1e-12)
    assert well.asymptotic_value == pytest.approx(0.25, abs=1e-9)
    assert well.well_depths[0] == pytest.approx(7.0, abs=1e-9)
    assert well.im_sign_pattern is SignPattern.NON_POSITIVE


def test_harmonic_is_confining(harmonic, harmonic_grid):
    assert well_profile(harmonic, harmonic_grid).kind is WellKind.CONFINING


def test_inverse_power_2_sits_at_the_cutoff(half_line):
    spec = PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 1.0})
    well = well_profile(spec, half_line)
    # Re V = 2/x^2 - 1/x^4 has no interior minimum, only a maximum at x = 1
    x = np.linspace(0.01, 10.0, 100001)
    assert np.argmin(2.0 / x ** 2 - 1.0 / x ** 4) == 0
    assert well.well_minima == []
    assert well.kind is WellKind.EDGE
    assert well.im_sign_pattern is SignPattern.NON_POSITIVE

    printed = PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 1.0}, variant="printed")
    assert well_profile(printed, half_line).im_sign_pattern is SignPattern.NON_NEGATIVE


def test_claim_check_real_potential(harmonic):
    grid = build_grid(DomainSpec.box(8.0, 401))
    report = claim_check(harmonic, grid)
    assert report.reality_verdict
    assert len(report.level_shifts) == 10
    assert all(s.shift == 0 for s in report.level_shifts)
    assert report.cutoff_scan == []
    assert report.stability is None


def test_claim_check_sech_tanh(pt_scarf, sech_grid):
    report = claim_check(pt_scarf, sech_grid, FIVE_POINT)
    assert report.reality_verdict
    assert report.retained_count == 3
    levels = [e.E for e in report.full_spectrum.retained]
    assert_allclose(levels, [-3.75, -0.75, 0.0], atol=1e-3)
    assert report.symmetry.is_pt_symmetric()
    assert not report.vacuous


def test_claim_check_cubic():
    spec = PotentialSpec(Family.CUBIC, {"mu": 1.0, "g": 1.0})
    report = claim_check(spec, build_grid(DomainSpec.box(6.0, 601)), SolverOptions(levels=5))
    assert report.reality_verdict
    assert report.levels == 5
    assert len(report.level_shifts) == 5
    assert abs(report.level_shifts[0].shift) > 1e-3
    assert all(e.cls is EigenClass.REAL for e in report.realpart_spectrum.retained_levels(5))


def test_claim_check_shifted_quartic_is_vacuous():
    report = claim_check(PotentialSpec(Family.SHIFTED_QUARTIC_2), build_grid(DomainSpec.box(4.0, 401)))
    assert report.retained_count == 0
    assert report.vacuous
    assert report.reality_verdict
    assert report.level_shifts == []


def test_claim_check_scans_cutoffs():
    spec = PotentialSpec(Family.INVERSE_POWER_1, {"lambda": 1.0})
    grid = build_grid(DomainSpec.half_line(0.1, 10.0, 400))
    report = claim_check(spec, grid)
    assert [e.eps for e in report.cutoff_scan] == list(CUTOFF_SCAN)
    # h ~ 0.025 lies between the largest cutoff and the two smaller ones
    assert [e.resolved for e in report.cutoff_scan] == [True, False, False]
    assert report.cutoff_scan[2].h_over_eps == pytest.approx(9.999 / 399 / 1e-3)
    assert report.symmetry.pt_residual is None


def test_cutoff_scan_levels_deepen():
    spec = PotentialSpec(Family.INVERSE_POWER_1, {"lambda": 1.0})
    grid = build_grid(DomainSpec.half_line(0.1, 10.0, 400))
    entries = cutoff_scan(spec, grid, cutoffs=(0.5, 0.3))
    assert [e.eps for e in entries] == [0.5, 0.3]
    # -1/x^4 is real, so every retained level is real at every cutoff
    assert all(e.reality_verdict for e in entries)
    assert entries[1].levels[0].real < entries[0].levels[0].real
    assert all(e.resolved for e in entries)
    assert entries[0].h_over_eps == pytest.approx(9.5 / 399 / 0.5)


def test_stability_check(harmonic):
    report = stability_check(harmonic, build_grid(DomainSpec.box(8.0, 201)))
    assert report.stable
    assert report.base_verdict and report.refined_verdict and report.enlarged_verdict


def test_stability_above_dense_cap(harmonic):
    grid = build_grid(DomainSpec.box(8.0, 201))
    report = stability_check(harmonic, grid, SolverOptions(dense_cap=300))
    assert report.stable


@pytest.mark.parametrize("family", [f for f in BUILTIN_FAMILIES if f is not Family.INVERSE_POWER_2],
                         ids=lambda f: f.value)
def test_verdict_stable_on_coarse_grids(family):
    spec = PotentialSpec(family)
    grid = build_grid(default_domain(spec, n=601))
    assert stability_check(spec, grid).stable


@pytest.mark.slow
@pytest.mark.parametrize("family", BUILTIN_FAMILIES, ids=lambda f: f.value)
def test_verdict_stable_at_default_grids(family):
    spec = PotentialSpec(family)
    assert stability_check(spec, build_grid(default_domain(spec))).stable


def test_harmonic_partners_isospectral(harmonic_grid):
    v_minus, v_plus = susy_partner_pair(linear_superpotential(1.0))
    report = partner_isospectrality(v_minus, v_plus, harmonic_grid)
    assert report.unpaired_count == 1
    assert report.unpaired_plus == []
    assert abs(report.unpaired_minus[0]) < 1e-3
    assert len(report.pairs) == 9
    assert report.max_mismatch < 5e-4


def test_sech_partners_isospectral(sech_grid):
    v_minus, v_plus = susy_partner_pair(poeschl_teller_superpotential(1.0, 2.5))
    report = partner_isospectrality(v_minus, v_plus, sech_grid, FIVE_POINT)
    assert len(report.pairs) == 2
    assert report.unpaired_count == 1
    assert abs(report.unpaired_minus[0]) < 1e-3
    assert report.max_mismatch < 5e-4
    assert_allclose([a.real for a, _ in report.pairs], [-3.75, -0.75], atol=1e-3)
    assert not report.vacuous


def test_shifted_quartic_partners_are_vacuous():
    w, branch = partner_superpotential(PotentialSpec(Family.SHIFTED_QUARTIC_1))
    assert branch == "-"
    report = partner_isospectrality(PotentialSpec(Family.SHIFTED_QUARTIC_1),
                                    PotentialSpec(Family.SHIFTED_QUARTIC_2),
                                    build_grid(DomainSpec.box(4.0, 401)))
    assert report.vacuous
    assert report.pairs == []
    assert report.unpaired_count == 0
    assert report.max_mismatch == 0.0


def test_profile_with_partner(pt_scarf):
    grid = build_grid(DomainSpec.box(5.0, 101))
    columns, table = potential_profile(pt_scarf, grid)
    assert columns == ["x", "re_V", "im_V", "re_partner", "im_partner"]
    sech = 1.0 / np.cosh(grid.x)
    assert_allclose(table[3], 0.25 - 6.0 * sech ** 2, atol=1e-12)
    assert_allclose(table[4], 0.0, atol=1e-12)


def test_profile_without_partner(cubic):
    columns, table = potential_profile(cubic, build_grid(DomainSpec.box(3.0, 61)))
    assert columns == ["x", "re_V", "im_V"]
    assert len(table) == 3
