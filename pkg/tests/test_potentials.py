import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.discretize import DomainSpec, build_grid
from src.errors import ConstructionError, DomainError
from src.potentials import (Family, PotentialSpec, SignPattern, SuperpotentialSpec,
                            eval_potential, inverse_power_superpotential,
                            linear_superpotential, partner_superpotential,
                            poeschl_teller_superpotential, shifted_cubic_superpotential,
                            susy_partner_pair, symmetry_report)

X = np.linspace(-4.0, 4.0, 161)
X_POS = np.linspace(0.2, 6.0, 117)

PT_SYMMETRIC_FAMILIES = [
    PotentialSpec(Family.SHIFTED_QUARTIC_1),
    PotentialSpec(Family.SHIFTED_QUARTIC_2),
    PotentialSpec.poeschl_teller(1, mu=1.0, lam=2.5),
    PotentialSpec.poeschl_teller(2, mu=1.0, lam=2.5),
    PotentialSpec(Family.CUBIC, {"mu": 1.0, "g": 1.0}),
    PotentialSpec(Family.QUARTIC, {"a": 1.0, "beta": 0.5, "c": -1.0, "delta": 2.0}),
]


def test_sech_tanh_family_at_origin(pt_scarf):
    # mu^2/4 - mu^2 (lt (lt - 1) + 1) at lt = 3
    assert eval_potential(pt_scarf, 0.0) == pytest.approx(-6.75)


def test_lambda_tilde_round_trip(pt_scarf):
    assert pt_scarf.params["lambda"] == pytest.approx(2.5)
    assert pt_scarf.lambda_tilde == pytest.approx(3.0)


def test_poeschl_teller_needs_one_coupling():
    with pytest.raises(ConstructionError):
        PotentialSpec.poeschl_teller(1, mu=1.0)
    with pytest.raises(ConstructionError):
        PotentialSpec.poeschl_teller(1, mu=1.0, lam=1.0, lambda_tilde=2.0)
    with pytest.raises(ConstructionError):
        PotentialSpec.poeschl_teller(2, mu=1.0, lambda_tilde=0.5)


@pytest.mark.parametrize("family, params", [
    (Family.INVERSE_POWER_1, {"lambda": -1.0}),
    (Family.CUBIC, {"g": -0.5}),
    (Family.POESCHL_TELLER_1, {"mu": 0.0}),
    (Family.QUARTIC, {"a": 0.0}),
    (Family.CUBIC, {"mu": float("nan")}),
    (Family.CUBIC, {"lambda": 1.0}),
])
def test_invalid_parameters(family, params):
    with pytest.raises(ConstructionError):
        PotentialSpec(family, params)


def test_cubic_allows_vanishing_harmonic_term():
    spec = PotentialSpec(Family.CUBIC, {"mu": 0.0, "g": 1.0})
    assert eval_potential(spec, 2.0) == pytest.approx(8j)


def test_inverse_power_is_singular_at_origin():
    spec = PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 1.0})
    with pytest.raises(DomainError):
        eval_potential(spec, 0.0)
    with pytest.raises(DomainError):
        spec(np.array([-1.0, 0.0, 1.0]))


def test_inverse_power_2_sign_variants():
    derived = PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 1.0})
    printed = PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 1.0}, variant="printed")
    assert eval_potential(derived, 1.0) == pytest.approx(1.0 - 4j)
    assert eval_potential(printed, 1.0) == pytest.approx(1.0 + 4j)
    with pytest.raises(ConstructionError):
        PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 1.0}, variant="flipped")


def test_real_part_drops_the_imaginary_term(cubic):
    x = np.array([-1.5, 0.5, 2.0])
    assert_allclose(cubic.real_part()(x), x ** 2)
    assert_allclose(cubic(x) - cubic.real_part()(x), 1j * x ** 3)


@pytest.mark.parametrize("spec", PT_SYMMETRIC_FAMILIES, ids=lambda s: s.name)
def test_builtin_families_are_pt_symmetric(spec):
    grid = build_grid(DomainSpec.box(5.0, 201))
    report = symmetry_report(spec, grid)
    assert report.applicable
    assert report.is_pt_symmetric()
    assert report.re_even_residual <= 1e-12 * report.max_abs_v
    assert report.im_odd_residual <= 1e-12 * report.max_abs_v


def test_symmetry_not_applicable_on_half_line():
    spec = PotentialSpec(Family.INVERSE_POWER_1, {"lambda": 1.0})
    report = symmetry_report(spec, build_grid(DomainSpec.half_line(0.01, 10.0, 1000)))
    assert not report.applicable
    assert report.pt_residual is None
    assert not report.is_pt_symmetric()
    assert report.im_sign_pattern is SignPattern.ZERO


def test_absorptive_half(pt_scarf):
    # Im V = -2 lam mu sech tanh is negative for x > 0
    report = symmetry_report(pt_scarf, build_grid(DomainSpec.box(5.0, 101)))
    assert report.im_sign_pattern is SignPattern.NON_POSITIVE
    assert report.absorptive_half == "x>0"


def test_harmonic_partners():
    v_minus, v_plus = susy_partner_pair(linear_superpotential(1.0))
    assert_allclose(v_minus(X), X ** 2 - 1.0)
    assert_allclose(v_plus(X), X ** 2 + 1.0)


def test_poeschl_teller_partners(pt_scarf, pt_well):
    w = poeschl_teller_superpotential(mu=1.0, lam=2.5)
    v_minus, v_plus = susy_partner_pair(w)
    sech = 1.0 / np.cosh(X)
    assert_allclose(v_minus(X), 0.25 - 7.0 * sech ** 2 - 5j * sech * np.tanh(X), atol=1e-12)
    assert_allclose(v_plus(X), 0.25 - 6.0 * sech ** 2, atol=1e-12)
    assert_allclose(v_minus(X), pt_scarf(X), atol=1e-12)
    assert_allclose(v_plus(X), pt_well(X), atol=1e-12)


def test_inverse_power_partners():
    lam = 1.3
    v_minus, v_plus = susy_partner_pair(inverse_power_superpotential(lam, "+"))
    x = X_POS
    assert_allclose(v_plus(x), -lam ** 2 / x ** 4 + 0j, rtol=1e-12, atol=1e-12)
    assert_allclose(v_minus(x), 2.0 / x ** 2 - lam ** 2 / x ** 4 + 4j * lam / x ** 3, rtol=1e-12)


def test_shifted_cubic_partners():
    v_minus, _ = susy_partner_pair(shifted_cubic_superpotential(1))
    assert_allclose(v_minus(X), PotentialSpec(Family.SHIFTED_QUARTIC_1)(X), rtol=1e-12, atol=1e-9)
    v_minus, _ = susy_partner_pair(shifted_cubic_superpotential(2))
    assert_allclose(v_minus(X), PotentialSpec(Family.SHIFTED_QUARTIC_2)(X), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("spec", [
    PotentialSpec(Family.INVERSE_POWER_1, {"lambda": 0.7}),
    PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 0.7}),
    PotentialSpec(Family.INVERSE_POWER_2, {"lambda": 0.7}, variant="printed"),
    PotentialSpec(Family.SHIFTED_QUARTIC_1),
    PotentialSpec(Family.SHIFTED_QUARTIC_2),
    PotentialSpec.poeschl_teller(1, mu=1.5, lam=2.0),
    PotentialSpec.poeschl_teller(2, mu=1.5, lam=2.0),
], ids=lambda s: f"{s.name}-{s.variant}")
def test_partner_superpotential_reproduces_family(spec):
    w, branch = partner_superpotential(spec)
    v_minus, v_plus = susy_partner_pair(w)
    generated = v_minus if branch == "-" else v_plus
    x = X_POS if spec.singular_at_origin else X
    assert_allclose(generated(x), spec(x), rtol=1e-11, atol=1e-9)


def test_no_superpotential_for_cubic(cubic):
    assert partner_superpotential(cubic) is None


def test_superpotential_from_samples():
    x = np.linspace(-3.0, 3.0, 601)
    w = SuperpotentialSpec.from_samples(x, np.tanh(x), np.zeros_like(x))
    t = np.linspace(-2.0, 2.0, 9)
    assert_allclose(w(t).real, np.tanh(t), atol=1e-4)
    assert_allclose(w.derivative(t).real, 1.0 / np.cosh(t) ** 2, atol=1e-3)


def test_superpotential_from_samples_rejects_jumps():
    x = np.linspace(-1.0, 1.0, 201)
    with pytest.raises(ConstructionError):
        SuperpotentialSpec.from_samples(x, np.sign(x), np.zeros_like(x))


def test_superpotential_from_samples_rejects_bad_abscissae():
    with pytest.raises(ConstructionError):
        SuperpotentialSpec.from_samples(np.array([0.0, 2.0, 1.0]), np.zeros(3), np.zeros(3))


def test_partner_pair_rejects_non_finite_w():
    w = SuperpotentialSpec.from_complex(lambda x: 1.0 / (x - 0.37) + 0j,
                                        lambda x: -1.0 / (x - 0.37) ** 2 + 0j,
                                        label="pole at 0.37")
    with pytest.raises(ConstructionError):
        susy_partner_pair(w)
