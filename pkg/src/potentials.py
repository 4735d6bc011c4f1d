import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Dict, Optional, Tuple

import numpy as np

from src.errors import ConstructionError, DomainError

if TYPE_CHECKING:
    from src.discretize import Grid

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]


class Family(str, Enum):
    INVERSE_POWER_1 = "inverse-power-1"
    INVERSE_POWER_2 = "inverse-power-2"
    SHIFTED_QUARTIC_1 = "shifted-quartic-1"
    SHIFTED_QUARTIC_2 = "shifted-quartic-2"
    POESCHL_TELLER_1 = "poeschl-teller-1"
    POESCHL_TELLER_2 = "poeschl-teller-2"
    CUBIC = "cubic"
    QUARTIC = "quartic"
    CUSTOM = "custom"


# Parameters each family reads, with their defaults (couplings default to unity)
FAMILY_PARAMS: Dict[Family, Dict[str, float]] = {
    Family.INVERSE_POWER_1: {"lambda": 1.0},
    Family.INVERSE_POWER_2: {"lambda": 1.0},
    Family.SHIFTED_QUARTIC_1: {},
    Family.SHIFTED_QUARTIC_2: {},
    Family.POESCHL_TELLER_1: {"mu": 1.0, "lambda": 1.0},
    Family.POESCHL_TELLER_2: {"mu": 1.0, "lambda": 1.0},
    Family.CUBIC: {"mu": 1.0, "g": 1.0},
    Family.QUARTIC: {"a": 1.0, "beta": 1.0, "c": 1.0, "delta": 1.0},
    Family.CUSTOM: {},
}

SINGULAR_FAMILIES = (Family.INVERSE_POWER_1, Family.INVERSE_POWER_2)
SIGN_VARIANTS = ("derived", "printed")


class SignPattern(str, Enum):
    """Sign of Im V on the positive half-line"""
    NON_NEGATIVE = "NonNegativeOnPositiveHalfLine"
    NON_POSITIVE = "NonPositiveOnPositiveHalfLine"
    MIXED = "Mixed"
    ZERO = "Zero"


def _sech(y: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(y)


@dataclass(frozen=True)
class PotentialSpec:
    """
    A closed-form complex potential V(x) in units hbar = 1, 2m = 1.

    Built-in families are evaluated from their formula; CUSTOM specs carry
    their own vectorised callable (typically a superpotential partner).
    """
    family: Family
    params: Dict[str, float] = field(default_factory=dict)
    variant: str = "derived"
    label: str = ""
    func: Optional[ArrayFn] = field(default=None, compare=False, repr=False)
    singular_at_origin: bool = False

    def __post_init__(self):
        if self.family is Family.CUSTOM:
            if self.func is None:
                raise ConstructionError("custom potential needs a callable")
            return

        merged = dict(FAMILY_PARAMS[self.family])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConstructionError(
                f"{self.family.value} does not take {sorted(unknown)}; valid: {sorted(merged)}"
            )
        merged.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "singular_at_origin", self.family in SINGULAR_FAMILIES)

        for name, value in merged.items():
            if not math.isfinite(value):
                raise ConstructionError(f"parameter {name} must be finite, got {value}")
        for name in ("lambda", "a"):
            if name in merged and merged[name] <= 0:
                raise ConstructionError(f"parameter {name} must be > 0, got {merged[name]}")
        if "g" in merged and merged["g"] < 0:
            raise ConstructionError(f"parameter g must be >= 0, got {merged['g']}")
        if "mu" in merged:
            # the cubic oscillator admits a vanishing harmonic term
            if merged["mu"] < 0 or (merged["mu"] == 0 and self.family is not Family.CUBIC):
                raise ConstructionError(f"parameter mu out of range, got {merged['mu']}")
        if self.variant not in SIGN_VARIANTS:
            raise ConstructionError(f"variant must be one of {SIGN_VARIANTS}, got {self.variant!r}")

    @classmethod
    def custom(cls, func: ArrayFn, label: str = "custom",
               singular_at_origin: bool = False) -> "PotentialSpec":
        return cls(Family.CUSTOM, {}, label=label, func=func,
                   singular_at_origin=singular_at_origin)

    @classmethod
    def harmonic(cls, mu: float = 1.0) -> "PotentialSpec":
        """V = mu x^2, the cubic family with g = 0"""
        return cls(Family.CUBIC, {"mu": mu, "g": 0.0})

    @classmethod
    def poeschl_teller(cls, which: int, mu: float = 1.0, lam: Optional[float] = None,
                       lambda_tilde: Optional[float] = None) -> "PotentialSpec":
        """
        Build a sech^2 family member from either lambda or lambda-tilde.

        Only lambda is stored; lambda-tilde is always recomputed from
        lambda_tilde * (lambda_tilde - 1) = lambda^2 / mu^2 - 1/4.
        """
        if (lam is None) == (lambda_tilde is None):
            raise ConstructionError("give exactly one of lambda and lambda_tilde")
        if lambda_tilde is not None:
            if lambda_tilde <= 0.5:
                raise ConstructionError(f"lambda_tilde must exceed 1/2, got {lambda_tilde}")
            lam = mu * (lambda_tilde - 0.5)
        family = Family.POESCHL_TELLER_1 if which == 1 else Family.POESCHL_TELLER_2
        return cls(family, {"mu": mu, "lambda": lam})

    @property
    def name(self) -> str:
        if self.family is Family.CUSTOM:
            return self.label
        return self.family.value

    @property
    def lambda_tilde(self) -> float:
        if self.family not in (Family.POESCHL_TELLER_1, Family.POESCHL_TELLER_2):
            raise AttributeError(f"{self.name} has no lambda_tilde")
        return 0.5 + self.params["lambda"] / self.params["mu"]

    def with_params(self, **updates: float) -> "PotentialSpec":
        if self.family is Family.CUSTOM:
            raise ConstructionError("custom potentials have no named parameters")
        params = dict(self.params)
        params.update(updates)
        return PotentialSpec(self.family, params, variant=self.variant)

    def real_part(self) -> "PotentialSpec":
        return PotentialSpec.custom(lambda x: self(x).real.astype(complex),
                                    label=f"Re[{self.name}]",
                                    singular_at_origin=self.singular_at_origin)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.singular_at_origin and np.any(x == 0.0):
            raise DomainError(f"{self.name} is singular at x = 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.asarray(self._formula(x), dtype=complex)
        if not np.all(np.isfinite(values)):
            bad = np.atleast_1d(x)[~np.isfinite(np.atleast_1d(values))]
            raise DomainError(f"{self.name} is not finite at x = {bad[0]!r}")
        return values

    def _formula(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        f = self.family
        if f is Family.CUSTOM:
            return self.func(x)
        if f is Family.INVERSE_POWER_1:
            return -p["lambda"] ** 2 / x ** 4 + 0j
        if f is Family.INVERSE_POWER_2:
            sign = -1.0 if self.variant == "derived" else 1.0
            lam = p["lambda"]
            return 2.0 / x ** 2 - lam ** 2 / x ** 4 + sign * 4j * lam / x ** 3
        if f is Family.SHIFTED_QUARTIC_1:
            z = x + 1j
            return 2.0 / z ** 2 - z ** 4
        if f is Family.SHIFTED_QUARTIC_2:
            z = x - 1j
            return -4j * z - z ** 4
        if f is Family.POESCHL_TELLER_1:
            mu, lam = p["mu"], p["lambda"]
            lt = self.lambda_tilde
            s = _sech(mu * x)
            return (mu ** 2 / 4 - mu ** 2 * (lt * (lt - 1) + 1) * s ** 2
                    - 2j * lam * mu * s * np.tanh(mu * x))
        if f is Family.POESCHL_TELLER_2:
            mu = p["mu"]
            lt = self.lambda_tilde
            return mu ** 2 / 4 - mu ** 2 * lt * (lt - 1) * _sech(mu * x) ** 2 + 0j
        if f is Family.CUBIC:
            return p["mu"] * x ** 2 + 1j * p["g"] * x ** 3
        if f is Family.QUARTIC:
            return (p["a"] * x ** 4 + 1j * p["beta"] * x ** 3
                    + p["c"] * x ** 2 + 1j * p["delta"] * x)
        raise ConstructionError(f"no formula for {f}")


def eval_potential(spec: PotentialSpec, x: float) -> complex:
    """Evaluate V at a single real point; raises DomainError where V is singular"""
    return complex(spec(np.array([x]))[0])


@dataclass(frozen=True)
class SuperpotentialSpec:
    """
    Complex superpotential W = a(x) + i b(x) together with its derivative.

    Args:
        a_fn, b_fn: real and imaginary parts of W
        da_fn, db_fn: their first derivatives
    """
    a_fn: ArrayFn
    b_fn: ArrayFn
    da_fn: ArrayFn
    db_fn: ArrayFn
    label: str = "W"
    singular_at_origin: bool = False

    def __post_init__(self):
        for name in ("a_fn", "b_fn", "da_fn", "db_fn"):
            if not callable(getattr(self, name)):
                raise ConstructionError(f"superpotential {self.label}: {name} is not callable")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.a_fn(x), dtype=float) + 1j * np.asarray(self.b_fn(x), dtype=float)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.da_fn(x), dtype=float) + 1j * np.asarray(self.db_fn(x), dtype=float)

    @classmethod
    def from_complex(cls, w: ArrayFn, dw: ArrayFn, label: str,
                     singular_at_origin: bool = False) -> "SuperpotentialSpec":
        return cls(lambda x: w(x).real, lambda x: w(x).imag,
                   lambda x: dw(x).real, lambda x: dw(x).imag,
                   label=label, singular_at_origin=singular_at_origin)

    @classmethod
    def from_samples(cls, x: np.ndarray, a: np.ndarray, b: np.ndarray,
                     label: str = "sampled W") -> "SuperpotentialSpec":
        """
        Superpotential from tabulated a(x), b(x); derivatives by second-order
        finite differences, values in between by linear interpolation.
        """
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if x.ndim != 1 or x.size < 3 or a.shape != x.shape or b.shape != x.shape:
            raise ConstructionError("samples need matching 1-D arrays of at least 3 points")
        if np.any(np.diff(x) <= 0):
            raise ConstructionError("sample abscissae must be strictly increasing")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ConstructionError("samples must be finite")
        da = np.gradient(a, x, edge_order=2)
        db = np.gradient(b, x, edge_order=2)
        # a jump between neighbours moves a sample by a sizeable share of the whole range
        step = np.min(np.diff(x))
        for values, slope in ((a, da), (b, db)):
            spread = np.ptp(values)
            if spread > 0 and np.max(np.abs(slope)) * step > 0.25 * spread:
                raise ConstructionError(f"{label}: samples are not resolved as a differentiable function")

        def interp(values):
            return lambda t: np.interp(t, x, values)

        return cls(interp(a), interp(b), interp(da), interp(db), label=label)


def inverse_power_superpotential(lam: float = 1.0, branch: str = "+") -> SuperpotentialSpec:
    """W± = 1/x ± i lam/x^2"""
    if branch not in ("+", "-"):
        raise ConstructionError(f"branch must be '+' or '-', got {branch!r}")
    s = 1.0 if branch == "+" else -1.0
    return SuperpotentialSpec(
        lambda x: 1.0 / x,
        lambda x: s * lam / x ** 2,
        lambda x: -1.0 / x ** 2,
        lambda x: -2.0 * s * lam / x ** 3,
        label=f"W{branch} inverse-power (lambda={lam})",
        singular_at_origin=True,
    )


def shifted_cubic_superpotential(which: int = 1) -> SuperpotentialSpec:
    """w1 = 1/(x+i) - i(x+i)^2 and w2 = -[1/(x-i) - i(x-i)^2]"""
    if which == 1:
        return SuperpotentialSpec.from_complex(
            lambda x: 1.0 / (x + 1j) - 1j * (x + 1j) ** 2,
            lambda x: -1.0 / (x + 1j) ** 2 - 2j * (x + 1j),
            label="w1 shifted-cubic",
        )
    if which == 2:
        return SuperpotentialSpec.from_complex(
            lambda x: -1.0 / (x - 1j) + 1j * (x - 1j) ** 2,
            lambda x: 1.0 / (x - 1j) ** 2 + 2j * (x - 1j),
            label="w2 shifted-cubic",
        )
    raise ConstructionError(f"which must be 1 or 2, got {which}")


def poeschl_teller_superpotential(mu: float = 1.0, lam: float = 1.0) -> SuperpotentialSpec:
    """
    W = (mu/2) tanh(mu x) - i lam sech(mu x).

    W^2 - W' is the sech*tanh family member and W^2 + W' the pure sech^2 one,
    both with lambda_tilde = 1/2 + lam/mu.
    """
    return SuperpotentialSpec(
        lambda x: 0.5 * mu * np.tanh(mu * x),
        lambda x: -lam * _sech(mu * x),
        lambda x: 0.5 * mu ** 2 * _sech(mu * x) ** 2,
        lambda x: lam * mu * _sech(mu * x) * np.tanh(mu * x),
        label=f"W poeschl-teller (mu={mu}, lambda={lam})",
    )


def linear_superpotential(omega: float = 1.0) -> SuperpotentialSpec:
    """W = omega x, partners omega^2 x^2 -/+ omega"""
    return SuperpotentialSpec(
        lambda x: omega * x,
        lambda x: np.zeros_like(x),
        lambda x: np.full_like(x, omega),
        lambda x: np.zeros_like(x),
        label=f"W linear (omega={omega})",
    )


def susy_partner_pair(w: SuperpotentialSpec) -> Tuple[PotentialSpec, PotentialSpec]:
    """
    Build the partner potentials V- = W^2 - W' and V+ = W^2 + W'.

    Returns:
        (V-, V+) as CUSTOM potential specs
    """
    sample_x = np.array([0.37, -1.3, 2.9])
    if w.singular_at_origin:
        sample_x = np.abs(sample_x)
    try:
        with np.errstate(all="ignore"):
            ok = np.all(np.isfinite(w(sample_x))) and np.all(np.isfinite(w.derivative(sample_x)))
    except Exception as e:
        raise ConstructionError(f"{w.label}: cannot evaluate W or W': {e}")
    if not ok:
        raise ConstructionError(f"{w.label}: W or W' not finite on its domain")

    v_minus = PotentialSpec.custom(lambda x: w(x) ** 2 - w.derivative(x),
                                   label=f"V-[{w.label}]",
                                   singular_at_origin=w.singular_at_origin)
    v_plus = PotentialSpec.custom(lambda x: w(x) ** 2 + w.derivative(x),
                                  label=f"V+[{w.label}]",
                                  singular_at_origin=w.singular_at_origin)
    logger.debug(f"Built partner pair from {w.label}")
    return v_minus, v_plus


def partner_superpotential(spec: PotentialSpec) -> Optional[Tuple[SuperpotentialSpec, str]]:
    """
    Superpotential generating a built-in family, and which branch reproduces it.

    Returns:
        (W, "-" or "+") or None when the family has no known superpotential
    """
    p = spec.params
    f = spec.family
    if f is Family.INVERSE_POWER_1:
        return inverse_power_superpotential(p["lambda"], "+"), "+"
    if f is Family.INVERSE_POWER_2:
        if spec.variant == "derived":
            return inverse_power_superpotential(p["lambda"], "-"), "-"
        return inverse_power_superpotential(p["lambda"], "+"), "-"
    if f is Family.SHIFTED_QUARTIC_1:
        return shifted_cubic_superpotential(1), "-"
    if f is Family.SHIFTED_QUARTIC_2:
        return shifted_cubic_superpotential(2), "-"
    if f is Family.POESCHL_TELLER_1:
        return poeschl_teller_superpotential(p["mu"], p["lambda"]), "-"
    if f is Family.POESCHL_TELLER_2:
        return poeschl_teller_superpotential(p["mu"], p["lambda"]), "+"
    return None


@dataclass(frozen=True)
class SymmetryReport:
    """
    PT and parity residuals of a potential on a grid.

    Residuals are None on grids that are not symmetric about x = 0.
    """
    pt_residual: Optional[float]
    re_even_residual: Optional[float]
    im_odd_residual: Optional[float]
    im_sign_pattern: SignPattern
    max_abs_v: float

    @property
    def applicable(self) -> bool:
        return self.pt_residual is not None

    @property
    def absorptive_half(self) -> Optional[str]:
        # V_I = -Im V, so Im V <= 0 means a sink
        if self.im_sign_pattern is SignPattern.NON_POSITIVE:
            return "x>0"
        if self.im_sign_pattern is SignPattern.NON_NEGATIVE:
            return "x<0" if self.applicable else None
        return None

    def is_pt_symmetric(self, rel_tol: float = 1e-12) -> bool:
        if not self.applicable:
            return False
        return self.pt_residual <= rel_tol * max(self.max_abs_v, 1e-300)


def im_sign_pattern(values: np.ndarray, x: np.ndarray, rel_tol: float = 1e-14) -> SignPattern:
    """Classify the sign of Im V over the samples with x > 0"""
    im = np.asarray(values).imag[np.asarray(x) > 0]
    scale = np.max(np.abs(values)) if np.size(values) else 0.0
    tol = rel_tol * scale
    if im.size == 0 or np.all(np.abs(im) <= tol):
        return SignPattern.ZERO
    if np.all(im >= -tol):
        return SignPattern.NON_NEGATIVE
    if np.all(im <= tol):
        return SignPattern.NON_POSITIVE
    return SignPattern.MIXED


def symmetry_report(spec: PotentialSpec, grid: "Grid") -> SymmetryReport:
    x = grid.x
    v = spec(x)
    max_abs = float(np.max(np.abs(v)))
    pattern = im_sign_pattern(v, x)
    if not grid.is_symmetric:
        logger.info(f"{spec.name}: grid is not symmetric, parity residuals not applicable")
        return SymmetryReport(None, None, None, pattern, max_abs)

    v_mirror = spec(-x)
    pt = float(np.max(np.abs(v - np.conj(v_mirror))))
    re_even = float(np.max(np.abs(v.real - v_mirror.real)))
    im_odd = float(np.max(np.abs(v.imag + v_mirror.imag)))
    return SymmetryReport(pt, re_even, im_odd, pattern, max_abs)
