import io
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin

from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from src.discretize import DomainSpec, Grid, Stencil, build_grid, default_domain
from src.eigensolve import SolverOptions
from src.errors import ConfigError
from src.potentials import FAMILY_PARAMS, SIGN_VARIANTS, Family, PotentialSpec

logger = logging.getLogger(__name__)

COMMANDS = ("spectrum", "shoot", "propagate", "check", "susy", "sweep", "plotdata")
CLI_FAMILIES = [f.value for f in Family if f is not Family.CUSTOM]
PT_FAMILIES = (Family.POESCHL_TELLER_1, Family.POESCHL_TELLER_2)
PACKETS = ("gaussian", "pt-symmetric")
METHODS = ("dense", "shooting", "richardson")


@dataclass
class PotentialConfig:
    family: Optional[str] = None
    params: Dict[str, float] = field(default_factory=dict)
    variant: str = "derived"


@dataclass
class GridConfig:
    L: Optional[float] = None
    n: Optional[int] = None
    eps: Optional[float] = None
    stencil: str = "3pt"


@dataclass
class SolverConfig:
    method: str = "dense"
    levels: int = 10
    dense_cap: int = 4000
    tau_real_raw: float = 1e-4
    tau_real_refined: float = 1e-7
    boundary_mass_threshold: float = 0.1
    box_factor: float = 1.25
    stability: bool = False


@dataclass
class DynamicsConfig:
    dt: float = 1e-3
    steps: int = 1000
    packet: str = "gaussian"
    center: float = 0.0
    width: float = 1.0
    momentum: float = 0.0


@dataclass
class SweepConfig:
    parameter: Optional[str] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    count: int = 11


SECTIONS = {
    "potential": PotentialConfig,
    "grid": GridConfig,
    "solver": SolverConfig,
    "dynamics": DynamicsConfig,
    "sweep": SweepConfig,
}


def _coerce(ftype: Any, value: Any, name: str) -> Any:
    if value is None:
        return None
    if get_origin(ftype) is Union:
        ftype = next(a for a in get_args(ftype) if a is not type(None))
    try:
        if ftype is bool:
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if ftype is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if ftype is float:
            return float(value)
        if ftype is str:
            return str(value)
        if get_origin(ftype) is dict:
            if not isinstance(value, dict):
                raise ValueError("expected a mapping")
            return {str(k): float(v) for k, v in value.items()}
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: cannot use {value!r} ({e})") from e
    return value


def _apply(section: Any, values: Dict[str, Any], where: str) -> Any:
    """Return a copy of the section dataclass with the non-None values applied"""
    known = {f.name: f for f in fields(section)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown {where} key(s) {sorted(unknown)}; valid: {sorted(known)}")
    updates = {k: _coerce(known[k].type, v, f"{where}.{k}") for k, v in values.items() if v is not None}
    if "params" in updates:
        updates["params"] = {**section.params, **updates["params"]}
    return replace(section, **updates)


@dataclass
class RunConfig:
    """
    Everything a run depends on. `resolved()` fills every default so that the
    serialised form alone reproduces the run.
    """
    command: str
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    @classmethod
    def from_sources(cls, command: str, file_data: Optional[Dict[str, Any]] = None,
                     overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> "RunConfig":
        """
        Merge built-in defaults, a config file mapping and explicit flags,
        in increasing order of precedence.
        """
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; valid: {list(COMMANDS)}")
        config = cls(command)
        for source in (file_data or {}, overrides or {}):
            unknown = set(source) - set(SECTIONS) - {"command"}
            if unknown:
                raise ConfigError(f"unknown config section(s) {sorted(unknown)}; valid: {sorted(SECTIONS)}")
            for name in SECTIONS:
                values = source.get(name) or {}
                if not isinstance(values, dict):
                    raise ConfigError(f"config section {name!r} must be a mapping")
                setattr(config, name, _apply(getattr(config, name), values, name))
        return config

    def family(self) -> Family:
        """
        The requested potential family.

        Returns:
            The Family named by potential.family

        Raises:
            ConfigError: no family given, or one the CLI does not offer
        """
        name = self.potential.family
        if name is None:
            raise ConfigError(f"a family is required; valid: {CLI_FAMILIES}")
        if name not in CLI_FAMILIES:
            raise ConfigError(f"unknown family {name!r}; valid: {CLI_FAMILIES}")
        return Family(name)

    def valid_params(self) -> List[str]:
        """Parameter names the family accepts, lambdatilde included for the sech families"""
        family = self.family()
        names = list(FAMILY_PARAMS[family])
        if family in PT_FAMILIES:
            names.append("lambdatilde")
        return sorted(names)

    def _resolved_params(self) -> Dict[str, float]:
        family = self.family()
        given = dict(self.potential.params)
        unknown = set(given) - set(self.valid_params())
        if unknown:
            raise ConfigError(
                f"{family.value} does not take {sorted(unknown)}; valid: {self.valid_params()}"
            )
        params = dict(FAMILY_PARAMS[family])
        if family in PT_FAMILIES:
            if "lambda" in given and "lambdatilde" in given:
                raise ConfigError("give either lambda or lambdatilde, not both")
            if "lambdatilde" in given:
                del params["lambda"]
        params.update(given)
        return dict(sorted(params.items()))

    def build_potential(self, **params: float) -> PotentialSpec:
        """The potential, optionally with some parameters replaced (used by sweeps)"""
        family = self.family()
        merged = self._resolved_params()
        if family in PT_FAMILIES:
            # lambda and lambdatilde are two spellings of one coupling
            if "lambda" in params:
                merged.pop("lambdatilde", None)
            if "lambdatilde" in params:
                merged.pop("lambda", None)
        merged.update(params)
        if family in PT_FAMILIES and "lambdatilde" in merged:
            which = 1 if family is Family.POESCHL_TELLER_1 else 2
            return PotentialSpec.poeschl_teller(which, merged["mu"], lambda_tilde=merged["lambdatilde"])
        return PotentialSpec(family, merged, variant=self.potential.variant)

    def resolved(self) -> "RunConfig":
        """
        Copy with every default filled in.

        Raises:
            ConfigError: unknown names, conflicting or missing settings
        """
        family = self.family()
        if self.potential.variant not in SIGN_VARIANTS:
            raise ConfigError(f"unknown variant {self.potential.variant!r}; valid: {list(SIGN_VARIANTS)}")
        if self.grid.stencil not in [s.value for s in Stencil]:
            raise ConfigError(f"unknown stencil {self.grid.stencil!r}; valid: {[s.value for s in Stencil]}")
        if self.solver.method not in METHODS:
            raise ConfigError(f"unknown method {self.solver.method!r}; valid: {list(METHODS)}")
        if self.dynamics.packet not in PACKETS:
            raise ConfigError(f"unknown packet {self.dynamics.packet!r}; valid: {list(PACKETS)}")

        potential = replace(self.potential, params=self._resolved_params())
        spec = self.build_potential()
        if self.grid.eps is not None and not spec.singular_at_origin:
            raise ConfigError(f"eps only applies to singular families, not {family.value}")
        domain = default_domain(spec, self.grid.L, self.grid.n, self.grid.eps)
        grid = replace(self.grid, L=float(domain.x_max), n=int(domain.n), eps=domain.eps)

        sweep = self.sweep
        if self.command == "sweep":
            if sweep.parameter is None or sweep.start is None or sweep.stop is None:
                raise ConfigError("sweep needs a parameter, start and stop")
            if sweep.parameter not in self.valid_params():
                raise ConfigError(
                    f"cannot sweep {sweep.parameter!r}; valid: {self.valid_params()}"
                )
            if sweep.count < 1:
                raise ConfigError(f"sweep count must be >= 1, got {sweep.count}")
        return replace(self, potential=potential, grid=grid, sweep=sweep)

    def domain(self) -> DomainSpec:
        if self.grid.eps is not None:
            return DomainSpec.half_line(self.grid.eps, self.grid.L, self.grid.n)
        return DomainSpec.box(self.grid.L, self.grid.n)

    def build_grid(self) -> Grid:
        """
        Grid for the resolved domain.

        Returns:
            A Grid; call on a resolved() config so L and n are set
        """
        return build_grid(self.domain())

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(
            stencil=Stencil(self.grid.stencil),
            method=s.method,
            dense_cap=s.dense_cap,
            levels=s.levels,
            tau_real_raw=s.tau_real_raw,
            tau_real_refined=s.tau_real_refined,
            boundary_mass_threshold=s.boundary_mass_threshold,
            box_factor=s.box_factor,
        )

    def to_dict(self) -> Dict[str, Any]:
        sections = {"command": self.command}
        for name in SECTIONS:
            section = getattr(self, name)
            sections[name] = {f.name: getattr(section, f.name) for f in fields(section)}
        return sections

    def header_lines(self) -> List[str]:
        """The YAML form of the config, one line per entry"""
        return dump_yaml(self.to_dict()).splitlines()


def _yaml() -> YAML:
    yaml = YAML(typ="safe")
    yaml.default_flow_style = False
    yaml.width = 4096
    return yaml


def dump_yaml(data: Dict[str, Any]) -> str:
    stream = io.StringIO()
    _yaml().dump(data, stream)
    return stream.getvalue()


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a YAML config file.

    Raises:
        ConfigError: unreadable file or a top level that is not a mapping
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = _yaml().load(f)
    except (OSError, YAMLError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at the top level")
    logger.debug(f"Loaded config sections {sorted(data)} from {path}")
    return data
