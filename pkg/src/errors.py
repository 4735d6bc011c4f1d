class PTSpecError(Exception):
    """Base class for every failure raised by the toolkit"""


class DomainError(PTSpecError, ValueError):
    """A potential was evaluated where it is singular or undefined"""


class GridError(PTSpecError, ValueError):
    """Inconsistent grid bounds, node count or kind"""


class ConstructionError(PTSpecError, ValueError):
    """A potential or superpotential could not be built from its inputs"""


class ConvergenceError(PTSpecError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance"""


class PropagationError(PTSpecError, RuntimeError):
    """A time step could not be completed"""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class ConfigError(PTSpecError, ValueError):
    """Unknown family, parameter or config key; the CLI reports it as a usage error"""
