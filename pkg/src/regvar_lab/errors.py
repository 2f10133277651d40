"""Exception hierarchy shared by the regvar-lab modules."""


class RegVarError(Exception):
    """Base class for every error raised by the package."""


class DomainError(RegVarError, ValueError):
    """An argument lies outside the group or kernel domain."""


class SingularityError(DomainError):
    """The group inverse does not exist at the given point."""


class DegenerateKernelError(RegVarError):
    """The kernel is constant, so it cannot be inverted or fitted."""


class NoBracketError(RegVarError):
    """A root search could not find a sign change.

    ``minimal_feasible`` carries the smallest target the solver can reach.
    """

    def __init__(self, message, minimal_feasible=None):
        super().__init__(message)
        self.minimal_feasible = minimal_feasible


class InsufficientDataError(RegVarError, ValueError):
    pass


class NonConvergenceError(RegVarError):
    """Every sequential limit failed its tail-oscillation test."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrivialKernelError(RegVarError):
    """The estimated limit function only takes values in {0, 1}."""


class EmptyAnchorError(RegVarError):
    """No anchor lambda keeps both lambda and its composition inside B."""

    def __init__(self, message, feasible_window=None):
        super().__init__(message)
        self.feasible_window = feasible_window


class ConfigError(RegVarError, ValueError):
    pass


class DataFormatError(RegVarError, ValueError):
    """Malformed tabulated input (CSV)."""
