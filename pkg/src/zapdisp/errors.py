"""Exception hierarchy.

Configuration/usage problems and numerical failures are kept apart so the CLI
can map them onto distinct exit codes.
"""


class ZapdispError(Exception):
    """Base class for all package errors."""


class InvalidArgument(ZapdispError, ValueError):
    pass


class InvalidProfile(InvalidArgument):
    """A velocity profile is non-positive at some cross-section node."""

    def __init__(self, message, node=None, y=None, value=None):
        super().__init__(message)
        self.node = node
        self.y = y
        self.value = value


class ConfigError(InvalidArgument):
    pass


class UnsupportedKernel(InvalidArgument):
    pass


class IllPosed(InvalidArgument):
    """Backward-diffusion (A2 < 0) macroscale problem."""


class StabilityError(InvalidArgument):
    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class NumericalError(ZapdispError, ArithmeticError):
    pass


class MomentDivergence(NumericalError):
    def __init__(self, message, order=None):
        super().__init__(message)
        self.order = order


class NumericalDegeneracy(NumericalError):
    pass
