"""
Exception hierarchy shared by all engine apps.

Input errors map to CLI exit status 1, numerical failures to exit status 2.
"""


class DMNError(Exception):
    """Base class for engine errors."""

    exit_status = 1


class InputError(DMNError, ValueError):
    """Invalid user input: files, parameters, configurations."""

    exit_status = 1


class NumericalError(DMNError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""

    exit_status = 2


class ConfigurationError(InputError):
    pass


class SymmetryViolationError(InputError):
    pass


class IncompressibilityError(InputError):
    pass


class TopologyError(InputError):
    pass


class EmptyNetworkError(InputError):
    pass


class ChainError(InputError):
    pass


class InvalidOrientationError(InputError):
    pass


class AnchorDegeneracyError(InputError):
    pass


class MaterialParameterError(InputError):
    pass


class NetworkFileError(InputError):
    pass


class MeshFileError(InputError):
    def __init__(self, message: str, line: int = None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class MicrostructureFileError(InputError):
    def __init__(self, message: str, line: int = None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class CFLViolationError(InputError):
    def __init__(self, dt: float, dt_critical: float):
        self.dt = dt
        self.dt_critical = dt_critical
        super().__init__(
            f'time step {dt:.3e} s exceeds the stable estimate {dt_critical:.3e} s '
            f'(set allow_dt_override to run anyway)'
        )


class SingularStiffnessError(NumericalError):
    pass


class DegenerateInterfaceError(NumericalError):
    pass


class SamplingError(NumericalError):
    pass


class DivergenceError(NumericalError):
    """Training produced non-finite costs; carries the last finite network."""

    def __init__(self, message: str, snapshot=None):
        self.snapshot = snapshot
        super().__init__(message)


class MaterialConvergenceError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    """Online fixed-point iteration did not converge."""

    def __init__(self, message: str, residual: float = None, location=None):
        self.residual = residual
        self.location = location
        if location is not None:
            message = f'{message} at {location}'
        super().__init__(message)


class BlowUpError(NumericalError):
    def __init__(self, message: str, last_stable_time: float = None):
        self.last_stable_time = last_stable_time
        super().__init__(message)
