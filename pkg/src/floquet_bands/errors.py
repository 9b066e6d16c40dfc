"""Exception types raised across the package."""


class FloquetBandsError(Exception):
    """Base class for all package errors."""


class GeometryError(FloquetBandsError, ValueError):
    """Invalid lattice or resonator layout."""


class SingularQuasimomentumError(FloquetBandsError, ValueError):
    """Quasimomentum lies on the dual lattice, where the static Green's function does not exist."""


class NumericalError(FloquetBandsError, ArithmeticError):
    """A linear solve or decomposition failed or is too ill-conditioned to trust."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ValidationError(FloquetBandsError, ValueError):
    """Data violates a documented invariant (Hermiticity, positivity, shape)."""


class ParseError(FloquetBandsError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModulationError(FloquetBandsError, ValueError):
    """Invalid modulation profile (non-positive material parameter, bad shapes)."""


class StiffnessError(FloquetBandsError, RuntimeError):
    """The adaptive integrator could not complete a period."""


class FlowDegeneracyError(FloquetBandsError, RuntimeError):
    """The monodromy matrix has a zero eigenvalue (integrator failure)."""


class NotDiagonalizableError(FloquetBandsError, ValueError):
    """Static first-order matrix is defective."""


class AssumptionViolationError(FloquetBandsError, ValueError):
    """Distinct static Floquet exponents are congruent modulo the modulation frequency."""


class InsufficientHarmonicsError(FloquetBandsError, KeyError):
    """A required Fourier order is missing from a coefficient table."""


class UnsupportedMultiplicityError(FloquetBandsError, NotImplementedError):
    """Degenerate point of multiplicity greater than two."""


class BranchError(FloquetBandsError, ValueError):
    """Matrix logarithm branch could not be aligned with the static exponents."""


class NearResonanceError(FloquetBandsError, ZeroDivisionError):
    """Resolvent of the static Floquet matrix blows up."""


class PathError(FloquetBandsError, ValueError):
    """Brillouin path lacks the mirrored sample pairing a report needs."""


class ConfigError(FloquetBandsError, ValueError):
    """Invalid run configuration."""
