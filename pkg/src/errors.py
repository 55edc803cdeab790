"""
Exception hierarchy for the hqip simulator.

Every error raised by the package derives from HqipError and from the
builtin it most resembles, so callers may catch either one.
"""


class HqipError(Exception):
    """Base class for all simulator errors."""


class SpaceMismatchError(HqipError, ValueError):
    """Operands live on different Fock spaces or have incompatible shapes."""


class ModeIndexError(HqipError, IndexError):
    """A mode index is outside the register."""


class UnknownKindError(HqipError, ValueError):
    """An operator, op-spec or ancilla kind is not recognised."""


class NonHermitianError(HqipError, ValueError):
    """A generator handed to the exponential is not Hermitian."""


class ParameterRangeError(HqipError, ValueError):
    """A numeric parameter is outside its admissible range."""


class GridCoverageError(HqipError, ValueError):
    """A quadrature grid does not cover six standard deviations of a marginal."""


class GridResolutionError(HqipError, ValueError):
    """A phase-space grid is too coarse for the state being sampled."""


class LeakageError(HqipError, ArithmeticError):
    """Population left in the top Fock level exceeds the allowed threshold."""


class SingularMarginalError(HqipError, ArithmeticError):
    """A measured marginal is degenerate (zero variance or all-zero density)."""


class PhotonSectorError(HqipError, ValueError):
    """A state is outside the photon-number sector an operation requires."""


class MissingOutcomeError(HqipError, ValueError):
    """A correction was requested without the measurement outcomes it needs."""


class ProgramError(HqipError, ValueError):
    """A cluster graph or measurement program is malformed or unsupported."""


class ConfigError(HqipError, ValueError):
    """An experiment configuration is invalid."""


class ToleranceError(HqipError, ArithmeticError):
    """A hard numerical check of an experiment failed."""
