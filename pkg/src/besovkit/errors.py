"""Exception hierarchy shared by all besovkit modules.

Each class carries the exit code the command-line front end maps it to:
1 for numerical failures, 3 for configuration problems, 4 for I/O.
"""

from __future__ import annotations


class BesovKitError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


# -- input validation ------------------------------------------------------


class ValidationError(BesovKitError, ValueError):
    """An argument violates a documented precondition."""


class GridShapeError(ValidationError):
    """Array shape does not agree with the grid along a named axis."""

    def __init__(self, message: str, axis: int | None = None):
        super().__init__(message)
        self.axis = axis


class GridBudgetError(ValidationError):
    """Requested grid exceeds the configured memory budget."""


class HypothesisViolation(ValidationError):
    """Parameters fall outside the range where an estimate is asserted."""


# -- numerical failures ----------------------------------------------------


class NumericalError(BesovKitError, ArithmeticError):
    """A computation could not be carried out to the requested accuracy."""


class PartitionTooCoarse(NumericalError):
    """The grid resolves fewer than three dyadic blocks."""


class OutOfBandError(NumericalError):
    """Input has spectral mass above the top resolved dyadic block."""

    def __init__(self, message: str, relative_mass: float):
        super().__init__(message)
        self.relative_mass = relative_mass


class PositivityViolation(NumericalError):
    """The sampled resolvent bound fails for every admissible constant."""

    def __init__(self, message: str, witness: complex, ratio: float):
        super().__init__(message)
        self.witness = witness
        self.ratio = ratio


class NotDiagonalizable(NumericalError):
    """Eigenvector matrix is too ill-conditioned for functional calculus."""


class BranchCutError(NumericalError):
    """An eigenvalue lies on the branch cut of the principal power."""


class EllipticityViolation(NumericalError):
    """The principal symbol degenerates at a sampled frequency."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class SingularModeError(NumericalError):
    """A per-mode system is singular to working precision."""

    def __init__(self, message: str, frequency=None, condition: float = float("inf")):
        super().__init__(message)
        self.frequency = frequency
        self.condition = condition


class NonContractiveError(NumericalError):
    """The lower-order perturbation is not a contraction."""

    def __init__(self, message: str, contraction: float):
        super().__init__(message)
        self.contraction = contraction


class ComparabilityViolation(NumericalError):
    """Diagonal weights are not uniformly comparable to their anchor values."""


# -- configuration and I/O -------------------------------------------------


class ConfigError(BesovKitError):
    """One or more configuration entries are invalid."""

    exit_code = 3

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class FormatError(BesovKitError):
    """Malformed binary grid-function file."""

    exit_code = 4


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass
