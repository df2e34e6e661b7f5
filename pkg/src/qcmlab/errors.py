"""Exception hierarchy shared by all qcmlab modules."""


class QcmlabError(Exception):
    """Base class for every error raised by this package."""


class ResourceCapError(QcmlabError):
    """A configured size or work cap would be exceeded (CLI exit code 4)."""


# ---------------------------------------------------------------- geometry

class EmptyOrSingleton(QcmlabError, ValueError):
    """Fewer than two maps: not a valid self-similar system here."""


class RatioOutOfRange(QcmlabError, ValueError):
    """A contraction ratio outside the permitted interval."""


class ClassViolation(QcmlabError, ValueError):
    """Declared system class contradicts the supplied maps."""


class DimensionMismatch(QcmlabError, ValueError):
    """Maps with inconsistent ambient dimension."""


class LetterOutOfRange(QcmlabError, ValueError):
    """A word letter outside {1..m}."""


class ExplosionGuard(ResourceCapError):
    """Estimated stopping-set size exceeds the configured cap."""


# ---------------------------------------------------------------- operators

class DimensionCapExceeded(ResourceCapError):
    """Requested model dimension exceeds the configured cap."""


class PrefixTooLong(QcmlabError, ValueError):
    """Word prefix longer than the discretization level."""


class ShapeMismatch(QcmlabError, ValueError):
    """Incompatible matrix shapes."""


class CoordCountMismatch(QcmlabError, ValueError):
    """Operator tuples with different numbers of coordinates."""


class NegativeScale(QcmlabError, ValueError):
    """A scale factor that must be nonnegative is negative."""


class NotOrthogonal(QcmlabError, ValueError):
    """Matrix fails the orthogonality tolerance."""


class OverlappingPieces(QcmlabError, ValueError):
    """Multiplicity pieces whose prefix sets are not prefix-free."""


# ---------------------------------------------------------------- spectra

class NonFiniteEntry(QcmlabError, ValueError):
    """NaN or infinity in a matrix handed to the eigensolver."""


class InvalidP(QcmlabError, ValueError):
    """Norm exponent outside the range where the norm is defined."""


# ---------------------------------------------------------------- modulus lab

class InvalidParams(QcmlabError, ValueError):
    """Parameters outside an operation's admissible range."""


class ResolutionExceedsLevel(QcmlabError, ValueError):
    """Stopping resolution requires deeper words than the model carries."""


class BoundChainViolation(QcmlabError, ArithmeticError):
    """The commutator bound chain failed; this indicates a bug, the chain
    is a theorem for correct inputs."""


class BudgetZeroWithNoSeed(QcmlabError, ValueError):
    """Descent was given neither a seed projection nor room to build one."""


class CapExceeded(ResourceCapError):
    """Combined word length and level exceed the configured cap."""


# ---------------------------------------------------------------- probes

class NotStabilized(QcmlabError, ArithmeticError):
    """Scan values kept moving; increase the base index ceiling."""


class NormalizationViolation(QcmlabError, ValueError):
    """Diagonal family is not normalized in the p-th power sum."""


class RatioBoundViolation(QcmlabError, ValueError):
    """Diagonal family violates its declared max/min ratio bound."""


# ---------------------------------------------------------------- CLI

class ConfigError(QcmlabError, ValueError):
    """Unusable experiment or system configuration (CLI exit code 2)."""
