"""Exception hierarchy for projphase."""


class ProjPhaseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(ProjPhaseError, ValueError):
    pass


class InvalidRank(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class ZeroVector(InvalidInput):
    pass


class RankDeficientBasis(InvalidInput):
    pass


class NonRankOne(InvalidInput):
    pass


class DegenerateSample(ProjPhaseError):
    pass


class InvariantError(ProjPhaseError):
    """A matrix failed the orthogonal-projection invariants."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SchemaError(ProjPhaseError):
    """A JSON document does not match the expected layout.

    ``path`` points at the offending field, e.g. ``projections[2].matrix``.
    """

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class BudgetExceeded(ProjPhaseError):
    pass


class PartitionCapExceeded(BudgetExceeded):
    pass


class DegenerateWitness(ProjPhaseError):
    pass


class DegenerateSystem(ProjPhaseError):
    pass


class FullSparkSamplingFailed(ProjPhaseError):
    pass
