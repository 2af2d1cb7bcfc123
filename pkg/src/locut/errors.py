"""Exception hierarchy.  Everything raised on purpose derives from LocutError."""


class LocutError(Exception):
    pass


class MalformedFile(LocutError):
    """An MPS file could not be understood."""


class EmptyProblem(LocutError):
    """A parsed problem has no rows or no columns."""


class InvalidParams(LocutError, ValueError):
    pass


class ProvenInfeasible(LocutError):
    """Presolve found contradictory bounds or constraints."""


class NumericalFailure(LocutError):
    pass


class WorkLimitReached(LocutError):
    """Raised inside the simplex when the pivot budget is exhausted."""


class MissingPair(LocutError, KeyError):
    """A (problem, seed) has a run for only one strategy."""


class TooFewSamples(LocutError, ValueError):
    pass


class TooFewPairs(LocutError, ValueError):
    pass


class EmptySet(LocutError, ValueError):
    pass


class SchemaMismatch(LocutError):
    """A serialized artifact has the wrong version or shape."""


class LineageMismatch(LocutError):
    """Input artifacts were produced from different upstream configurations."""
