"""Exception types shared across the toolkit."""


class BolzaError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(BolzaError):
    """Vector or matrix dimensions are inconsistent with the problem data."""


class PropernessViolation(BolzaError):
    """An operation would produce -inf (the problem data is not proper)."""


class InfeasiblePoint(BolzaError):
    """A query point lies outside the effective domain of the function."""


class EmptySetError(BolzaError):
    """Attempted construction of an empty convex set."""


class DegenerateInput(BolzaError):
    """Input has too little finite data to operate on (e.g. < 3 finite nodes)."""


class UnsupportedClass(BolzaError):
    """The operation is not defined for this problem class (e.g. black-box mixed)."""


class SingularInnerMatrix(BolzaError):
    """The Riccati inner matrix R + B'PB is numerically singular."""


class BoundaryNode(BolzaError):
    """Grid query at a boundary node where a two-sided bracket is undefined."""


class ProblemFileError(BolzaError):
    """A problem file failed to parse or validate."""


class GridTooCoarse(UserWarning):
    """Interpolation nonconvexity was detected while building a value table."""
