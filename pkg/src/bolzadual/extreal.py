"""Extended-real convention.

Extended-real values are plain floats where ``math.inf`` encodes +infinity.
Minus infinity is unrepresentable: any operation that would produce it raises
:class:`~bolzadual.errors.PropernessViolation`.  Sums follow the convention
``+inf +/- anything = +inf`` (never NaN).
"""

import math

from .errors import PropernessViolation

INF = math.inf


def as_extreal(x) -> float:
    """Validate ``x`` as an extended-real value (finite or +inf)."""
    v = float(x)
    if math.isnan(v):
        raise PropernessViolation("NaN is not an extended-real value")
    if v == -INF:
        raise PropernessViolation("-inf encountered: data is not proper")
    return v


def ext_sum(*values) -> float:
    """Sum extended reals with the +inf-dominates convention."""
    total = 0.0
    for v in values:
        v = as_extreal(v)
        if v == INF:
            return INF
        total += v
    return as_extreal(total)


def is_finite(x) -> bool:
    return math.isfinite(float(x))
