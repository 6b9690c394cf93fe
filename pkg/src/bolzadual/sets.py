"""Convex set descriptions: whole space, boxes and polyhedra.

Every set is immutable after construction and guaranteed nonempty (building an
empty set raises :class:`EmptySetError`).  All sets expose a common halfspace
view ``{z | C z <= d}`` (zero rows for the whole space), recession-cone and
relative-interior queries, and feasibility helpers backed by HiGHS LPs.
"""

import math
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, EmptySetError
from .tolerances import DEFAULT_TOLS

__all__ = [
    "ConvexSet",
    "WholeSpace",
    "Box",
    "Polyhedron",
    "EmptySet",
    "EMPTY_SET",
    "AffineImageSet",
    "set_from_interval",
]


def _as_vector(v, dim=None, name="vector"):
    a = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    if dim is not None and a.size != dim:
        raise DimensionMismatch(f"{name}: expected length {dim}, got {a.size}")
    return a


def _lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=bounds, method="highs")


class ConvexSet:
    """Base class for closed convex nonempty sets."""

    dim: int

    def contains(self, z, tol=DEFAULT_TOLS.feas) -> bool:
        raise NotImplementedError

    def halfspaces(self):
        """Return (C, d) with the set equal to {z | C z <= d}."""
        raise NotImplementedError

    def recession_halfspaces(self):
        """Rows C with recession cone {z | C z <= 0}."""
        C, _ = self.halfspaces()
        return C

    def is_whole_space(self) -> bool:
        C, _ = self.halfspaces()
        return C.shape[0] == 0

    def is_bounded(self) -> bool:
        C = self.recession_halfspaces()
        if C.shape[0] == 0:
            return False
        n = self.dim
        for i in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[i] = -sign  # linprog minimizes
                res = _lp(c, A_ub=C, b_ub=np.zeros(C.shape[0]),
                          bounds=[(-1.0, 1.0)] * n)
                if res.status != 0 or -res.fun > 1e-9:
                    return False
        return True

    def ri_contains(self, z, tol_ri=DEFAULT_TOLS.ri) -> bool:
        raise NotImplementedError

    def interval(self):
        """For 1-D sets, the (lo, hi) interval hull (exact)."""
        if self.dim != 1:
            raise DimensionMismatch("interval() is only defined for 1-D sets")
        C, d = self.halfspaces()
        lo, hi = -math.inf, math.inf
        for ci, di in zip(C[:, 0], d):
            if ci > 0:
                hi = min(hi, di / ci)
            elif ci < 0:
                lo = max(lo, di / ci)
        return lo, hi

    def bounding_box(self, radius):
        """Per-coordinate bounds of the set intersected with [-radius, radius]."""
        C, d = self.halfspaces()
        lo = np.full(self.dim, -float(radius))
        hi = np.full(self.dim, float(radius))
        for i in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[i] = sign
                res = _lp(c, A_ub=C if C.shape[0] else None,
                          b_ub=d if C.shape[0] else None,
                          bounds=list(zip(lo, hi)))
                if res.status == 0:
                    if sign > 0:
                        lo[i] = res.x[i]
                    else:
                        hi[i] = res.x[i]
        return lo, hi


class WholeSpace(ConvexSet):
    def __init__(self, dim):
        dim = int(dim)
        if dim <= 0:
            raise DimensionMismatch("dimension must be positive")
        self.dim = dim

    def contains(self, z, tol=DEFAULT_TOLS.feas):
        _as_vector(z, self.dim)
        return True

    def halfspaces(self):
        return np.zeros((0, self.dim)), np.zeros(0)

    def ri_contains(self, z, tol_ri=DEFAULT_TOLS.ri):
        _as_vector(z, self.dim)
        return True

    def __repr__(self):
        return f"WholeSpace(dim={self.dim})"


class Box(ConvexSet):
    """Axis-aligned box; -inf/+inf entries mark unbounded sides."""

    def __init__(self, lower, upper):
        lo = _as_vector(lower, name="lower")
        hi = _as_vector(upper, dim=lo.size, name="upper")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise EmptySetError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise EmptySetError("box has lower > upper")
        self.lower = lo
        self.upper = hi
        self.dim = lo.size
        self.lower.setflags(write=False)
        self.upper.setflags(write=False)

    def contains(self, z, tol=DEFAULT_TOLS.feas):
        z = _as_vector(z, self.dim)
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def halfspaces(self):
        rows = []
        rhs = []
        eye = np.eye(self.dim)
        for i in range(self.dim):
            if np.isfinite(self.upper[i]):
                rows.append(eye[i])
                rhs.append(self.upper[i])
            if np.isfinite(self.lower[i]):
                rows.append(-eye[i])
                rhs.append(-self.lower[i])
        if not rows:
            return np.zeros((0, self.dim)), np.zeros(0)
        return np.array(rows), np.array(rhs)

    def ri_contains(self, z, tol_ri=DEFAULT_TOLS.ri):
        z = _as_vector(z, self.dim)
        for i in range(self.dim):
            lo, hi = self.lower[i], self.upper[i]
            if lo == hi:
                if abs(z[i] - lo) > tol_ri:
                    return False
            else:
                if np.isfinite(lo) and z[i] - lo <= tol_ri:
                    return False
                if np.isfinite(hi) and hi - z[i] <= tol_ri:
                    return False
        return True

    def is_bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


class Polyhedron(ConvexSet):
    """General halfspace intersection {z | C z <= d}."""

    def __init__(self, C, d):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        d = _as_vector(d, dim=C.shape[0], name="d")
        if C.shape[0] == 0:
            raise DimensionMismatch("use WholeSpace for a constraint-free set")
        self.C = C
        self.d = d
        self.dim = C.shape[1]
        self.C.setflags(write=False)
        self.d.setflags(write=False)
        res = _lp(np.zeros(self.dim), A_ub=C, b_ub=d,
                  bounds=[(None, None)] * self.dim)
        if res.status == 2:
            raise EmptySetError("polyhedron {Cz <= d} is empty")

    def contains(self, z, tol=DEFAULT_TOLS.feas):
        z = _as_vector(z, self.dim)
        return bool(np.all(self.C @ z - self.d <= tol))

    def halfspaces(self):
        return self.C, self.d

    @cached_property
    def _row_norms(self):
        norms = np.linalg.norm(self.C, axis=1)
        norms[norms == 0] = 1.0
        return norms

    @cached_property
    def implicit_equalities(self):
        """Indices of rows satisfied with equality on the whole set."""
        implicit = []
        for i in range(self.C.shape[0]):
            # maximize slack d_i - C_i z  <=>  minimize C_i z
            res = _lp(self.C[i], A_ub=self.C, b_ub=self.d,
                      bounds=[(None, None)] * self.dim)
            if res.status == 3:  # unbounded slack
                continue
            if res.status == 0:
                slack = (self.d[i] - res.fun) / self._row_norms[i]
                if slack <= DEFAULT_TOLS.ri:
                    implicit.append(i)
        return tuple(implicit)

    def ri_contains(self, z, tol_ri=DEFAULT_TOLS.ri):
        z = _as_vector(z, self.dim)
        slack = (self.d - self.C @ z) / self._row_norms
        implicit = set(self.implicit_equalities)
        for i, s in enumerate(slack):
            if i in implicit:
                if abs(s) > tol_ri:
                    return False
            else:
                if s <= tol_ri:
                    return False
        return True

    def __repr__(self):
        return f"Polyhedron(rows={self.C.shape[0]}, dim={self.dim})"


class EmptySet:
    """Sentinel for an empty feasible-velocity set (not constructible as data)."""

    def contains(self, z, tol=DEFAULT_TOLS.feas):
        return False

    def ri_contains(self, z, tol_ri=DEFAULT_TOLS.ri):
        return False

    def __bool__(self):
        return False

    def __repr__(self):
        return "EmptySet()"


EMPTY_SET = EmptySet()


def set_from_interval(lo, hi):
    if lo == -math.inf and hi == math.inf:
        return WholeSpace(1)
    return Box([lo], [hi])


class AffineImageSet:
    """Image ``{B u + c | u in source, extra(u) <= 0}`` used as a query object.

    Membership and relative-interior membership are decided by LP feasibility
    over the preimage; ``ri`` uses the identity ri(B S + c) = B ri(S) + c.
    """

    def __init__(self, B, c, source, extra_quadratic=None):
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.c = _as_vector(c, dim=self.B.shape[0], name="offset")
        self.source = source
        self.extra_quadratic = extra_quadratic  # (P, q, r) over u, or None
        self.dim = self.B.shape[0]
        if self.B.shape[1] != source.dim:
            raise DimensionMismatch("map width does not match source dimension")

    def _preimage_lp(self, v, strict):
        """Feasibility of B u = v - c over source (ri when strict)."""
        rhs = _as_vector(v, self.dim) - self.c
        C, d = self.source.halfspaces()
        m = self.B.shape[1]
        if strict and C.shape[0]:
            # maximize the minimum normalized slack s, capped at 1
            norms = np.linalg.norm(C, axis=1)
            norms[norms == 0] = 1.0
            implicit = set()
            if isinstance(self.source, Polyhedron):
                implicit = set(self.source.implicit_equalities)
            rows, rhs_ub = [], []
            eq_rows, eq_rhs = [], []
            for i in range(C.shape[0]):
                if i in implicit:
                    eq_rows.append(np.append(C[i], 0.0))
                    eq_rhs.append(d[i])
                else:
                    rows.append(np.append(C[i] / norms[i], 1.0))
                    rhs_ub.append(d[i] / norms[i])
            A_eq = [np.append(row, 0.0) for row in self.B] + eq_rows
            b_eq = list(rhs) + eq_rhs
            A_ub = np.array(rows) if rows else None
            b_ub = np.array(rhs_ub) if rows else None
            res = _lp(np.append(np.zeros(m), -1.0), A_ub=A_ub, b_ub=b_ub,
                      A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                      bounds=[(None, None)] * m + [(None, 1.0)])
            return res.status == 0 and -res.fun > DEFAULT_TOLS.ri
        res = _lp(np.zeros(m), A_ub=C if C.shape[0] else None,
                  b_ub=d if C.shape[0] else None,
                  A_eq=self.B, b_eq=rhs, bounds=[(None, None)] * m)
        return res.status == 0

    def contains(self, v, tol=DEFAULT_TOLS.feas):
        if self.extra_quadratic is not None:
            return self._contains_with_quadratic(v)
        return self._preimage_lp(v, strict=False)

    def ri_contains(self, v, tol_ri=DEFAULT_TOLS.ri):
        return self._preimage_lp(v, strict=True)

    def _contains_with_quadratic(self, v):
        from .qpbackend import solve_qp  # local import to avoid a cycle

        P, q, r = self.extra_quadratic
        rhs = _as_vector(v, self.dim) - self.c
        C, d = self.source.halfspaces()
        m = self.B.shape[1]
        # minimize the quadratic over the affine slice; feasible iff min <= 0
        res = solve_qp(P=P, q=q, A_eq=self.B, b_eq=rhs,
                       C_ub=C if C.shape[0] else None,
                       d_ub=d if C.shape[0] else None, n=m)
        if res.status != "optimal":
            return False
        return res.value + r <= DEFAULT_TOLS.feas

    def concretize(self):
        """Exact Box/Polyhedron form when the map is invertible (or 1-D)."""
        if self.extra_quadratic is not None:
            return self
        if self.dim == 1:
            C, d = self.source.halfspaces()
            lo, hi = -math.inf, math.inf
            m = self.B.shape[1]
            for sign in (1.0, -1.0):
                res = _lp(sign * self.B[0], A_ub=C if C.shape[0] else None,
                          b_ub=d if C.shape[0] else None,
                          bounds=[(None, None)] * m)
                if res.status == 0:
                    if sign > 0:
                        lo = res.fun + self.c[0]
                    else:
                        hi = -res.fun + self.c[0]
                elif res.status != 3:
                    return self
            return set_from_interval(lo, hi)
        B = self.B
        if B.shape[0] == B.shape[1] and abs(np.linalg.det(B)) > 1e-12:
            Binv = np.linalg.inv(B)
            C, d = self.source.halfspaces()
            if C.shape[0] == 0:
                return WholeSpace(self.dim)
            return Polyhedron(C @ Binv, d + C @ Binv @ self.c)
        return self

    def __repr__(self):
        return f"AffineImageSet(dim={self.dim})"
