"""Convex conjugation and the explicit dual problem.

Closed-form conjugates cover the quadratic-plus-indicator class used by the
stage costs; a grid Legendre transform provides the independent oracle route.
Dualization wraps every stage into a conjugate-form stage whose Lagrangian is
the dual Lagrangian evaluated along increments, so the dual problem can be
solved by the same machinery as the primal one.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import qpbackend
from .errors import (DegenerateInput, DimensionMismatch, UnsupportedClass)
from .extreal import INF, ext_sum
from .model import BolzaProblem, StageSpec, TerminalCost
from .sets import Box, ConvexSet, WholeSpace
from .tolerances import DEFAULT_TOLS

__all__ = [
    "conjugate_quadratic", "dual_terminal", "dual_lagrangian_eval",
    "dualize", "DualBolzaProblem", "GridFunction", "grid_conjugate",
    "dual_velocity_feasible", "dual_state_feasible",
]


# ---------------------------------------------------------------------------
# closed-form and QP conjugates
# ---------------------------------------------------------------------------

def conj_interval(q, lo, hi, y):
    """Vectorized sup over x in [lo, hi] of x*y - q*x^2/2 (scalar coordinate)."""
    y = np.asarray(y, dtype=float)
    if q > 0.0:
        xs = np.clip(y / q, lo, hi)
        return xs * y - 0.5 * q * xs * xs
    out = np.zeros_like(y)
    pos = y > 0
    neg = y < 0
    if np.isfinite(hi):
        out[pos] = hi * y[pos]
    else:
        out[pos] = INF
    if np.isfinite(lo):
        out[neg] = lo * y[neg]
    else:
        out[neg] = INF
    return out


def _is_diagonal(M):
    return np.max(np.abs(M - np.diag(np.diag(M)))) <= 1e-14 * (1.0 + np.max(np.abs(M)))


def _conjugate_infrep_band(Q, C, d, y, snap, tols):
    """Conjugate value through its inf-representation with a tolerance band.

    ``sup_{Cx<=d} x.y - |x|_Q^2/2 = min { |mu|_Q^2/2 + d.s : Q mu + C's = y,
    s >= 0 }``; relaxing the equality to a band of width ``snap`` decides
    domain membership within tolerance and evaluates at the nearest
    representable argument.
    """
    n = Q.shape[0]
    k = C.shape[0]
    nv = n + k
    P = np.zeros((nv, nv))
    P[:n, :n] = Q
    q = np.concatenate([np.zeros(n), d])
    M = np.hstack([Q, C.T]) if k else Q
    rows = [np.vstack([M, -M])]
    rhs = [np.concatenate([y + snap, snap - y])]
    if k:
        blk = np.zeros((k, nv))
        blk[:, n:] = -np.eye(k)
        rows.append(blk)
        rhs.append(np.zeros(k))
    res = qpbackend.solve_qp(P=P, q=q, C_ub=np.vstack(rows),
                             d_ub=np.concatenate(rhs), n=nv, tols=tols)
    if res.status == qpbackend.OPTIMAL:
        return float(res.value)
    return INF


def conjugate_quadratic(Q, set_: ConvexSet, y, tols=DEFAULT_TOLS):
    """sup over x in the set of ``x.y - 1/2 x'Qx`` (extended real).

    Whole-space and diagonal-over-box cases are closed form; everything else
    runs a concave QP.  Finite values are exact; +inf is reported only when
    y sits further than the feasibility tolerance from the conjugate's
    effective domain, so multiplier noise from solved arcs cannot flip
    finite values to +inf along flat directions.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = set_.dim
    if Q.shape != (n, n) or y.size != n:
        raise DimensionMismatch("conjugate_quadratic: inconsistent shapes")
    snap = tols.feas * (1.0 + float(np.max(np.abs(y), initial=0.0)))

    if isinstance(set_, WholeSpace):
        if np.max(np.abs(Q)) == 0.0:
            return 0.0 if np.max(np.abs(y), initial=0.0) <= snap else INF
        xhat, *_ = np.linalg.lstsq(Q, y, rcond=None)
        if np.max(np.abs(Q @ xhat - y)) > snap:
            return INF
        return float(0.5 * xhat @ y)

    if isinstance(set_, Box) and _is_diagonal(Q):
        qd = np.diag(Q)

        def total_for(vec):
            acc = 0.0
            for i in range(n):
                val = conj_interval(qd[i], set_.lower[i], set_.upper[i],
                                    np.array([vec[i]]))[0]
                if val == INF:
                    return INF
                acc += val
            return float(acc)

        exact = total_for(y)
        if exact != INF:
            return exact
        snapped = np.where((qd <= tols.zero) & (np.abs(y) <= snap), 0.0, y)
        return total_for(snapped)

    C, d = set_.halfspaces()
    res = qpbackend.solve_qp(P=Q, q=-y, C_ub=C if C.shape[0] else None,
                             d_ub=d if C.shape[0] else None, n=n, tols=tols)
    if res.status == qpbackend.OPTIMAL:
        return float(-res.value)
    if res.status == qpbackend.UNBOUNDED:
        return _conjugate_infrep_band(Q, C, d, y, snap, tols)
    raise UnsupportedClass(f"conjugate QP ended with status {res.status}")


def dual_terminal(problem, b, tols=DEFAULT_TOLS):
    """Dual terminal cost: the conjugate of g evaluated at -b."""
    term = problem.terminal
    b = np.asarray(b, dtype=float).ravel()
    return conjugate_quadratic(term.Qf, term.set, -b, tols)


# ---------------------------------------------------------------------------
# dual Lagrangian
# ---------------------------------------------------------------------------

def _k_of_stage(stage: StageSpec, p, w, tols=DEFAULT_TOLS):
    """Dual Lagrangian of one stage: the joint conjugate of its Lagrangian.

    For the structured class it splits into a state conjugate at A'p + w, a
    control conjugate at B'p, and the drift term phi.p.
    """
    p = np.asarray(p, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if p.size != stage.n or w.size != stage.n:
        raise DimensionMismatch("dual lagrangian arguments must be n-vectors")
    if stage.mixed is None:
        cx = stage.A.T @ p + w
        cu = stage.B.T @ p
        return ext_sum(conjugate_quadratic(stage.Q, stage.state_set, cx, tols),
                       conjugate_quadratic(stage.R, stage.control_set, cu, tols),
                       float(stage.phi @ p))
    return _k_of_mixed_stage(stage, p, w, tols)


def _k_of_mixed_stage(stage, p, w, tols):
    """Direct concave maximization over the mixed feasible region."""
    if not stage.mixed.is_quadratic():
        return _k_of_callable_stage(stage, p, w, tols)
    n, m = stage.n, stage.m
    nm = n + m
    Pl, ql, rl = (stage.mixed.running_cost.P, stage.mixed.running_cost.q,
                  stage.mixed.running_cost.r)
    Pf, qf, rf = (stage.mixed.constraint.P, stage.mixed.constraint.q,
                  stage.mixed.constraint.r)
    # objective to maximize: c.z - 1/2 z'Hz - ql.z - rl with
    H = np.zeros((nm, nm))
    H[:n, :n] = stage.Q
    H[n:, n:] = stage.R
    H = H + Pl
    c = np.concatenate([stage.A.T @ p + w, stage.B.T @ p])
    Cx, dx = stage.state_set.halfspaces()
    Cu, du = stage.control_set.halfspaces()
    rows = []
    rhs = []
    if Cx.shape[0]:
        rows.append(np.hstack([Cx, np.zeros((Cx.shape[0], m))]))
        rhs.append(dx)
    if Cu.shape[0]:
        rows.append(np.hstack([np.zeros((Cu.shape[0], n)), Cu]))
        rhs.append(du)
    C = np.vstack(rows) if rows else np.zeros((0, nm))
    d = np.concatenate(rhs) if rhs else np.zeros(0)
    # unboundedness along recession directions of the feasible region
    Fk = qpbackend.factor_psd(Pf)
    ker_rows = np.vstack([H, Fk]) if Fk.shape[0] else H
    res = linprog(-(c - ql),
                  A_ub=np.vstack([C, qf[None, :]]) if C.shape[0] else qf[None, :],
                  b_ub=np.concatenate([np.zeros(C.shape[0]), [0.0]]),
                  A_eq=ker_rows, b_eq=np.zeros(ker_rows.shape[0]),
                  bounds=[(-1.0, 1.0)] * nm, method="highs")
    if res.status == 0 and -res.fun > tols.num * (1.0 + np.max(np.abs(c))):
        return INF
    socs = [qpbackend.soc_rows_from_quadratic(Pf, qf, rf)]
    qp = qpbackend.solve_qp(P=H, q=ql - c, C_ub=C if C.shape[0] else None,
                            d_ub=d if C.shape[0] else None, socs=socs,
                            n=nm, tols=tols)
    if qp.status == qpbackend.UNBOUNDED:
        return INF
    if qp.status == qpbackend.INFEASIBLE:
        # empty mixed region cannot happen for valid problems; be defensive
        return INF
    return float(-(qp.value + rl)) + float(stage.phi @ p)


def _k_of_callable_stage(stage, p, w, tols, budget=2048):
    """Sampled concave maximization for black-box mixed terms.

    Finiteness can only be probed; growth across expanding radii reports
    +inf, otherwise the best sampled/polished value is returned.
    """
    from scipy.optimize import minimize

    n, m = stage.n, stage.m
    c = np.concatenate([stage.A.T @ p + w, stage.B.T @ p])

    def neg_obj(z):
        x, u = z[:n], z[n:]
        val = c @ z - 0.5 * x @ (stage.Q @ x) - 0.5 * u @ (stage.R @ u)
        val -= stage.mixed.running_cost(z)
        return -val

    Cx, dx = stage.state_set.halfspaces()
    Cu, du = stage.control_set.halfspaces()
    cons = [{"type": "ineq", "fun": lambda z: -stage.mixed.constraint(z)}]
    if Cx.shape[0]:
        cons.append({"type": "ineq", "fun": lambda z: dx - Cx @ z[:n]})
    if Cu.shape[0]:
        cons.append({"type": "ineq", "fun": lambda z: du - Cu @ z[n:]})
    rng = np.random.default_rng(0)
    best = None
    values_by_radius = []
    for radius in (1.0, 4.0, 16.0):
        vals = []
        for _ in range(budget // 3):
            z = rng.uniform(-radius, radius, size=n + m)
            if stage.mixed.constraint(z) <= 0 and \
               stage.state_set.contains(z[:n]) and stage.control_set.contains(z[n:]):
                vals.append(-neg_obj(z))
        if vals:
            values_by_radius.append(max(vals))
    if len(values_by_radius) >= 2 and \
            values_by_radius[-1] > values_by_radius[0] + 10.0 * (1.0 + abs(values_by_radius[0])):
        return INF
    start = np.zeros(n + m)
    res = minimize(neg_obj, start, method="SLSQP", constraints=cons,
                   options={"maxiter": 300, "ftol": 1e-12})
    if res.success:
        best = -res.fun
    elif values_by_radius:
        best = values_by_radius[-1]
    else:
        raise UnsupportedClass("could not evaluate the mixed dual Lagrangian")
    return float(best) + float(stage.phi @ p)


def dual_lagrangian_eval(problem, t, p, w, tols=DEFAULT_TOLS):
    """Dual Lagrangian K_t(p, w) = sup {x.w + v.p - L_t(x, v)}."""
    if isinstance(problem, BolzaProblem):
        return _k_of_stage(problem.stage(t), p, w, tols)
    if isinstance(problem, DualBolzaProblem):
        return _numeric_joint_conjugate(problem.stage_lagrangian_fn(t),
                                        problem.state_dim, p, w)
    raise UnsupportedClass("unknown problem type")


# ---------------------------------------------------------------------------
# the dual problem as a Bolza problem
# ---------------------------------------------------------------------------

class DualStage:
    """Conjugate-form stage: Lagrangian (p, w) -> K_src(p + w, w)."""

    def __init__(self, source: StageSpec, tols=DEFAULT_TOLS):
        self.source = source
        self.n = source.n
        self._tols = tols

    def lagrangian(self, p, w):
        p = np.asarray(p, dtype=float).ravel()
        w = np.asarray(w, dtype=float).ravel()
        return _k_of_stage(self.source, p + w, w, self._tols)


class DualTerminal:
    """Dual terminal cost b -> g*(-b)."""

    def __init__(self, source: TerminalCost, tols=DEFAULT_TOLS):
        self.source = source
        self.n = source.n
        self._tols = tols

    def value(self, b):
        return conjugate_quadratic(self.source.Qf, self.source.set,
                                   -np.asarray(b, dtype=float).ravel(),
                                   self._tols)


class DualBolzaProblem:
    """The dual problem written in primal (Bolza) form.

    Its primal value function from initial costate ``-eta`` is the dual value
    of the source problem at ``eta``; dualizing again recovers the source
    Lagrangian values.
    """

    dualized = True

    def __init__(self, source: BolzaProblem, tols=DEFAULT_TOLS):
        self.source = source
        self.stages = tuple(DualStage(s, tols) for s in source.stages)
        self.terminal = DualTerminal(source.terminal, tols)
        self.horizon = source.horizon
        self.state_dim = source.state_dim

    def stage(self, t) -> DualStage:
        if not 0 <= t < self.horizon:
            raise DimensionMismatch(f"stage index {t} outside [0, {self.horizon - 1}]")
        return self.stages[t]

    def stage_lagrangian_fn(self, t):
        st = self.stage(t)
        return lambda p, w: st.lagrangian(p, w)

    def __repr__(self):
        return f"DualBolzaProblem(T={self.horizon}, n={self.state_dim})"


class DoubleDualProblem:
    """Numerically re-dualized problem; evaluation-only, oracle dimensions."""

    dualized = True

    def __init__(self, source: DualBolzaProblem):
        self.source = source
        self.horizon = source.horizon
        self.state_dim = source.state_dim

    def stage_lagrangian(self, t, x, v):
        x = np.asarray(x, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        fn = self.source.stage_lagrangian_fn(t)
        k2 = _numeric_joint_conjugate(fn, self.state_dim, x + v, v)
        return k2

    def terminal_value(self, b):
        b = np.asarray(b, dtype=float).ravel()
        fsrc = self.source.terminal

        def neg(p):
            return fsrc.value(p) + float(p @ b)

        return -_numeric_min(neg, self.state_dim)


def _numeric_min(fn, dim):
    """Unconstrained smooth minimization used by the re-dualization path."""
    from scipy.optimize import minimize

    best = None
    for scale in (0.0, 1.0, -1.0):
        x0 = np.full(dim, scale)
        res = minimize(fn, x0, method="BFGS",
                       options={"gtol": 1e-12, "maxiter": 500})
        val = float(res.fun)
        if best is None or val < best:
            best = val
    return best


def _numeric_joint_conjugate(lag_fn, n, first, second):
    """sup over (a, b) of a.second_pair + ... for the generic stage conjugate.

    Computes K(first, second) = sup_{a,b} { a.second + b.first - L(a, b) }
    for an arbitrary smooth stage Lagrangian L given as a callable.
    """
    first = np.asarray(first, dtype=float).ravel()
    second = np.asarray(second, dtype=float).ravel()

    def neg(z):
        a, b = z[:n], z[n:]
        val = lag_fn(a, b)
        if not math.isfinite(val):
            return 1e30 + float(z @ z)
        return val - float(a @ second) - float(b @ first)

    return -_numeric_min(neg, 2 * n)


def dualize(problem, tols=DEFAULT_TOLS):
    """Rewrite the dual problem in primal form (twice: back to the source)."""
    if isinstance(problem, BolzaProblem):
        return DualBolzaProblem(problem, tols)
    if isinstance(problem, DualBolzaProblem):
        return DoubleDualProblem(problem)
    raise UnsupportedClass("cannot dualize this problem type")


# ---------------------------------------------------------------------------
# dual feasibility: velocity membership and state-set membership
# ---------------------------------------------------------------------------

def _cone_condition_holds(rec_rows, kernel_mat, c, tols):
    """True if x.c <= 0 for every x with rec_rows x <= 0 and kernel_mat x = 0."""
    n = c.size
    A_eq = kernel_mat if np.max(np.abs(kernel_mat)) > 0 else None
    res = linprog(-c, A_ub=rec_rows if rec_rows.shape[0] else None,
                  b_ub=np.zeros(rec_rows.shape[0]) if rec_rows.shape[0] else None,
                  A_eq=A_eq, b_eq=np.zeros(A_eq.shape[0]) if A_eq is not None else None,
                  bounds=[(-1.0, 1.0)] * n, method="highs")
    return res.status == 0 and -res.fun <= tols.num * (1.0 + float(np.max(np.abs(c))))


def dual_velocity_feasible(problem, t, p, w, tols=DEFAULT_TOLS):
    """Whether w is a finite-cost dual increment from costate p at stage t.

    Decided through the recession/kernel inequalities of the structured
    class; mixed stages fall back to direct finiteness of the dual
    Lagrangian (None when a black-box term leaves it undecided).
    """
    stage = problem.stage(t)
    p = np.asarray(p, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if stage.mixed is not None:
        if not stage.mixed.is_quadratic():
            try:
                val = _k_of_stage(stage, p + w, w, tols)
            except UnsupportedClass:
                return None
            return bool(math.isfinite(val))
        return bool(math.isfinite(_k_of_stage(stage, p + w, w, tols)))
    cx = stage.A.T @ (p + w) + w
    cu = stage.B.T @ (p + w)
    ok_x = _cone_condition_holds(stage.state_set.recession_halfspaces(),
                                 stage.Q, cx, tols)
    ok_u = _cone_condition_holds(stage.control_set.recession_halfspaces(),
                                 stage.R, cu, tols)
    return ok_x and ok_u


def dual_state_feasible(problem, t, p, tols=DEFAULT_TOLS):
    """Whether some dual increment is feasible from costate p at stage t.

    For the structured class this is an LP over (w, polar-cone multipliers);
    mixed quadratic stages probe finiteness at a deterministic sample of w.
    """
    stage = problem.stage(t)
    p = np.asarray(p, dtype=float).ravel()
    n, m = stage.n, stage.m
    if stage.mixed is not None:
        probes = [np.zeros(n), -p, -stage.A.T @ p]
        rng = np.random.default_rng(0)
        probes += [rng.standard_normal(n) for _ in range(8)]
        found_undecided = False
        for w in probes:
            ok = dual_velocity_feasible(problem, t, p, w, tols)
            if ok:
                return True
            if ok is None:
                found_undecided = True
        return None if found_undecided else False
    Cx = stage.state_set.recession_halfspaces()
    Cu = stage.control_set.recession_halfspaces()
    kx, ku = Cx.shape[0], Cu.shape[0]
    # A'p + (A'+I)w must lie in the polar cone {Cx'y + Q'z : y >= 0}
    # B'(p + w)    must lie in the polar cone {Cu'y + R'z : y >= 0}
    nvar = n + kx + n + ku + m
    A_eq = np.zeros((n + m, nvar))
    b_eq = np.zeros(n + m)
    A_eq[:n, :n] = stage.A.T + np.eye(n)
    A_eq[:n, n:n + kx] = -Cx.T
    A_eq[:n, n + kx:n + kx + n] = -stage.Q.T
    b_eq[:n] = -stage.A.T @ p
    off = n + kx + n
    A_eq[n:, :n] = stage.B.T
    A_eq[n:, off:off + ku] = -Cu.T
    A_eq[n:, off + ku:] = -stage.R.T
    b_eq[n:] = -stage.B.T @ p
    bounds = ([(None, None)] * n + [(0, None)] * kx + [(None, None)] * n
              + [(0, None)] * ku + [(None, None)] * m)
    res = linprog(np.zeros(nvar), A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    return res.status == 0


# ---------------------------------------------------------------------------
# grid functions and the discrete Legendre transform
# ---------------------------------------------------------------------------

class GridFunction:
    """Extended-real convex function sampled on a uniform grid (dim 1 or 2)."""

    def __init__(self, axes, values, validate=True, tols=DEFAULT_TOLS):
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = (axes,)
        self.axes = tuple(np.asarray(a, dtype=float).ravel() for a in axes)
        self.dim = len(self.axes)
        if self.dim not in (1, 2):
            raise DimensionMismatch("grid functions support dim 1 or 2 only")
        values = np.asarray(values, dtype=float)
        expected = tuple(a.size for a in self.axes)
        if values.shape != expected:
            raise DimensionMismatch(f"values shape {values.shape} != {expected}")
        self.values = values
        for a in self.axes:
            if a.size < 2:
                raise DegenerateInput("each axis needs at least 2 nodes")
            steps = np.diff(a)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * (1.0 + abs(steps[0])):
                raise DimensionMismatch("grid axes must be uniform")
        if validate:
            self._validate(tols)

    def _validate(self, tols):
        finite = np.isfinite(self.values)
        if int(np.count_nonzero(finite)) < 3:
            raise DegenerateInput("grid function needs at least 3 finite nodes")
        scale = 1.0 + float(np.max(np.abs(self.values[finite])))
        for line in self._lines():
            v = line[np.isfinite(line)]
            if v.size >= 3:
                d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
                if np.min(d2) < -tols.grid * scale:
                    raise DegenerateInput("grid values are not convex along a line")

    def _lines(self):
        if self.dim == 1:
            yield self.values
        else:
            for j in range(self.values.shape[1]):
                yield self.values[:, j]
            for i in range(self.values.shape[0]):
                yield self.values[i, :]

    @property
    def spacing(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    def finite_count(self):
        return int(np.count_nonzero(np.isfinite(self.values)))

    def node_index(self, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for a, x in zip(self.axes, point):
            i = int(round((x - a[0]) / (a[1] - a[0])))
            if not 0 <= i < a.size or abs(a[i] - x) > 1e-9 * (1 + abs(x)):
                raise DimensionMismatch(f"{x} is not a grid node")
            idx.append(i)
        return tuple(idx)

    def interp(self, point):
        """Inf-aware linear interpolation at an interior point."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if self.dim == 1:
            a = self.axes[0]
            x = float(point[0])
            if x < a[0] or x > a[-1]:
                return INF
            f = np.interp(x, a, self.values)
            return float(f)
        raise UnsupportedClass("interpolation implemented for dim 1 only")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            cols = [f"x{k}" for k in range(self.dim)] + ["value", "is_finite"]
            fh.write(",".join(cols) + "\n")
            it = np.ndindex(*self.values.shape)
            for idx in it:
                coords = [format(self.axes[k][idx[k]], ".17g")
                          for k in range(self.dim)]
                val = self.values[idx]
                fin = 1 if math.isfinite(val) else 0
                sval = format(val, ".17g") if fin else "inf"
                fh.write(",".join(coords + [sval, str(fin)]) + "\n")


def _discrete_conjugate_1d(x, f, y, tols):
    """max_i x_i y - f_i for convex samples; ties break to smaller abscissa."""
    finite = np.isfinite(f)
    if not np.any(finite):
        return np.full(y.shape, -INF)
    idx = np.flatnonzero(finite)
    i0, i1 = idx[0], idx[-1]
    if np.any(~finite[i0:i1 + 1]):
        # convex domains are intervals; guard against stray interior infs
        sub = np.flatnonzero(finite[i0:i1 + 1])
        xs = x[i0:i1 + 1][sub]
        fs = f[i0:i1 + 1][sub]
    else:
        xs = x[i0:i1 + 1]
        fs = f[i0:i1 + 1]
    if xs.size == 1:
        return xs[0] * y - fs[0]
    slopes = np.diff(fs) / np.diff(xs)
    slopes = np.maximum.accumulate(slopes)
    pos = np.searchsorted(slopes, y, side="left")
    return xs[pos] * y - fs[pos]


def _slope_range(x, f):
    finite = np.isfinite(f)
    idx = np.flatnonzero(finite)
    if idx.size < 2:
        return 0.0, 0.0
    xs, fs = x[idx], f[idx]
    slopes = np.diff(fs) / np.diff(xs)
    return float(np.min(slopes)), float(np.max(slopes))


def _padded_axis(smin, smax, count):
    span = smax - smin
    pad = 0.1 * span if span > 0 else max(0.1 * max(abs(smin), 1.0), 0.1)
    return np.linspace(smin - pad, smax + pad, count)


def grid_conjugate(gf: GridFunction, out_axes=None, tols=DEFAULT_TOLS):
    """Discrete Legendre transform of a convex grid function.

    Output nodes default to the sampled slope range widened by 10%; pass
    ``out_axes`` to evaluate the transform on explicit axes instead.
    """
    if gf.finite_count() < 3:
        raise DegenerateInput("need at least 3 finite nodes to conjugate")
    if gf.dim == 1:
        x = gf.axes[0]
        f = gf.values
        if out_axes is None:
            smin, smax = _slope_range(x, f)
            y = _padded_axis(smin, smax, x.size)
        else:
            y = np.asarray(out_axes[0] if isinstance(out_axes, (tuple, list))
                           else out_axes, dtype=float).ravel()
        vals = _discrete_conjugate_1d(x, f, y, tols)
        return GridFunction((y,), vals, validate=False)

    x1, x2 = gf.axes
    if out_axes is None:
        s1 = [INF, -INF]
        s2 = [INF, -INF]
        for j in range(x2.size):
            lo, hi = _slope_range(x1, gf.values[:, j])
            if np.isfinite(gf.values[:, j]).sum() >= 2:
                s1 = [min(s1[0], lo), max(s1[1], hi)]
        for i in range(x1.size):
            lo, hi = _slope_range(x2, gf.values[i, :])
            if np.isfinite(gf.values[i, :]).sum() >= 2:
                s2 = [min(s2[0], lo), max(s2[1], hi)]
        y1 = _padded_axis(s1[0], s1[1], x1.size)
        y2 = _padded_axis(s2[0], s2[1], x2.size)
    else:
        y1 = np.asarray(out_axes[0], dtype=float).ravel()
        y2 = np.asarray(out_axes[1], dtype=float).ravel()

    # pass 1: conjugate along axis 1 for each x2 slice
    h = np.full((y1.size, x2.size), -INF)
    for j in range(x2.size):
        col = gf.values[:, j]
        if np.any(np.isfinite(col)):
            h[:, j] = _discrete_conjugate_1d(x1, col, y1, tols)
    # pass 2: conjugate the convex function x2 -> -h(y1, x2) along axis 2
    out = np.full((y1.size, y2.size), -INF)
    for i in range(y1.size):
        q = np.where(h[i, :] > -INF, -h[i, :], INF)
        if np.any(np.isfinite(q)):
            out[i, :] = _discrete_conjugate_1d(x2, q, y2, tols)
    out = np.where(out == -INF, INF, out)
    return GridFunction((y1, y2), out, validate=False)
