"""Problem data model and extended-real Lagrangian evaluation.

Stage indexing convention
-------------------------
A problem with horizon ``T`` has stages ``0 .. T-1``.  Stage ``t`` stores the
transition data of the step ``x_t -> x_{t+1}``:

* dynamics increment  ``x_{t+1} - x_t = A_t x_t + B_t u_t + phi_t``,
* the quadratic cost ``1/2 x_t' Q_t x_t`` acting on the *incoming* state,
* the control cost ``1/2 u_t' R_t u_t`` and control set, and
* the state set containing ``x_t``.

The terminal state ``x_T`` is charged ``1/2 x_T' Qf x_T`` plus the indicator
of the terminal set.  The classic regulator objective (no cost on the initial
state) is recovered by setting stage 0's ``Q`` to zero.

The stage Lagrangian of stage ``t`` in state ``x`` and increment ``v`` is

    L_t(x, v) = 1/2 |x|_Q^2 + delta_X(x)
                + inf { 1/2 |u|_R^2 + cost(x,u) :
                        u in U, v = A x + B u + phi, f(x,u) <= 0 }

with the mixed-constraint parts present only when the stage carries them.
Values are extended reals (+inf encodes infeasibility); an inner infimum that
is unbounded below raises :class:`PropernessViolation`.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import qpbackend
from .errors import (DimensionMismatch, InfeasiblePoint, PropernessViolation,
                     UnsupportedClass)
from .extreal import INF
from .sets import EMPTY_SET, AffineImageSet, ConvexSet
from .tolerances import DEFAULT_TOLS

__all__ = [
    "QuadraticAffine", "CallableFn", "MixedConstraintSpec", "StageSpec",
    "TerminalCost", "BolzaProblem", "lagrangian_eval", "lagrangian_minimizer",
    "lagrangian_subgrad", "feasible_velocity_set", "terminal_eval",
    "terminal_subgrad", "LagrangianSubgradient",
]


def _check_psd(M, name, tol=DEFAULT_TOLS.psd):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square")
    if np.max(np.abs(M - M.T)) > 1e-9 * (1.0 + np.max(np.abs(M))):
        raise DimensionMismatch(f"{name} must be symmetric")
    M = 0.5 * (M + M.T)
    if M.shape[0] and np.min(np.linalg.eigvalsh(M)) < -tol:
        raise DimensionMismatch(f"{name} must be positive semidefinite")
    M.setflags(write=False)
    return M


def _vec(v, dim, name):
    a = np.asarray(v, dtype=float).ravel()
    if a.size != dim:
        raise DimensionMismatch(f"{name}: expected length {dim}, got {a.size}")
    return a


@dataclass(frozen=True)
class QuadraticAffine:
    """Convex quadratic ``z -> 1/2 z'Pz + q.z + r`` over stacked (x, u)."""

    P: np.ndarray
    q: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "P", _check_psd(self.P, "quadratic matrix"))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).ravel())
        if self.q.size != self.P.shape[0]:
            raise DimensionMismatch("quadratic linear term has wrong length")
        self.q.setflags(write=False)

    @property
    def dim(self):
        return self.q.size

    def __call__(self, z):
        z = _vec(z, self.dim, "quadratic argument")
        return float(0.5 * z @ (self.P @ z) + self.q @ z + self.r)

    def grad(self, z):
        z = _vec(z, self.dim, "quadratic argument")
        return self.P @ z + self.q

    def split(self, n):
        """Blocks (Pxx, Pxu, Puu, qx, qu) for z = (x, u) with |x| = n."""
        return (self.P[:n, :n], self.P[:n, n:], self.P[n:, n:],
                self.q[:n], self.q[n:])


@dataclass(frozen=True)
class CallableFn:
    """Black-box convex evaluator (x, u) -> real, usable only at n+m <= 4."""

    fn: callable

    def __call__(self, z):
        return float(self.fn(np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class MixedConstraintSpec:
    """Joint state-control constraint f(x,u) <= 0 and running cost l(x,u)."""

    constraint: object      # QuadraticAffine | CallableFn
    running_cost: object    # QuadraticAffine | CallableFn

    def is_quadratic(self):
        return (isinstance(self.constraint, QuadraticAffine)
                and isinstance(self.running_cost, QuadraticAffine))


class StageSpec:
    """Immutable data of one transition stage."""

    def __init__(self, A, B, phi, Q, R, state_set: ConvexSet,
                 control_set: ConvexSet, mixed: MixedConstraintSpec = None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.B.shape[0] != n:
            raise DimensionMismatch("B must have n rows")
        m = self.B.shape[1]
        self.phi = _vec(phi, n, "phi")
        self.Q = _check_psd(Q, "Q")
        self.R = _check_psd(R, "R")
        if self.Q.shape[0] != n or self.R.shape[0] != m:
            raise DimensionMismatch("Q/R dimensions inconsistent with A/B")
        if state_set.dim != n or control_set.dim != m:
            raise DimensionMismatch("set dimensions inconsistent with A/B")
        if mixed is not None:
            for part in (mixed.constraint, mixed.running_cost):
                if isinstance(part, QuadraticAffine) and part.dim != n + m:
                    raise DimensionMismatch("mixed term must act on (x, u)")
                if isinstance(part, CallableFn) and n + m > 4:
                    raise UnsupportedClass("callable mixed terms only for n+m <= 4")
        self.state_set = state_set
        self.control_set = control_set
        self.mixed = mixed
        self.n = n
        self.m = m
        for arr in (self.A, self.B, self.phi):
            arr.setflags(write=False)

    def is_lq(self):
        return self.mixed is None

    def __repr__(self):
        return f"StageSpec(n={self.n}, m={self.m}, mixed={self.mixed is not None})"


class TerminalCost:
    """g(x) = 1/2 x'Qf x + indicator of the terminal set."""

    def __init__(self, Qf, set_: ConvexSet):
        self.Qf = _check_psd(Qf, "Qf")
        if set_.dim != self.Qf.shape[0]:
            raise DimensionMismatch("terminal set dimension mismatch")
        self.set = set_
        self.n = self.Qf.shape[0]


class BolzaProblem:
    """Discrete-time convex Bolza problem over stages 0 .. T-1."""

    def __init__(self, stages, terminal: TerminalCost):
        stages = list(stages)
        if not stages:
            raise DimensionMismatch("at least one stage is required")
        n = stages[0].n
        m = stages[0].m
        for s in stages:
            if s.n != n or s.m != m:
                raise DimensionMismatch("all stages must share dimensions")
        if terminal.n != n:
            raise DimensionMismatch("terminal cost dimension mismatch")
        self.stages = tuple(stages)
        self.terminal = terminal
        self.horizon = len(stages)
        self.state_dim = n
        self.control_dim = m

    def stage(self, t) -> StageSpec:
        if not 0 <= t < self.horizon:
            raise DimensionMismatch(f"stage index {t} outside [0, {self.horizon - 1}]")
        return self.stages[t]

    def is_lq(self):
        return all(s.is_lq() for s in self.stages)

    def __repr__(self):
        return (f"BolzaProblem(T={self.horizon}, n={self.state_dim}, "
                f"m={self.control_dim})")


@dataclass
class _InnerSolution:
    value: float
    u: np.ndarray = None
    nu: np.ndarray = None        # multiplier of B u = v - A x - phi
    mu_f: float = 0.0            # multiplier of the mixed constraint
    z_control: np.ndarray = None  # multipliers of the control-set rows


def _inner_control_problem(stage: StageSpec, x, v, tols=DEFAULT_TOLS):
    """Solve inf over u of the stage control cost at fixed (x, v)."""
    r = _vec(v, stage.n, "v") - (stage.A @ x + stage.phi)
    C, d = stage.control_set.halfspaces()
    m = stage.m

    if stage.mixed is not None and not stage.mixed.is_quadratic():
        return _inner_control_callable(stage, x, r)

    P = stage.R.copy()
    q = np.zeros(m)
    const = 0.0
    socs = []
    if stage.mixed is not None:
        Pxx, Pxu, Puu, qx, qu = stage.mixed.running_cost.split(stage.n)
        P = P + Puu
        q = q + qu + Pxu.T @ x
        const += float(0.5 * x @ (Pxx @ x) + qx @ x + stage.mixed.running_cost.r)
        Fxx, Fxu, Fuu, fqx, fqu = stage.mixed.constraint.split(stage.n)
        f_const = float(0.5 * x @ (Fxx @ x) + fqx @ x + stage.mixed.constraint.r)
        f_lin = fqu + Fxu.T @ x
        if np.max(np.abs(Fuu)) < tols.zero:
            if np.max(np.abs(f_lin)) < tols.zero:
                if f_const > tols.feas:
                    return _InnerSolution(value=INF)
            else:
                C = np.vstack([C, f_lin[None, :]]) if C.shape[0] else f_lin[None, :]
                d = np.append(d, -f_const)
        else:
            socs.append(qpbackend.soc_rows_from_quadratic(Fuu, f_lin, f_const))

    feasible, _ = qpbackend.lp_feasible(A_eq=stage.B, b_eq=r,
                                        C_ub=C if C.shape[0] else None,
                                        d_ub=d if C.shape[0] else None, n=m)
    if not feasible:
        return _InnerSolution(value=INF)
    res = qpbackend.solve_qp(P=P, q=q, A_eq=stage.B, b_eq=r,
                             C_ub=C if C.shape[0] else None,
                             d_ub=d if C.shape[0] else None,
                             socs=socs, n=m, tols=tols)
    if res.status == qpbackend.UNBOUNDED:
        raise PropernessViolation(
            "inner control problem unbounded below; qualification fails")
    if res.status == qpbackend.INFEASIBLE:
        return _InnerSolution(value=INF)
    mu_f = 0.0
    if socs and res.z_soc:
        # SOC dual (z0, ..., zk): the quadratic-constraint multiplier
        mu_f = 2.0 * float(res.z_soc[0][0] + res.z_soc[0][-1])
    # the equality is written B u = r, so the Lagrangian-convention
    # multiplier (R u + ... = B' nu) is the negated backend dual
    return _InnerSolution(value=res.value + const, u=res.x, nu=-res.y_eq,
                          mu_f=mu_f, z_control=res.z_ub)


def _inner_control_callable(stage, x, r):
    """scipy fallback for black-box mixed terms (oracle dimensions only)."""
    from scipy.optimize import minimize

    m = stage.m
    C, d = stage.control_set.halfspaces()

    def obj(u):
        val = 0.5 * u @ (stage.R @ u)
        val += stage.mixed.running_cost(np.concatenate([x, u]))
        return val

    cons = [{"type": "eq", "fun": lambda u: stage.B @ u - r}]
    if C.shape[0]:
        cons.append({"type": "ineq", "fun": lambda u: d - C @ u})
    cons.append({"type": "ineq",
                 "fun": lambda u: -stage.mixed.constraint(np.concatenate([x, u]))})
    best = None
    for u0 in (np.zeros(m), np.linalg.lstsq(stage.B, r, rcond=None)[0]):
        res = minimize(obj, u0, method="SLSQP", constraints=cons,
                       options={"maxiter": 200, "ftol": 1e-12})
        if res.success and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        return _InnerSolution(value=INF)
    return _InnerSolution(value=float(best.fun), u=best.x, nu=None)


def lagrangian_eval(problem: BolzaProblem, t, x, v, tols=DEFAULT_TOLS):
    """Extended-real stage Lagrangian L_t(x, v)."""
    stage = problem.stage(t)
    x = _vec(x, stage.n, "x")
    v = _vec(v, stage.n, "v")
    if not stage.state_set.contains(x, tols.feas):
        return INF
    inner = _inner_control_problem(stage, x, v, tols)
    if inner.value == INF:
        return INF
    return float(0.5 * x @ (stage.Q @ x)) + inner.value


def lagrangian_minimizer(problem, t, x, v, tols=DEFAULT_TOLS):
    """The control attaining the inner infimum of L_t(x, v)."""
    stage = problem.stage(t)
    x = _vec(x, stage.n, "x")
    v = _vec(v, stage.n, "v")
    if not stage.state_set.contains(x, tols.feas):
        raise InfeasiblePoint("x outside the stage state set")
    inner = _inner_control_problem(stage, x, v, tols)
    if inner.value == INF:
        raise InfeasiblePoint("no feasible control reaches v from x")
    return inner.u


@dataclass
class LagrangianSubgradient:
    a: np.ndarray        # state slot of the subgradient
    b: np.ndarray        # increment slot of the subgradient
    residual: float      # Fenchel-Young gap certifying membership


def lagrangian_subgrad(problem, t, x, v, tols=DEFAULT_TOLS):
    """An element (a, b) of the Lagrangian subdifferential at (x, v).

    Membership is certified through the Fenchel-Young residual
    ``L(x,v) + K(b,a) - x.a - v.b`` (nonnegative; ~0 at true subgradients).
    Ties in the inner multipliers resolve to the solver's minimum-residual
    point; the state-set normal-cone element is taken as zero.
    """
    from .conjugacy import dual_lagrangian_eval

    stage = problem.stage(t)
    x = _vec(x, stage.n, "x")
    v = _vec(v, stage.n, "v")
    value = lagrangian_eval(problem, t, x, v, tols)
    if value == INF:
        raise InfeasiblePoint("L_t(x, v) is not finite")
    inner = _inner_control_problem(stage, x, v, tols)
    if inner.nu is None:
        raise UnsupportedClass("subgradients unavailable for callable mixed terms")
    b = np.asarray(inner.nu, dtype=float)
    a = stage.Q @ x - stage.A.T @ b
    if stage.mixed is not None and stage.mixed.is_quadratic():
        z = np.concatenate([x, inner.u])
        a = a + stage.mixed.running_cost.grad(z)[:stage.n]
        a = a + inner.mu_f * stage.mixed.constraint.grad(z)[:stage.n]
    K = dual_lagrangian_eval(problem, t, b, a, tols)
    residual = value + K - float(x @ a + v @ b)
    return LagrangianSubgradient(a=a, b=b, residual=residual)


def feasible_velocity_set(problem, t, x, tols=DEFAULT_TOLS):
    """The set of finite-cost increments from state x at stage t.

    Returns an exact Box/Polyhedron when representable, an
    :class:`AffineImageSet` query object otherwise, and ``EMPTY_SET`` exactly
    when x lies outside the stage's implicit state constraint.
    """
    stage = problem.stage(t)
    x = _vec(x, stage.n, "x")
    if not stage.state_set.contains(x, tols.feas):
        return EMPTY_SET
    offset = stage.A @ x + stage.phi
    extra = None
    if stage.mixed is not None:
        if not stage.mixed.is_quadratic():
            raise UnsupportedClass("velocity sets need quadratic mixed terms")
        Fxx, Fxu, Fuu, fqx, fqu = stage.mixed.constraint.split(stage.n)
        f_const = float(0.5 * x @ (Fxx @ x) + fqx @ x + stage.mixed.constraint.r)
        extra = (Fuu, fqu + Fxu.T @ x, f_const)
    image = AffineImageSet(stage.B, offset, stage.control_set,
                           extra_quadratic=extra)
    # the slice {u in U : f(x,u) <= 0} may be empty even with x in X
    if extra is not None:
        from .qpbackend import solve_qp

        C, d = stage.control_set.halfspaces()
        res = solve_qp(P=extra[0], q=extra[1],
                       C_ub=C if C.shape[0] else None,
                       d_ub=d if C.shape[0] else None, n=stage.m)
        if res.status == "optimal" and res.value + extra[2] > tols.feas:
            return EMPTY_SET
        return image
    return image.concretize()


def terminal_eval(problem, x, tols=DEFAULT_TOLS):
    """Extended-real terminal cost g(x)."""
    term = problem.terminal
    x = _vec(x, term.n, "x")
    if not term.set.contains(x, tols.feas):
        return INF
    return float(0.5 * x @ (term.Qf @ x))


def terminal_subgrad(problem, x, tols=DEFAULT_TOLS):
    """A subgradient of g at x with its Fenchel-Young residual."""
    from .conjugacy import conjugate_quadratic

    term = problem.terminal
    x = _vec(x, term.n, "x")
    value = terminal_eval(problem, x, tols)
    if value == INF:
        raise InfeasiblePoint("x outside dom(g)")
    y = term.Qf @ x
    residual = value + conjugate_quadratic(term.Qf, term.set, y, tols) - float(x @ y)
    return y, residual
