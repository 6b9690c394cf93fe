"""Independent brute-force references at dimensions 1 and 2.

Grid dynamic programming restricts trajectories to grid nodes, so every table
entry is a true upper bound with error O(spacing x local Lipschitz bound) on
the finite region.  A classical Riccati recursion covers the unconstrained
quadratic case exactly.  These routes never call the stacked solver, which is
what makes them usable as oracles against it.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .conjugacy import (DualBolzaProblem, GridFunction, conj_interval, dualize)
from .errors import (BoundaryNode, DimensionMismatch, GridTooCoarse,
                     SingularInnerMatrix, UnsupportedClass)
from .extreal import INF
from .model import BolzaProblem
from .sets import Box, WholeSpace
from .tolerances import DEFAULT_TOLS

__all__ = ["ValueTable", "default_axis", "grid_value_dp", "dual_value_table",
           "riccati_value", "subgradient_bracket"]

#: default oracle grid: [-5, 5] with 2001 nodes per axis
DEFAULT_GRID = (-5.0, 5.0, 2001)


def default_axis(lo=None, hi=None, count=None):
    lo0, hi0, c0 = DEFAULT_GRID
    return np.linspace(lo if lo is not None else lo0,
                       hi if hi is not None else hi0,
                       count if count is not None else c0)


@dataclass
class ValueTable:
    """Per-time value grids theta_tau (or omega_tau) for tau = 0..T."""

    tables: list
    source: str = "DP"
    kind: str = "primal"

    def __getitem__(self, tau) -> GridFunction:
        return self.tables[tau]

    def __len__(self):
        return len(self.tables)

    def to_csv(self, path_pattern):
        """One CSV per time step; '{tau}' in the pattern is substituted."""
        paths = []
        for tau, gf in enumerate(self.tables):
            path = str(path_pattern).format(tau=tau)
            with open(path, "w", newline="") as fh:
                axes = ";".join(
                    f"[{a[0]:.17g},{a[-1]:.17g}]x{a.size}" for a in gf.axes)
                fh.write(f"# source={self.source} kind={self.kind} "
                         f"tau={tau} grid={axes}\n")
            with open(path, "a", newline="") as fh:
                cols = [f"x{k}" for k in range(gf.dim)] + ["value", "is_finite"]
                fh.write(",".join(cols) + "\n")
                for idx in np.ndindex(*gf.values.shape):
                    coords = [format(gf.axes[k][idx[k]], ".17g")
                              for k in range(gf.dim)]
                    val = gf.values[idx]
                    fin = 1 if math.isfinite(val) else 0
                    sval = format(val, ".17g") if fin else "inf"
                    fh.write(",".join(coords + [sval, str(fin)]) + "\n")
            paths.append(path)
        return paths


def _interval_of(set_):
    if isinstance(set_, WholeSpace):
        return -INF, INF
    return set_.interval()


def _scalar_stage_matrix(stage, x, xp, tols):
    """L(x_i, x'_j - x_i) on the node grid for a scalar structured stage."""
    a = float(stage.A[0, 0])
    b = float(stage.B[0, 0])
    phi = float(stage.phi[0])
    qq = float(stage.Q[0, 0])
    rr = float(stage.R[0, 0])
    xlo, xhi = _interval_of(stage.state_set)
    ulo, uhi = _interval_of(stage.control_set)

    X = x[:, None]
    V = xp[None, :] - X
    r = V - (a * X + phi)
    if b != 0.0:
        u = r / b
        cost = 0.5 * rr * u * u
        feas = (u >= ulo - tols.zero) & (u <= uhi + tols.zero)
    else:
        u0 = min(max(0.0, ulo), uhi)
        u = np.full_like(r, u0)
        cost = np.full_like(r, 0.5 * rr * u0 * u0)
        feas = np.abs(r) <= tols.zero
    if stage.mixed is not None:
        if not stage.mixed.is_quadratic() or b == 0.0:
            raise UnsupportedClass(
                "scalar DP supports quadratic mixed terms with B != 0")
        lc, fc = stage.mixed.running_cost, stage.mixed.constraint
        Xb = np.broadcast_to(X, u.shape)
        lval = (0.5 * (lc.P[0, 0] * Xb * Xb + 2 * lc.P[0, 1] * Xb * u
                       + lc.P[1, 1] * u * u) + lc.q[0] * Xb + lc.q[1] * u + lc.r)
        fval = (0.5 * (fc.P[0, 0] * Xb * Xb + 2 * fc.P[0, 1] * Xb * u
                       + fc.P[1, 1] * u * u) + fc.q[0] * Xb + fc.q[1] * u + fc.r)
        cost = cost + lval
        feas = feas & (fval <= tols.feas)
    L = np.where(feas, cost, INF)
    state_cost = 0.5 * qq * x * x
    state_cost = np.where((x >= xlo - tols.zero) & (x <= xhi + tols.zero),
                          state_cost, INF)
    return L + state_cost[:, None]


def _scalar_dual_stage_matrix(stage, p, pp, tols):
    """Dual stage values K(p'_j, p'_j - p_i) on the node grid (scalar)."""
    a = float(stage.A[0, 0])
    b = float(stage.B[0, 0])
    phi = float(stage.phi[0])
    qq = float(stage.Q[0, 0])
    rr = float(stage.R[0, 0])
    xlo, xhi = _interval_of(stage.state_set)
    ulo, uhi = _interval_of(stage.control_set)
    P = np.broadcast_to(pp[None, :], (p.size, pp.size))
    W = pp[None, :] - p[:, None]
    cx = a * P + W
    cu = b * P
    return (conj_interval(qq, xlo, xhi, cx)
            + conj_interval(rr, ulo, uhi, cu) + phi * P)


def _scalar_terminal(problem, x, dual):
    if dual:
        src = problem.terminal.source if isinstance(problem, DualBolzaProblem) \
            else problem.terminal
        qf = float(src.Qf[0, 0])
        lo, hi = _interval_of(src.set)
        return conj_interval(qf, lo, hi, -x)
    qf = float(problem.terminal.Qf[0, 0])
    lo, hi = _interval_of(problem.terminal.set)
    vals = 0.5 * qf * x * x
    return np.where((x >= lo) & (x <= hi), vals, INF)


def _make_grid_function(axes, values, tols):
    try:
        return GridFunction(axes, values, validate=True, tols=tols)
    except Exception:
        warnings.warn("value table violates grid-line convexity",
                      GridTooCoarse)
        return GridFunction(axes, values, validate=False, tols=tols)


def _scalar_dp(problem, axis, tols, dual=False):
    x = axis
    gT = _scalar_terminal(problem, x, dual)
    tables = [None] * (problem.horizon + 1)
    tables[problem.horizon] = _make_grid_function((x,), gT, tols)
    V = gT
    src = problem.source if (dual and isinstance(problem, DualBolzaProblem)) \
        else problem
    for t in range(problem.horizon - 1, -1, -1):
        stage = src.stage(t)
        if dual:
            L = _scalar_dual_stage_matrix(stage, x, x, tols)
        else:
            L = _scalar_stage_matrix(stage, x, x, tols)
        with np.errstate(invalid="ignore"):
            V = np.min(L + V[None, :], axis=1)
        V = np.where(np.isnan(V), INF, V)
        tables[t] = _make_grid_function((x,), V, tols)
    return tables


def _is_separable(problem: BolzaProblem):
    if problem.state_dim != 2 or problem.control_dim != 2:
        return False

    def diag_ok(M):
        return np.max(np.abs(M - np.diag(np.diag(M)))) <= 1e-14 * (1 + np.max(np.abs(M)))

    def set_ok(s):
        return isinstance(s, (WholeSpace, Box))

    for st in problem.stages:
        if st.mixed is not None:
            return False
        if not (diag_ok(st.A) and diag_ok(st.B) and diag_ok(st.Q)
                and diag_ok(st.R)):
            return False
        if not (set_ok(st.state_set) and set_ok(st.control_set)):
            return False
    return diag_ok(problem.terminal.Qf) and set_ok(problem.terminal.set)


def _axis_subproblem(problem: BolzaProblem, k):
    """Scalar slice of a separable two-dimensional problem along axis k."""
    from .model import StageSpec, TerminalCost

    def slice_set(s):
        if isinstance(s, WholeSpace):
            return WholeSpace(1)
        return Box([s.lower[k]], [s.upper[k]])

    stages = []
    for st in problem.stages:
        stages.append(StageSpec(A=[[st.A[k, k]]], B=[[st.B[k, k]]],
                                phi=[st.phi[k]], Q=[[st.Q[k, k]]],
                                R=[[st.R[k, k]]],
                                state_set=slice_set(st.state_set),
                                control_set=slice_set(st.control_set)))
    term = TerminalCost([[problem.terminal.Qf[k, k]]],
                        slice_set(problem.terminal.set))
    return BolzaProblem(stages, term)


def _dense_dp_2d(problem, axes, tols):
    """Direct product-grid DP; needs an invertible control map."""
    x1, x2 = axes
    n1, n2 = x1.size, x2.size
    nodes = np.stack(np.meshgrid(x1, x2, indexing="ij"), axis=-1).reshape(-1, 2)
    gvals = np.array([_terminal_value_2d(problem, z, tols) for z in nodes])
    tables = [None] * (problem.horizon + 1)
    tables[problem.horizon] = _make_grid_function(
        (x1, x2), gvals.reshape(n1, n2), tols)
    V = gvals
    for t in range(problem.horizon - 1, -1, -1):
        st = problem.stage(t)
        if st.mixed is not None:
            raise UnsupportedClass("dense 2-D DP supports structured stages")
        if st.B.shape != (2, 2) or abs(np.linalg.det(st.B)) < 1e-12:
            raise UnsupportedClass("dense 2-D DP needs an invertible B")
        Binv = np.linalg.inv(st.B)
        Q, R = st.Q, st.R
        Cx, dx_rhs = st.state_set.halfspaces()
        Cu, du_rhs = st.control_set.halfspaces()
        newV = np.empty(nodes.shape[0])
        for i, z in enumerate(nodes):
            if Cx.shape[0] and np.any(Cx @ z > dx_rhs + tols.zero):
                newV[i] = INF
                continue
            rmat = nodes - z - (st.A @ z + st.phi)
            U = rmat @ Binv.T
            cost = 0.5 * np.einsum("ij,jk,ik->i", U, R, U)
            if Cu.shape[0]:
                bad = np.any(U @ Cu.T > du_rhs + tols.zero, axis=1)
                cost = np.where(bad, INF, cost)
            total = cost + 0.5 * float(z @ (Q @ z)) + V
            newV[i] = np.min(total)
        V = newV
        tables[t] = _make_grid_function((x1, x2), V.reshape(n1, n2), tols)
    return tables


def _terminal_value_2d(problem, z, tols):
    term = problem.terminal
    if not term.set.contains(z, tols.zero):
        return INF
    return float(0.5 * z @ (term.Qf @ z))


def grid_value_dp(problem: BolzaProblem, grid=None, tols=DEFAULT_TOLS):
    """Backward grid recursion for the primal value function (n <= 2).

    Velocities are restricted to node differences, so no interpolation error
    enters: every table entry is an over-grid-trajectory optimum.  Separable
    two-dimensional problems factor into two scalar recursions combined by
    an outer sum, which reproduces the product-grid recursion exactly.
    """
    n = problem.state_dim
    if n == 1:
        axis = default_axis() if grid is None else np.asarray(grid, dtype=float)
        tables = _scalar_dp(problem, axis, tols, dual=False)
        return ValueTable(tables=tables, source="DP", kind="primal")
    if n != 2:
        raise UnsupportedClass("grid DP supports state dimension <= 2")
    if grid is None:
        axes = (default_axis(), default_axis())
    else:
        axes = tuple(np.asarray(a, dtype=float) for a in grid)
    if _is_separable(problem):
        t1 = _scalar_dp(_axis_subproblem(problem, 0), axes[0], tols)
        t2 = _scalar_dp(_axis_subproblem(problem, 1), axes[1], tols)
        tables = []
        for tau in range(problem.horizon + 1):
            vals = t1[tau].values[:, None] + t2[tau].values[None, :]
            tables.append(_make_grid_function(axes, vals, tols))
        return ValueTable(tables=tables, source="DP", kind="primal")
    tables = _dense_dp_2d(problem, axes, tols)
    return ValueTable(tables=tables, source="DP", kind="primal")


def dual_value_table(problem: BolzaProblem, grid=None, tols=DEFAULT_TOLS):
    """Grid tables of the dual value function (omega), via DP on the dual.

    The dual problem is run as a primal DP in the costate variable starting
    from p_tau; omega_tau(eta) reads the table at -eta, so each table is the
    DP table with every axis reversed (grids are symmetric about zero).
    """
    n = problem.state_dim
    dual = dualize(problem, tols)
    if n == 1:
        axis = default_axis() if grid is None else np.asarray(grid, dtype=float)
        if abs(axis[0] + axis[-1]) > 1e-12:
            raise DimensionMismatch("dual tables need a symmetric grid")
        tables = _scalar_dp(dual, axis, tols, dual=True)
        flipped = [_make_grid_function((axis,), gf.values[::-1].copy(), tols)
                   for gf in tables]
        return ValueTable(tables=flipped, source="DP", kind="dual")
    if n != 2:
        raise UnsupportedClass("dual tables support state dimension <= 2")
    if grid is None:
        axes = (default_axis(), default_axis())
    else:
        axes = tuple(np.asarray(a, dtype=float) for a in grid)
    if not _is_separable(problem):
        raise UnsupportedClass("2-D dual tables require a separable problem")
    t1 = _scalar_dp(dualize(_axis_subproblem(problem, 0), tols), axes[0],
                    tols, dual=True)
    t2 = _scalar_dp(dualize(_axis_subproblem(problem, 1), tols), axes[1],
                    tols, dual=True)
    tables = []
    for tau in range(problem.horizon + 1):
        vals = t1[tau].values[::-1][:, None] + t2[tau].values[::-1][None, :]
        tables.append(_make_grid_function(axes, vals, tols))
    return ValueTable(tables=tables, source="DP", kind="dual")


def riccati_value(problem: BolzaProblem, tau, xi, tols=DEFAULT_TOLS):
    """Unconstrained quadratic value by backward Riccati recursion.

    Requires whole-space sets and positive definite control costs; handles
    drifts through the affine value expansion V_t(x) = x'P x/2 + s.x + c.
    """
    n = problem.state_dim
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.size != n:
        raise DimensionMismatch("xi has the wrong length")
    for st in problem.stages:
        if not (st.state_set.is_whole_space() and st.control_set.is_whole_space()):
            raise UnsupportedClass("riccati_value needs unconstrained sets")
        if st.mixed is not None:
            raise UnsupportedClass("riccati_value needs structured stages")
    if not problem.terminal.set.is_whole_space():
        raise UnsupportedClass("riccati_value needs a whole-space terminal set")
    P = problem.terminal.Qf.copy()
    s = np.zeros(n)
    c = 0.0
    for t in range(problem.horizon - 1, tau - 1, -1):
        st = problem.stage(t)
        Abar = np.eye(n) + st.A
        G = st.R + st.B.T @ P @ st.B
        try:
            Ginv = np.linalg.inv(G)
        except np.linalg.LinAlgError:
            raise SingularInnerMatrix("R + B'PB is singular") from None
        if np.linalg.cond(G) > 1e12:
            raise SingularInnerMatrix("R + B'PB is numerically singular")
        H = st.B @ Ginv @ st.B.T
        w = P @ st.phi + s
        M = P @ Abar
        P_new = st.Q + Abar.T @ P @ Abar - M.T @ H @ M
        s_new = Abar.T @ (np.eye(n) - P @ H) @ w
        c_new = c + 0.5 * float(st.phi @ (P @ st.phi)) + float(s @ st.phi) \
            - 0.5 * float(w @ (H @ w))
        P, s, c = 0.5 * (P_new + P_new.T), s_new, c_new
    return float(0.5 * xi @ (P @ xi) + s @ xi + c)


def subgradient_bracket(table, tau, xi, tols=DEFAULT_TOLS):
    """One-sided difference-quotient bracket of the value slope at a node.

    Any slope inside the bracket is an epsilon-subgradient of the sampled
    convex function with epsilon bounded by the local grid curvature.
    """
    gf = table[tau] if isinstance(table, ValueTable) else table
    if gf.dim != 1:
        raise UnsupportedClass("subgradient brackets are scalar-only")
    (i,) = gf.node_index(np.atleast_1d(xi))
    vals = gf.values
    if i == 0 or i == vals.size - 1:
        raise BoundaryNode("bracket undefined at the grid boundary")
    if not (math.isfinite(vals[i - 1]) and math.isfinite(vals[i])
            and math.isfinite(vals[i + 1])):
        raise BoundaryNode("bracket needs finite neighbors")
    h = gf.spacing[0]
    return (float((vals[i] - vals[i - 1]) / h),
            float((vals[i + 1] - vals[i]) / h))
