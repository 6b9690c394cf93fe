"""Convex-QP backend.

Stacked solves are convex quadratic programs with zero/nonnegative/second-order
cone constraints.  Equality-only problems go through a direct dense KKT solve;
everything else goes to the Clarabel interior-point solver with tight
tolerances.  KKT residuals are always recomputed here from the returned
primal/dual pair, independently of the solver's own report.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

import clarabel

from .tolerances import DEFAULT_TOLS

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERLIMIT = "iterlimit"

_STATUS_MAP = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


@dataclass
class QPResult:
    status: str
    x: np.ndarray = None
    value: float = np.inf
    y_eq: np.ndarray = None      # multipliers of A_eq x = b_eq
    z_ub: np.ndarray = None      # multipliers of C_ub x <= d_ub (nonnegative)
    z_soc: list = field(default_factory=list)
    kkt_residual: float = np.inf


def factor_psd(P, tol=1e-12):
    """F with F'F = P (rows = numerical rank), for symmetric PSD P."""
    P = np.asarray(P, dtype=float)
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    cut = tol * max(1.0, w[-1] if w.size else 1.0)
    keep = w > cut
    return (np.sqrt(w[keep])[:, None] * V[:, keep].T)


def soc_rows_from_quadratic(Pq, qq, rq):
    """Clarabel SOC block encoding 1/2 z'Pq z + qq.z + rq <= 0.

    Returns (A_block, b_block); the block's slack lies in a second-order cone.
    """
    F = factor_psd(Pq)
    k = F.shape[0]
    n = len(qq)
    A = np.zeros((k + 2, n))
    b = np.zeros(k + 2)
    A[0] = 2.0 * qq
    b[0] = 1.0 - 2.0 * rq
    A[1:k + 1] = -2.0 * F
    A[k + 1] = 2.0 * qq
    b[k + 1] = -1.0 - 2.0 * rq
    return A, b


def _kkt_residual(P, q, x, blocks):
    """Max of stationarity / feasibility / complementarity residuals, scaled."""
    grad = P @ x + q if P is not None else q.copy()
    feas = 0.0
    comp = 0.0
    for kind, A, b, z in blocks:
        if A.shape[0] == 0:
            continue
        s = b - A @ x
        grad = grad + A.T @ z
        scale = 1.0 + float(np.max(np.abs(b))) if b.size else 1.0
        if kind == "eq":
            feas = max(feas, float(np.max(np.abs(s))) / scale)
        elif kind == "ub":
            feas = max(feas, float(np.max(-np.minimum(s, 0.0))) / scale)
            comp = max(comp, float(np.max(np.abs(z * s))) / scale)
        else:  # soc: s0 >= ||s_rest||
            viol = float(np.linalg.norm(s[1:]) - s[0])
            feas = max(feas, max(viol, 0.0) / scale)
            comp = max(comp, abs(float(z @ s)) / scale)
    stat = float(np.max(np.abs(grad))) / (1.0 + float(np.max(np.abs(q))) if q.size else 1.0)
    return max(stat, feas, comp)


def _solve_kkt_direct(P, q, A_eq, b_eq, tols):
    """Equality-constrained QP via the dense KKT system."""
    n = q.size
    m = A_eq.shape[0] if A_eq is not None else 0
    K = np.zeros((n + m, n + m))
    if P is not None:
        K[:n, :n] = P
    rhs = np.concatenate([-q, b_eq if m else np.zeros(0)])
    if m:
        K[:n, n:] = A_eq.T
        K[n:, :n] = A_eq
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    resid = float(np.max(np.abs(K @ sol - rhs))) / (1.0 + float(np.max(np.abs(rhs))))
    if resid > 1e-7:
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        resid = float(np.max(np.abs(K @ sol - rhs))) / (1.0 + float(np.max(np.abs(rhs))))
    if resid > 1e-7:
        # distinguish infeasible equalities from an unbounded objective
        if m:
            xf, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
            if float(np.max(np.abs(A_eq @ xf - b_eq))) > 1e-7 * (1.0 + float(np.max(np.abs(b_eq)))):
                return QPResult(status=INFEASIBLE)
        return QPResult(status=UNBOUNDED)
    x = sol[:n]
    y = sol[n:]
    blocks = [("eq", A_eq, b_eq, y)] if m else []
    res = _kkt_residual(P, q, x, blocks)
    val = float(0.5 * x @ (P @ x) + q @ x) if P is not None else float(q @ x)
    return QPResult(status=OPTIMAL, x=x, value=val, y_eq=y,
                    z_ub=np.zeros(0), kkt_residual=res)


def solve_qp(P=None, q=None, A_eq=None, b_eq=None, C_ub=None, d_ub=None,
             socs=None, n=None, tols=DEFAULT_TOLS):
    """Minimize ``1/2 x'Px + q'x`` under equality, inequality and SOC rows.

    ``socs`` is a list of (A, b) blocks whose slack b - Ax must lie in a
    second-order cone (see :func:`soc_rows_from_quadratic`).
    """
    if n is None:
        n = q.size if q is not None else (P.shape[0] if P is not None else A_eq.shape[1])
    q = np.zeros(n) if q is None else np.asarray(q, dtype=float).ravel()
    P = None if P is None else np.asarray(P, dtype=float)
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.asarray(b_eq, dtype=float).ravel()
        if A_eq.shape[0] == 0:
            A_eq = None
    if C_ub is not None:
        C_ub = np.atleast_2d(np.asarray(C_ub, dtype=float))
        d_ub = np.asarray(d_ub, dtype=float).ravel()
        if C_ub.shape[0] == 0:
            C_ub = None
    socs = socs or []

    if C_ub is None and not socs:
        return _solve_kkt_direct(P, q, A_eq, b_eq, tols)

    rows = []
    rhs = []
    cones = []
    n_eq = A_eq.shape[0] if A_eq is not None else 0
    if n_eq:
        rows.append(A_eq)
        rhs.append(b_eq)
        cones.append(clarabel.ZeroConeT(n_eq))
    n_ub = C_ub.shape[0] if C_ub is not None else 0
    if n_ub:
        rows.append(C_ub)
        rhs.append(d_ub)
        cones.append(clarabel.NonnegativeConeT(n_ub))
    for A_s, b_s in socs:
        rows.append(np.atleast_2d(A_s))
        rhs.append(np.asarray(b_s, dtype=float))
        cones.append(clarabel.SecondOrderConeT(A_s.shape[0]))

    A = sparse.csc_matrix(np.vstack(rows))
    b = np.concatenate(rhs)
    Pmat = sparse.csc_matrix(P if P is not None else np.zeros((n, n)))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = 1e-10
    settings.tol_gap_rel = 1e-10
    settings.tol_feas = 1e-10
    settings.max_iter = 200
    solver = clarabel.DefaultSolver(Pmat, q, A, b, cones, settings)
    sol = solver.solve()
    status = _STATUS_MAP.get(str(sol.status), ITERLIMIT)
    if status in (INFEASIBLE, UNBOUNDED):
        return QPResult(status=status)
    x = np.asarray(sol.x)
    z = np.asarray(sol.z)
    y_eq = z[:n_eq]
    z_ub = z[n_eq:n_eq + n_ub]
    z_soc = []
    off = n_eq + n_ub
    blocks = []
    if n_eq:
        blocks.append(("eq", A_eq, b_eq, y_eq))
    if n_ub:
        blocks.append(("ub", C_ub, d_ub, z_ub))
    for A_s, b_s in socs:
        k = np.atleast_2d(A_s).shape[0]
        z_s = z[off:off + k]
        z_soc.append(z_s)
        blocks.append(("soc", np.atleast_2d(A_s), np.asarray(b_s, dtype=float), z_s))
        off += k
    res = _kkt_residual(P, q, x, blocks)
    val = float(0.5 * x @ (P @ x) + q @ x) if P is not None else float(q @ x)
    return QPResult(status=status, x=x, value=val, y_eq=y_eq, z_ub=z_ub,
                    z_soc=z_soc, kkt_residual=res)


def lp_feasible(A_eq=None, b_eq=None, C_ub=None, d_ub=None, n=None):
    """Phase-one feasibility of a polyhedral system (HiGHS)."""
    if n is None:
        n = A_eq.shape[1] if A_eq is not None else C_ub.shape[1]
    res = linprog(np.zeros(n), A_ub=C_ub, b_ub=d_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * n, method="highs")
    return res.status == 0, (res.x if res.status == 0 else None)
