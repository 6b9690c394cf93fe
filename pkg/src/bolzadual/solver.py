"""Stacked finite-horizon solves for the primal and dual problems.

The primal problem stacks into one convex QP (with second-order-cone rows for
quadratic mixed constraints).  The dual problem, rewritten in primal form by
:func:`bolzadual.conjugacy.dualize`, stacks into a QP as well through the
exact inf-representation of each stage conjugate, so both sides share one
backend.  Infeasibility is decided by a phase-one LP, never by solver
divergence; costates come from the multipliers of the dynamics rows with the
sign fixed so the discrete Euler-Lagrange inclusion holds at the optimum.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import qpbackend
from .conjugacy import (DualBolzaProblem, dual_lagrangian_eval, dual_terminal,
                        dualize)
from .errors import DimensionMismatch, UnsupportedClass
from .extreal import INF
from .model import (BolzaProblem, lagrangian_eval, terminal_eval)
from .tolerances import DEFAULT_TOLS

__all__ = ["SolveResult", "DualityCertificate", "solve_primal", "solve_dual",
           "value_subgradient", "duality_certificate", "ValueSubgradient",
           "OPTIMAL", "INFEASIBLE", "ITERLIMIT"]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
ITERLIMIT = "IterLimit"


@dataclass
class SolveResult:
    """Solution of one stacked solve.

    For dual solves the ``states`` hold the costate arc p_tau..p_T, the
    ``controls`` hold its increments, and ``costates`` hold the recovered
    primal-side multipliers.
    """

    status: str
    value: float
    tau: int
    states: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    costates: list = field(default_factory=list)
    kkt_residual: float = math.inf
    dynamics_residual: float = math.inf
    unbounded: bool = False


@dataclass
class DualityCertificate:
    theta: float
    omega: float
    xi: np.ndarray
    eta: np.ndarray
    gap: float
    fy_residual: float
    el_residuals: list
    transversality_residual: float

    def passes(self, tol=DEFAULT_TOLS.cert):
        scale = 1.0 + abs(self.theta) + abs(self.omega) + float(
            np.abs(self.xi @ self.eta)) if math.isfinite(self.gap) else 1.0
        return math.isfinite(self.gap) and self.gap <= tol * scale


class _Layout:
    def __init__(self):
        self.size = 0
        self.slices = {}

    def add(self, key, k):
        s = slice(self.size, self.size + k)
        self.slices[key] = s
        self.size += k
        return s

    def __getitem__(self, key):
        return self.slices[key]


def _vec(v, dim, name):
    a = np.asarray(v, dtype=float).ravel()
    if a.size != dim:
        raise DimensionMismatch(f"{name}: expected length {dim}, got {a.size}")
    return a


# ---------------------------------------------------------------------------
# structured primal solve
# ---------------------------------------------------------------------------

def _stage_mixed_quadratics(stage, xi=None):
    """Stage running-cost and constraint blocks, with x pinned when given."""
    lcost = stage.mixed.running_cost
    fcons = stage.mixed.constraint
    n = stage.n
    if xi is None:
        return (lcost.P, lcost.q, lcost.r), (fcons.P, fcons.q, fcons.r)
    Pxx, Pxu, Puu, qx, qu = lcost.split(n)
    lq = (Puu, qu + Pxu.T @ xi,
          float(0.5 * xi @ (Pxx @ xi) + qx @ xi + lcost.r))
    Fxx, Fxu, Fuu, fqx, fqu = fcons.split(n)
    fq = (Fuu, fqu + Fxu.T @ xi,
          float(0.5 * xi @ (Fxx @ xi) + fqx @ xi + fcons.r))
    return lq, fq


def _solve_primal_structured(problem: BolzaProblem, tau, xi, tols):
    T = problem.horizon
    n, m = problem.state_dim, problem.control_dim
    xi = _vec(xi, n, "xi")
    if not (0 <= tau <= T - 1):
        raise DimensionMismatch(f"tau must lie in [0, {T - 1}]")
    for s in problem.stages[tau:]:
        if s.mixed is not None and not s.mixed.is_quadratic():
            raise UnsupportedClass(
                "stacked solves support quadratic mixed terms only")

    stage0 = problem.stage(tau)
    if not stage0.state_set.contains(xi, tols.feas):
        return SolveResult(status=INFEASIBLE, value=INF, tau=tau)

    lay = _Layout()
    for t in range(tau, T):
        lay.add(("u", t), m)
    for t in range(tau + 1, T + 1):
        lay.add(("x", t), n)
    N = lay.size

    P = np.zeros((N, N))
    q = np.zeros(N)
    const = float(0.5 * xi @ (stage0.Q @ xi))
    eq_rows, eq_rhs = [], []
    ub_rows, ub_rhs = [], []
    socs = []
    soc_stage = {}

    for t in range(tau, T):
        st = problem.stage(t)
        su = lay[("u", t)]
        P[su, su] += st.R
        if t > tau:
            sx = lay[("x", t)]
            P[sx, sx] += st.Q
        # dynamics row: x_{t+1} - (I+A) x_t - B u_t = phi_t
        row = np.zeros((n, N))
        row[:, lay[("x", t + 1)]] = np.eye(n)
        row[:, su] = -st.B
        rhs = st.phi.copy()
        if t == tau:
            rhs = rhs + (np.eye(n) + st.A) @ xi
        else:
            row[:, lay[("x", t)]] = -(np.eye(n) + st.A)
        eq_rows.append(row)
        eq_rhs.append(rhs)
        # membership rows
        Cu, du = st.control_set.halfspaces()
        if Cu.shape[0]:
            blk = np.zeros((Cu.shape[0], N))
            blk[:, su] = Cu
            ub_rows.append(blk)
            ub_rhs.append(du)
        if t > tau:
            Cx, dx = st.state_set.halfspaces()
            if Cx.shape[0]:
                blk = np.zeros((Cx.shape[0], N))
                blk[:, lay[("x", t)]] = Cx
                ub_rows.append(blk)
                ub_rhs.append(dx)
        if st.mixed is not None:
            if t == tau:
                (Pl, ql, rl), (Pf, qf, rf) = _stage_mixed_quadratics(st, xi)
                P[su, su] += Pl
                q[su] += ql
                const += rl
                Pfu = np.zeros((N, N))
                Pfu[su, su] = Pf
                qfu = np.zeros(N)
                qfu[su] = qf
                soc_stage[t] = len(socs)
                socs.append(qpbackend.soc_rows_from_quadratic(Pfu, qfu, rf))
            else:
                (Pl, ql, rl), (Pf, qf, rf) = _stage_mixed_quadratics(st)
                sx = lay[("x", t)]
                idx = np.r_[sx, su]
                P[np.ix_(idx, idx)] += Pl
                q[idx] += ql
                const += rl
                Pfull = np.zeros((N, N))
                Pfull[np.ix_(idx, idx)] = Pf
                qfull = np.zeros(N)
                qfull[idx] = qf
                soc_stage[t] = len(socs)
                socs.append(qpbackend.soc_rows_from_quadratic(Pfull, qfull, rf))

    sxT = lay[("x", T)]
    P[sxT, sxT] += problem.terminal.Qf
    Cg, dg = problem.terminal.set.halfspaces()
    if Cg.shape[0]:
        blk = np.zeros((Cg.shape[0], N))
        blk[:, sxT] = Cg
        ub_rows.append(blk)
        ub_rhs.append(dg)

    A_eq = np.vstack(eq_rows)
    b_eq = np.concatenate(eq_rhs)
    C_ub = np.vstack(ub_rows) if ub_rows else None
    d_ub = np.concatenate(ub_rhs) if ub_rows else None

    feasible, _ = qpbackend.lp_feasible(A_eq=A_eq, b_eq=b_eq, C_ub=C_ub,
                                        d_ub=d_ub, n=N)
    if not feasible:
        return SolveResult(status=INFEASIBLE, value=INF, tau=tau)

    res = qpbackend.solve_qp(P=P, q=q, A_eq=A_eq, b_eq=b_eq, C_ub=C_ub,
                             d_ub=d_ub, socs=socs, n=N, tols=tols)
    if res.status == qpbackend.INFEASIBLE:
        return SolveResult(status=INFEASIBLE, value=INF, tau=tau)
    if res.status == qpbackend.UNBOUNDED:
        return SolveResult(status=ITERLIMIT, value=-math.inf, tau=tau,
                           unbounded=True)
    status = OPTIMAL if (res.status == qpbackend.OPTIMAL
                         and res.kkt_residual <= 1e4 * tols.kkt) else ITERLIMIT
    if res.status == qpbackend.ITERLIMIT:
        status = ITERLIMIT

    z = res.x
    states = [xi] + [z[lay[("x", t)]].copy() for t in range(tau + 1, T + 1)]
    controls = [z[lay[("u", t)]].copy() for t in range(tau, T)]

    # costates p_{t+1} = multiplier of the stage-t dynamics row
    costates = [None] * (T - tau + 1)
    for k, t in enumerate(range(tau, T)):
        costates[t + 1 - tau] = res.y_eq[k * n:(k + 1) * n].copy()
    mixed_grad = np.zeros(n)
    if stage0.mixed is not None:
        zfull = np.concatenate([xi, controls[0]])
        mu = 0.0
        if soc_stage.get(tau) is not None and res.z_soc:
            zs = res.z_soc[soc_stage[tau]]
            mu = 2.0 * float(zs[0] + zs[-1])
        mixed_grad = (stage0.mixed.running_cost.grad(zfull)[:n]
                      + mu * stage0.mixed.constraint.grad(zfull)[:n])
    costates[0] = ((np.eye(n) + stage0.A).T @ costates[1]
                   - stage0.Q @ xi - mixed_grad)

    dyn = 0.0
    for k, t in enumerate(range(tau, T)):
        st = problem.stage(t)
        resid = states[k + 1] - states[k] - (st.A @ states[k]
                                             + st.B @ controls[k] + st.phi)
        dyn = max(dyn, float(np.max(np.abs(resid))))

    return SolveResult(status=status, value=res.value + const, tau=tau,
                       states=states, controls=controls, costates=costates,
                       kkt_residual=res.kkt_residual, dynamics_residual=dyn)


# ---------------------------------------------------------------------------
# dual solve through the conjugate representation
# ---------------------------------------------------------------------------

def _solve_dual_form(dual: DualBolzaProblem, tau, p0, tols):
    """Stacked solve of the dual problem written in primal form.

    Each stage conjugate ``sup_{x in S} c.x - |x|_M^2/2`` enters through its
    exact representation ``min { |mu|_M^2/2 + d.y : M mu + C'y = c, y >= 0 }``,
    so the whole dual problem is one QP sharing the primal backend.
    """
    src = dual.source
    T = src.horizon
    n, m = src.state_dim, src.control_dim
    p0 = _vec(p0, n, "initial costate")
    if not (0 <= tau <= T - 1):
        raise DimensionMismatch(f"tau must lie in [0, {T - 1}]")
    if not src.is_lq():
        raise UnsupportedClass(
            "stacked dual solves cover the structured class; mixed-stage "
            "dual values are available pointwise via dual_lagrangian_eval")

    lay = _Layout()
    for t in range(tau + 1, T + 1):
        lay.add(("p", t), n)
    halfspaces = {}
    for t in range(tau, T):
        st = src.stage(t)
        Cx, dx = st.state_set.halfspaces()
        Cu, du = st.control_set.halfspaces()
        halfspaces[t] = (Cx, dx, Cu, du)
        lay.add(("mu", t), n)
        lay.add(("a", t), Cx.shape[0])
        lay.add(("rho", t), m)
        lay.add(("b", t), Cu.shape[0])
    Cg, dg = src.terminal.set.halfspaces()
    lay.add("mu_g", n)
    lay.add("c_g", Cg.shape[0])
    N = lay.size

    P = np.zeros((N, N))
    q = np.zeros(N)
    eq_rows, eq_rhs = [], []
    nonneg = []

    for t in range(tau, T):
        st = src.stage(t)
        Cx, dx, Cu, du = halfspaces[t]
        smu, sa = lay[("mu", t)], lay[("a", t)]
        srho, sb = lay[("rho", t)], lay[("b", t)]
        sp1 = lay[("p", t + 1)]
        P[smu, smu] += st.Q
        P[srho, srho] += st.R
        q[sa.start:sa.stop] += dx
        q[sb.start:sb.stop] += du
        q[sp1] += st.phi
        # state conjugate: Q mu + Cx' a = (A' + I) p_{t+1} - p_t
        row = np.zeros((n, N))
        row[:, smu] = st.Q
        if Cx.shape[0]:
            row[:, sa] = Cx.T
        row[:, sp1] -= st.A.T + np.eye(n)
        rhs = np.zeros(n)
        if t == tau:
            rhs = -p0
        else:
            row[:, lay[("p", t)]] += np.eye(n)
        eq_rows.append(row)
        eq_rhs.append(rhs)
        # control conjugate: R rho + Cu' b = B' p_{t+1}
        row = np.zeros((m, N))
        row[:, srho] = st.R
        if Cu.shape[0]:
            row[:, sb] = Cu.T
        row[:, sp1] -= st.B.T
        eq_rows.append(row)
        eq_rhs.append(np.zeros(m))
        nonneg.extend([sa, sb])

    smu_g, sc_g = lay["mu_g"], lay["c_g"]
    P[smu_g, smu_g] += src.terminal.Qf
    q[sc_g.start:sc_g.stop] += dg
    row = np.zeros((n, N))
    row[:, smu_g] = src.terminal.Qf
    if Cg.shape[0]:
        row[:, sc_g] = Cg.T
    row[:, lay[("p", T)]] += np.eye(n)
    eq_rows.append(row)
    eq_rhs.append(np.zeros(n))
    nonneg.append(sc_g)

    ub_rows, ub_rhs = [], []
    for s in nonneg:
        k = s.stop - s.start
        if k:
            blk = np.zeros((k, N))
            blk[:, s] = -np.eye(k)
            ub_rows.append(blk)
            ub_rhs.append(np.zeros(k))
    A_eq = np.vstack(eq_rows)
    b_eq = np.concatenate(eq_rhs)
    C_ub = np.vstack(ub_rows) if ub_rows else None
    d_ub = np.concatenate(ub_rhs) if ub_rows else None

    feasible, _ = qpbackend.lp_feasible(A_eq=A_eq, b_eq=b_eq, C_ub=C_ub,
                                        d_ub=d_ub, n=N)
    if not feasible:
        return SolveResult(status=INFEASIBLE, value=INF, tau=tau)

    res = qpbackend.solve_qp(P=P, q=q, A_eq=A_eq, b_eq=b_eq, C_ub=C_ub,
                             d_ub=d_ub, n=N, tols=tols)
    if res.status == qpbackend.INFEASIBLE:
        return SolveResult(status=INFEASIBLE, value=INF, tau=tau)
    if res.status == qpbackend.UNBOUNDED:
        return SolveResult(status=ITERLIMIT, value=-math.inf, tau=tau,
                           unbounded=True)
    status = OPTIMAL if res.status == qpbackend.OPTIMAL else ITERLIMIT

    z = res.x
    parc = [p0] + [z[lay[("p", t)]].copy() for t in range(tau + 1, T + 1)]
    increments = [parc[k + 1] - parc[k] for k in range(T - tau)]
    # eq multipliers of the state-conjugate rows recover the primal states
    recovered = []
    off = 0
    for t in range(tau, T):
        recovered.append(-res.y_eq[off:off + n])
        off += n + m
    return SolveResult(status=status, value=res.value, tau=tau, states=parc,
                       controls=increments, costates=recovered,
                       kkt_residual=res.kkt_residual, dynamics_residual=0.0)


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def solve_primal(problem, tau, xi, tols=DEFAULT_TOLS):
    """Value and optimal trajectory of the primal problem from (tau, xi)."""
    if isinstance(problem, BolzaProblem):
        return _solve_primal_structured(problem, tau, xi, tols)
    if isinstance(problem, DualBolzaProblem):
        return _solve_dual_form(problem, tau, xi, tols)
    raise UnsupportedClass("solve_primal supports primal and dualized problems")


def solve_dual(problem, tau, eta, tols=DEFAULT_TOLS):
    """Dual value and costate arc from (tau, eta); initial costate is -eta."""
    if not isinstance(problem, BolzaProblem):
        raise UnsupportedClass("solve_dual expects the source (primal) problem")
    eta = _vec(eta, problem.state_dim, "eta")
    return solve_primal(dualize(problem, tols), tau, -eta, tols)


@dataclass
class ValueSubgradient:
    eta: np.ndarray
    certificate: DualityCertificate


def value_subgradient(problem, tau, xi, tols=DEFAULT_TOLS):
    """A subgradient of the primal value function at (tau, xi).

    Taken as -p_tau from the primal costates and certified by the
    Fenchel-Young gap of the assembled duality certificate.
    """
    res = solve_primal(problem, tau, xi, tols)
    if res.status != OPTIMAL:
        raise UnsupportedClass(f"primal solve ended with status {res.status}")
    eta = -res.costates[0]
    cert = duality_certificate(problem, tau, xi, eta, tols,
                               _primal_result=res)
    return ValueSubgradient(eta=eta, certificate=cert)


def _el_residual(problem, t, x_prev, x_next, p_t, p_prev, tols):
    """Per-step Euler-Lagrange Fenchel-Young gap (raw, may be +inf)."""
    dx = x_next - x_prev
    dp = p_t - p_prev
    L = lagrangian_eval(problem, t, x_prev, dx, tols)
    K = dual_lagrangian_eval(problem, t, p_t, dp, tols)
    if L == INF or K == INF:
        return INF
    return L + K - float(x_prev @ dp + dx @ p_t)


def duality_certificate(problem, tau, xi, eta, tols=DEFAULT_TOLS,
                        _primal_result=None, _dual_result=None):
    """Assemble values, gap and per-step residuals for a pair (xi, eta)."""
    n = problem.state_dim
    xi = _vec(xi, n, "xi")
    eta = _vec(eta, n, "eta")
    T = problem.horizon
    if tau == T:
        theta = terminal_eval(problem, xi, tols)
        omega = dual_terminal(problem, -eta, tols)
        gap = INF if (theta == INF or omega == INF) else theta + omega - float(xi @ eta)
        return DualityCertificate(theta=theta, omega=omega, xi=xi, eta=eta,
                                  gap=gap, fy_residual=gap, el_residuals=[],
                                  transversality_residual=gap)
    pres = _primal_result or solve_primal(problem, tau, xi, tols)
    dres = _dual_result or solve_dual(problem, tau, eta, tols)
    theta = pres.value if pres.status != INFEASIBLE else INF
    omega = dres.value if dres.status != INFEASIBLE else INF
    if (not math.isfinite(theta)) or (not math.isfinite(omega)):
        gap = INF
        return DualityCertificate(theta=theta, omega=omega, xi=xi, eta=eta,
                                  gap=gap, fy_residual=gap, el_residuals=[],
                                  transversality_residual=INF)
    gap = theta + omega - float(xi @ eta)
    els = []
    for k, t in enumerate(range(tau, T)):
        els.append(_el_residual(problem, t, pres.states[k], pres.states[k + 1],
                                dres.states[k + 1], dres.states[k], tols))
    xT = pres.states[-1]
    pT = dres.states[-1]
    g = terminal_eval(problem, xT, tols)
    gstar = dual_terminal(problem, pT, tols)
    trans = INF if (g == INF or gstar == INF) else g + gstar + float(xT @ pT)
    return DualityCertificate(theta=theta, omega=omega, xi=xi, eta=eta,
                              gap=gap, fy_residual=gap, el_residuals=els,
                              transversality_residual=trans)
