"""Discrete-time Hamiltonian characteristics.

A state/costate pair is a Hamiltonian trajectory when every step satisfies
the saddle inclusion of the Hamiltonian, equivalently the per-step
Euler-Lagrange Fenchel-Young identity

    L_t(x_{t-1}, dx_t) + K_t(p_t, dp_t) = x_{t-1}.dp_t + dx_t.p_t,

together with the terminal coupling -p_T in the terminal subdifferential.
Membership is certified exclusively through these gaps (set-valued objects
never go through gradient formulas), so indicator and kink cases verify the
same way as smooth ones.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import qpbackend
from .conjugacy import conjugate_quadratic, dual_lagrangian_eval, dual_terminal
from .errors import DimensionMismatch, InfeasiblePoint, UnsupportedClass
from .extreal import INF
from .model import BolzaProblem, lagrangian_eval, terminal_eval
from .solver import (INFEASIBLE, OPTIMAL, duality_certificate, solve_dual,
                     solve_primal)
from .tolerances import DEFAULT_TOLS

__all__ = ["TrajectoryPair", "CharacteristicVerdict", "hamiltonian",
           "hamiltonian_inclusion_residual", "transversality_residual",
           "build_characteristic", "verify_characteristic",
           "saddle_inequality_violation"]

SUBGRADIENT = "Subgradient"
NOT_A_SUBGRADIENT = "NotASubgradient"


@dataclass
class TrajectoryPair:
    tau: int
    states: list
    costates: list
    ham_residuals: list = field(default_factory=list)
    el_residuals: list = field(default_factory=list)
    transversality_residual: float = math.inf
    gap: float = math.inf
    status: str = NOT_A_SUBGRADIENT

    def __post_init__(self):
        if self.states and len(self.states) != len(self.costates):
            raise DimensionMismatch("state and costate arcs differ in length")


def hamiltonian(problem: BolzaProblem, t, x, p, tols=DEFAULT_TOLS):
    """H_t(x, p) = sup_v { p.v - L_t(x, v) }; -inf exactly off the state set."""
    stage = problem.stage(t)
    x = np.asarray(x, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if x.size != stage.n or p.size != stage.n:
        raise DimensionMismatch("hamiltonian arguments must be n-vectors")
    if not stage.state_set.contains(x, tols.feas):
        return -INF
    base = float(-0.5 * x @ (stage.Q @ x) + p @ (stage.A @ x + stage.phi))
    if stage.mixed is None:
        sup_u = conjugate_quadratic(stage.R, stage.control_set,
                                    stage.B.T @ p, tols)
        if sup_u == INF:
            return INF
        return base + sup_u
    return base + _mixed_control_sup(stage, x, p, tols)


def _mixed_control_sup(stage, x, p, tols):
    """sup over the control slice of u.B'p - |u|_R^2/2 - l(x, u)."""
    if not stage.mixed.is_quadratic():
        raise UnsupportedClass("hamiltonian needs quadratic mixed terms")
    n, m = stage.n, stage.m
    Pxx, Pxu, Puu, qx, qu = stage.mixed.running_cost.split(n)
    H = stage.R + Puu
    lin = stage.B.T @ p - (qu + Pxu.T @ x)
    const = -float(0.5 * x @ (Pxx @ x) + qx @ x + stage.mixed.running_cost.r)
    Fxx, Fxu, Fuu, fqx, fqu = stage.mixed.constraint.split(n)
    f_lin = fqu + Fxu.T @ x
    f_const = float(0.5 * x @ (Fxx @ x) + fqx @ x + stage.mixed.constraint.r)
    C, d = stage.control_set.halfspaces()
    socs = []
    if np.max(np.abs(Fuu)) < tols.zero:
        if np.max(np.abs(f_lin)) < tols.zero:
            if f_const > tols.feas:
                return -INF
        else:
            C = np.vstack([C, f_lin[None, :]]) if C.shape[0] else f_lin[None, :]
            d = np.append(d, -f_const)
    else:
        socs.append(qpbackend.soc_rows_from_quadratic(Fuu, f_lin, f_const))
    res = qpbackend.solve_qp(P=H, q=-lin, C_ub=C if C.shape[0] else None,
                             d_ub=d if C.shape[0] else None, socs=socs,
                             n=m, tols=tols)
    if res.status == qpbackend.UNBOUNDED:
        return INF
    if res.status == qpbackend.INFEASIBLE:
        return -INF
    return const - res.value


def hamiltonian_inclusion_residual(problem, t, x_prev, p_t, dp, dx,
                                   tols=DEFAULT_TOLS):
    """Gap certifying (-dp, dx) in the saddle subdifferential of H_t.

    Computed through the equivalent Euler-Lagrange Fenchel-Young identity.
    Raises :class:`InfeasiblePoint` when both sides are infinite (the gap is
    then undefined); a single infinite side reports +inf (not a member).
    """
    x_prev = np.asarray(x_prev, dtype=float).ravel()
    p_t = np.asarray(p_t, dtype=float).ravel()
    dp = np.asarray(dp, dtype=float).ravel()
    dx = np.asarray(dx, dtype=float).ravel()
    L = lagrangian_eval(problem, t, x_prev, dx, tols)
    K = dual_lagrangian_eval(problem, t, p_t, dp, tols)
    if L == INF and K == INF:
        raise InfeasiblePoint(
            "both L and K are infinite at this step: residual undefined")
    if L == INF or K == INF:
        return INF
    return L + K - float(x_prev @ dp + dx @ p_t)


def _hamiltonian_split_residual(problem, t, x_prev, p_t, dp, dx, tols):
    """Same gap via the Hamiltonian value: the two one-sided saddle gaps."""
    H = hamiltonian(problem, t, x_prev, p_t, tols)
    if not math.isfinite(H):
        return hamiltonian_inclusion_residual(problem, t, x_prev, p_t, dp,
                                              dx, tols)
    L = lagrangian_eval(problem, t, x_prev, dx, tols)
    K = dual_lagrangian_eval(problem, t, p_t, dp, tols)
    if L == INF or K == INF:
        return INF
    gap_v = L + H - float(p_t @ dx)          # dx in the p-slot subdifferential
    gap_x = K - float(x_prev @ dp) - H       # -dp in the x-slot subdifferential
    return gap_v + gap_x


def transversality_residual(problem, x_T, p_T, tols=DEFAULT_TOLS):
    """Gap certifying -p_T in the terminal subdifferential at x_T."""
    x_T = np.asarray(x_T, dtype=float).ravel()
    p_T = np.asarray(p_T, dtype=float).ravel()
    g = terminal_eval(problem, x_T, tols)
    if g == INF:
        raise InfeasiblePoint("x_T outside the terminal domain")
    gstar = dual_terminal(problem, p_T, tols)
    if gstar == INF:
        return INF
    return g + gstar + float(x_T @ p_T)


def saddle_inequality_violation(problem, t, x_bar, p_bar, dp, dx,
                                x_samples, p_samples, tols=DEFAULT_TOLS):
    """Max violation of the explicit saddle inequalities over sample points.

    Checks H(x, p_bar) + dp.(x - x_bar) <= H(x_bar, p_bar) <= H(x_bar, p)
    - dx.(p - p_bar) for each sampled x and p; the oracle route for the
    inclusion residual equivalence.
    """
    x_bar = np.asarray(x_bar, dtype=float).ravel()
    p_bar = np.asarray(p_bar, dtype=float).ravel()
    Hbar = hamiltonian(problem, t, x_bar, p_bar, tols)
    if not math.isfinite(Hbar):
        return INF
    worst = -INF
    for x in x_samples:
        x = np.asarray(x, dtype=float).ravel()
        Hx = hamiltonian(problem, t, x, p_bar, tols)
        if Hx == -INF:
            continue
        worst = max(worst, Hx + float(dp @ (x - x_bar)) - Hbar)
    for p in p_samples:
        p = np.asarray(p, dtype=float).ravel()
        Hp = hamiltonian(problem, t, x_bar, p, tols)
        if Hp == INF:
            continue
        worst = max(worst, Hbar - (Hp - float(dx @ (p - p_bar))))
    return worst


def _pair_residuals(problem, pair, tols):
    T = problem.horizon
    hams, els = [], []
    for k, t in enumerate(range(pair.tau, T)):
        x_prev = pair.states[k]
        dx = pair.states[k + 1] - x_prev
        p_t = pair.costates[k + 1]
        dp = p_t - pair.costates[k]
        try:
            el = hamiltonian_inclusion_residual(problem, t, x_prev, p_t, dp,
                                                dx, tols)
        except InfeasiblePoint:
            el = INF
        els.append(el)
        ham = _hamiltonian_split_residual(problem, t, x_prev, p_t, dp, dx, tols)
        hams.append(ham)
    try:
        trans = transversality_residual(problem, pair.states[-1],
                                        pair.costates[-1], tols)
    except InfeasiblePoint:
        trans = INF
    return hams, els, trans


def build_characteristic(problem, tau, xi, eta, tols=DEFAULT_TOLS):
    """Pair the primal and dual optimal arcs from (tau, xi) and (tau, eta).

    When eta is a subgradient of the value function at xi (certificate gap
    within tolerance) every inclusion residual and the transversality
    residual certify the pair as a Hamiltonian trajectory; otherwise the
    pair is returned with a NotASubgradient status.
    """
    xi = np.asarray(xi, dtype=float).ravel()
    eta = np.asarray(eta, dtype=float).ravel()
    pres = solve_primal(problem, tau, xi, tols)
    dres = solve_dual(problem, tau, eta, tols)
    if pres.status == INFEASIBLE or dres.status == INFEASIBLE:
        return TrajectoryPair(tau=tau, states=[], costates=[],
                              gap=INF, status=f"Primal{pres.status}/Dual{dres.status}")
    if pres.status != OPTIMAL or dres.status != OPTIMAL:
        return TrajectoryPair(tau=tau, states=pres.states, costates=dres.states,
                              gap=INF, status=f"Primal{pres.status}/Dual{dres.status}")
    gap = pres.value + dres.value - float(xi @ eta)
    pair = TrajectoryPair(tau=tau, states=pres.states, costates=dres.states,
                          gap=gap)
    hams, els, trans = _pair_residuals(problem, pair, tols)
    pair.ham_residuals = hams
    pair.el_residuals = els
    pair.transversality_residual = trans
    scale = 1.0 + abs(pres.value) + abs(dres.value) + abs(float(xi @ eta))
    pair.status = SUBGRADIENT if gap <= tols.cert * scale else NOT_A_SUBGRADIENT
    return pair


@dataclass
class CharacteristicVerdict:
    passed: bool
    epsilon: float
    step_residuals: list
    transversality_residual: float
    fy_gap: float
    failures: list
    message: str = ""


def verify_characteristic(problem, pair: TrajectoryPair, eta,
                          tols=DEFAULT_TOLS):
    """Check all per-step inclusions and transversality for a given pair.

    A passing pair certifies eta as an epsilon-subgradient of the value
    function at x_tau with epsilon the accumulated residual; the
    independently computed Fenchel-Young gap is reported alongside.
    """
    eta = np.asarray(eta, dtype=float).ravel()
    if not pair.states:
        return CharacteristicVerdict(passed=False, epsilon=INF,
                                     step_residuals=[], failures=[],
                                     transversality_residual=INF, fy_gap=INF,
                                     message="empty trajectory pair")
    if np.max(np.abs(pair.costates[0] + eta)) > 1e-12 * (1 + np.max(np.abs(eta))):
        raise DimensionMismatch("pair does not start at costate -eta")
    hams, els, trans = _pair_residuals(problem, pair, tols)
    scale = 1.0
    finite = [r for r in els if math.isfinite(r)] + (
        [trans] if math.isfinite(trans) else [])
    if finite:
        scale = 1.0 + max(abs(r) for r in finite)
    failures = [k for k, r in enumerate(els) if not r <= tols.cert * scale]
    if not trans <= tols.cert * scale:
        failures.append(len(els))
    epsilon = sum(els) + trans if all(map(math.isfinite, els + [trans])) else INF
    cert = duality_certificate(problem, pair.tau, pair.states[0], eta, tols)
    passed = not failures
    msg = "all inclusions hold" if passed else \
        f"failed at steps {failures} (last index = transversality)"
    return CharacteristicVerdict(passed=passed, epsilon=epsilon,
                                 step_residuals=els,
                                 transversality_residual=trans,
                                 fy_gap=cert.gap, failures=failures,
                                 message=msg)
