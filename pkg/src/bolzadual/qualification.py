"""Qualification-condition deciders.

Covers the control-coercivity condition of the structured class, strict
feasibility of the primal dynamics through an interior-trajectory LP, the
dual strict-feasibility case analysis, and sampling falsification of the
mixed-class growth certificates.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import qpbackend
from .errors import DimensionMismatch
from .model import BolzaProblem
from .sets import AffineImageSet, Box, Polyhedron, WholeSpace
from .tolerances import DEFAULT_SEED, DEFAULT_TOLS

__all__ = [
    "QualificationReport", "CertificateInput", "check_control_qualification",
    "find_interior_trajectory", "check_primal_strict_feasibility",
    "check_dual_strict_feasibility", "check_mixed_growth_certificates",
    "relative_interior_membership",
]

HOLDS = "Holds"
FAILS = "Fails"
UNDECIDED = "Undecided"


@dataclass
class QualificationReport:
    condition: str
    verdict: str
    reason_code: str = ""
    witness: object = None
    per_stage: dict = field(default_factory=dict)

    def __str__(self):
        parts = [self.condition, self.verdict]
        if self.reason_code:
            parts.append(self.reason_code)
        return " ".join(parts)


@dataclass
class CertificateInput:
    """User-supplied certificates for the mixed-class growth conditions.

    ``psi`` bounds the feasible control norm per state; ``h``/``kappa0``
    bound the state norm on sublevel sets of the tilted running cost.  These
    are assertions: the checker can only falsify them by sampling.
    """

    psi: object = None        # callable x -> bound, constant, or per-stage list
    h: object = None          # callable z -> bound
    kappa0: float = 0.0
    asserts_compact_controls: bool = False
    asserts_full_rank: bool = False

    def psi_at(self, t, x):
        psi = self.psi
        if isinstance(psi, (list, tuple)):
            psi = psi[t]
        if callable(psi):
            return float(psi(np.asarray(x, dtype=float)))
        return float(psi)


def _kernel_basis(*mats, tol=1e-10):
    """Orthonormal basis of the intersection of the kernels of the matrices."""
    stacked = np.vstack([np.atleast_2d(np.asarray(M, dtype=float))
                         for M in mats])
    if np.max(np.abs(stacked)) == 0.0:
        return np.eye(stacked.shape[1])
    _, s, Vt = np.linalg.svd(stacked)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return Vt[rank:].T


def check_control_qualification(stage, tols=DEFAULT_TOLS):
    """Triviality of ker(B) ∩ ker(R) ∩ recession(control set).

    Guarantees attainment and lower semicontinuity of the stage Lagrangian's
    inner infimum.
    """
    N = _kernel_basis(stage.B, stage.R)
    if N.shape[1] == 0:
        return QualificationReport("CQ", HOLDS, reason_code="trivial-kernel")
    C = stage.control_set.recession_halfspaces()
    k = N.shape[1]
    A_ub = C @ N if C.shape[0] else None
    for i in range(k):
        for sign in (1.0, -1.0):
            c = np.zeros(k)
            c[i] = -sign
            res = linprog(c, A_ub=A_ub,
                          b_ub=np.zeros(C.shape[0]) if C.shape[0] else None,
                          bounds=[(-1.0, 1.0)] * k, method="highs")
            if res.status == 0 and -res.fun > 1e-8:
                ray = N @ res.x
                return QualificationReport("CQ", FAILS,
                                           reason_code="unbounded-flat-ray",
                                           witness=ray / np.linalg.norm(ray))
    return QualificationReport("CQ", HOLDS, reason_code="kernel-meets-recession-trivially")


def _ri_rows(set_, offset, width, nvar):
    """Slack-coupled inequality rows and implicit-equality rows for one set."""
    C, d = set_.halfspaces()
    ineq_rows, ineq_rhs, eq_rows, eq_rhs = [], [], [], []
    if C.shape[0] == 0:
        return ineq_rows, ineq_rhs, eq_rows, eq_rhs
    norms = np.linalg.norm(C, axis=1)
    norms[norms == 0] = 1.0
    implicit = set()
    if isinstance(set_, Polyhedron):
        implicit = set(set_.implicit_equalities)
    if isinstance(set_, Box):
        degenerate = {}
        for i in range(set_.dim):
            if set_.lower[i] == set_.upper[i]:
                degenerate[i] = set_.lower[i]
        row_idx = 0
        for i in range(set_.dim):
            up_fin = np.isfinite(set_.upper[i])
            lo_fin = np.isfinite(set_.lower[i])
            if i in degenerate:
                row = np.zeros(nvar)
                row[offset + i] = 1.0
                eq_rows.append(row)
                eq_rhs.append(degenerate[i])
                row_idx += int(up_fin) + int(lo_fin)
                continue
            if up_fin:
                row = np.zeros(nvar)
                row[offset + i] = 1.0
                row[-1] = 1.0
                ineq_rows.append(row)
                ineq_rhs.append(set_.upper[i])
                row_idx += 1
            if lo_fin:
                row = np.zeros(nvar)
                row[offset + i] = -1.0
                row[-1] = 1.0
                ineq_rows.append(row)
                ineq_rhs.append(-set_.lower[i])
                row_idx += 1
        return ineq_rows, ineq_rhs, eq_rows, eq_rhs
    for i in range(C.shape[0]):
        row = np.zeros(nvar)
        row[offset:offset + width] = C[i] / norms[i]
        if i in implicit:
            eq_rows.append(row)
            eq_rhs.append(d[i] / norms[i])
        else:
            row[-1] = 1.0
            ineq_rows.append(row)
            ineq_rhs.append(d[i] / norms[i])
    return ineq_rows, ineq_rhs, eq_rows, eq_rhs


def find_interior_trajectory(problem: BolzaProblem, tols=DEFAULT_TOLS):
    """Solve the strict-feasibility system with maximum-slack selection.

    Searches (x_0..x_T, u_0..u_{T-1}) satisfying every dynamics block and
    lying in the relative interiors of the stage sets and terminal domain,
    by maximizing the minimum normalized slack (capped at 1).  Mixed stages
    additionally require a strict margin on the joint constraint.

    Returns (report, states, controls); the report verdict is Holds with the
    witness attached, Fails when the system is solvable only on boundaries,
    or Infeasible reason when no solution exists at all.
    """
    T = problem.horizon
    n, m = problem.state_dim, problem.control_dim
    nvar = (T + 1) * n + T * m + 1  # trailing variable is the slack s
    x_off = lambda t: t * n
    u_off = lambda t: (T + 1) * n + t * m

    eq_rows, eq_rhs = [], []
    for t in range(T):
        st = problem.stage(t)
        block = np.zeros((n, nvar))
        block[:, x_off(t):x_off(t) + n] = st.A + np.eye(n)
        block[:, x_off(t + 1):x_off(t + 1) + n] = -np.eye(n)
        block[:, u_off(t):u_off(t) + m] = st.B
        eq_rows.append(block)
        eq_rhs.append(-st.phi)

    ineq_rows, ineq_rhs = [], []
    for t in range(T):
        st = problem.stage(t)
        for set_, off, width in ((st.state_set, x_off(t), n),
                                 (st.control_set, u_off(t), m)):
            ir, ib, er, eb = _ri_rows(set_, off, width, nvar)
            ineq_rows.extend(ir)
            ineq_rhs.extend(ib)
            if er:
                eq_rows.append(np.vstack(er))
                eq_rhs.append(np.asarray(eb))
    ir, ib, er, eb = _ri_rows(problem.terminal.set, x_off(T), n, nvar)
    ineq_rows.extend(ir)
    ineq_rhs.extend(ib)
    if er:
        eq_rows.append(np.vstack(er))
        eq_rhs.append(np.asarray(eb))

    A_eq = np.vstack(eq_rows)
    b_eq = np.concatenate([np.atleast_1d(r) for r in eq_rhs])
    c = np.zeros(nvar)
    c[-1] = -1.0  # maximize s
    socs = []
    has_quad_mixed = False
    for t in range(T):
        st = problem.stage(t)
        if st.mixed is None:
            continue
        if not st.mixed.is_quadratic():
            return (QualificationReport("eq-sys", UNDECIDED,
                                        reason_code="callable-mixed-terms"),
                    None, None)
        has_quad_mixed = True
        Pf, qf, rf = (st.mixed.constraint.P, st.mixed.constraint.q,
                      st.mixed.constraint.r)
        Pfull = np.zeros((nvar, nvar))
        idx = np.r_[x_off(t):x_off(t) + n, u_off(t):u_off(t) + m]
        Pfull[np.ix_(idx, idx)] = Pf
        qfull = np.zeros(nvar)
        qfull[idx] = qf
        qfull[-1] = 1.0  # f(x,u) + s <= 0, the Slater margin
        socs.append(qpbackend.soc_rows_from_quadratic(Pfull, qfull, rf))

    cap = np.zeros(nvar)
    cap[-1] = 1.0
    C_ub = np.vstack(ineq_rows + [cap]) if ineq_rows else cap[None, :]
    d_ub = np.concatenate([np.asarray(ineq_rhs), [1.0]])

    if has_quad_mixed:
        res = qpbackend.solve_qp(P=None, q=c, A_eq=A_eq, b_eq=b_eq,
                                 C_ub=C_ub, d_ub=d_ub, socs=socs,
                                 n=nvar, tols=tols)
        if res.status != qpbackend.OPTIMAL:
            return (QualificationReport("eq-sys", FAILS,
                                        reason_code="system-infeasible"),
                    None, None)
        z, slack = res.x, -res.value
    else:
        res = linprog(c, A_ub=C_ub, b_ub=d_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(None, None)] * nvar, method="highs")
        if res.status != 0:
            return (QualificationReport("eq-sys", FAILS,
                                        reason_code="system-infeasible"),
                    None, None)
        z, slack = res.x, -res.fun

    states = [z[x_off(t):x_off(t) + n].copy() for t in range(T + 1)]
    controls = [z[u_off(t):u_off(t) + m].copy() for t in range(T)]
    if slack <= tols.ri:
        return (QualificationReport("eq-sys", FAILS,
                                    reason_code="no-strict-slack",
                                    witness=(states, controls)),
                states, controls)
    return (QualificationReport("eq-sys", HOLDS,
                                reason_code=f"max-min-slack={slack:.3e}",
                                witness=(states, controls)),
            states, controls)


def check_primal_strict_feasibility(problem, tols=DEFAULT_TOLS):
    """Strict feasibility of the primal dynamics (interior witness sequence).

    Solves the interior-trajectory program, then re-verifies the witness
    directly: every state and control in the relative interior of its set,
    the terminal state in the relative interior of the terminal domain, and
    each increment in the relative interior of the feasible-velocity set via
    the affine-image formula.
    """
    report, states, controls = find_interior_trajectory(problem, tols)
    if report.verdict != HOLDS:
        return QualificationReport("H", report.verdict,
                                   reason_code=report.reason_code,
                                   witness=report.witness)
    T = problem.horizon
    checks = {}
    ok = True
    for t in range(T):
        st = problem.stage(t)
        cx = st.state_set.ri_contains(states[t], tols.ri / 10)
        cu = st.control_set.ri_contains(controls[t], tols.ri / 10)
        image = AffineImageSet(st.B, st.A @ states[t] + st.phi, st.control_set)
        cv = image.ri_contains(states[t + 1] - states[t], tols.ri / 10)
        if st.mixed is not None and st.mixed.is_quadratic():
            margin = st.mixed.constraint(np.concatenate([states[t], controls[t]]))
            cm = margin <= -tols.ri / 10
        else:
            cm = True
        checks[t] = dict(state=cx, control=cu, velocity=cv, mixed=cm)
        ok = ok and cx and cu and cv and cm
    cend = problem.terminal.set.ri_contains(states[T], tols.ri / 10)
    checks["terminal"] = cend
    ok = ok and cend
    if not ok:
        return QualificationReport("H", FAILS, reason_code="witness-recheck-failed",
                                   per_stage=checks)
    return QualificationReport("H", HOLDS, reason_code=report.reason_code,
                               witness=(states, controls), per_stage=checks)


def _is_pd(M, tol=1e-10):
    M = np.atleast_2d(M)
    return M.shape[0] > 0 and float(np.min(np.linalg.eigvalsh(M))) > tol


def _full_rank(M, tol=1e-10):
    s = np.linalg.svd(M, compute_uv=False)
    return bool(np.all(s > tol * max(1.0, s[0])))


def check_dual_strict_feasibility(problem, tols=DEFAULT_TOLS):
    """Dual strict feasibility via the structured-class case analysis.

    Case (i): state cost definite or state set compact at every stage.
    Case (ii): control cost definite or control set compact at every stage,
    with ``A' + I`` of full rank.  Case (iii): fully unconstrained, where
    the dual state set is a vector space and the zero costate sequence is a
    strict witness.  Anything else is reported Undecided with per-stage
    reason codes.
    """
    per_stage = {}
    if any(s.mixed is not None for s in problem.stages):
        return QualificationReport("H'", UNDECIDED,
                                   reason_code="mixed-stages-use-growth-certificates")
    n = problem.state_dim
    case_i = True
    case_ii = True
    case_iii = True
    for t, st in enumerate(problem.stages):
        q_pd = _is_pd(st.Q)
        x_cpt = st.state_set.is_bounded()
        r_pd = _is_pd(st.R)
        u_cpt = st.control_set.is_bounded()
        rank_ok = _full_rank(st.A.T + np.eye(n))
        per_stage[t] = dict(state_coercive=q_pd or x_cpt,
                            control_coercive=r_pd or u_cpt,
                            rank_ok=rank_ok,
                            unconstrained=st.state_set.is_whole_space()
                            and st.control_set.is_whole_space())
        case_i = case_i and (q_pd or x_cpt)
        case_ii = case_ii and (r_pd or u_cpt) and rank_ok
        case_iii = case_iii and per_stage[t]["unconstrained"]
    if case_i:
        return QualificationReport("H'", HOLDS, reason_code="(i)-state-coercive",
                                   per_stage=per_stage)
    if case_ii:
        return QualificationReport("H'", HOLDS,
                                   reason_code="(ii)-control-coercive-full-rank",
                                   per_stage=per_stage)
    if case_iii:
        witness = [np.zeros(n) for _ in range(problem.horizon + 1)]
        return QualificationReport("H'", HOLDS,
                                   reason_code="(iii)-unconstrained-vector-space",
                                   witness=witness, per_stage=per_stage)
    return QualificationReport("H'", UNDECIDED, reason_code="no-matching-subcase",
                               per_stage=per_stage)


def _sample_in_set(rng, set_, radius=8.0):
    lo, hi = set_.bounding_box(radius)
    return rng.uniform(lo, hi)


def check_mixed_growth_certificates(problem, certs: CertificateInput,
                                    budget=10_000, seed=DEFAULT_SEED,
                                    tols=DEFAULT_TOLS):
    """Sampling falsification of the mixed-class growth certificates.

    The control-boundedness bound psi and the tilted-sublevel state bound
    (h, kappa0) are existential assertions over unspecified functions; they
    can only be refuted by a counterexample.  No violation within the budget
    reports Undecided ("holds up to sampling"), never Holds.
    """
    rng = np.random.default_rng(seed)
    mixed_stages = [t for t, s in enumerate(problem.stages) if s.mixed is not None]
    if not mixed_stages:
        raise DimensionMismatch("problem has no mixed stages")
    out = {}
    per_stage_budget = max(1, budget // max(1, len(mixed_stages)))

    if certs.psi is not None:
        verdict, reason, witness = UNDECIDED, "no-counterexample-within-budget", None
        for t in mixed_stages:
            st = problem.stage(t)
            hits = 0
            for _ in range(per_stage_budget):
                x = _sample_in_set(rng, st.state_set)
                u = _sample_in_set(rng, st.control_set)
                if not (st.state_set.contains(x) and st.control_set.contains(u)):
                    continue
                if st.mixed.constraint(np.concatenate([x, u])) > 0:
                    continue
                hits += 1
                if np.linalg.norm(u) > certs.psi_at(t, x) + tols.feas:
                    verdict, reason = FAILS, "control-bound-violated"
                    witness = (t, x, u)
                    break
            if verdict == FAILS:
                break
        out["A"] = QualificationReport("A", verdict, reason_code=reason,
                                       witness=witness)

    if certs.h is not None:
        verdict, reason, witness = UNDECIDED, "no-counterexample-within-budget", None
        m = problem.control_dim
        for t in mixed_stages:
            st = problem.stage(t)
            for _ in range(per_stage_budget):
                z = rng.standard_normal(m) * rng.choice([0.3, 1.0, 3.0])
                x = _sample_in_set(rng, st.state_set)
                u = _sample_in_set(rng, st.control_set)
                if not (st.state_set.contains(x) and st.control_set.contains(u)):
                    continue
                if st.mixed.constraint(np.concatenate([x, u])) > 0:
                    continue
                tilted = st.mixed.running_cost(np.concatenate([x, u])) - float(z @ u)
                if tilted <= certs.kappa0 and \
                        np.linalg.norm(x) > float(certs.h(z)) + tols.feas:
                    verdict, reason = FAILS, "state-bound-violated"
                    witness = (t, x, u, z)
                    break
            if verdict == FAILS:
                break
        out["B"] = QualificationReport("B", verdict, reason_code=reason,
                                       witness=witness)
    return out


def relative_interior_membership(set_, z, tol_ri=DEFAULT_TOLS.ri):
    """Membership of z in the relative interior of the set."""
    return set_.ri_contains(z, tol_ri)
