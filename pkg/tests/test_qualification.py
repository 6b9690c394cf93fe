import math

import numpy as np
import pytest

from bolzadual import (Box, CallableFn, CertificateInput, MixedConstraintSpec,
                       Polyhedron, QuadraticAffine, StageSpec, TerminalCost,
                       BolzaProblem, WholeSpace, check_control_qualification,
                       check_dual_strict_feasibility,
                       check_mixed_growth_certificates,
                       check_primal_strict_feasibility,
                       find_interior_trajectory, lagrangian_eval,
                       lagrangian_minimizer, relative_interior_membership,
                       solve_dual, solve_primal)
from conftest import make_problem
from instances import random_lq


def stage(A, B, phi, Q, R, X, U, mixed=None):
    return StageSpec(A=A, B=B, phi=phi, Q=Q, R=R, state_set=X, control_set=U,
                     mixed=mixed)


class TestControlQualification:
    def test_invertible_map(self):
        s = stage([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]], WholeSpace(1),
                  WholeSpace(1))
        assert check_control_qualification(s).verdict == "Holds"

    def test_flat_unbounded_fails(self):
        s = stage([[0.0]], [[0.0]], [0.0], [[0.0]], [[0.0]], WholeSpace(1),
                  WholeSpace(1))
        rep = check_control_qualification(s)
        assert rep.verdict == "Fails"
        assert rep.witness is not None

    def test_flat_but_compact_holds(self):
        s = stage([[0.0]], [[0.0]], [0.0], [[0.0]], [[0.0]], WholeSpace(1),
                  Box([-1.0], [1.0]))
        assert check_control_qualification(s).verdict == "Holds"

    def test_holds_implies_inner_attainment(self, rng):
        prob = random_lq(rng, kinds=("all", "box"))
        assert all(check_control_qualification(s).verdict == "Holds"
                   for s in prob.stages)
        boxes = [st.control_set.bounding_box(2.0) for st in prob.stages]
        checked = 0
        trials = 0
        while checked < 1000 and trials < 4000:
            trials += 1
            t = int(rng.integers(prob.horizon))
            st = prob.stage(t)
            x = 0.4 * rng.standard_normal(prob.state_dim)
            lo, hi = boxes[t]
            v = st.A @ x + st.B @ rng.uniform(lo, hi) + st.phi
            val = lagrangian_eval(prob, t, x, v)
            if not math.isfinite(val):
                continue
            u = lagrangian_minimizer(prob, t, x, v)
            checked += 1
            assert st.control_set.contains(u, 1e-7)
            resid = v - (st.A @ x + st.B @ u + st.phi)
            assert np.max(np.abs(resid)) <= 1e-7
        assert checked >= 500


class TestInteriorTrajectory:
    def test_zero_witness_free_sets(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        rep, states, controls = find_interior_trajectory(prob)
        assert rep.verdict == "Holds"
        assert np.max(np.abs(np.concatenate(states))) <= 1e-7

    def test_forced_boundary_infeasible(self):
        # block reads x_1 = 1 but the terminal domain is [2, 3]
        prob = make_problem([[-1.0]], [[0.0]], [1.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[0.0]],
                            Box([2.0], [3.0]))
        rep, _, _ = find_interior_trajectory(prob)
        assert rep.verdict == "Fails"

    def test_equilibrium_point_variant(self):
        # A = -1, B = 1, phi = 0: constant pairs x = u solve the block
        prob = make_problem([[-1.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        rep, states, controls = find_interior_trajectory(prob)
        assert rep.verdict == "Holds"
        st = prob.stage(0)
        resid = states[1] - states[0] - (st.A @ states[0]
                                         + st.B @ controls[0] + st.phi)
        assert np.max(np.abs(resid)) <= 1e-8

    def test_slater_margin_for_mixed(self):
        mixed = MixedConstraintSpec(
            constraint=QuadraticAffine(P=np.diag([0.0, 2.0]),
                                       q=np.zeros(2), r=-1.0),
            running_cost=QuadraticAffine(P=np.zeros((2, 2)), q=np.zeros(2)))
        prob = BolzaProblem(
            [stage([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]], WholeSpace(1),
                   WholeSpace(1), mixed=mixed)],
            TerminalCost([[1.0]], WholeSpace(1)))
        rep, states, controls = find_interior_trajectory(prob)
        assert rep.verdict == "Holds"
        z = np.concatenate([states[0], controls[0]])
        assert prob.stage(0).mixed.constraint(z) < -1e-7


class TestPrimalStrictFeasibility:
    def test_mirrors_interior_trajectory(self):
        ok = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                          WholeSpace(1), WholeSpace(1), [[1.0]],
                          WholeSpace(1))
        assert check_primal_strict_feasibility(ok).verdict == "Holds"
        bad = make_problem([[-1.0]], [[0.0]], [1.0], [[0.0]], [[1.0]],
                           WholeSpace(1), WholeSpace(1), [[0.0]],
                           Box([2.0], [3.0]))
        assert check_primal_strict_feasibility(bad).verdict == "Fails"

    def test_witness_feasible_for_solver(self):
        prob = make_problem([[0.2]], [[1.0]], [0.1], [[1.0]], [[1.0]],
                            Box([-2.0], [2.0]), Box([-2.0], [2.0]), [[1.0]],
                            WholeSpace(1))
        rep = check_primal_strict_feasibility(prob)
        assert rep.verdict == "Holds"
        states, _ = rep.witness
        res = solve_primal(prob, 0, states[0])
        assert res.status == "Optimal"
        # dual attainment under (H): sampled slopes give optimal dual solves
        for eta in (-0.5, 0.0, 1.0):
            dres = solve_dual(prob, 0, [eta])
            assert dres.status == "Optimal"


class TestDualStrictFeasibility:
    def test_state_coercive_case(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        rep = check_dual_strict_feasibility(prob)
        assert rep.verdict == "Holds"
        assert rep.reason_code.startswith("(i)")

    def test_control_coercive_rank_case(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        rep = check_dual_strict_feasibility(prob)
        assert rep.verdict == "Holds"
        assert rep.reason_code.startswith("(ii)")

    def test_unconstrained_case_zero_witness(self):
        prob = make_problem([[0.5]], [[1.0]], [0.0], [[0.0]], [[0.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        rep = check_dual_strict_feasibility(prob)
        assert rep.verdict == "Holds"
        assert rep.reason_code.startswith("(iii)")
        assert all(np.all(p == 0) for p in rep.witness)

    def test_undecided_with_reason_codes(self):
        prob = make_problem([[-1.0]], [[1.0]], [0.0], [[0.0]], [[0.0]],
                            Box([-1.0], [np.inf]), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        rep = check_dual_strict_feasibility(prob)
        assert rep.verdict == "Undecided"
        assert 0 in rep.per_stage

    def test_holds_implies_primal_attainment(self, rng):
        prob = make_problem([[0.1]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1), T=3)
        assert check_dual_strict_feasibility(prob).verdict == "Holds"
        for _ in range(5):
            xi = 2.0 * rng.standard_normal(1)
            res = solve_primal(prob, 0, xi)
            assert res.status == "Optimal"


class TestMixedGrowthCertificates:
    def _mixed_problem(self, constraint, running=None):
        running = running or QuadraticAffine(P=np.zeros((2, 2)),
                                             q=np.zeros(2))
        mixed = MixedConstraintSpec(constraint=constraint,
                                    running_cost=running)
        return BolzaProblem(
            [stage([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]], WholeSpace(1),
                   WholeSpace(1), mixed=mixed)],
            TerminalCost([[1.0]], WholeSpace(1)))

    def test_bounded_controls_no_counterexample(self):
        # f = u^2 - 1 forces |u| <= 1, psi = 1 is a valid bound
        prob = self._mixed_problem(QuadraticAffine(P=np.diag([0.0, 2.0]),
                                                   q=np.zeros(2), r=-1.0))
        reports = check_mixed_growth_certificates(
            prob, CertificateInput(psi=1.0), budget=2000)
        assert reports["A"].verdict == "Undecided"
        assert reports["A"].reason_code == "no-counterexample-within-budget"

    def test_unbounded_controls_falsified(self):
        # f = -1 puts no restriction on u; psi = 1 is falsified (e.g. u = 2)
        prob = self._mixed_problem(QuadraticAffine(P=np.zeros((2, 2)),
                                                   q=np.zeros(2), r=-1.0))
        reports = check_mixed_growth_certificates(
            prob, CertificateInput(psi=1.0), budget=2000)
        assert reports["A"].verdict == "Fails"
        t, x, u = reports["A"].witness
        assert np.linalg.norm(u) > 1.0

    def test_tilted_sublevel_bound_holds(self):
        # l(x,u) = u^2 + |x|: completing the square gives |x| <= k0 + z^2/4
        running = CallableFn(lambda z: z[1] ** 2 + abs(z[0]))
        constraint = QuadraticAffine(P=np.zeros((2, 2)), q=np.zeros(2),
                                     r=-1.0)
        mixed = MixedConstraintSpec(constraint=constraint, running_cost=running)
        prob = BolzaProblem(
            [stage([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]], WholeSpace(1),
                   WholeSpace(1), mixed=mixed)],
            TerminalCost([[1.0]], WholeSpace(1)))
        kappa0 = 1.0
        certs = CertificateInput(h=lambda z: kappa0 + float(z @ z) / 4.0,
                                 kappa0=kappa0)
        reports = check_mixed_growth_certificates(prob, certs, budget=2000)
        assert reports["B"].verdict == "Undecided"
        assert reports["B"].reason_code == "no-counterexample-within-budget"


class TestRelativeInteriorOracle:
    @pytest.mark.parametrize("z,expected", [
        ([0.5], True), ([0.0], False), ([1.0], False),
    ])
    def test_box_examples(self, z, expected):
        assert relative_interior_membership(Box([0.0], [1.0]), z) is expected

    def test_degenerate_point(self):
        assert relative_interior_membership(Box([2.0], [2.0]), [2.0])

    @staticmethod
    def _vertices(C, d):
        """All vertices of a 2-D polytope by pairwise row intersection."""
        verts = []
        rows = C.shape[0]
        for i in range(rows):
            for j in range(i + 1, rows):
                M = np.array([C[i], C[j]])
                if abs(np.linalg.det(M)) < 1e-10:
                    continue
                v = np.linalg.solve(M, [d[i], d[j]])
                if np.all(C @ v <= d + 1e-9):
                    verts.append(v)
        return np.array(verts)

    def _ri_brute(self, C, d, z, eps=1e-4):
        """Sampled epsilon-ball test within the affine hull of the vertices."""
        verts = self._vertices(C, d)
        if verts.shape[0] == 0:
            return False
        if not np.all(C @ z <= d + 1e-9):
            return False
        diffs = verts - verts[0]
        rank = np.linalg.matrix_rank(diffs, tol=1e-8) if len(verts) > 1 else 0
        if rank == 0:
            return bool(np.max(np.abs(z - verts[0])) <= 1e-7)
        if rank == 1:
            direction = diffs[np.argmax(np.linalg.norm(diffs, axis=1))]
            direction = direction / np.linalg.norm(direction)
            dirs = [direction, -direction]
        else:
            angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
            dirs = [np.array([np.cos(a), np.sin(a)]) for a in angles]
        return all(np.all(C @ (z + eps * u) <= d + 1e-12) for u in dirs)

    def test_agrees_with_brute_force_on_random_polytopes(self, rng):
        # vertex enumeration cannot represent rays, so keep the random
        # polyhedra bounded (polytopes) by intersecting with a fixed box
        box_rows = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0],
                             [0.0, -1.0]])
        box_rhs = np.array([3.0, 3.0, 3.0, 3.0])
        for _ in range(20):
            rows = int(rng.integers(3, 7))
            C = rng.standard_normal((rows, 2))
            C /= np.linalg.norm(C, axis=1, keepdims=True)
            d = rng.uniform(0.3, 1.5, rows)
            if rng.random() < 0.3:
                # degenerate: pin to the line c.z = delta
                c = C[0]
                C = np.vstack([C, -c])
                d = np.append(d, -d[0])
            C = np.vstack([C, box_rows])
            d = np.concatenate([d, box_rhs])
            poly = Polyhedron(C, d)
            verts = self._vertices(*poly.halfspaces())
            if verts.shape[0] == 0:
                continue
            candidates = [verts.mean(axis=0), verts[0]]
            candidates += [0.5 * (verts[0] + v) for v in verts[1:3]]
            candidates.append(verts.mean(axis=0) + rng.normal(0, 0.1, 2))
            for z in candidates:
                expect = self._ri_brute(*poly.halfspaces(), z)
                got = relative_interior_membership(poly, z, 1e-9)
                assert got == expect, f"disagreement at {z}"
