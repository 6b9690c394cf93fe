import math

import numpy as np
import pytest

from bolzadual import (BolzaProblem, Box, InfeasiblePoint, StageSpec,
                       TerminalCost, TrajectoryPair, WholeSpace,
                       build_characteristic, hamiltonian,
                       hamiltonian_inclusion_residual,
                       saddle_inequality_violation, transversality_residual,
                       value_subgradient, verify_characteristic)
from conftest import make_problem
from instances import random_nice


class TestHamiltonian:
    def test_pure_control_cost(self, worked):
        for p in (-1.0, 0.0, 2.0):
            assert hamiltonian(worked, 0, [3.0], [p]) == pytest.approx(
                0.5 * p * p)

    def test_state_cost_subtracts(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        assert hamiltonian(prob, 0, [2.0], [1.0]) == pytest.approx(0.5 - 2.0)

    def test_support_function_case(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[0.0]],
                            WholeSpace(1), Box([-1.0], [1.0]), [[1.0]],
                            WholeSpace(1))
        for p in (-2.0, 0.5, 3.0):
            assert hamiltonian(prob, 0, [0.0], [p]) == pytest.approx(abs(p))

    def test_minus_infinity_off_state_set(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            Box([0.0], [1.0]), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        assert hamiltonian(prob, 0, [2.0], [0.0]) == -math.inf


class TestInclusionResidual:
    def test_worked_trajectory_step(self, worked):
        res = hamiltonian_inclusion_residual(worked, 0, [1.0], [-0.5],
                                             [0.0], [-0.5])
        assert res == pytest.approx(0.0, abs=1e-12)

    def test_perturbed_costate_strictly_positive(self, worked):
        # constant costate perturbed from -0.5 to -0.4: gap is exactly 0.005
        res = hamiltonian_inclusion_residual(worked, 0, [1.0], [-0.4],
                                             [0.0], [-0.5])
        assert res == pytest.approx(0.005, abs=1e-12)
        assert res > 0.0

    def test_zero_trajectory(self, worked):
        res = hamiltonian_inclusion_residual(worked, 0, [0.0], [0.0],
                                             [0.0], [0.0])
        assert res == pytest.approx(0.0, abs=1e-12)

    def test_both_sides_infinite_raises(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            Box([0.0], [np.inf]), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        # x outside the state set makes L infinite; the unbounded state
        # direction with w > 0 makes K infinite
        with pytest.raises(InfeasiblePoint):
            hamiltonian_inclusion_residual(prob, 0, [-1.0], [0.0],
                                           [0.5], [0.0])

    def test_single_infinite_side_reports_inf(self, worked):
        # K(p, w) infinite for w != 0, L finite
        res = hamiltonian_inclusion_residual(worked, 0, [1.0], [0.0],
                                             [0.5], [0.0])
        assert res == math.inf


class TestTransversality:
    def test_smooth_quadratic(self, worked):
        assert transversality_residual(worked, [0.5], [-0.5]) == \
            pytest.approx(0.0, abs=1e-12)

    def test_zero_point(self, worked):
        assert transversality_residual(worked, [0.0], [0.0]) == \
            pytest.approx(0.0, abs=1e-12)

    def test_indicator_normal_cone_face(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[0.0]],
                            Box([-1.0], [1.0]))
        # g = indicator of [-1,1]: residual 0 + support(2) - 2 = 0
        assert transversality_residual(prob, [1.0], [-2.0]) == \
            pytest.approx(0.0, abs=1e-12)

    def test_outside_domain_raises(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[0.0]],
                            Box([-1.0], [1.0]))
        with pytest.raises(InfeasiblePoint):
            transversality_residual(prob, [1.5], [0.0])


class TestBuildCharacteristic:
    def test_worked_pair(self, worked):
        pair = build_characteristic(worked, 0, [1.0], [0.5])
        assert pair.status == "Subgradient"
        assert pair.states[0] == pytest.approx([1.0])
        assert pair.states[1] == pytest.approx([0.5], abs=1e-8)
        assert pair.costates[0] == pytest.approx([-0.5])
        assert pair.costates[1] == pytest.approx([-0.5], abs=1e-8)
        assert max(pair.ham_residuals) <= 1e-8
        assert max(pair.el_residuals) <= 1e-8
        assert pair.transversality_residual <= 1e-8

    def test_zero_pair(self, worked):
        pair = build_characteristic(worked, 0, [0.0], [0.0])
        assert pair.status == "Subgradient"
        assert np.max(np.abs(np.concatenate(pair.states))) <= 1e-9

    def test_not_a_subgradient(self, worked):
        pair = build_characteristic(worked, 0, [1.0], [0.0])
        assert pair.status == "NotASubgradient"
        assert pair.gap == pytest.approx(0.25, abs=1e-8)


class TestVerifyCharacteristic:
    def test_worked_pair_passes(self, worked):
        pair = build_characteristic(worked, 0, [1.0], [0.5])
        verdict = verify_characteristic(worked, pair, [0.5])
        assert verdict.passed
        assert verdict.epsilon <= 1e-8
        assert verdict.fy_gap <= verdict.epsilon + 1e-8

    def test_perturbed_costate_fails_with_positive_gap(self, worked):
        pair = build_characteristic(worked, 0, [1.0], [0.5])
        bad = TrajectoryPair(tau=0, states=pair.states,
                             costates=[pair.costates[0],
                                       pair.costates[1] + 0.1])
        verdict = verify_characteristic(worked, bad, [0.5])
        assert not verdict.passed
        assert verdict.failures
        assert max(verdict.step_residuals) > 1e-4

    def test_trivial_horizon_constant_pair(self):
        # g = 0, L = |v|^2/2: any xi with eta = 0, constant state, zero costate
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[0.0]],
                            WholeSpace(1))
        pair = TrajectoryPair(tau=0, states=[np.array([0.7]), np.array([0.7])],
                              costates=[np.zeros(1), np.zeros(1)])
        verdict = verify_characteristic(prob, pair, [0.0])
        assert verdict.passed
        assert verdict.epsilon <= 1e-12

    def test_forward_direction_epsilon_bounds_gap(self, rng):
        for _ in range(5):
            prob = random_nice(rng)
            xi = 0.3 * rng.standard_normal(prob.state_dim)
            try:
                vs = value_subgradient(prob, 0, xi)
            except Exception:
                continue
            pair = build_characteristic(prob, 0, xi, vs.eta)
            verdict = verify_characteristic(prob, pair, vs.eta)
            if verdict.passed:
                assert verdict.fy_gap <= verdict.epsilon + 1e-8


class TestSaddleEquivalence:
    def test_residual_matches_explicit_inequalities(self, rng):
        prob = make_problem([[0.2]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), Box([-2.0], [2.0]), [[1.0]],
                            WholeSpace(1))
        xs = [np.array([v]) for v in np.linspace(-2, 2, 9)]
        ps = [np.array([v]) for v in np.linspace(-2, 2, 9)]
        vs = value_subgradient(prob, 0, [0.8])
        pair = build_characteristic(prob, 0, [0.8], vs.eta)
        x0, x1 = pair.states
        p0, p1 = pair.costates
        # member: explicit inequalities hold up to tolerance
        viol = saddle_inequality_violation(prob, 0, x0, p1, p1 - p0, x1 - x0,
                                           xs, ps)
        assert viol <= 1e-6
        # non-member: residual and the inequalities both flag it
        bad_dx = x1 - x0 + 0.4
        res = hamiltonian_inclusion_residual(prob, 0, x0, p1, p1 - p0, bad_dx)
        viol_bad = saddle_inequality_violation(prob, 0, x0, p1, p1 - p0,
                                               bad_dx, xs, ps)
        assert res > 1e-3
        assert viol_bad > 1e-3

    def test_split_route_agrees_with_direct_route(self, worked):
        pair = build_characteristic(worked, 0, [1.0], [0.5])
        assert pair.ham_residuals[0] == pytest.approx(pair.el_residuals[0],
                                                      abs=1e-10)


class TestShiftProperty:
    def test_tail_pair_certifies_tail_subgradient(self, rng):
        # a characteristic restricted to [t, T] certifies eta_t = -p_t for
        # the tail problem: the subgradient-evolution content of the method
        for _ in range(3):
            prob = random_nice(rng, T_max=4)
            if prob.horizon < 2:
                continue
            xi = 0.3 * rng.standard_normal(prob.state_dim)
            try:
                vs = value_subgradient(prob, 0, xi)
            except Exception:
                continue
            pair = build_characteristic(prob, 0, xi, vs.eta)
            if pair.status != "Subgradient":
                continue
            for t in range(1, prob.horizon):
                tail = BolzaProblem(prob.stages[t:], prob.terminal)
                tail_pair = TrajectoryPair(
                    tau=0, states=pair.states[t:], costates=pair.costates[t:])
                eta_t = -pair.costates[t]
                verdict = verify_characteristic(tail, tail_pair, eta_t)
                assert verdict.passed
                assert verdict.fy_gap <= verdict.epsilon + 1e-6
