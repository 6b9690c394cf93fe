import math

import numpy as np
import pytest

from bolzadual import (Box, DegenerateInput, GridFunction, Polyhedron,
                       WholeSpace, conjugate_quadratic, dual_lagrangian_eval,
                       dual_state_feasible, dual_terminal,
                       dual_velocity_feasible, dualize, grid_conjugate,
                       lagrangian_eval)
from conftest import make_problem
from instances import random_lq


class TestConjugateQuadratic:
    def test_self_conjugate(self):
        assert conjugate_quadratic(np.eye(1), WholeSpace(1), [3.0]) == \
            pytest.approx(4.5)

    def test_support_function_of_box(self):
        assert conjugate_quadratic(np.zeros((1, 1)), Box([-1.0], [1.0]),
                                   [2.0]) == pytest.approx(2.0)

    def test_scaled_quadratic(self):
        assert conjugate_quadratic(np.array([[2.0]]), WholeSpace(1),
                                   [1.0]) == pytest.approx(0.25)

    def test_unbounded_direction(self):
        assert conjugate_quadratic(np.zeros((1, 1)), WholeSpace(1),
                                   [0.5]) == math.inf
        assert conjugate_quadratic(np.zeros((1, 1)), Box([0.0], [np.inf]),
                                   [0.5]) == math.inf

    def test_polyhedron_matches_box(self):
        box = Box([-1.0, -2.0], [1.0, 0.5])
        C, d = box.halfspaces()
        poly = Polyhedron(C, d)
        Q = np.array([[1.0, 0.2], [0.2, 2.0]])
        for y in ([0.5, -1.0], [3.0, 2.0], [0.0, 0.0]):
            vb = conjugate_quadratic(Q, box, y)
            vp = conjugate_quadratic(Q, poly, y)
            assert vb == pytest.approx(vp, abs=1e-7)

    def test_convex_in_argument(self, rng):
        Q = np.array([[1.0, 0.3], [0.3, 1.5]])
        s = Box([-1.0, -1.0], [2.0, 2.0])
        for _ in range(20):
            y1 = rng.standard_normal(2)
            y2 = rng.standard_normal(2)
            lam = rng.uniform(0.1, 0.9)
            f1 = conjugate_quadratic(Q, s, y1)
            f2 = conjugate_quadratic(Q, s, y2)
            fm = conjugate_quadratic(Q, s, lam * y1 + (1 - lam) * y2)
            assert fm <= lam * f1 + (1 - lam) * f2 + 1e-8


class TestDualTerminal:
    def test_identity_quadratic(self, worked):
        assert dual_terminal(worked, [0.7]) == pytest.approx(0.5 * 0.49)

    def test_point_indicator(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[0.0]],
                            Box([0.0], [0.0]))
        for b in (-2.0, 0.0, 3.0):
            assert dual_terminal(prob, [b]) == pytest.approx(0.0)

    def test_scaled(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[2.0]],
                            WholeSpace(1))
        assert dual_terminal(prob, [1.0]) == pytest.approx(0.25)


class TestDualLagrangian:
    def test_linear_state_term_forces_zero(self, worked):
        assert dual_lagrangian_eval(worked, 0, [1.0], [0.2]) == math.inf
        assert dual_lagrangian_eval(worked, 0, [1.0], [0.0]) == \
            pytest.approx(0.5)

    def test_separable_split(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        for p, w in ((1.0, 0.5), (-0.3, 2.0), (0.0, 0.0)):
            assert dual_lagrangian_eval(prob, 0, [p], [w]) == \
                pytest.approx(0.5 * w * w + 0.5 * p * p)

    def test_drift_term(self):
        prob = make_problem([[0.0]], [[1.0]], [2.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        assert dual_lagrangian_eval(prob, 0, [1.5], [0.5]) == \
            pytest.approx(0.5 * 0.25 + 0.5 * 2.25 + 2.0 * 1.5)

    def test_fenchel_young_inequality(self, rng):
        for _ in range(5):
            prob = random_lq(rng, kinds=("all", "box"))
            t = int(rng.integers(prob.horizon))
            for _ in range(5):
                x = 0.5 * rng.standard_normal(prob.state_dim)
                v = 0.5 * rng.standard_normal(prob.state_dim)
                p = 0.5 * rng.standard_normal(prob.state_dim)
                w = 0.5 * rng.standard_normal(prob.state_dim)
                L = lagrangian_eval(prob, t, x, v)
                K = dual_lagrangian_eval(prob, t, p, w)
                if math.isfinite(L) and math.isfinite(K):
                    assert L + K >= float(x @ w + v @ p) - 1e-8


class TestDualization:
    def test_dual_stage_formula(self):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        dual = dualize(prob)
        for p, w in ((0.4, -0.2), (1.0, 0.5), (0.0, 0.0)):
            expect = 0.5 * w * w + 0.5 * (p + w) ** 2
            assert dual.stage(0).lagrangian([p], [w]) == pytest.approx(expect)

    def test_indicator_composition(self, worked):
        dual = dualize(worked)
        # K(p, 0) = p^2/2 and +inf off w = 0: the rewritten stage inherits it
        assert dual.stage(0).lagrangian([0.8], [0.0]) == pytest.approx(0.32)
        assert dual.stage(0).lagrangian([0.8], [0.1]) == math.inf

    def test_double_dualization_roundtrip(self, rng):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        dd = dualize(dualize(prob))
        for _ in range(100):
            x = rng.standard_normal(1)
            v = rng.standard_normal(1)
            orig = lagrangian_eval(prob, 0, x, v)
            redual = dd.stage_lagrangian(0, x, v)
            assert abs(orig - redual) <= 1e-8 * (1 + abs(orig))

    def test_double_dual_terminal(self, rng):
        prob = make_problem([[0.0]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.5]],
                            WholeSpace(1))
        dd = dualize(dualize(prob))
        for _ in range(10):
            b = rng.standard_normal(1)
            assert dd.terminal_value(b) == pytest.approx(
                0.75 * float(b[0]) ** 2, abs=1e-8)


class TestDualFeasibility:
    def test_definite_costs_accept_everything(self):
        prob = make_problem([[0.3]], [[1.0]], [0.0], [[1.0]], [[1.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        for w in (-3.0, 0.0, 5.0):
            assert dual_velocity_feasible(prob, 0, [1.0], [w])
        assert dual_state_feasible(prob, 0, [4.0])
        assert dual_state_feasible(prob, 0, [-4.0])

    def test_flat_state_cost_pins_velocity(self, worked):
        # Q = 0, X whole, A = 0: the state condition forces w = 0
        assert dual_velocity_feasible(worked, 0, [1.0], [0.0])
        assert not dual_velocity_feasible(worked, 0, [1.0], [0.5])
        assert not dual_velocity_feasible(worked, 0, [1.0], [-1.0])

    def test_vector_space_symmetry(self, rng):
        # unconstrained instances: p accepted iff -p accepted
        prob = make_problem([[0.4]], [[1.0]], [0.0], [[0.0]], [[0.0]],
                            WholeSpace(1), WholeSpace(1), [[1.0]],
                            WholeSpace(1))
        for _ in range(10):
            p = 2.0 * rng.standard_normal(1)
            assert dual_state_feasible(prob, 0, p) == \
                dual_state_feasible(prob, 0, -p)


class TestGridConjugate:
    def test_half_square(self):
        x = np.linspace(-5, 5, 2001)
        gf = GridFunction((x,), 0.5 * x * x)
        out = grid_conjugate(gf, out_axes=(np.linspace(-4, 4, 1601),))
        expect = 0.5 * out.axes[0] ** 2
        assert np.max(np.abs(out.values - expect)) <= 2.5e-3

    def test_abs_value_gives_indicator(self):
        x = np.linspace(-5, 5, 2001)
        gf = GridFunction((x,), np.abs(x))
        out = grid_conjugate(gf)
        inside = np.abs(out.axes[0]) <= 0.999
        outside = np.abs(out.axes[0]) >= 1.01
        assert np.max(np.abs(out.values[inside])) <= 6e-3
        assert np.all(out.values[outside] >= 0.01)

    def test_biconjugate_identity(self):
        x = np.linspace(-5, 5, 2001)
        f = 0.5 * x * x
        gf = GridFunction((x,), f)
        back = grid_conjugate(grid_conjugate(gf), out_axes=(x,))
        h = gf.spacing[0]
        max_slope = 5.0
        inner = np.abs(x) <= 4.0
        assert np.max(np.abs(back.values[inner] - f[inner])) <= 2 * h * max_slope

    def test_output_grid_from_slope_range(self):
        x = np.linspace(-5, 5, 101)
        gf = GridFunction((x,), 0.5 * x * x)
        out = grid_conjugate(gf)
        # sampled slopes span [-4.95, 4.95]; each side padded by 10% of span
        assert out.axes[0][0] == pytest.approx(-5.94, abs=1e-9)
        assert out.axes[0][-1] == pytest.approx(5.94, abs=1e-9)

    def test_degenerate_input_rejected(self):
        x = np.linspace(-1, 1, 5)
        vals = np.full(5, np.inf)
        vals[2] = 0.0
        with pytest.raises(DegenerateInput):
            GridFunction((x,), vals)

    def test_two_dimensional_separable(self):
        x = np.linspace(-4, 4, 401)
        gf = GridFunction((x, x), 0.5 * (x[:, None] ** 2 + x[None, :] ** 2))
        sub = np.linspace(-3, 3, 121)
        out = grid_conjugate(gf, out_axes=(sub, sub))
        expect = 0.5 * (sub[:, None] ** 2 + sub[None, :] ** 2)
        assert np.max(np.abs(out.values - expect)) <= 5e-3

    def test_convexity_validated(self):
        x = np.linspace(-1, 1, 11)
        vals = -x * x  # concave
        with pytest.raises(DegenerateInput):
            GridFunction((x,), vals)

    def test_csv_format(self, tmp_path):
        x = np.linspace(-1, 1, 5)
        vals = np.array([np.inf, 0.5, 0.0, 0.5, np.inf])
        gf = GridFunction((x,), vals)
        path = tmp_path / "grid.csv"
        gf.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x0,value,is_finite"
        assert lines[1].endswith(",inf,0")
        assert lines[3] == "0,0,1"
