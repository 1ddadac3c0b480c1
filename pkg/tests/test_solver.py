import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.core.errors import InfeasibleConstraintsError, SolverError
from src.solver.gls import GlsProblem, gls_operator, solve_gls
from src.solver.nnls import kkt_patterns, oracle_enumerate, oracle_inequality, solve_inequality_gls, solve_nnls

TWO_LEVEL_S = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])


def random_problem(rng, q=None):
    q = q or int(rng.integers(1, 7))
    p = q + int(rng.integers(1, 5))
    design = rng.normal(size=(p, q))
    target = rng.normal(size=p) * 3.0
    root = rng.normal(size=(p, p))
    weight = root @ root.T + p * np.eye(p)
    mask = rng.random(q) < 0.7
    return GlsProblem(design, target, weight), mask


def grid_minimizer(problem, centre, half_width=2.0, step=0.01):
    """Brute-force minimizer of the GLS objective over a 2-D grid"""
    axis = np.arange(-half_width, half_width + step / 2, step)
    y, z = np.meshgrid(centre[0] + axis, centre[1] + axis, indexing="ij")
    points = np.stack([y.ravel(), z.ravel()])
    residual = problem.target[:, None] - problem.design @ points
    precision = np.linalg.inv(problem.weight)
    objective = np.einsum("ik,ij,jk->k", residual, precision, residual)
    return points[:, np.argmin(objective)]


class TestSolveGls:
    def test_mean(self):
        x = solve_gls(GlsProblem(np.array([[1.0], [1.0]]), np.array([4.0, 6.0]), np.eye(2)))
        assert_allclose(x, [5.0])

    def test_two_level_ols(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([10.0, 4.0, 5.0]), np.eye(3))
        x = solve_gls(problem)
        assert_allclose(x, [13 / 3, 16 / 3], rtol=1e-12)
        assert_allclose(grid_minimizer(problem, x), x, atol=0.01)

    def test_weighted_against_grid(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([10.0, 4.0, 5.0]), np.diag([1.0, 1.0, 100.0]))
        x = solve_gls(problem)
        assert_allclose(grid_minimizer(problem, np.array([4.5, 5.5])), x, atol=0.01)
        # a noisy third series barely pulls Z towards its own forecast
        assert abs(x[1] - 6.0) < abs(x[1] - 5.0)

    def test_normal_equations(self, rng):
        for _ in range(50):
            problem, _ = random_problem(rng)
            x = solve_gls(problem)
            assert problem.normal_residual(x) <= 1e-8

    def test_weight_scale_invariance(self, rng):
        problem, mask = random_problem(rng, q=4)
        scaled = GlsProblem(problem.design, problem.target, 7.5 * problem.weight)
        assert_allclose(solve_gls(scaled), solve_gls(problem), rtol=1e-9, atol=1e-12)
        assert_allclose(solve_nnls(scaled, mask).x, solve_nnls(problem, mask).x, rtol=1e-9, atol=1e-12)

    def test_several_right_hand_sides(self, rng):
        problem, _ = random_problem(rng, q=3)
        targets = np.column_stack([problem.target, 2.0 * problem.target])
        x = solve_gls(GlsProblem(problem.design, targets, problem.weight))
        assert_allclose(x[:, 1], 2.0 * x[:, 0], rtol=1e-10)

    def test_operator_matches_solve(self, rng):
        problem, _ = random_problem(rng, q=3)
        assert_allclose(gls_operator(problem.design, problem.weight) @ problem.target, solve_gls(problem),
                        rtol=1e-9, atol=1e-12)

    def test_rank_deficient_design(self):
        design = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
        with pytest.raises(SolverError, match="Rank-deficient"):
            solve_gls(GlsProblem(design, np.ones(3), np.eye(3)))

    def test_weight_not_positive_definite(self):
        with pytest.raises(SolverError, match="not positive definite"):
            solve_gls(GlsProblem(TWO_LEVEL_S, np.ones(3), np.diag([1.0, -1.0, 1.0])))

    def test_shape_mismatch(self):
        with pytest.raises(SolverError):
            GlsProblem(TWO_LEVEL_S, np.ones(2), np.eye(3))


class TestSolveNnls:
    def test_two_level_bound_active(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([2.0, 5.0, -4.0]), np.eye(3))
        solution = solve_nnls(problem, [True, True])
        assert_allclose(solution.x, [3.5, 0.0], atol=1e-12)
        assert solution.active_set == (1,)
        assert solution.multipliers[1] == pytest.approx(11.0)
        assert solution.kkt_residual <= 1e-8

    def test_inactive_bounds_match_gls(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([10.0, 4.0, 5.0]), np.eye(3))
        solution = solve_nnls(problem, [True, True])
        assert_allclose(solution.x, solve_gls(problem), rtol=1e-12)
        assert solution.active_set == ()

    def test_objective_never_below_unconstrained(self, rng):
        for _ in range(50):
            problem, mask = random_problem(rng)
            constrained = problem.objective(solve_nnls(problem, mask).x)
            assert constrained >= problem.objective(solve_gls(problem)) - 1e-10

    def test_iteration_cap(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([2.0, 5.0, -4.0]), np.eye(3))
        with pytest.raises(SolverError, match="iteration cap") as info:
            solve_nnls(problem, [True, True], max_iterations=0)
        assert info.value.best_iterate is not None
        assert info.value.kkt_residual > 0.0

    def test_bound_mask_shape(self):
        problem = GlsProblem(TWO_LEVEL_S, np.ones(3), np.eye(3))
        with pytest.raises(SolverError, match="Bound mask"):
            solve_nnls(problem, [True])


class TestOracle:
    def test_two_level_instance(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([2.0, 5.0, -4.0]), np.eye(3))
        solution = oracle_enumerate(problem, [True, True])
        assert_allclose(solution.x, [3.5, 0.0], atol=1e-12)
        assert solution.active_set == (1,)

    def test_all_inactive_equals_gls(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([10.0, 4.0, 5.0]), np.eye(3))
        assert_allclose(oracle_enumerate(problem, [True, True]).x, solve_gls(problem), rtol=1e-12)

    def test_unique_kkt_pattern(self, rng):
        for _ in range(50):
            problem, mask = random_problem(rng)
            assert len(kkt_patterns(problem, mask)) == 1

    def test_too_many_bounds(self, rng):
        problem, _ = random_problem(rng, q=13)
        with pytest.raises(SolverError, match="Oracle limited"):
            oracle_enumerate(problem, np.ones(13, dtype=bool))

    @pytest.mark.slow
    def test_active_set_matches_enumeration(self, rng):
        for _ in range(1000):
            problem, mask = random_problem(rng)
            fast = solve_nnls(problem, mask)
            exact = oracle_enumerate(problem, mask)
            scale = max(1.0, np.max(np.abs(exact.x)))
            assert_allclose(fast.x, exact.x, atol=1e-6 * scale)
            assert fast.active_set == exact.active_set


def feasible_rows(rng, q, m=None):
    """Random constraint rows with a known interior point"""
    m = m or int(rng.integers(1, 9))
    rows = rng.normal(size=(m, q))
    inside = rng.normal(size=q)
    return rows, rows @ inside - np.abs(rng.normal(size=m))


class TestInequalityGls:
    def test_two_level_rows(self):
        # every series of X = Y + Z non-negative
        problem = GlsProblem(TWO_LEVEL_S, np.array([2.0, 5.0, -4.0]), np.eye(3))
        solution = solve_inequality_gls(problem, TWO_LEVEL_S, np.zeros(3))
        assert_allclose(solution.x, [3.5, 0.0], atol=1e-12)
        assert solution.active_set == (2,)
        assert solution.multipliers[2] == pytest.approx(11.0)
        assert solution.kkt_residual <= 1e-8

    def test_aggregate_row_binds(self):
        # X = Y + Z capped at 6 from above, i.e. -Y - Z >= -6
        problem = GlsProblem(TWO_LEVEL_S, np.array([10.0, 4.0, 5.0]), np.eye(3))
        solution = solve_inequality_gls(problem, [[-1.0, -1.0]], [-6.0])
        assert_allclose(solution.x, [2.5, 3.5], atol=1e-12)
        assert solution.active_set == (0,)

    def test_satisfied_rows_give_gls(self):
        problem = GlsProblem(TWO_LEVEL_S, np.array([10.0, 4.0, 5.0]), np.eye(3))
        solution = solve_inequality_gls(problem, TWO_LEVEL_S, np.zeros(3))
        assert_allclose(solution.x, solve_gls(problem), rtol=1e-12)
        assert solution.active_set == ()
        assert solution.iterations == 0

    def test_bounds_as_rows_match_nnls(self, rng):
        for _ in range(50):
            problem, mask = random_problem(rng)
            rows = np.eye(problem.q)[mask]
            assert_allclose(solve_inequality_gls(problem, rows, np.zeros(len(rows))).x,
                            solve_nnls(problem, mask).x, atol=1e-9)

    def test_infeasible_rows(self):
        problem = GlsProblem(np.array([[1.0], [1.0]]), np.array([4.0, 6.0]), np.eye(2))
        with pytest.raises(InfeasibleConstraintsError, match="admit no solution"):
            solve_inequality_gls(problem, [[1.0], [-1.0]], [1.0, 0.0])

    def test_lower_bound_count(self):
        problem = GlsProblem(TWO_LEVEL_S, np.ones(3), np.eye(3))
        with pytest.raises(SolverError, match="lower bounds"):
            solve_inequality_gls(problem, TWO_LEVEL_S, np.zeros(2))

    def test_oracle_row_limit(self, rng):
        problem, _ = random_problem(rng, q=2)
        with pytest.raises(SolverError, match="Oracle limited"):
            oracle_inequality(problem, np.ones((13, 2)), np.zeros(13))

    def test_matches_row_enumeration(self, rng):
        for _ in range(200):
            problem, _ = random_problem(rng)
            rows, lower = feasible_rows(rng, problem.q)
            fast = solve_inequality_gls(problem, rows, lower)
            exact = oracle_inequality(problem, rows, lower)
            scale = max(1.0, np.max(np.abs(exact.x)))
            assert_allclose(fast.x, exact.x, atol=1e-6 * scale)
            assert np.min(rows @ fast.x - lower) >= -1e-9 * scale
            assert fast.kkt_residual <= 1e-8
