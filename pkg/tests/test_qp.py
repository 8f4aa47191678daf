import numpy as np
import pytest

from ddpc.qp import (
    QpInfeasibleError,
    QpIterationLimitError,
    QpRankDeficientError,
    QpSingularReducedError,
    solve_box_qp,
)

from reference_solvers import kkt_equality_qp, projected_gradient_box_qp


def random_box_instance(rng, s, cond=100.0):
    """Strictly convex box QP with a mix of active and inactive bounds."""
    vals = np.exp(rng.uniform(0.0, np.log(cond), s))
    basis, _ = np.linalg.qr(rng.standard_normal((s, s)))
    H = basis @ np.diag(vals) @ basis.T
    H = 0.5 * (H + H.T)
    f = rng.standard_normal(s) * 5.0
    lo = rng.uniform(-1.0, -0.1, s)
    hi = rng.uniform(0.1, 1.0, s)
    return H, f, lo, hi


class TestUnconstrainedAndHandKkt:
    def test_identity_no_constraints(self):
        res = solve_box_qp(np.eye(3), np.zeros(3))
        assert np.allclose(res.z, 0.0)
        assert res.objective == 0.0

    def test_scalar_upper_bound_multiplier(self):
        # minimize (z-2)^2 s.t. z <= 1: optimum at the bound, multiplier 2
        res = solve_box_qp(np.array([[2.0]]), np.array([-4.0]), hi=np.array([1.0]))
        assert np.allclose(res.z, [1.0])
        assert np.allclose(res.upper_duals, [2.0])
        assert res.residuals["stationarity"] <= 1e-10

    def test_unconstrained_newton_point(self):
        rng = np.random.default_rng(0)
        H, f, _, _ = random_box_instance(rng, 8)
        res = solve_box_qp(H, f)
        assert np.allclose(res.z, np.linalg.solve(H, -f), atol=1e-9)


class TestAgainstProjectedGradient:
    @pytest.mark.parametrize("seed", range(10))
    def test_random_30_var_instances(self, seed):
        rng = np.random.default_rng(100 + seed)
        H, f, lo, hi = random_box_instance(rng, 30)
        res = solve_box_qp(H, f, lo=lo, hi=hi)
        ref = projected_gradient_box_qp(H, f, lo, hi, tol=1e-10)
        assert np.abs(res.z - ref).max() <= 1e-6
        assert res.residuals["stationarity"] <= 1e-8 * (1 + np.abs(f).max())
        assert res.residuals["primal"] <= 1e-9
        assert res.residuals["complementarity"] <= 1e-8


class TestEqualityConstraints:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_direct_kkt_solve(self, seed):
        rng = np.random.default_rng(seed)
        s, e = 12, 4
        H, f, _, _ = random_box_instance(rng, s)
        A = rng.standard_normal((e, s))
        b = rng.standard_normal(e)
        res = solve_box_qp(H, f, A=A, b=b)
        z_ref, mu_ref = kkt_equality_qp(H, f, A, b)
        assert np.abs(res.z - z_ref).max() <= 1e-8
        assert np.abs(res.eq_duals - mu_ref).max() <= 1e-7

    def test_box_and_equality_agree_with_dense_enumeration(self):
        # 2 variables, 1 equality: reduce by substitution and scan the segment
        H = np.diag([2.0, 4.0])
        f = np.array([-2.0, -8.0])
        A = np.array([[1.0, 1.0]])
        b = np.array([1.0])
        lo = np.array([0.0, 0.0])
        hi = np.array([0.6, 0.8])
        res = solve_box_qp(H, f, A=A, b=b, lo=lo, hi=hi, x0=np.array([0.5, 0.5]))
        ts = np.linspace(max(lo[0], 1 - hi[1]), min(hi[0], 1 - lo[1]), 2_000_001)
        vals = 0.5 * (2 * ts**2 + 4 * (1 - ts) ** 2) + f[0] * ts + f[1] * (1 - ts)
        t_best = ts[np.argmin(vals)]
        assert abs(res.z[0] - t_best) <= 1e-5
        assert abs(res.z[1] - (1 - t_best)) <= 1e-5

    def test_consistent_dependent_rows_accepted_when_allowed(self):
        H = np.eye(3)
        f = np.array([1.0, 0.0, 0.0])
        A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
        b = np.array([1.0, 2.0])
        with pytest.raises(QpRankDeficientError):
            solve_box_qp(H, f, A=A, b=b)
        res = solve_box_qp(H, f, A=A, b=b, allow_dependent_equalities=True)
        z_ref, _ = kkt_equality_qp(H, f, A[:1], b[:1])
        assert np.allclose(res.z, z_ref, atol=1e-10)

    def test_inconsistent_dependent_rows_rejected(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0])
        with pytest.raises(QpInfeasibleError):
            solve_box_qp(np.eye(2), np.zeros(2), A=A, b=b,
                         allow_dependent_equalities=True)


class TestInfeasibilityAndLimits:
    def test_box_equality_infeasible(self):
        # sum must be 10 but each variable at most 1
        A = np.array([[1.0, 1.0]])
        b = np.array([10.0])
        with pytest.raises(QpInfeasibleError):
            solve_box_qp(np.eye(2), np.zeros(2), A=A, b=b, hi=np.array([1.0, 1.0]))

    def test_crossed_bounds(self):
        with pytest.raises(QpInfeasibleError):
            solve_box_qp(np.eye(1), np.zeros(1), lo=np.array([1.0]), hi=np.array([-1.0]))

    def test_iteration_budget(self):
        rng = np.random.default_rng(7)
        H, f, lo, hi = random_box_instance(rng, 20)
        with pytest.raises(QpIterationLimitError):
            solve_box_qp(H, f, lo=lo, hi=hi, max_changes=0)

    def test_infeasible_start_rejected(self):
        with pytest.raises(QpInfeasibleError):
            solve_box_qp(np.eye(2), np.zeros(2), lo=np.zeros(2), hi=np.ones(2),
                         x0=np.array([2.0, 0.5]))


class TestSingularHandling:
    def test_consistent_flat_direction_min_norm(self):
        # curvature only on z0; z1 free and costless: minimum-norm pick is 0
        H = np.diag([2.0, 0.0])
        f = np.array([-2.0, 0.0])
        res = solve_box_qp(H, f)
        assert np.allclose(res.z, [1.0, 0.0], atol=1e-10)

    def test_unbounded_direction_raises(self):
        H = np.diag([2.0, 0.0])
        f = np.array([0.0, 1.0])  # linear drift along the null direction
        with pytest.raises(QpSingularReducedError):
            solve_box_qp(H, f)

    def test_unbounded_within_nullspace_of_equalities(self):
        # equality pins z0+z1; cost flat along (1,-1,0) but f drifts on z2
        H = np.zeros((3, 3))
        H[0, 0] = 1.0
        A = np.array([[1.0, 1.0, 0.0]])
        b = np.array([1.0])
        with pytest.raises(QpSingularReducedError):
            solve_box_qp(H, np.array([0.0, 0.0, 1.0]), A=A, b=b)

    def test_not_psd_rejected(self):
        with pytest.raises(QpSingularReducedError):
            solve_box_qp(np.diag([1.0, -1.0]), np.zeros(2))


class TestWarmStart:
    def test_same_solution_fewer_changes(self):
        rng = np.random.default_rng(11)
        H, f, lo, hi = random_box_instance(rng, 25)
        cold = solve_box_qp(H, f, lo=lo, hi=hi)
        warm = solve_box_qp(H, f, lo=lo, hi=hi,
                            active0=(cold.active_lower, cold.active_upper))
        assert np.abs(warm.z - cold.z).max() <= 1e-9
        assert warm.n_changes <= cold.n_changes

    def test_residuals_recompute_from_stored_values(self):
        rng = np.random.default_rng(13)
        H, f, lo, hi = random_box_instance(rng, 15)
        res = solve_box_qp(H, f, lo=lo, hi=hi)
        grad = H @ res.z + f
        stat = grad - res.lower_duals + res.upper_duals
        assert abs(np.linalg.norm(stat, np.inf) - res.residuals["stationarity"]) <= 1e-12
        comp = np.concatenate([res.lower_duals * (res.z - lo), res.upper_duals * (hi - res.z)])
        assert abs(np.abs(comp).max() - res.residuals["complementarity"]) <= 1e-12


class TestFixedVariables:
    def test_pinned_equal_bounds(self):
        H = np.eye(2) * 2
        f = np.array([-2.0, -2.0])
        lo = np.array([0.25, -np.inf])
        hi = np.array([0.25, np.inf])
        res = solve_box_qp(H, f, lo=lo, hi=hi)
        assert res.z[0] == 0.25
        assert abs(res.z[1] - 1.0) <= 1e-10
