import numpy as np
import pytest

from ddpc.datasets import DataMatrices, DataShape, collect_sequences
from ddpc.lti import NoiseSpec, StateSpaceModel, build_benchmark_model, simulate
from ddpc.predictor import MultiStepPredictor, identify, predict, pseudoinverse, save_predictor

BENCH = build_benchmark_model()


@pytest.fixture(scope="module")
def det_data():
    return collect_sequences(BENCH, DataShape(n_seq=150, t_ini=4, horizon=40, m=2, p=3), seed=11)


@pytest.fixture(scope="module")
def det_pred(det_data):
    return identify(det_data)


class TestPseudoinverse:
    def test_identity(self):
        assert np.allclose(pseudoinverse(np.eye(4)), np.eye(4))

    def test_singular_diagonal(self):
        assert np.allclose(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_penrose_identities_random_rectangular(self):
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((100, 150))
        pinv = pseudoinverse(mat)
        scale = np.linalg.norm(mat)
        assert np.linalg.norm(mat @ pinv @ mat - mat) <= 1e-10 * scale
        assert np.linalg.norm(pinv @ mat @ pinv - pinv) <= 1e-10 * np.linalg.norm(pinv)
        assert np.linalg.norm((mat @ pinv).T - mat @ pinv) <= 1e-10
        assert np.linalg.norm((pinv @ mat).T - pinv @ mat) <= 1e-10
        # full row rank: right inverse
        assert np.allclose(mat @ pinv, np.eye(100), atol=1e-10)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            pseudoinverse(np.array([[1.0, np.inf]]))


class TestIdentify:
    def test_deterministic_fit_is_exact(self, det_data, det_pred):
        assert det_pred.fit_residual <= 1e-8 * np.linalg.norm(det_data.y_future)
        assert det_pred.effective_rank == 96

    def test_zero_outputs_give_zero_predictor(self, det_data):
        zero = DataMatrices(shape=det_data.shape, u_full=det_data.u_full,
                            y_full=np.zeros_like(det_data.y_full))
        assert np.all(identify(zero).coef == 0.0)

    def test_scalar_plant_recovers_true_map(self):
        # oracle: enumerate the window-to-output map on the basis of
        # (y1, u1, u2) for x+ = 0.5x + u, y = x:
        #   y1=1,u1=0,u2=0 -> x1=1 -> y2=0.5
        #   y1=0,u1=1,u2=0 -> x2=0.5*0+1 -> y2=1.0
        #   y1=0,u1=0,u2=1 -> y2=0 (no feedthrough)
        model = StateSpaceModel(A=[[0.5]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
        rng = np.random.default_rng(1)
        shape = DataShape(n_seq=12, t_ini=1, horizon=1, m=1, p=1)
        u_full = rng.standard_normal((2, 12))
        y_full = np.empty((2, 12))
        for j in range(12):
            traj = simulate(model, rng.standard_normal(1), u_full[:, j].reshape(2, 1))
            y_full[:, j] = traj.y.ravel()
        data = DataMatrices(shape=shape, u_full=u_full, y_full=y_full)
        pred = identify(data)
        assert np.allclose(pred.coef, [[0.5, 1.0, 0.0]], atol=1e-10)
        assert np.allclose(pred.coef_y_init, [[0.5]], atol=1e-10)
        assert np.allclose(pred.coef_u_init, [[1.0]], atol=1e-10)
        assert np.allclose(pred.coef_u_future, [[0.0]], atol=1e-10)

    def test_projection_identity(self, det_data, det_pred):
        gap = np.linalg.norm(det_pred.coef @ det_data.regressors - det_data.y_future)
        assert gap <= 1e-8 * np.linalg.norm(det_data.y_future)

    def test_noisy_fit_is_least_squares_minimum(self):
        data = collect_sequences(
            BENCH, DataShape(n_seq=150, t_ini=4, horizon=40, m=2, p=3),
            noise=NoiseSpec(1e-2, 3), seed=11)
        pred = identify(data)
        base = np.linalg.norm(pred.coef @ data.regressors - data.y_future)
        rng = np.random.default_rng(9)
        for _ in range(100):
            delta = rng.standard_normal(pred.coef.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            perturbed = np.linalg.norm(
                (pred.coef + delta) @ data.regressors - data.y_future)
            assert perturbed >= base - 1e-12

    def test_square_full_rank_matches_direct_solve(self):
        # Theorem-2 regime: T = L*m + t_ini*p makes the regressor stack square
        data = collect_sequences(
            BENCH, DataShape(n_seq=100, t_ini=4, horizon=40, m=2, p=3),
            noise=NoiseSpec(1e-2, 5), seed=17)
        assert np.linalg.matrix_rank(data.regressors) == 100
        pred = identify(data)
        direct = np.linalg.solve(data.regressors.T, data.y_future.T).T
        assert np.abs(pred.coef - direct).max() <= 1e-10 * max(1, np.abs(direct).max())


class TestPredict:
    def test_zero_window_zero_prediction(self, det_pred):
        y = predict(det_pred, np.zeros(12), np.zeros(8), np.zeros(80))
        assert np.all(y == 0.0)

    def test_matches_fresh_simulations(self, det_pred):
        # oracle: simulate a brand-new trajectory and compare its future
        rng = np.random.default_rng(23)
        worst = 0.0
        for _ in range(100):
            x0 = 0.5 * rng.standard_normal(8)
            u = rng.uniform(-0.7, 0.7, (44, 2))
            traj = simulate(BENCH, x0, u)
            y_hat = predict(det_pred, traj.y[:4].ravel(), traj.u[:4].ravel(),
                            traj.u[4:].ravel())
            true_future = traj.y[4:].ravel()
            worst = max(worst, np.abs(y_hat - true_future).max())
        assert worst <= 1e-8 * (1 + np.abs(true_future).max())

    def test_linearity(self, det_pred):
        rng = np.random.default_rng(2)
        w1 = [rng.standard_normal(12), rng.standard_normal(8), rng.standard_normal(80)]
        w2 = [rng.standard_normal(12), rng.standard_normal(8), rng.standard_normal(80)]
        combo = [2.0 * a - 3.0 * b for a, b in zip(w1, w2)]
        lhs = predict(det_pred, *combo)
        rhs = 2.0 * predict(det_pred, *w1) - 3.0 * predict(det_pred, *w2)
        assert np.abs(lhs - rhs).max() <= 1e-9 * (1 + np.abs(rhs).max())

    def test_window_length_validation(self, det_pred):
        with pytest.raises(ValueError):
            predict(det_pred, np.zeros(11), np.zeros(8), np.zeros(80))


class TestExport:
    def test_csv_round_trip(self, det_pred, tmp_path):
        path = tmp_path / "predictor.csv"
        save_predictor(det_pred, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "#shape 4,40,2,3"
        mat = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        assert np.array_equal(mat, det_pred.coef)
