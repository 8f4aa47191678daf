import numpy as np
import pytest

from ddpc.datasets import (
    DataMatrices,
    DataShape,
    DatasetFormatError,
    ExcitationSpec,
    check_assumptions,
    check_persistency,
    collect_sequences,
    hankel_dataset,
    kernel_inclusion_gap,
    load_dataset,
    partition,
    save_dataset,
)
from ddpc.lti import NoiseSpec, build_benchmark_model, numeric_rank, simulate, system_lag

BENCH = build_benchmark_model()


def bench_shape(n_seq=150):
    return DataShape(n_seq=n_seq, t_ini=4, horizon=40, m=2, p=3)


@pytest.fixture(scope="module")
def det_data():
    return collect_sequences(BENCH, bench_shape(), seed=11)


class TestCollect:
    def test_benchmark_dimensions(self, det_data):
        assert det_data.u_full.shape == (88, 150)
        assert det_data.y_full.shape == (132, 150)
        assert det_data.regressors.shape == (100, 150)
        assert det_data.x_init.shape == (8, 150)

    def test_zero_excitation_zero_start_gives_zero_outputs(self):
        shape = DataShape(n_seq=1, t_ini=2, horizon=3, m=2, p=3)
        spec = ExcitationSpec(u_low=0.0, u_high=0.0, x0_scale=0.0)
        data = collect_sequences(BENCH, shape, excitation=spec, seed=0)
        assert np.all(data.y_full == 0.0)

    def test_seeded_determinism(self):
        shape = bench_shape(n_seq=12)
        a = collect_sequences(BENCH, shape, seed=21)
        b = collect_sequences(BENCH, shape, seed=21)
        assert np.array_equal(a.u_full, b.u_full)
        assert np.array_equal(a.y_full, b.y_full)

    def test_columns_are_genuine_trajectories(self, det_data):
        # unstacked column j must replay exactly through the simulator
        for j in (0, 7, 149):
            traj = det_data.column_trajectory(j)
            replay = simulate(BENCH, det_data.x_init[:, j], traj.u)
            assert np.abs(replay.y - traj.y).max() < 1e-12

    def test_shape_model_mismatch(self):
        with pytest.raises(ValueError):
            collect_sequences(BENCH, DataShape(n_seq=5, t_ini=2, horizon=3, m=1, p=3))


class TestPartition:
    def test_minimal_example(self):
        u_full = np.array([[1.0], [2.0]])
        y_full = np.array([[5.0], [6.0]])
        u_past, u_future, y_past, y_future, reg = partition(u_full, y_full, 1, 1, 1)
        assert u_past == [[1.0]] and u_future == [[2.0]]
        assert y_past == [[5.0]] and y_future == [[6.0]]
        assert np.array_equal(reg, [[5.0], [1.0], [2.0]])

    def test_restack_round_trip(self, det_data):
        assert np.array_equal(np.vstack([det_data.u_past, det_data.u_future]),
                              det_data.u_full)
        assert np.array_equal(np.vstack([det_data.y_past, det_data.y_future]),
                              det_data.y_full)

    def test_regressor_row_count(self, det_data):
        s = det_data.shape
        assert det_data.regressors.shape[0] == s.t_ini * (s.m + s.p) + s.horizon * s.m == 100

    def test_t_ini_out_of_range(self):
        with pytest.raises(ValueError):
            partition(np.ones((4, 3)), np.ones((4, 3)), 2, 2, 2)


class TestPersistency:
    def test_benchmark_excitation_is_persistent(self, det_data):
        ok, rank = check_persistency(det_data.u_full, 44, 2)
        assert ok and rank == 88

    def test_zeros_fail(self):
        ok, rank = check_persistency(np.zeros((88, 150)), 44, 2)
        assert not ok and rank == 0

    def test_repeated_column_fails(self):
        rng = np.random.default_rng(0)
        u = rng.uniform(-0.7, 0.7, (88, 88))
        u[:, -1] = u[:, 0]
        ok, rank = check_persistency(u, 44, 2)
        assert not ok and rank == 87

    def test_too_few_columns_is_an_error(self):
        with pytest.raises(ValueError, match="insufficient columns"):
            check_persistency(np.ones((88, 87)), 44, 2)

    def test_invariant_under_column_permutation(self, det_data):
        rng = np.random.default_rng(1)
        perm = rng.permutation(150)
        ok_a, rank_a = check_persistency(det_data.u_full, 44, 2)
        ok_b, rank_b = check_persistency(det_data.u_full[:, perm], 44, 2)
        assert (ok_a, rank_a) == (ok_b, rank_b)


class TestAssumptions:
    def test_benchmark_t150_all_pass(self, det_data):
        report = check_assumptions(det_data, model=BENCH)
        assert report.pe_order_L is True
        assert report.t_lower_bound is True
        assert report.details["n_seq_required"] == 96
        assert report.t_ini_exceeds_lag is True
        assert report.x_init_full_rank is True
        assert report.stacked_x_init_u_full_rank is True
        assert report.all_evaluated_pass()

    def test_t90_fails_lower_bound(self):
        data = collect_sequences(BENCH, bench_shape(n_seq=90), seed=2)
        report = check_assumptions(data, model=BENCH)
        assert report.t_lower_bound is False

    def test_duplicate_initial_states_fail_rank_check(self):
        shape = DataShape(n_seq=8, t_ini=1, horizon=1, m=2, p=3)
        data = collect_sequences(BENCH, shape, seed=3)
        x = data.x_init.copy()
        x[:, 1] = x[:, 0]
        broken = DataMatrices(shape=shape, u_full=data.u_full, y_full=data.y_full,
                              x_init=x)
        report = check_assumptions(broken, model=BENCH)
        assert report.x_init_full_rank is False

    def test_lag_margin(self, det_data):
        assert system_lag(BENCH) == 3
        report = check_assumptions(det_data, lag=3)
        assert report.t_ini_exceeds_lag is True
        report4 = check_assumptions(det_data, lag=4)
        assert report4.t_ini_exceeds_lag is False

    def test_unevaluable_checks_are_none(self, det_data):
        bare = DataMatrices(shape=det_data.shape, u_full=det_data.u_full,
                            y_full=det_data.y_full)
        report = check_assumptions(bare)
        assert report.t_lower_bound is None
        assert report.t_ini_exceeds_lag is None
        assert report.x_init_full_rank is None


class TestKernelInclusion:
    def test_deterministic_data_satisfies_inclusion(self, det_data):
        gap, dim = kernel_inclusion_gap(det_data)
        assert gap <= 1e-8
        # deterministic trajectory data: rank(regressors) = L*m + n
        assert numeric_rank(det_data.regressors) == 96
        assert dim == 150 - 96

    def test_noisy_data_breaks_inclusion(self):
        data = collect_sequences(BENCH, bench_shape(), noise=NoiseSpec(1e-2, 7), seed=11)
        gap, _ = kernel_inclusion_gap(data)
        assert gap > 1e-6


class TestHankelConstructor:
    def test_windows_replay_and_satisfy_inclusion(self):
        rng = np.random.default_rng(5)
        u = rng.uniform(-0.7, 0.7, (260, 2))
        traj = simulate(BENCH, 0.1 * rng.standard_normal(8), u)
        data = hankel_dataset(traj, t_ini=4, horizon=40)
        assert data.shape.n_seq == 260 - 44 + 1
        ok, _ = check_persistency(data.u_full, 44, 2)
        assert ok
        gap, _ = kernel_inclusion_gap(data)
        assert gap <= 1e-8
        j = 30
        col = data.column_trajectory(j)
        assert np.array_equal(col.u, traj.u[j:j + 44])

    def test_too_short_trajectory(self):
        traj = simulate(BENCH, np.zeros(8), np.zeros((10, 2)))
        with pytest.raises(ValueError):
            hankel_dataset(traj, t_ini=4, horizon=40)


class TestPersistence:
    def test_round_trip_exact(self, det_data, tmp_path):
        path = tmp_path / "data.csv"
        save_dataset(det_data, path)
        back = load_dataset(path)
        assert np.array_equal(back.u_full, det_data.u_full)
        assert np.array_equal(back.y_full, det_data.y_full)
        assert np.array_equal(back.x_init, det_data.x_init)
        assert back.seed == det_data.seed
        assert back.sigma_w == det_data.sigma_w
        assert back.shape == det_data.shape

    def test_truncated_file_names_missing_block(self, det_data, tmp_path):
        path = tmp_path / "data.csv"
        save_dataset(det_data, path)
        lines = path.read_text().splitlines()
        cut = lines.index("#block Y_L")
        (tmp_path / "trunc.csv").write_text("\n".join(lines[:cut]) + "\n")
        with pytest.raises(DatasetFormatError, match="Y_L"):
            load_dataset(tmp_path / "trunc.csv")

    def test_column_count_mismatch(self, det_data, tmp_path):
        path = tmp_path / "data.csv"
        save_dataset(det_data, path)
        lines = path.read_text().splitlines()
        i = lines.index("#block U_L") + 1
        lines[i] = ",".join(lines[i].split(",")[:-1])  # drop one column
        (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="columns"):
            load_dataset(tmp_path / "bad.csv")

    def test_unparsable_number_reports_location(self, det_data, tmp_path):
        path = tmp_path / "data.csv"
        save_dataset(det_data, path)
        lines = path.read_text().splitlines()
        i = lines.index("#block U_L") + 2
        lines[i] = lines[i].replace(",", ",oops,", 1)
        (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match=f"line {i + 1}"):
            load_dataset(tmp_path / "bad.csv")
