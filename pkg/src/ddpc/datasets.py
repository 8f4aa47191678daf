"""Trajectory data collection, block partitioning, and excitation checks.

Recorded data is held column-per-sequence: column j of ``u_full`` is the
time-major stack of the j-th input sequence (each step's m inputs
contiguous), and likewise for ``y_full``.  The past/future split at the
initialization length gives the four blocks ``u_past``, ``u_future``,
``y_past``, ``y_future``; ``regressors`` is the stack
``[y_past; u_past; u_future]`` used both by the multi-step predictor fit and
as the equality constraint data of the direct data-driven controller.

Collection runs one independent experiment per column with a child seed
derived from ``(seed, column)``, so columns are order-independent and the
whole dataset reproduces bit-for-bit from its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lti import NoiseSpec, StateSpaceModel, Trajectory, numeric_rank, nullspace, simulate, system_lag
from .rng import Rng, derive_seed

__all__ = [
    "DataShape",
    "ExcitationSpec",
    "DataMatrices",
    "AssumptionReport",
    "collect_sequences",
    "hankel_dataset",
    "partition",
    "check_persistency",
    "check_assumptions",
    "kernel_inclusion_gap",
    "save_dataset",
    "load_dataset",
    "DatasetFormatError",
]


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed or is internally inconsistent."""


@dataclass(frozen=True)
class DataShape:
    """Dimensions of a column-per-sequence dataset."""

    n_seq: int  # number of recorded sequences (columns)
    t_ini: int  # initialization window length
    horizon: int  # prediction window length
    m: int
    p: int

    def __post_init__(self):
        if min(self.n_seq, self.t_ini, self.horizon, self.m, self.p) < 1:
            raise ValueError("all shape fields must be >= 1")

    @property
    def seq_len(self) -> int:
        """Total sequence length (initialization window plus horizon)."""
        return self.t_ini + self.horizon

    @property
    def n_regressor_rows(self) -> int:
        return self.t_ini * (self.m + self.p) + self.horizon * self.m


@dataclass(frozen=True)
class ExcitationSpec:
    """Random experiment design: i.i.d. uniform inputs, scaled normal starts."""

    u_low: float = -0.7
    u_high: float = 0.7
    x0_scale: float = 0.1

    def __post_init__(self):
        if not self.u_low <= self.u_high:
            raise ValueError("u_low must not exceed u_high")


@dataclass(frozen=True)
class DataMatrices:
    """Stacked data blocks of one dataset; all arrays are read-only."""

    shape: DataShape
    u_full: np.ndarray  # (L*m, T)
    y_full: np.ndarray  # (L*p, T)
    u_past: np.ndarray = field(init=False)
    u_future: np.ndarray = field(init=False)
    y_past: np.ndarray = field(init=False)
    y_future: np.ndarray = field(init=False)
    regressors: np.ndarray = field(init=False)  # [y_past; u_past; u_future]
    x_init: Optional[np.ndarray] = None  # (n, T), simulation only
    seed: Optional[int] = None
    sigma_w: float = 0.0

    def __post_init__(self):
        s = self.shape
        u_full = np.asarray(self.u_full, dtype=float)
        y_full = np.asarray(self.y_full, dtype=float)
        if u_full.shape != (s.seq_len * s.m, s.n_seq):
            raise ValueError(f"u_full has shape {u_full.shape}, expected {(s.seq_len * s.m, s.n_seq)}")
        if y_full.shape != (s.seq_len * s.p, s.n_seq):
            raise ValueError(f"y_full has shape {y_full.shape}, expected {(s.seq_len * s.p, s.n_seq)}")
        u_past, u_future, y_past, y_future, regressors = partition(u_full, y_full, s.t_ini, s.m, s.p)
        for name, arr in (
            ("u_full", u_full), ("y_full", y_full), ("u_past", u_past),
            ("u_future", u_future), ("y_past", y_past), ("y_future", y_future),
            ("regressors", regressors),
        ):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.x_init is not None:
            x = np.array(self.x_init, dtype=float)
            if x.shape[1] != s.n_seq:
                raise ValueError("x_init must have one column per sequence")
            x.flags.writeable = False
            object.__setattr__(self, "x_init", x)

    def column_trajectory(self, j: int) -> Trajectory:
        """Unstack column j back into its recorded input/output sequence."""
        s = self.shape
        u = self.u_full[:, j].reshape(s.seq_len, s.m)
        y = self.y_full[:, j].reshape(s.seq_len, s.p)
        return Trajectory(u=u, y=y)


def partition(u_full: np.ndarray, y_full: np.ndarray, t_ini: int, m: int, p: int):
    """Row-split full-length stacks at the initialization boundary.

    Returns ``(u_past, u_future, y_past, y_future, regressors)`` where
    ``regressors`` stacks ``[y_past; u_past; u_future]``.
    """
    if not 0 < t_ini * m < u_full.shape[0]:
        raise ValueError("t_ini out of range for the given data")
    u_past, u_future = u_full[: t_ini * m], u_full[t_ini * m:]
    y_past, y_future = y_full[: t_ini * p], y_full[t_ini * p:]
    regressors = np.vstack([y_past, u_past, u_future])
    return u_past, u_future, y_past, y_future, regressors


def collect_sequences(
    model: StateSpaceModel,
    shape: DataShape,
    excitation: ExcitationSpec = ExcitationSpec(),
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
) -> DataMatrices:
    """Run independent seeded experiments and assemble the data matrices.

    Each column comes from a fresh random initial state driven by i.i.d.
    uniform inputs.  Sequence j draws its excitation from the child seed
    ``derive(seed, 2j)`` and its measurement noise from ``derive(seed, 2j+1)``,
    so columns are independent and can be generated in any order.
    """
    if (shape.m, shape.p) != (model.m, model.p):
        raise ValueError("shape input/output dimensions disagree with the model")
    L = shape.seq_len
    sigma_w = 0.0 if noise is None else noise.sigma_w
    u_full = np.empty((L * shape.m, shape.n_seq))
    y_full = np.empty((L * shape.p, shape.n_seq))
    x_init = np.empty((model.n, shape.n_seq))
    for j in range(shape.n_seq):
        col_rng = Rng(derive_seed(seed, 2 * j))
        x0 = excitation.x0_scale * col_rng.normals(model.n)
        u_seq = col_rng.uniform(excitation.u_low, excitation.u_high, L * model.m).reshape(L, model.m)
        col_noise = None
        if sigma_w > 0:
            col_noise = NoiseSpec(sigma_w=sigma_w, seed=derive_seed(seed, 2 * j + 1))
        traj = simulate(model, x0, u_seq, col_noise)
        u_full[:, j] = traj.u.ravel()
        y_full[:, j] = traj.y.ravel()
        x_init[:, j] = x0
    return DataMatrices(shape=shape, u_full=u_full, y_full=y_full,
                        x_init=x_init, seed=seed, sigma_w=sigma_w)


def hankel_dataset(traj: Trajectory, t_ini: int, horizon: int) -> DataMatrices:
    """Alternative constructor: sliding windows of one long trajectory.

    Consecutive overlapping windows of length ``t_ini + horizon`` become the
    columns (classical Hankel structure).  Initial states are recorded when
    the trajectory carries them.
    """
    L = t_ini + horizon
    K, m = traj.u.shape
    p = traj.y.shape[1]
    if K < L:
        raise ValueError("trajectory shorter than one window")
    n_seq = K - L + 1
    shape = DataShape(n_seq=n_seq, t_ini=t_ini, horizon=horizon, m=m, p=p)
    u_full = np.empty((L * m, n_seq))
    y_full = np.empty((L * p, n_seq))
    for j in range(n_seq):
        u_full[:, j] = traj.u[j:j + L].ravel()
        y_full[:, j] = traj.y[j:j + L].ravel()
    x_init = None if traj.x is None else traj.x[:n_seq].T.copy()
    return DataMatrices(shape=shape, u_full=u_full, y_full=y_full, x_init=x_init)


def check_persistency(u_full: np.ndarray, seq_len: int, m: int) -> tuple[bool, int]:
    """Persistency of excitation of order ``seq_len``: full row rank of u_full.

    Returns ``(is_persistently_exciting, numeric_rank)``.  Requires at least
    ``seq_len * m`` columns, otherwise full row rank is impossible by shape.
    """
    u_full = np.asarray(u_full, dtype=float)
    required = seq_len * m
    if u_full.shape[0] != required:
        raise ValueError(f"u_full has {u_full.shape[0]} rows, expected seq_len*m={required}")
    if u_full.shape[1] < required:
        raise ValueError(
            f"insufficient columns: need at least {required}, got {u_full.shape[1]}")
    rank = numeric_rank(u_full)
    return rank == required, rank


@dataclass(frozen=True)
class AssumptionReport:
    """Executable record of the excitation/data-quality requirements.

    Booleans are ``None`` when the needed side information (model lag, true
    initial states) is unavailable.  The ranks and bounds that produced each
    verdict are stored so every flag can be re-derived from the report alone.
    """

    pe_order_L: Optional[bool]
    t_lower_bound: Optional[bool]
    t_ini_exceeds_lag: Optional[bool]
    x_init_full_rank: Optional[bool]
    stacked_x_init_u_full_rank: Optional[bool]
    details: dict

    def all_evaluated_pass(self) -> bool:
        flags = [self.pe_order_L, self.t_lower_bound, self.t_ini_exceeds_lag,
                 self.x_init_full_rank, self.stacked_x_init_u_full_rank]
        return all(f is not False for f in flags)

    def to_dict(self) -> dict:
        return {
            "pe_order_L": self.pe_order_L,
            "t_lower_bound": self.t_lower_bound,
            "t_ini_exceeds_lag": self.t_ini_exceeds_lag,
            "x_init_full_rank": self.x_init_full_rank,
            "stacked_x_init_u_full_rank": self.stacked_x_init_u_full_rank,
            "details": self.details,
        }


def check_assumptions(
    data: DataMatrices,
    model: Optional[StateSpaceModel] = None,
    lag: Optional[int] = None,
) -> AssumptionReport:
    """Evaluate the data requirements the equivalence results rely on.

    Checks, where evaluable: enough sequences (``n_seq >= L*m + n``),
    persistency of excitation of order L, ``t_ini`` strictly above the
    system lag, full-rank initial-state matrix, and full rank of the
    stacked initial-state/input matrix.
    """
    s = data.shape
    details: dict = {"n_seq": s.n_seq, "seq_len": s.seq_len, "t_ini": s.t_ini}

    pe: Optional[bool] = None
    if s.n_seq >= s.seq_len * s.m:
        pe, pe_rank = check_persistency(data.u_full, s.seq_len, s.m)
        details["pe_rank"] = pe_rank
        details["pe_required_rank"] = s.seq_len * s.m
    else:
        details["pe_rank"] = None
        details["pe_required_rank"] = s.seq_len * s.m

    n = model.n if model is not None else (data.x_init.shape[0] if data.x_init is not None else None)
    t_bound: Optional[bool] = None
    if n is not None:
        required = s.seq_len * s.m + n
        t_bound = s.n_seq >= required
        details["n_seq_required"] = required

    if lag is None and model is not None:
        lag = system_lag(model)
    lag_ok: Optional[bool] = None
    if lag is not None:
        lag_ok = s.t_ini > lag
        details["lag"] = lag

    x_rank_ok: Optional[bool] = None
    stacked_ok: Optional[bool] = None
    if data.x_init is not None:
        n_states = data.x_init.shape[0]
        x_rank = numeric_rank(data.x_init)
        x_rank_ok = x_rank == n_states
        details["x_init_rank"] = x_rank
        stacked = np.vstack([data.x_init, data.u_full])
        stacked_rank = numeric_rank(stacked)
        stacked_ok = stacked_rank == min(stacked.shape)
        details["stacked_rank"] = stacked_rank
        details["stacked_required_rank"] = min(stacked.shape)

    return AssumptionReport(
        pe_order_L=pe,
        t_lower_bound=t_bound,
        t_ini_exceeds_lag=lag_ok,
        x_init_full_rank=x_rank_ok,
        stacked_x_init_u_full_rank=stacked_ok,
        details=details,
    )


def kernel_inclusion_gap(data: DataMatrices) -> tuple[float, int]:
    """Residual of the null-space inclusion ker(regressors) within ker(y_future).

    Returns ``(||y_future @ K||_F / ||y_future||_F, dim ker)`` with K an
    orthonormal null-space basis of the regressor stack.  Deterministic
    trajectory data makes the ratio vanish to rounding; noisy data does not.
    """
    K = nullspace(data.regressors)
    if K.shape[1] == 0:
        return 0.0, 0
    denom = np.linalg.norm(data.y_future)
    if denom == 0:
        return 0.0, K.shape[1]
    return float(np.linalg.norm(data.y_future @ K) / denom), K.shape[1]


_HEADER_LINES = 4


def save_dataset(data: DataMatrices, path) -> None:
    """Write the dataset as CSV: 4-line header, then named blocks."""
    s = data.shape
    lines = [
        f"#shape {s.n_seq},{s.t_ini},{s.horizon},{s.m},{s.p}",
        f"#seed {data.seed if data.seed is not None else ''}",
        f"#sigma_w {format(data.sigma_w, '.17g')}",
        "#layout column-per-sequence,time-major",
    ]

    def block(name: str, mat: np.ndarray):
        lines.append(f"#block {name}")
        for row in mat:
            lines.append(",".join(format(v, ".17g") for v in row))

    block("U_L", data.u_full)
    block("Y_L", data.y_full)
    if data.x_init is not None:
        block("X1", data.x_init)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> DataMatrices:
    """Parse a dataset file written by :func:`save_dataset` (lossless)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < _HEADER_LINES or not lines[0].startswith("#shape "):
        raise DatasetFormatError(f"{path}: line 1: missing '#shape' header")
    try:
        n_seq, t_ini, horizon, m, p = (int(v) for v in lines[0][len("#shape "):].split(","))
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: line 1: malformed shape header") from exc
    shape = DataShape(n_seq=n_seq, t_ini=t_ini, horizon=horizon, m=m, p=p)
    seed_text = lines[1][len("#seed "):].strip() if lines[1].startswith("#seed") else ""
    seed = int(seed_text) if seed_text else None
    if not lines[2].startswith("#sigma_w"):
        raise DatasetFormatError(f"{path}: line 3: missing '#sigma_w' header")
    sigma_w = float(lines[2].split(None, 1)[1])

    blocks: dict[str, list[list[float]]] = {}
    current: Optional[str] = None
    for idx, line in enumerate(lines[_HEADER_LINES:], start=_HEADER_LINES + 1):
        if not line.strip():
            continue
        if line.startswith("#block "):
            current = line[len("#block "):].strip()
            blocks[current] = []
            continue
        if line.startswith("#"):
            continue
        if current is None:
            raise DatasetFormatError(f"{path}: line {idx}: data before any '#block' marker")
        try:
            values = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {idx}: unparsable number") from exc
        if values and len(values) != n_seq:
            raise DatasetFormatError(
                f"{path}: line {idx}: block '{current}' row has {len(values)} columns, "
                f"header declares {n_seq}")
        blocks[current].append(values)

    for required, rows in (("U_L", shape.seq_len * m), ("Y_L", shape.seq_len * p)):
        if required not in blocks:
            raise DatasetFormatError(f"{path}: missing block '{required}'")
        if len(blocks[required]) != rows:
            raise DatasetFormatError(
                f"{path}: block '{required}' has {len(blocks[required])} rows, expected {rows}")

    u_full = np.array(blocks["U_L"], dtype=float)
    y_full = np.array(blocks["Y_L"], dtype=float)
    x_init = np.array(blocks["X1"], dtype=float) if "X1" in blocks else None
    return DataMatrices(shape=shape, u_full=u_full, y_full=y_full,
                        x_init=x_init, seed=seed, sigma_w=sigma_w)
