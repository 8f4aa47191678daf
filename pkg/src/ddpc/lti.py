"""Discrete-time LTI state-space models: simulation, structure checks, benchmark plant.

The model container is immutable; ``simulate`` is a pure function of
``(model, x0, inputs, noise)`` so trajectories are reproducible and safe to
generate concurrently.  The observability/Toeplitz builders double as an
independent prediction oracle: for any window of length ``i`` starting at a
known state, the stacked outputs equal ``O_i x0 + H_i u``.

Numeric rank decisions throughout the package use :func:`numeric_rank`, which
treats singular values below ``max(rows, cols) * eps * s_max`` as zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .rng import Rng

__all__ = [
    "StateSpaceModel",
    "NoiseSpec",
    "Trajectory",
    "BenchmarkParams",
    "simulate",
    "observability_matrix",
    "toeplitz_matrix",
    "system_lag",
    "build_benchmark_model",
    "numeric_rank",
    "rank_tolerance",
    "nullspace",
    "save_model",
    "load_model",
    "UnobservableModelError",
]


class UnobservableModelError(ValueError):
    """Raised when an operation requires observability the model lacks."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete-time quadruple x+ = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n, m, p = self.n, self.m, self.p
        if self.A.shape != (n, n) or self.B.shape != (n, m):
            raise ValueError(f"inconsistent A/B shapes: {self.A.shape}, {self.B.shape}")
        if self.C.shape != (p, n) or self.D.shape != (p, m):
            raise ValueError(f"inconsistent C/D shapes: {self.C.shape}, {self.D.shape}")
        for name in ("A", "B", "C", "D"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def is_minimal(self) -> bool:
        """Observability and controllability matrices both have rank n."""
        n = self.n
        obs = observability_matrix(self, n)
        ctr = np.hstack([np.linalg.matrix_power(self.A, k) @ self.B for k in range(n)])
        return numeric_rank(obs) == n and numeric_rank(ctr) == n


@dataclass(frozen=True)
class NoiseSpec:
    """Additive output noise w_k ~ N(0, sigma_w^2 I), drawn from a seeded stream."""

    sigma_w: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    """Input/output (and optionally state) records; rows are time steps."""

    u: np.ndarray  # (K, m)
    y: np.ndarray  # (K, p)
    x: Optional[np.ndarray] = None  # (K+1, n)

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u))
        object.__setattr__(self, "y", _frozen(self.y))
        if self.x is not None:
            object.__setattr__(self, "x", _frozen(self.x))
        if self.u.shape[0] != self.y.shape[0]:
            raise ValueError("u and y must cover the same number of steps")
        if self.x is not None and self.x.shape[0] != self.u.shape[0] + 1:
            raise ValueError("x must have one more row than u")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite trajectory entries")


def simulate(
    model: StateSpaceModel,
    x0: np.ndarray,
    u_seq: np.ndarray,
    noise: Optional[NoiseSpec] = None,
) -> Trajectory:
    """Roll the model forward under the input sequence.

    ``u_seq`` has one row per step.  With ``noise`` given and
    ``sigma_w > 0``, i.i.d. N(0, sigma_w^2 I) terms from the seeded stream
    are added to every measured output; ``sigma_w = 0`` reproduces the
    deterministic model exactly.
    """
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if u_seq.shape[0] == 0:
        raise ValueError("u_seq must be nonempty")
    if u_seq.shape[1] != model.m:
        raise ValueError(f"u_seq has {u_seq.shape[1]} columns, expected m={model.m}")
    if x0.shape[0] != model.n:
        raise ValueError(f"x0 has length {x0.shape[0]}, expected n={model.n}")
    if not (np.all(np.isfinite(u_seq)) and np.all(np.isfinite(x0))):
        raise ValueError("non-finite simulation inputs")

    steps = u_seq.shape[0]
    w = None
    if noise is not None and noise.sigma_w > 0:
        w = noise.sigma_w * Rng(noise.seed).normal_matrix(steps, model.p)

    xs = np.empty((steps + 1, model.n))
    ys = np.empty((steps, model.p))
    xs[0] = x0
    for k in range(steps):
        ys[k] = model.C @ xs[k] + model.D @ u_seq[k]
        xs[k + 1] = model.A @ xs[k] + model.B @ u_seq[k]
    if w is not None:
        ys += w
    return Trajectory(u=u_seq, y=ys, x=xs)


def observability_matrix(model: StateSpaceModel, i: int) -> np.ndarray:
    """Stack C, CA, ..., CA^(i-1); shape (i*p, n)."""
    if i < 1:
        raise ValueError("window length must be >= 1")
    blocks = []
    Ak = np.eye(model.n)
    for _ in range(i):
        blocks.append(model.C @ Ak)
        Ak = Ak @ model.A
    return np.vstack(blocks)


def toeplitz_matrix(model: StateSpaceModel, i: int) -> np.ndarray:
    """Block lower-triangular impulse-response matrix; shape (i*p, i*m).

    Row block j carries D on the diagonal and C A^(j-k-1) B at block
    column k < j, so that a window of outputs from a known start state is
    ``observability_matrix(model, i) @ x0 + toeplitz_matrix(model, i) @ u``.
    """
    if i < 1:
        raise ValueError("window length must be >= 1")
    p, mm = model.p, model.m
    H = np.zeros((i * p, i * mm))
    markov = [model.D]
    Ak = np.eye(model.n)
    for _ in range(i - 1):
        markov.append(model.C @ Ak @ model.B)
        Ak = Ak @ model.A
    for j in range(i):
        for k in range(j + 1):
            H[j * p:(j + 1) * p, k * mm:(k + 1) * mm] = markov[j - k]
    return H


def system_lag(model: StateSpaceModel) -> int:
    """Smallest window length from which the state is uniquely determined.

    Returns the least l with rank(observability_matrix(model, l)) == n.
    Raises :class:`UnobservableModelError` when no such l <= n exists.
    """
    n = model.n
    for l in range(1, n + 1):
        if numeric_rank(observability_matrix(model, l)) == n:
            return l
    raise UnobservableModelError("model is not observable: rank(O_n) < n")


def rank_tolerance(mat: np.ndarray, singular_values: np.ndarray) -> float:
    """Scale-aware cutoff: singular values below it are treated as zero."""
    if singular_values.size == 0:
        return 0.0
    return max(mat.shape) * np.finfo(float).eps * float(singular_values[0])


def numeric_rank(mat: np.ndarray) -> int:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > rank_tolerance(mat, s)))


def nullspace(mat: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ker(mat), one column per null direction."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    _, s, vt = np.linalg.svd(mat)
    tol = rank_tolerance(mat, s)
    rank = int(np.sum(s > tol))
    return vt[rank:].T


@dataclass(frozen=True)
class BenchmarkParams:
    """Physical constants of the three-disc torsion benchmark plant.

    Three rotating discs are coupled in a chain by torsion springs; two
    motors attach to the outer discs through additional springs, each motor
    angle tracking its command through a first-order lag.  Measured outputs
    are the three disc angles.  Defaults chosen (and verified by test) to
    give a stable, minimal 8-state discrete model.
    """

    inertia: float = 0.01  # disc inertia [kg m^2]
    spring_inter: float = 0.1  # disc-to-disc stiffness [N m/rad]
    spring_motor: float = 0.2  # motor-to-disc stiffness [N m/rad]
    damping: float = 0.01  # viscous friction [N m s/rad]
    actuator_tc: float = 0.1  # motor lag time constant [s]
    dt: float = 0.1  # sample time [s]

    def __post_init__(self):
        for name in ("inertia", "spring_inter", "spring_motor", "damping",
                     "actuator_tc", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def build_benchmark_model(params: BenchmarkParams = BenchmarkParams()) -> StateSpaceModel:
    """Discretized three-disc torsion plant: n=8, m=2, p=3.

    State layout: three disc angles, three disc velocities, two motor
    angles.  Discretization is exact zero-order hold via the matrix
    exponential of the augmented continuous-time system.
    """
    J = params.inertia
    kd = params.spring_inter
    km = params.spring_motor
    b = params.damping
    tau = params.actuator_tc

    Ac = np.zeros((8, 8))
    Ac[0:3, 3:6] = np.eye(3)
    stiffness = np.array([
        [-(km + kd), kd, 0.0],
        [kd, -2.0 * kd, kd],
        [0.0, kd, -(km + kd)],
    ])
    Ac[3:6, 0:3] = stiffness / J
    Ac[3:6, 3:6] = -(b / J) * np.eye(3)
    Ac[3, 6] = km / J
    Ac[5, 7] = km / J
    Ac[6, 6] = -1.0 / tau
    Ac[7, 7] = -1.0 / tau
    Bc = np.zeros((8, 2))
    Bc[6, 0] = 1.0 / tau
    Bc[7, 1] = 1.0 / tau
    C = np.zeros((3, 8))
    C[0, 0] = C[1, 1] = C[2, 2] = 1.0
    D = np.zeros((3, 2))

    # exact ZOH discretization: expm of the (A B; 0 0) augmentation
    aug = np.zeros((10, 10))
    aug[:8, :8] = Ac * params.dt
    aug[:8, 8:] = Bc * params.dt
    E = scipy.linalg.expm(aug)
    return StateSpaceModel(A=E[:8, :8], B=E[:8, 8:], C=C, D=D, dt=params.dt)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_model(model: StateSpaceModel, path) -> None:
    """Write the model as JSON with 17-significant-digit numbers."""

    def matrix(mat: np.ndarray) -> str:
        rows = [f'[{", ".join(_fmt(v) for v in row)}]' for row in mat]
        return "[" + ", ".join(rows) + "]"

    text = (
        "{\n"
        f'  "n": {model.n},\n'
        f'  "m": {model.m},\n'
        f'  "p": {model.p},\n'
        f'  "dt": {_fmt(model.dt)},\n'
        f'  "A": {matrix(model.A)},\n'
        f'  "B": {matrix(model.B)},\n'
        f'  "C": {matrix(model.C)},\n'
        f'  "D": {matrix(model.D)}\n'
        "}\n"
    )
    with open(path, "w") as fh:
        fh.write(text)


def load_model(path) -> StateSpaceModel:
    with open(path) as fh:
        doc = json.load(fh)
    model = StateSpaceModel(
        A=np.array(doc["A"], dtype=float),
        B=np.array(doc["B"], dtype=float),
        C=np.array(doc["C"], dtype=float),
        D=np.array(doc["D"], dtype=float),
        dt=float(doc["dt"]),
    )
    if (model.n, model.m, model.p) != (doc["n"], doc["m"], doc["p"]):
        raise ValueError("model file dimension fields disagree with matrix shapes")
    return model
