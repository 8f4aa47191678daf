"""Receding-horizon optimal control problems over recorded data.

Four problem flavors share one QP kernel:

* direct data-driven control (deterministic): decision variables are the
  data-column combination weights ``g`` plus the future inputs/outputs, tied
  together by the recorded data blocks;
* predictor-based control (deterministic): future outputs are pinned to the
  identified multi-step predictor, eliminating ``g``;
* the regularized variants of both for noisy data, which add penalized
  slacks ``sigma_y``, ``sigma_u`` on the initialization window (and for the
  direct form an ``lambda_g ||g||^2`` term);
* closed-form solutions of the two unconstrained regularized problems, with
  full first-order (KKT) residual reporting.

The closed-form direct solve inverts ``lambda_g I + M' V M + Y' Q Y`` (M the
regressor stack, Y the future-output block).  With ``lambda_g = 0`` and more
data columns than ``max(rows(M), horizon*p)`` that matrix is singular for
noise-free data and inverted-through-noise otherwise, so the solve is
refused with :class:`SingularityError` instead of returning a noise-driven
answer; the same guard protects the iterative regularized solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .datasets import DataMatrices
from .predictor import MultiStepPredictor, predict, pseudoinverse
from .qp import BoxQpSolution, solve_box_qp

__all__ = [
    "RegulationObjective",
    "RegWeights",
    "BoxConstraints",
    "InitialWindow",
    "OcpSolution",
    "WindowInfeasibleError",
    "SingularityError",
    "DeepcController",
    "SpcController",
    "RegularizedDeepcController",
    "RegularizedSpcController",
    "solve_deepc",
    "solve_spc",
    "solve_deepc_regularized",
    "solve_spc_regularized",
    "explicit_deepc_unconstrained",
    "explicit_spc_unconstrained",
    "solution_to_dict",
]

_EPS = float(np.finfo(float).eps)


class WindowInfeasibleError(RuntimeError):
    """The initialization window is not a trajectory of the recorded data."""


class SingularityError(RuntimeError):
    """The problem is degenerate: the defining matrix is (near-)singular.

    Raised for the closed-form direct solve and the regularized direct QP
    when ``lambda_g = 0`` while the dataset has more columns than
    ``max(rows(regressors), horizon * p)`` (the regularizer is then required
    for well-posedness), and when the inner matrix is numerically singular.
    """


@dataclass(frozen=True)
class RegulationObjective:
    """Stage weights of the quadratic regulation cost, sum of y'Qy + u'Ru."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("Q", "R"):
            mat = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if mat.shape[0] != mat.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-12 * (1 + np.max(np.abs(mat))):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(mat)[0] <= 0:
                raise ValueError(f"{name} must be positive definite")
            mat = 0.5 * (mat + mat.T)
            mat.flags.writeable = False
            object.__setattr__(self, name, mat)

    @classmethod
    def scaled_identity(cls, p: int, m: int, q_scale: float = 1.0, r_scale: float = 0.1):
        return cls(Q=q_scale * np.eye(p), R=r_scale * np.eye(m))

    def q_block(self, horizon: int) -> np.ndarray:
        return np.kron(np.eye(horizon), self.Q)

    def r_block(self, horizon: int) -> np.ndarray:
        return np.kron(np.eye(horizon), self.R)


@dataclass(frozen=True)
class RegWeights:
    """Regularization weights of the noisy formulations."""

    lambda_g: float = 1.0
    lambda_sigma_y: float = 1e4
    lambda_sigma_u: float = 1e4

    def __post_init__(self):
        if self.lambda_g < 0:
            raise ValueError("lambda_g must be nonnegative")
        if self.lambda_sigma_y <= 0 or self.lambda_sigma_u <= 0:
            raise ValueError("slack weights must be positive")

    def v_block(self, objective: RegulationObjective, t_ini: int, horizon: int,
                m: int, p: int) -> np.ndarray:
        """Weight on the stacked variable [sigma_y; sigma_u; u_future]."""
        return scipy.linalg.block_diag(
            self.lambda_sigma_y * np.eye(t_ini * p),
            self.lambda_sigma_u * np.eye(t_ini * m),
            objective.r_block(horizon),
        )


def _expand_bound(bound, n_steps: int, dim: int, default: float) -> np.ndarray:
    if bound is None:
        return np.full(n_steps * dim, default)
    arr = np.asarray(bound, dtype=float).reshape(-1)
    if arr.size == 1:
        return np.full(n_steps * dim, float(arr[0]))
    if arr.size == dim:
        return np.tile(arr, n_steps)
    if arr.size == n_steps * dim:
        return arr.copy()
    raise ValueError(f"bound has length {arr.size}; expected 1, {dim} or {n_steps * dim}")


@dataclass(frozen=True)
class BoxConstraints:
    """Per-step bounds; ``None`` means unconstrained on that side.

    Output bounds are hard constraints when supplied.  Slack bounds are
    optional (off by default) for experiments that want to pin or limit the
    window slacks of the regularized problems.
    """

    u_low: Optional[float | np.ndarray] = None
    u_high: Optional[float | np.ndarray] = None
    y_low: Optional[float | np.ndarray] = None
    y_high: Optional[float | np.ndarray] = None
    sigma_y_low: Optional[float | np.ndarray] = None
    sigma_y_high: Optional[float | np.ndarray] = None
    sigma_u_low: Optional[float | np.ndarray] = None
    sigma_u_high: Optional[float | np.ndarray] = None

    @classmethod
    def input_box(cls, bound: float) -> "BoxConstraints":
        return cls(u_low=-bound, u_high=bound)

    def u_bounds(self, horizon: int, m: int):
        lo = _expand_bound(self.u_low, horizon, m, -np.inf)
        hi = _expand_bound(self.u_high, horizon, m, np.inf)
        if np.any(lo > hi):
            raise ValueError("u_low exceeds u_high")
        return lo, hi

    def y_bounds(self, horizon: int, p: int):
        lo = _expand_bound(self.y_low, horizon, p, -np.inf)
        hi = _expand_bound(self.y_high, horizon, p, np.inf)
        if np.any(lo > hi):
            raise ValueError("y_low exceeds y_high")
        return lo, hi

    def sigma_bounds(self, t_ini: int, m: int, p: int):
        sy_lo = _expand_bound(self.sigma_y_low, t_ini, p, -np.inf)
        sy_hi = _expand_bound(self.sigma_y_high, t_ini, p, np.inf)
        su_lo = _expand_bound(self.sigma_u_low, t_ini, m, -np.inf)
        su_hi = _expand_bound(self.sigma_u_high, t_ini, m, np.inf)
        return (sy_lo, sy_hi), (su_lo, su_hi)


@dataclass(frozen=True)
class InitialWindow:
    """Most recent t_ini input/output samples, standing in for a state estimate."""

    y_init: np.ndarray  # (t_ini*p,)
    u_init: np.ndarray  # (t_ini*m,)

    def __post_init__(self):
        y = np.asarray(self.y_init, dtype=float).reshape(-1).copy()
        u = np.asarray(self.u_init, dtype=float).reshape(-1).copy()
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(u))):
            raise ValueError("non-finite window entries")
        y.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "y_init", y)
        object.__setattr__(self, "u_init", u)

    def stacked(self, n_future_inputs: int) -> np.ndarray:
        """Window right-hand side [y_init; u_init; 0] in regressor row order."""
        return np.concatenate([self.y_init, self.u_init, np.zeros(n_future_inputs)])


@dataclass
class OcpSolution:
    """Optimal point, multipliers, and solve diagnostics for one problem."""

    u: np.ndarray
    y: np.ndarray
    g: Optional[np.ndarray] = None
    sigma_y: Optional[np.ndarray] = None
    sigma_u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    objective: float = 0.0
    duals: dict = field(default_factory=dict)
    kkt: dict = field(default_factory=dict)
    solve_time_s: float = 0.0
    active_lower: Optional[np.ndarray] = None
    active_upper: Optional[np.ndarray] = None
    n_active: int = 0


def _timed_qp(**kwargs) -> tuple[BoxQpSolution, float]:
    t0 = time.perf_counter()
    res = solve_box_qp(**kwargs)
    return res, time.perf_counter() - t0


class DeepcController:
    """Deterministic direct data-driven control over one dataset.

    Decision variables are ``[g, u_future, y_future]``; the recorded blocks
    enter as equality constraints.  The initialization rows of those
    constraints are mutually dependent whenever ``t_ini * p`` exceeds the
    state dimension, which is why the kernel is told to accept consistent
    dependent equalities.  Construction work (pseudoinverse of the regressor
    stack, constraint assembly) happens once; each step only refreshes the
    right-hand side, so repeated solves are warm-startable.
    """

    def __init__(self, data: DataMatrices, objective: RegulationObjective,
                 box: BoxConstraints = BoxConstraints()):
        s = data.shape
        self.data = data
        self.shape = s
        T, N = s.n_seq, s.horizon
        nm, np_ = N * s.m, N * s.p
        self._n_vars = T + nm + np_
        q_blk = objective.q_block(N)
        r_blk = objective.r_block(N)
        self._H = scipy.linalg.block_diag(np.zeros((T, T)), 2 * r_blk, 2 * q_blk)
        self._f = np.zeros(self._n_vars)

        rows = s.t_ini * (s.p + s.m) + nm + np_
        Aeq = np.zeros((rows, self._n_vars))
        r0 = 0
        Aeq[r0:r0 + s.t_ini * s.p, :T] = data.y_past
        r0 += s.t_ini * s.p
        Aeq[r0:r0 + s.t_ini * s.m, :T] = data.u_past
        r0 += s.t_ini * s.m
        Aeq[r0:r0 + nm, :T] = data.u_future
        Aeq[r0:r0 + nm, T:T + nm] = -np.eye(nm)
        r0 += nm
        Aeq[r0:, :T] = data.y_future
        Aeq[r0:, T + nm:] = -np.eye(np_)
        self._Aeq = Aeq
        self._regressors_pinv = pseudoinverse(data.regressors)

        u_lo, u_hi = box.u_bounds(N, s.m)
        y_lo, y_hi = box.y_bounds(N, s.p)
        self._lo = np.concatenate([np.full(T, -np.inf), u_lo, y_lo])
        self._hi = np.concatenate([np.full(T, np.inf), u_hi, y_hi])
        self._u_sl = slice(T, T + nm)
        self._y_sl = slice(T + nm, None)
        self._last_active: Optional[tuple[np.ndarray, np.ndarray]] = None

    def _start(self, window: InitialWindow, active) -> np.ndarray:
        s = self.shape
        nm = s.horizon * s.m
        u0 = np.clip(np.zeros(nm), self._lo[self._u_sl], self._hi[self._u_sl])
        if active is not None:
            at_lo, at_hi = active
            u0 = np.where(at_lo[self._u_sl], self._lo[self._u_sl], u0)
            u0 = np.where(at_hi[self._u_sl], self._hi[self._u_sl], u0)
        rhs = np.concatenate([window.y_init, window.u_init, u0])
        g0 = self._regressors_pinv @ rhs
        gap = np.linalg.norm(self.data.regressors @ g0 - rhs, np.inf)
        if gap > 1e-7 * (1.0 + np.linalg.norm(rhs, np.inf)):
            raise WindowInfeasibleError(
                f"window is not consistent with the recorded data (residual {gap:.3e}); "
                "deterministic problems require noise-free trajectory windows")
        y0 = self.data.y_future @ g0
        return np.concatenate([g0, u0, y0])

    def step(self, window: InitialWindow, warm_start: bool = True) -> OcpSolution:
        beq = np.concatenate([
            window.y_init, window.u_init,
            np.zeros(self.shape.horizon * (self.shape.m + self.shape.p)),
        ])
        active = self._last_active if warm_start else None
        z0 = self._start(window, active)
        res, elapsed = _timed_qp(
            H=self._H, f=self._f, A=self._Aeq, b=beq, lo=self._lo, hi=self._hi,
            x0=z0, active0=active, allow_dependent_equalities=True)
        self._last_active = (res.active_lower, res.active_upper)
        T = self.shape.n_seq
        return OcpSolution(
            u=res.z[self._u_sl].copy(), y=res.z[self._y_sl].copy(), g=res.z[:T].copy(),
            objective=res.objective,
            duals={"eq": res.eq_duals, "lower": res.lower_duals, "upper": res.upper_duals},
            kkt=dict(res.residuals), solve_time_s=elapsed,
            active_lower=res.active_lower, active_upper=res.active_upper,
            n_active=int(res.active_lower.sum() + res.active_upper.sum()))


class SpcController:
    """Deterministic predictor-based control: variables ``[u_future, y_future]``."""

    def __init__(self, pred: MultiStepPredictor, objective: RegulationObjective,
                 box: BoxConstraints = BoxConstraints()):
        s = pred.shape
        self.pred = pred
        self.shape = s
        nm, np_ = s.horizon * s.m, s.horizon * s.p
        self._H = scipy.linalg.block_diag(2 * objective.r_block(s.horizon),
                                          2 * objective.q_block(s.horizon))
        self._f = np.zeros(nm + np_)
        Aeq = np.zeros((np_, nm + np_))
        Aeq[:, :nm] = -pred.coef_u_future
        Aeq[:, nm:] = np.eye(np_)
        self._Aeq = Aeq
        u_lo, u_hi = box.u_bounds(s.horizon, s.m)
        y_lo, y_hi = box.y_bounds(s.horizon, s.p)
        self._lo = np.concatenate([u_lo, y_lo])
        self._hi = np.concatenate([u_hi, y_hi])
        self._u_sl = slice(0, nm)
        self._y_sl = slice(nm, None)
        self._last_active: Optional[tuple[np.ndarray, np.ndarray]] = None

    def step(self, window: InitialWindow, warm_start: bool = True) -> OcpSolution:
        s = self.shape
        nm = s.horizon * s.m
        beq = self.pred.coef_y_init @ window.y_init + self.pred.coef_u_init @ window.u_init
        active = self._last_active if warm_start else None
        u0 = np.clip(np.zeros(nm), self._lo[self._u_sl], self._hi[self._u_sl])
        if active is not None:
            u0 = np.where(active[0][self._u_sl], self._lo[self._u_sl], u0)
            u0 = np.where(active[1][self._u_sl], self._hi[self._u_sl], u0)
        y0 = predict(self.pred, window.y_init, window.u_init, u0)
        z0 = np.concatenate([u0, y0])
        res, elapsed = _timed_qp(
            H=self._H, f=self._f, A=self._Aeq, b=beq, lo=self._lo, hi=self._hi,
            x0=z0, active0=active)
        self._last_active = (res.active_lower, res.active_upper)
        return OcpSolution(
            u=res.z[self._u_sl].copy(), y=res.z[self._y_sl].copy(),
            objective=res.objective,
            duals={"eq": res.eq_duals, "lower": res.lower_duals, "upper": res.upper_duals},
            kkt=dict(res.residuals), solve_time_s=elapsed,
            active_lower=res.active_lower, active_upper=res.active_upper,
            n_active=int(res.active_lower.sum() + res.active_upper.sum()))


def _check_degenerate(lambda_g: float, n_seq: int, n_regressor_rows: int,
                      n_future_outputs: int) -> None:
    limit = max(n_regressor_rows, n_future_outputs)
    if lambda_g == 0.0 and n_seq > limit:
        raise SingularityError(
            f"lambda_g = 0 with {n_seq} data columns > max(regressor rows, future output "
            f"rows) = {limit}: the combination-weight regularizer is required for "
            "well-posedness (the defining matrix is singular for noise-free data)")


class RegularizedDeepcController:
    """Noisy-data direct control with penalized window slacks.

    Variables ``[g, u_future, y_future, sigma_y, sigma_u]``.  Always
    feasible for any window (the slacks absorb it), so no trajectory check
    is performed.  Fails fast with :class:`SingularityError` in the
    ``lambda_g = 0`` degenerate data regime.
    """

    def __init__(self, data: DataMatrices, objective: RegulationObjective,
                 weights: RegWeights, box: BoxConstraints = BoxConstraints()):
        s = data.shape
        _check_degenerate(weights.lambda_g, s.n_seq, s.n_regressor_rows, s.horizon * s.p)
        self.data = data
        self.shape = s
        self.weights = weights
        T, N = s.n_seq, s.horizon
        nm, np_, tp, tm = N * s.m, N * s.p, s.t_ini * s.p, s.t_ini * s.m
        self._n_vars = T + nm + np_ + tp + tm
        self._H = scipy.linalg.block_diag(
            2 * weights.lambda_g * np.eye(T),
            2 * objective.r_block(N),
            2 * objective.q_block(N),
            2 * weights.lambda_sigma_y * np.eye(tp),
            2 * weights.lambda_sigma_u * np.eye(tm),
        )
        self._f = np.zeros(self._n_vars)
        rows = tp + tm + nm + np_
        Aeq = np.zeros((rows, self._n_vars))
        c_u, c_y, c_sy, c_su = T, T + nm, T + nm + np_, T + nm + np_ + tp
        r0 = 0
        Aeq[r0:r0 + tp, :T] = data.y_past
        Aeq[r0:r0 + tp, c_sy:c_sy + tp] = -np.eye(tp)
        r0 += tp
        Aeq[r0:r0 + tm, :T] = data.u_past
        Aeq[r0:r0 + tm, c_su:] = -np.eye(tm)
        r0 += tm
        Aeq[r0:r0 + nm, :T] = data.u_future
        Aeq[r0:r0 + nm, c_u:c_u + nm] = -np.eye(nm)
        r0 += nm
        Aeq[r0:, :T] = data.y_future
        Aeq[r0:, c_y:c_y + np_] = -np.eye(np_)
        self._Aeq = Aeq
        self._u_future_pinv = pseudoinverse(data.u_future)

        u_lo, u_hi = box.u_bounds(N, s.m)
        y_lo, y_hi = box.y_bounds(N, s.p)
        (sy_lo, sy_hi), (su_lo, su_hi) = box.sigma_bounds(s.t_ini, s.m, s.p)
        free = np.full(T, np.inf)
        self._lo = np.concatenate([-free, u_lo, y_lo, sy_lo, su_lo])
        self._hi = np.concatenate([free, u_hi, y_hi, sy_hi, su_hi])
        self._sl = {"u": slice(c_u, c_u + nm), "y": slice(c_y, c_y + np_),
                    "sy": slice(c_sy, c_sy + tp), "su": slice(c_su, None)}
        self._last_active: Optional[tuple[np.ndarray, np.ndarray]] = None

    def step(self, window: InitialWindow, warm_start: bool = True) -> OcpSolution:
        s = self.shape
        T, nm = s.n_seq, s.horizon * s.m
        beq = np.concatenate([
            window.y_init, window.u_init, np.zeros(nm + s.horizon * s.p)])
        active = self._last_active if warm_start else None
        sl_u = self._sl["u"]
        u0 = np.clip(np.zeros(nm), self._lo[sl_u], self._hi[sl_u])
        if active is not None:
            u0 = np.where(active[0][sl_u], self._lo[sl_u], u0)
            u0 = np.where(active[1][sl_u], self._hi[sl_u], u0)
        g0 = self._u_future_pinv @ u0
        sy0 = self.data.y_past @ g0 - window.y_init
        su0 = self.data.u_past @ g0 - window.u_init
        y0 = self.data.y_future @ g0
        z0 = np.concatenate([g0, u0, y0, sy0, su0])
        res, elapsed = _timed_qp(
            H=self._H, f=self._f, A=self._Aeq, b=beq, lo=self._lo, hi=self._hi,
            x0=z0, active0=active)
        self._last_active = (res.active_lower, res.active_upper)
        u = res.z[sl_u].copy()
        sigma_y = res.z[self._sl["sy"]].copy()
        sigma_u = res.z[self._sl["su"]].copy()
        return OcpSolution(
            u=u, y=res.z[self._sl["y"]].copy(), g=res.z[:T].copy(),
            sigma_y=sigma_y, sigma_u=sigma_u,
            v=np.concatenate([sigma_y, sigma_u, u]),
            objective=res.objective,
            duals={"eq": res.eq_duals, "lower": res.lower_duals, "upper": res.upper_duals},
            kkt=dict(res.residuals), solve_time_s=elapsed,
            active_lower=res.active_lower, active_upper=res.active_upper,
            n_active=int(res.active_lower.sum() + res.active_upper.sum()))


class RegularizedSpcController:
    """Noisy-data predictor-based control with penalized window slacks.

    Variables ``[u_future, y_future, sigma_y, sigma_u]``; the predictor maps
    the slack-shifted window to the future outputs.
    """

    def __init__(self, pred: MultiStepPredictor, objective: RegulationObjective,
                 weights: RegWeights, box: BoxConstraints = BoxConstraints()):
        s = pred.shape
        self.pred = pred
        self.shape = s
        self.weights = weights
        N = s.horizon
        nm, np_, tp, tm = N * s.m, N * s.p, s.t_ini * s.p, s.t_ini * s.m
        self._H = scipy.linalg.block_diag(
            2 * objective.r_block(N),
            2 * objective.q_block(N),
            2 * weights.lambda_sigma_y * np.eye(tp),
            2 * weights.lambda_sigma_u * np.eye(tm),
        )
        self._f = np.zeros(nm + np_ + tp + tm)
        Aeq = np.zeros((np_, nm + np_ + tp + tm))
        Aeq[:, :nm] = -pred.coef_u_future
        Aeq[:, nm:nm + np_] = np.eye(np_)
        Aeq[:, nm + np_:nm + np_ + tp] = -pred.coef_y_init
        Aeq[:, nm + np_ + tp:] = -pred.coef_u_init
        self._Aeq = Aeq
        u_lo, u_hi = box.u_bounds(N, s.m)
        y_lo, y_hi = box.y_bounds(N, s.p)
        (sy_lo, sy_hi), (su_lo, su_hi) = box.sigma_bounds(s.t_ini, s.m, s.p)
        self._lo = np.concatenate([u_lo, y_lo, sy_lo, su_lo])
        self._hi = np.concatenate([u_hi, y_hi, sy_hi, su_hi])
        self._sl = {"u": slice(0, nm), "y": slice(nm, nm + np_),
                    "sy": slice(nm + np_, nm + np_ + tp), "su": slice(nm + np_ + tp, None)}
        self._last_active: Optional[tuple[np.ndarray, np.ndarray]] = None

    def step(self, window: InitialWindow, warm_start: bool = True) -> OcpSolution:
        s = self.shape
        nm = s.horizon * s.m
        beq = self.pred.coef_y_init @ window.y_init + self.pred.coef_u_init @ window.u_init
        active = self._last_active if warm_start else None
        sl_u = self._sl["u"]
        u0 = np.clip(np.zeros(nm), self._lo[sl_u], self._hi[sl_u])
        if active is not None:
            u0 = np.where(active[0][sl_u], self._lo[sl_u], u0)
            u0 = np.where(active[1][sl_u], self._hi[sl_u], u0)
        y0 = predict(self.pred, window.y_init, window.u_init, u0)
        z0 = np.concatenate([u0, y0, np.zeros(self._f.size - nm - y0.size)])
        res, elapsed = _timed_qp(
            H=self._H, f=self._f, A=self._Aeq, b=beq, lo=self._lo, hi=self._hi,
            x0=z0, active0=active)
        self._last_active = (res.active_lower, res.active_upper)
        u = res.z[sl_u].copy()
        sigma_y = res.z[self._sl["sy"]].copy()
        sigma_u = res.z[self._sl["su"]].copy()
        return OcpSolution(
            u=u, y=res.z[self._sl["y"]].copy(),
            sigma_y=sigma_y, sigma_u=sigma_u,
            v=np.concatenate([sigma_y, sigma_u, u]),
            objective=res.objective,
            duals={"eq": res.eq_duals, "lower": res.lower_duals, "upper": res.upper_duals},
            kkt=dict(res.residuals), solve_time_s=elapsed,
            active_lower=res.active_lower, active_upper=res.active_upper,
            n_active=int(res.active_lower.sum() + res.active_upper.sum()))


def solve_deepc(data: DataMatrices, window: InitialWindow,
                objective: RegulationObjective,
                box: BoxConstraints = BoxConstraints()) -> OcpSolution:
    """One-shot deterministic direct data-driven solve."""
    return DeepcController(data, objective, box).step(window, warm_start=False)


def solve_spc(pred: MultiStepPredictor, window: InitialWindow,
              objective: RegulationObjective,
              box: BoxConstraints = BoxConstraints()) -> OcpSolution:
    """One-shot deterministic predictor-based solve."""
    return SpcController(pred, objective, box).step(window, warm_start=False)


def solve_deepc_regularized(data: DataMatrices, window: InitialWindow,
                            objective: RegulationObjective, weights: RegWeights,
                            box: BoxConstraints = BoxConstraints()) -> OcpSolution:
    """One-shot regularized direct solve for noisy data."""
    return RegularizedDeepcController(data, objective, weights, box).step(window, warm_start=False)


def solve_spc_regularized(pred: MultiStepPredictor, window: InitialWindow,
                          objective: RegulationObjective, weights: RegWeights,
                          box: BoxConstraints = BoxConstraints()) -> OcpSolution:
    """One-shot regularized predictor-based solve for noisy data."""
    return RegularizedSpcController(pred, objective, weights, box).step(window, warm_start=False)


def explicit_deepc_unconstrained(data: DataMatrices, window: InitialWindow,
                                 objective: RegulationObjective,
                                 weights: RegWeights) -> OcpSolution:
    """Closed-form solution of the unconstrained regularized direct problem.

    Returns the stacked optimum ``v = [sigma_y; sigma_u; u_future]`` along
    with the implied combination weights and future outputs, and reports the
    first-order optimality residuals of the underlying Lagrangian.
    """
    s = data.shape
    t0 = time.perf_counter()
    _check_degenerate(weights.lambda_g, s.n_seq, s.n_regressor_rows, s.horizon * s.p)
    M = data.regressors
    Yf = data.y_future
    q_blk = objective.q_block(s.horizon)
    V = weights.v_block(objective, s.t_ini, s.horizon, s.m, s.p)
    b = window.stacked(s.horizon * s.m)
    inner = weights.lambda_g * np.eye(s.n_seq) + M.T @ V @ M + Yf.T @ q_blk @ Yf
    w, vecs = np.linalg.eigh(inner)
    if w[0] <= s.n_seq * _EPS * max(w[-1], 0.0):
        raise SingularityError(
            f"defining matrix is numerically singular (eig ratio {w[0] / w[-1]:.3e})")
    g = vecs @ ((vecs.T @ (M.T @ (V @ b))) / w)
    v = M @ g - b
    y = Yf @ g
    tp, tm = s.t_ini * s.p, s.t_ini * s.m
    sigma_y, sigma_u, u = v[:tp], v[tp:tp + tm], v[tp + tm:]
    mu1 = q_blk @ y
    mu2 = -(V @ v)
    stat = weights.lambda_g * g + Yf.T @ mu1 - M.T @ mu2
    primal = max(float(np.linalg.norm(y - Yf @ g, np.inf)),
                 float(np.linalg.norm(M @ g - b - v, np.inf)))
    objective_value = float(y @ q_blk @ y + v @ V @ v + weights.lambda_g * (g @ g))
    return OcpSolution(
        u=u.copy(), y=y, g=g, sigma_y=sigma_y.copy(), sigma_u=sigma_u.copy(), v=v,
        objective=objective_value,
        duals={"mu_output": mu1, "mu_window": mu2},
        kkt={"stationarity": float(np.linalg.norm(stat, np.inf)),
             "primal": primal, "complementarity": 0.0},
        solve_time_s=time.perf_counter() - t0)


def explicit_spc_unconstrained(pred: MultiStepPredictor, window: InitialWindow,
                               objective: RegulationObjective,
                               weights: RegWeights) -> OcpSolution:
    """Closed-form solution of the unconstrained regularized predictor problem."""
    s = pred.shape
    t0 = time.perf_counter()
    P = pred.coef
    q_blk = objective.q_block(s.horizon)
    V = weights.v_block(objective, s.t_ini, s.horizon, s.m, s.p)
    b = window.stacked(s.horizon * s.m)
    pqp = P.T @ q_blk @ P
    v = -np.linalg.solve(V + pqp, pqp @ b)
    y = P @ (b + v)
    tp, tm = s.t_ini * s.p, s.t_ini * s.m
    sigma_y, sigma_u, u = v[:tp], v[tp:tp + tm], v[tp + tm:]
    mu = q_blk @ y
    stat = V @ v + P.T @ mu
    primal = float(np.linalg.norm(y - P @ (b + v), np.inf))
    objective_value = float(y @ q_blk @ y + v @ V @ v)
    return OcpSolution(
        u=u.copy(), y=y, sigma_y=sigma_y.copy(), sigma_u=sigma_u.copy(), v=v,
        objective=objective_value,
        duals={"mu_output": mu},
        kkt={"stationarity": float(np.linalg.norm(stat, np.inf)),
             "primal": primal, "complementarity": 0.0},
        solve_time_s=time.perf_counter() - t0)


def solution_to_dict(sol: OcpSolution) -> dict:
    """JSON-ready dump of one solution (vectors, duals, residuals, timing)."""

    def arr(x):
        return None if x is None else np.asarray(x).tolist()

    return {
        "u": arr(sol.u),
        "y": arr(sol.y),
        "g": arr(sol.g),
        "sigma_y": arr(sol.sigma_y),
        "sigma_u": arr(sol.sigma_u),
        "v": arr(sol.v),
        "objective": sol.objective,
        "duals": {k: arr(vv) for k, vv in sol.duals.items()},
        "kkt": sol.kkt,
        "solve_time_s": sol.solve_time_s,
        "n_active": sol.n_active,
    }
