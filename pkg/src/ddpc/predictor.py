"""Multi-step output predictor identified from recorded data by least squares.

The predictor is a single matrix mapping the stacked window
``[y_init; u_init; u_future]`` directly to the future output stack —
no state-space realization, no recursion.  Identification is the plain
least-squares fit of ``y_future`` against the regressor stack of the
dataset, computed through an SVD pseudoinverse; the identical formula is
used for deterministic and noisy data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import DataMatrices, DataShape
from .lti import rank_tolerance

__all__ = ["MultiStepPredictor", "pseudoinverse", "identify", "predict", "save_predictor"]


def pseudoinverse(mat: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse via SVD with scale-aware truncation.

    Singular values below ``max(rows, cols) * eps * s_max`` are dropped; the
    result satisfies the four Penrose identities to rounding.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if not np.all(np.isfinite(mat)):
        raise ValueError("non-finite entries")
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    tol = rank_tolerance(mat, s)
    inv_s = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0), 0.0)
    return (vt.T * inv_s) @ u.T


@dataclass(frozen=True)
class MultiStepPredictor:
    """Least-squares map from a window ``[y_init; u_init; u_future]`` to ``y_future``.

    ``coef`` has one column block per regressor block, in regressor row
    order; ``fit_residual`` and ``effective_rank`` record how well (and on
    how rich a row space) the fit closed on its training data.
    """

    coef: np.ndarray  # (horizon*p, t_ini*(m+p) + horizon*m)
    shape: DataShape
    fit_residual: float
    effective_rank: int

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        s = self.shape
        expected = (s.horizon * s.p, s.n_regressor_rows)
        if coef.shape != expected:
            raise ValueError(f"coef has shape {coef.shape}, expected {expected}")
        coef.flags.writeable = False
        object.__setattr__(self, "coef", coef)

    @property
    def coef_y_init(self) -> np.ndarray:
        return self.coef[:, : self.shape.t_ini * self.shape.p]

    @property
    def coef_u_init(self) -> np.ndarray:
        s = self.shape
        return self.coef[:, s.t_ini * s.p: s.t_ini * (s.p + s.m)]

    @property
    def coef_u_future(self) -> np.ndarray:
        s = self.shape
        return self.coef[:, s.t_ini * (s.p + s.m):]


def identify(data: DataMatrices) -> MultiStepPredictor:
    """Fit the predictor to a dataset: ``coef = y_future @ pinv(regressors)``."""
    pinv = pseudoinverse(data.regressors)
    coef = data.y_future @ pinv
    residual = float(np.linalg.norm(coef @ data.regressors - data.y_future))
    s = np.linalg.svd(data.regressors, compute_uv=False)
    rank = int(np.sum(s > rank_tolerance(data.regressors, s)))
    return MultiStepPredictor(coef=coef, shape=data.shape,
                              fit_residual=residual, effective_rank=rank)


def predict(pred: MultiStepPredictor, y_init: np.ndarray, u_init: np.ndarray,
            u_future: np.ndarray) -> np.ndarray:
    """Future output stack for the given window, ``coef @ [y_init; u_init; u_future]``."""
    s = pred.shape
    y_init = np.asarray(y_init, dtype=float).reshape(-1)
    u_init = np.asarray(u_init, dtype=float).reshape(-1)
    u_future = np.asarray(u_future, dtype=float).reshape(-1)
    if y_init.size != s.t_ini * s.p:
        raise ValueError(f"y_init has length {y_init.size}, expected {s.t_ini * s.p}")
    if u_init.size != s.t_ini * s.m:
        raise ValueError(f"u_init has length {u_init.size}, expected {s.t_ini * s.m}")
    if u_future.size != s.horizon * s.m:
        raise ValueError(f"u_future has length {u_future.size}, expected {s.horizon * s.m}")
    return pred.coef @ np.concatenate([y_init, u_init, u_future])


def save_predictor(pred: MultiStepPredictor, path) -> None:
    """CSV export of the coefficient matrix for offline inspection."""
    s = pred.shape
    lines = [f"#shape {s.t_ini},{s.horizon},{s.m},{s.p}"]
    for row in pred.coef:
        lines.append(",".join(format(v, ".17g") for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
