"""Closed-loop benchmark harness: receding-horizon runs, cost and timing tables.

A closed-loop run excites the plant with seeded random admissible inputs to
populate the initialization window, then applies the first optimal input of
a fresh solve at every step, shifting the window forward.  The cumulated
cost sums the stage costs of the measured closed-loop trajectory over the
control phase; per-step timing covers the online solve only (controller
construction and predictor identification are offline, one-time work and
excluded, as is right for comparing online effort).

All randomness derives from one run seed: data collection, excitation, and
measurement noise get independent child streams, so two controllers given
the same seed face byte-identical experiments.  Timed solves run strictly
sequentially; records are reproducible except for the wall-clock fields.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import DataShape, ExcitationSpec, collect_sequences
from .lti import NoiseSpec, StateSpaceModel, simulate
from .ocp import (
    BoxConstraints,
    InitialWindow,
    RegWeights,
    RegulationObjective,
    SingularityError,
    DeepcController,
    RegularizedDeepcController,
    RegularizedSpcController,
    SpcController,
    solve_deepc_regularized,
    solve_spc_regularized,
)
from .predictor import identify
from .rng import Rng, derive_seed
from .verification import sample_window

__all__ = [
    "ControllerSpec",
    "ClosedLoopRecord",
    "BenchTable",
    "run_closed_loop",
    "run_table1",
    "run_figure3",
    "write_closed_loop_csv",
    "write_table_csv",
    "write_figure_csv",
    "write_manifest",
    "CONTROLLER_KINDS",
]

CONTROLLER_KINDS = ("deepc", "spc", "deepc_regularized", "spc_regularized")


@dataclass(frozen=True)
class ControllerSpec:
    """Complete recipe for one closed-loop controller."""

    kind: str  # one of CONTROLLER_KINDS
    n_seq: int = 150
    t_ini: int = 4
    horizon: int = 40
    q_scale: float = 1.0
    r_scale: float = 0.1
    u_bound: float = 0.7
    weights: RegWeights = RegWeights(lambda_g=1.0, lambda_sigma_y=1e4, lambda_sigma_u=1e4)

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}; "
                             f"expected one of {CONTROLLER_KINDS}")

    def objective(self, model: StateSpaceModel) -> RegulationObjective:
        return RegulationObjective.scaled_identity(model.p, model.m,
                                                   self.q_scale, self.r_scale)

    def box(self) -> BoxConstraints:
        return BoxConstraints.input_box(self.u_bound)

    def shape(self, model: StateSpaceModel) -> DataShape:
        return DataShape(n_seq=self.n_seq, t_ini=self.t_ini, horizon=self.horizon,
                         m=model.m, p=model.p)


@dataclass
class ClosedLoopRecord:
    """One closed-loop experiment: applied inputs, measured outputs, timing."""

    label: str
    seed: int
    u_hist: np.ndarray  # (n_control, m) applied inputs
    y_hist: np.ndarray  # (n_control, p) measured outputs
    step_times_s: np.ndarray  # (n_control,) online solve times
    cost: float
    config: dict = field(default_factory=dict)

    def recompute_cost(self, objective: RegulationObjective) -> float:
        total = 0.0
        for u, y in zip(self.u_hist, self.y_hist):
            total += float(y @ objective.Q @ y + u @ objective.R @ u)
        return total


def _build_controller(spec: ControllerSpec, model: StateSpaceModel, data):
    objective = spec.objective(model)
    box = spec.box()
    if spec.kind == "deepc":
        return DeepcController(data, objective, box)
    if spec.kind == "spc":
        return SpcController(identify(data), objective, box)
    if spec.kind == "deepc_regularized":
        return RegularizedDeepcController(data, objective, spec.weights, box)
    return RegularizedSpcController(identify(data), objective, spec.weights, box)


def run_closed_loop(
    model: StateSpaceModel,
    spec: ControllerSpec,
    n_excite: int = 20,
    n_control: int = 60,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    excitation_bound: Optional[float] = None,
) -> ClosedLoopRecord:
    """Run one receding-horizon experiment and record the control phase.

    Child seeds: ``derive(seed, 0)`` collects the dataset, ``derive(seed, 1)``
    drives the excitation inputs, ``derive(seed, 2)`` draws the closed-loop
    measurement noise.  Data collection and the excitation phase both draw
    inputs uniformly from the controller's admissible box; pass
    ``excitation_bound`` to override the excitation amplitude alone.  A
    solver failure aborts with the step index attached.
    """
    sigma_w = noise.sigma_w if noise is not None else 0.0
    data_noise = NoiseSpec(sigma_w, derive_seed(seed, 3)) if sigma_w > 0 else None
    data = collect_sequences(
        model, spec.shape(model),
        excitation=ExcitationSpec(u_low=-spec.u_bound, u_high=spec.u_bound),
        noise=data_noise, seed=derive_seed(seed, 0))
    controller = _build_controller(spec, model, data)
    objective = spec.objective(model)

    t_ini, m, p = spec.t_ini, model.m, model.p
    if n_excite < t_ini:
        raise ValueError("excitation phase must cover at least the initialization window")
    amp = spec.u_bound if excitation_bound is None else excitation_bound
    excite_rng = Rng(derive_seed(seed, 1))
    noise_rng = Rng(derive_seed(seed, 2))

    x = np.zeros(model.n)
    window_u = np.zeros((t_ini, m))
    window_y = np.zeros((t_ini, p))
    for k in range(n_excite):
        u = excite_rng.uniform(-amp, amp, m)
        y = model.C @ x + model.D @ u
        if sigma_w > 0:
            y = y + sigma_w * noise_rng.normals(p)
        window_u = np.vstack([window_u[1:], u])
        window_y = np.vstack([window_y[1:], y])
        x = model.A @ x + model.B @ u

    u_hist = np.empty((n_control, m))
    y_hist = np.empty((n_control, p))
    times = np.empty(n_control)
    for k in range(n_control):
        window = InitialWindow(y_init=window_y.ravel(), u_init=window_u.ravel())
        try:
            sol = controller.step(window)
        except Exception as exc:
            raise RuntimeError(f"{spec.kind} solver failed at control step {k}: {exc}") from exc
        u = sol.u[:m]
        y = model.C @ x + model.D @ u
        if sigma_w > 0:
            y = y + sigma_w * noise_rng.normals(p)
        u_hist[k] = u
        y_hist[k] = y
        times[k] = sol.solve_time_s
        window_u = np.vstack([window_u[1:], u])
        window_y = np.vstack([window_y[1:], y])
        x = model.A @ x + model.B @ u

    cost = sum(float(y @ objective.Q @ y + u @ objective.R @ u)
               for u, y in zip(u_hist, y_hist))
    return ClosedLoopRecord(
        label=spec.kind, seed=seed, u_hist=u_hist, y_hist=y_hist,
        step_times_s=times, cost=cost,
        config={"kind": spec.kind, "n_seq": spec.n_seq, "t_ini": spec.t_ini,
                "horizon": spec.horizon, "sigma_w": sigma_w,
                "lambda_g": spec.weights.lambda_g,
                "n_excite": n_excite, "n_control": n_control, "seed": seed})


@dataclass
class BenchTable:
    """Per-cell raw benchmark results plus recomputable aggregates."""

    rows: list = field(default_factory=list)  # dicts: controller, n_seq, seed, cost, time_ms

    def mean_rows(self) -> list:
        """Mean cost and solve time per (controller, n_seq), skipping failures."""
        groups: dict = {}
        for row in self.rows:
            if row.get("failed"):
                continue
            groups.setdefault((row["controller"], row["n_seq"]), []).append(row)
        out = []
        for (controller, n_seq), cells in sorted(groups.items()):
            out.append({
                "controller": controller,
                "n_seq": n_seq,
                "mean_cost": float(np.mean([c["cost"] for c in cells])),
                "mean_time_ms": float(np.mean([c["time_ms"] for c in cells])),
                "n_runs": len(cells),
            })
        return out

    def table(self) -> str:
        lines = [f"{'controller':<20} {'T':>5} {'mean cost':>12} {'mean time [ms]':>15} {'runs':>5}"]
        for r in self.mean_rows():
            lines.append(f"{r['controller']:<20} {r['n_seq']:>5} {r['mean_cost']:>12.4f} "
                         f"{r['mean_time_ms']:>15.3f} {r['n_runs']:>5}")
        return "\n".join(lines)


def run_table1(
    model: StateSpaceModel,
    seeds,
    n_seq_values=(100, 150, 200),
    sigma_w: float = 1e-2,
    lambda_g: float = 1.0,
    lambda_sigma: float = 1e4,
    n_excite: int = 20,
    n_control: int = 60,
    t_ini: int = 4,
    horizon: int = 40,
    u_bound: float = 0.7,
) -> BenchTable:
    """Closed-loop cost/time comparison of the two regularized controllers.

    Every (controller, data size) cell reuses the same seed list, so
    controllers face identical experiments and cost differences are paired.
    A failed cell is recorded with its error and skipped in the aggregates.
    """
    table = BenchTable()
    weights = RegWeights(lambda_g=lambda_g, lambda_sigma_y=lambda_sigma,
                         lambda_sigma_u=lambda_sigma)
    for kind in ("deepc_regularized", "spc_regularized"):
        for n_seq in n_seq_values:
            spec = ControllerSpec(kind=kind, n_seq=n_seq, t_ini=t_ini, horizon=horizon,
                                  u_bound=u_bound, weights=weights)
            for seed in seeds:
                row = {"controller": kind, "n_seq": n_seq, "seed": seed}
                try:
                    rec = run_closed_loop(model, spec, n_excite=n_excite,
                                          n_control=n_control,
                                          noise=NoiseSpec(sigma_w, 0), seed=seed)
                    row["cost"] = rec.cost
                    row["time_ms"] = float(np.mean(rec.step_times_s) * 1e3)
                except (SingularityError, RuntimeError) as exc:
                    row["failed"] = True
                    row["error"] = str(exc)
                table.rows.append(row)
    return table


_FIGURE3_CASES = (
    ("a", "deepc_regularized", 100, 0.0),
    ("b", "deepc_regularized", 100, 1.0),
    ("c", "spc_regularized", 100, None),
    ("d", "deepc_regularized", 150, 0.0),
    ("e", "deepc_regularized", 150, 1.0),
    ("f", "spc_regularized", 150, None),
)


def run_figure3(
    model: StateSpaceModel,
    seed: int = 0,
    sigma_w: float = 1e-2,
    lambda_sigma: float = 1e4,
    t_ini: int = 4,
    horizon: int = 40,
    u_bound: float = 0.7,
) -> dict:
    """Open-loop comparison on one shared noisy window across six cases.

    Cases sweep data size (100, 150 columns) and, for the direct route, the
    combination-weight penalty (0, 1).  Each solved case records the optimal
    input sequence, the predicted outputs, and the true noiseless plant
    response to those inputs from the true state.  The known-degenerate case
    (direct, 150 columns, zero penalty) is annotated and skipped without
    aborting.
    """
    objective = RegulationObjective.scaled_identity(model.p, model.m)
    box = BoxConstraints.input_box(u_bound)
    window_rng = Rng(derive_seed(seed, 10))
    window, x_true = sample_window(model, t_ini, window_rng, x0_scale=1.0,
                                   u_bound=u_bound, sigma_w=sigma_w,
                                   noise_seed=derive_seed(seed, 11))
    datasets = {}
    for n_seq in (100, 150):
        shape = DataShape(n_seq=n_seq, t_ini=t_ini, horizon=horizon, m=model.m, p=model.p)
        datasets[n_seq] = collect_sequences(
            model, shape, noise=NoiseSpec(sigma_w, derive_seed(seed, 20 + n_seq)),
            seed=derive_seed(seed, n_seq))
    predictors = {n_seq: identify(data) for n_seq, data in datasets.items()}

    cases = {}
    for label, kind, n_seq, lambda_g in _FIGURE3_CASES:
        case = {"label": label, "controller": kind, "n_seq": n_seq, "lambda_g": lambda_g}
        weights = RegWeights(lambda_g=0.0 if lambda_g is None else lambda_g,
                             lambda_sigma_y=lambda_sigma, lambda_sigma_u=lambda_sigma)
        try:
            if kind == "deepc_regularized":
                sol = solve_deepc_regularized(datasets[n_seq], window, objective,
                                              weights, box)
            else:
                sol = solve_spc_regularized(predictors[n_seq], window, objective,
                                            weights, box)
        except SingularityError as exc:
            case.update({"degenerate": True, "note": str(exc)})
            cases[label] = case
            continue
        y_pred = sol.y.reshape(horizon, model.p)
        true = simulate(model, x_true, sol.u.reshape(horizon, model.m))
        case.update({
            "degenerate": False,
            "u_opt": sol.u.reshape(horizon, model.m),
            "y_pred": y_pred,
            "y_true": true.y,
            "open_loop_cost": sol.objective,
            "pred_true_gap": float(np.abs(y_pred - true.y).max()),
        })
        cases[label] = case
    return {"window": window, "sigma_w": sigma_w, "seed": seed, "cases": cases}


def write_closed_loop_csv(record: ClosedLoopRecord, path) -> None:
    """Per-step closed-loop log: k, inputs, outputs, solve time [ms]."""
    m = record.u_hist.shape[1]
    p = record.y_hist.shape[1]
    header = (["k"] + [f"u{i + 1}" for i in range(m)] + [f"y{i + 1}" for i in range(p)]
              + ["step_time_ms"])
    lines = [",".join(header)]
    for k in range(record.u_hist.shape[0]):
        cells = [str(k)]
        cells += [format(v, ".17g") for v in record.u_hist[k]]
        cells += [format(v, ".17g") for v in record.y_hist[k]]
        cells += [format(record.step_times_s[k] * 1e3, ".6g")]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_table_csv(table: BenchTable, path) -> None:
    lines = ["controller,T,seed,cost,time_ms"]
    for row in table.rows:
        if row.get("failed"):
            lines.append(f"{row['controller']},{row['n_seq']},{row['seed']},failed,failed")
        else:
            lines.append(f"{row['controller']},{row['n_seq']},{row['seed']},"
                         f"{row['cost']:.17g},{row['time_ms']:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_figure_csv(result: dict, out_dir, prefix: str = "figure3") -> list:
    """One CSV per case: k, inputs, predicted and true outputs per channel."""
    out_dir = Path(out_dir)
    written = []
    for label, case in result["cases"].items():
        path = out_dir / f"{prefix}_{label}.csv"
        if case.get("degenerate"):
            path.write_text(f"# case {label} degenerate: {case['note']}\n")
            written.append(path)
            continue
        u, y_pred, y_true = case["u_opt"], case["y_pred"], case["y_true"]
        m, p = u.shape[1], y_pred.shape[1]
        header = (["k"] + [f"u{i + 1}" for i in range(m)]
                  + [f"y_pred{i + 1}" for i in range(p)]
                  + [f"y_true{i + 1}" for i in range(p)])
        lines = [",".join(header)]
        for k in range(u.shape[0]):
            cells = [str(k)]
            cells += [format(v, ".17g") for v in u[k]]
            cells += [format(v, ".17g") for v in y_pred[k]]
            cells += [format(v, ".17g") for v in y_true[k]]
            lines.append(",".join(cells))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written


def write_manifest(path, config_text: str, seeds, extra: Optional[dict] = None) -> None:
    """Run manifest: config hash plus the seeds that produced the outputs."""
    doc = {
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "seeds": list(seeds),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
