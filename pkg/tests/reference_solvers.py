"""Slow, independent reference solvers used only as test oracles."""

import numpy as np


def projected_gradient_box_qp(H, f, lo, hi, tol=1e-10, max_iter=200000):
    """Box QP by accelerated projected gradient (FISTA with restart).

    Minimizes 0.5 z'Hz + f'z over lo <= z <= hi for strictly convex H.
    Deliberately shares no code with the production kernel.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    eigs = np.linalg.eigvalsh(H)
    if eigs[0] <= 0:
        raise ValueError("reference solver needs strictly convex H")
    step = 1.0 / eigs[-1]
    z = np.clip(np.zeros_like(f), lo, hi)
    momentum = z.copy()
    t_acc = 1.0
    prev_obj = np.inf
    for _ in range(max_iter):
        grad = H @ momentum + f
        z_new = np.clip(momentum - step * grad, lo, hi)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        momentum = z_new + ((t_acc - 1.0) / t_new) * (z_new - z)
        obj = 0.5 * z_new @ H @ z_new + f @ z_new
        if obj > prev_obj:  # restart acceleration when it overshoots
            momentum = z_new.copy()
            t_new = 1.0
        prev_obj = obj
        if np.linalg.norm(z_new - z, np.inf) <= tol * (1.0 + np.linalg.norm(z_new, np.inf)):
            # projected-gradient fixed point: first-order optimal
            fixed = np.clip(z_new - step * (H @ z_new + f), lo, hi)
            if np.linalg.norm(fixed - z_new, np.inf) <= tol * (1.0 + np.linalg.norm(z_new, np.inf)):
                return z_new
        z = z_new
        t_acc = t_new
    return z


def kkt_equality_qp(H, f, A, b):
    """Equality-only QP by one dense solve of the full KKT system.

    Multipliers follow the convention H z + f - A' mu = 0.
    """
    n = f.size
    e = b.size
    kkt = np.block([[H, A.T], [A, np.zeros((e, e))]])
    sol = np.linalg.solve(kkt, np.concatenate([-f, b]))
    return sol[:n], -sol[n:]
