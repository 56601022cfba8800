"""Simulation of the feedback loop of a linear plant with a
convex-subgradient nonlinearity, with exact resolution of the algebraic
loop z = C x + D w, w in subdiff f(z).

Loop resolution policy:
  * D = 0: direct evaluation w = subgradient at C x.
  * scalar signal with D = -alpha < 0: the loop is the resolvent of a
    maximal monotone operator; solved exactly via the proximal map.
  * general D: damped fixed-point iteration on w; converges when
    ||D|| times a local subgradient Lipschitz bound is below one,
    otherwise an explicit error with the residual is raised.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .convexfn import ConvexFunctionOracle
from .statespace import PlantRealization


class LoopResolutionError(RuntimeError):
    """Raised when the algebraic loop cannot be resolved to tolerance."""


@dataclass
class Trajectory:
    """Signals of one loop run: states x (T+1 rows, final state included),
    nonlinearity input z / output w, performance output e (T rows each)."""

    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    e: np.ndarray

    @property
    def horizon(self) -> int:
        return self.z.shape[0]

    def to_csv(self, path):
        n, d, p = self.x.shape[1], self.z.shape[1], self.e.shape[1]
        header = (["t"] + [f"x{i}" for i in range(n)] + [f"z{i}" for i in range(d)]
                  + [f"w{i}" for i in range(d)] + [f"e{i}" for i in range(p)])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.horizon):
                writer.writerow([t] + list(self.x[t]) + list(self.z[t])
                                + list(self.w[t]) + list(self.e[t]))


def _resolve_loop(C_x: np.ndarray, D: np.ndarray, f: ConvexFunctionOracle,
                  rng, tol: float = 1e-10, max_iter: int = 10000):
    """Solve z = C_x + D w, w in subdiff f(z) for (z, w)."""
    d = C_x.shape[0]
    if not np.any(D):
        z = C_x
        return z, f.subgradient(z, rng)
    if d == 1 and D[0, 0] < 0:
        alpha = -float(D[0, 0])
        z = f.prox(alpha, C_x)
        w = (C_x - z) / alpha
        return z, w
    w = np.zeros(d)
    damping = 0.5
    for _ in range(max_iter):
        z = C_x + D @ w
        w_new = f.subgradient(z, rng)
        if not np.all(np.isfinite(w_new)):
            raise LoopResolutionError(
                "fixed-point loop resolution diverged (overflow); the "
                "sufficient condition ||D|| * subgradient Lipschitz bound < 1 fails")
        if np.max(np.abs(w_new - w)) <= tol * (1.0 + np.max(np.abs(w))):
            return z, w_new
        w = (1 - damping) * w + damping * w_new
    residual = float(np.max(np.abs(w_new - w)))
    raise LoopResolutionError(
        f"fixed-point loop resolution did not converge (residual {residual:.3e}); "
        "the sufficient condition ||D|| * subgradient Lipschitz bound < 1 may fail")


def simulate_lure(plant: PlantRealization, f: ConvexFunctionOracle, x0,
                  horizon: int, rng: np.random.Generator | None = None) -> Trajectory:
    """Run the loop for the given horizon from initial state x0.

    The subgradient selection at kinks is deterministic unless an rng is
    supplied (randomized stress mode).
    """
    if f.dim != plant.d:
        raise ValueError(f"nonlinearity dimension {f.dim} != plant signal dimension {plant.d}")
    n, d = plant.n, plant.d
    x = np.zeros((horizon + 1, n))
    z = np.zeros((horizon, d))
    w = np.zeros((horizon, d))
    x[0] = np.asarray(x0, dtype=float).reshape(n)
    for t in range(horizon):
        z[t], w[t] = _resolve_loop(plant.C @ x[t], plant.D, f, rng)
        x[t + 1] = plant.A @ x[t] + plant.B @ w[t]
    e = x[:horizon] @ plant.C_e.T if horizon else np.zeros((0, plant.p))
    return Trajectory(x, z, w, e)


def loop_residuals(traj: Trajectory, plant: PlantRealization,
                   f: ConvexFunctionOracle, n_probes: int = 20,
                   rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Certify a trajectory: worst algebraic-loop residual
    ||z - Cx - Dw|| and worst subgradient-inequality violation of w at z
    against random probe points."""
    rng = rng or np.random.default_rng(0)
    worst_loop = 0.0
    worst_subgrad = 0.0
    for t in range(traj.horizon):
        res = np.linalg.norm(traj.z[t] - plant.C @ traj.x[t] - plant.D @ traj.w[t])
        worst_loop = max(worst_loop, float(res))
        fz = f.value(traj.z[t])
        for _ in range(n_probes):
            y = traj.z[t] + rng.uniform(-2.0, 2.0, size=plant.d)
            violation = fz + float(traj.w[t] @ (y - traj.z[t])) - f.value(y)
            worst_subgrad = max(worst_subgrad, violation)
    return worst_loop, worst_subgrad


def check_amplitude_bound(traj: Trajectory, C_e, gamma: float, x0) -> tuple[bool, float, int]:
    """Compare the worst-case ratio ||C_e x_t|| / ||x0|| against gamma.

    Returns (passed, worst_ratio, argmax_t); a zero initial state passes
    any nonnegative gamma with ratio 0.
    """
    C_e = np.atleast_2d(np.asarray(C_e, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    nrm0 = float(np.linalg.norm(x0))
    if nrm0 == 0.0:
        return gamma >= 0.0, 0.0, 0
    ratios = np.linalg.norm(traj.x @ C_e.T, axis=1) / nrm0
    t_worst = int(np.argmax(ratios))
    worst = float(ratios[t_worst])
    return worst <= gamma, worst, t_worst
