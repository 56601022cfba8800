"""End-to-end amplitude-bound analysis: build the multiplier filter and
the augmented plant, assemble the LMIs, minimize the bound gamma, extract
and verify the certificates; plus the empirical finite-horizon IQC
verifier and an energy-based stability check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .convexfn import ConvexFunctionOracle
from .lmi import (
    CertificateSet,
    LmiSystem,
    VerificationReport,
    assemble_analysis_lmis,
    extract_state_bound,
    flatten,
    verify_certificates,
)
from .multiplier import (
    HyperdominanceReport,
    MultiplierParam,
    check_hyperdominance,
    combined_filter,
    m_matrix,
    supply_matrix,
    terminal_cost,
)
from .sim import Trajectory
from .solver import SolveResult, SolverOptions, solve
from .statespace import PlantRealization, interconnect, is_schur, simulate

MODES = ("terminal", "hard", "static")


@dataclass
class AnalysisRequest:
    plant: PlantRealization
    nu: int = 1
    nut: int = 1
    mode: str = "terminal"
    solver_options: SolverOptions = field(default_factory=SolverOptions)
    backend: str = "embedded"
    verify_tol: float = 1e-6

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "static":
            self.nu = self.nut = 0


@dataclass
class AnalysisResult:
    status: str
    gamma: float                      # guaranteed bound, nan if not optimal
    certificates: CertificateSet | None
    hyperdominance: HyperdominanceReport | None
    verification: VerificationReport | None
    solve_result: SolveResult
    lmis: LmiSystem
    assembly_time: float
    solve_time: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def compute_gamma_star(req: AnalysisRequest) -> AnalysisResult:
    """Minimize the guaranteed amplitude gain gamma for the requested
    multiplier orders and mode.

    When optimal, every trajectory of the loop satisfies
    sup_t ||C_e x_t|| <= gamma ||x0||, the solved certificates pass the
    a-posteriori eigenvalue check, and the certifying matrix M_{T0} is
    doubly hyperdominant.
    """
    plant = req.plant
    if not is_schur(plant.A):
        raise ValueError("plant A matrix is not Schur; analysis requires stability")
    nu, nut, d = req.nu, req.nut, plant.d

    t0 = time.perf_counter()
    filt = combined_filter(MultiplierParam(nu, nut, np.zeros(nu + 1),
                                           np.zeros(nut + 1),
                                           np.zeros((nut, nu)), d=d))
    aug = interconnect(filt, plant)
    sys = assemble_analysis_lmis(aug, plant.C_e, nu, nut, d, mode=req.mode)
    prob, table = flatten(sys)
    t_assembly = time.perf_counter() - t0

    t0 = time.perf_counter()
    res = solve(prob, req.solver_options, backend=req.backend)
    t_solve = time.perf_counter() - t0

    if res.status != "optimal":
        return AnalysisResult(res.status, float("nan"), None, None, None,
                              res, sys, t_assembly, t_solve)

    assignment = table.unpack(res.x)
    n_psi = (nu + nut) * d
    Xcal = assignment["Xcal"]
    lam = assignment["lam"].reshape(-1)
    lamt = assignment["lamt"].reshape(-1)
    E = assignment.get("E", np.zeros((nut, nu)))
    param = MultiplierParam(nu, nut, lam, lamt, E, d=d)
    cert = CertificateSet(
        X_psi=Xcal[:n_psi, :n_psi],
        W=Xcal[:n_psi, n_psi:],
        X=Xcal[n_psi:, n_psi:],
        H=assignment["H"],
        E=E,
        lam=lam,
        lamt=lamt,
        gamma=float(assignment["gamma"].reshape(())),
        Z=terminal_cost(param),
    )
    hyp = check_hyperdominance(m_matrix(param, param.T0), tol=1e-9)
    ver = verify_certificates(sys, assignment, tol=req.verify_tol)
    status = "optimal" if (hyp.passed and ver.passed) else "numerical-limit"
    return AnalysisResult(status, cert.gamma, cert, hyp, ver, res, sys,
                          t_assembly, t_solve)


def verify_iqc_empirically(p: MultiplierParam, f: ConvexFunctionOracle,
                           z_signal, T_max: int | None = None,
                           rng: np.random.Generator | None = None) -> float:
    """Minimum over horizons T of the accumulated supply minus terminal
    cost, for the filter response to (z, w in subdiff f(z)).

    Parameters whose certifying matrix fails the hyperdominance check are
    rejected up front; for passing parameters the margin is guaranteed
    nonnegative, so any negative return flags an implementation bug.
    """
    hyp = check_hyperdominance(m_matrix(p, p.T0), tol=1e-9)
    if not hyp.passed:
        raise ValueError(
            "infeasible multiplier parameter: M_T0 is not doubly hyperdominant "
            f"(worst margin {min(hyp.worst_offdiag, hyp.worst_row_sum, hyp.worst_col_sum):.3e})")
    z_signal = np.asarray(z_signal, dtype=float)
    if z_signal.ndim == 1:
        z_signal = z_signal.reshape(-1, 1) if p.d == 1 \
            else z_signal.reshape(1, -1)
    if z_signal.shape[1] != p.d:
        raise ValueError(f"signal dimension {z_signal.shape[1]} != multiplier dimension {p.d}")
    T_total = z_signal.shape[0]
    T_max = T_total if T_max is None else min(T_max, T_total)

    w_signal = np.array([f.subgradient(z, rng) for z in z_signal]) \
        if T_total else np.zeros((0, p.d))
    filt = combined_filter(p)
    P = supply_matrix(p)
    Z = terminal_cost(p)
    u = np.hstack([z_signal, w_signal])
    xi, v = simulate(filt, np.zeros(filt.n), u)

    margin = np.inf
    acc = 0.0
    for T in range(1, T_max + 1):
        acc += float(v[T - 1] @ P @ v[T - 1])
        term = float(xi[T] @ Z @ xi[T]) if filt.n else 0.0
        margin = min(margin, acc - term)
    return 0.0 if T_max == 0 else margin


def stability_energy_check(traj: Trajectory, x0, tail_tol: float = 1e-8,
                           tail_window: int = 50) -> tuple[bool, float]:
    """Boundedness test of the accumulated state/input energy.

    Returns (converged, empirical constant): whether the partial sums of
    ||x_t||^2 + ||w_t||^2 are Cauchy over the trailing window, and the
    ratio of the total to ||x0||^2 (inf for a zero initial state with
    nonzero energy).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    steps = np.sum(traj.x[:traj.horizon] ** 2, axis=1) + np.sum(traj.w**2, axis=1)
    partial = np.cumsum(steps)
    if len(partial) == 0:
        return True, 0.0
    total = float(partial[-1])
    tail = total - float(partial[max(0, len(partial) - tail_window) - 1]) \
        if len(partial) > tail_window else total
    converged = tail < tail_tol * (1.0 + total)
    nrm0 = float(x0 @ x0)
    constant = total / nrm0 if nrm0 > 0 else (0.0 if total == 0 else float("inf"))
    return converged, constant


def builtin_plant(L: float) -> PlantRealization:
    """The five-state benchmark plant with loop gain parameter L in
    (0, 3.5]: scalar nonlinearity channel with feedthrough -1/L and a
    one-dimensional performance output."""
    if not 0 < L <= 3.5:
        raise ValueError(f"L must lie in (0, 3.5], got {L}")
    A = np.array([
        [0.1, 1.0, 0.0, 0.0, 0.0],
        [-0.24, 0.1, -0.54, -0.35, 0.84],
        [0.0, 0.0, 0.54, -0.24, 0.59],
        [0.0, 0.0, 0.0, 0.54, 1.0],
        [0.0, 0.0, 0.0, -0.56, 0.54],
    ])
    B = np.array([[0.0], [0.0], [0.0], [0.0], [1.04]])
    C = np.array([[-0.08, -0.17, 0.13, 0.09, -0.21]])
    D = np.array([[-1.0 / L]])
    C_e = np.array([[2.0, 1.3, -1.0, -1.3, 1.3]])
    return PlantRealization(A, B, C, D, C_e)
