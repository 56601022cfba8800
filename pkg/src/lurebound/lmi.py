"""Affine LMI assembly: matrix variables, affine symmetric-matrix
expressions, the dissipation LMI for linear systems with quadratic supply
rates, the full amplitude-bound LMI system, frequency-domain checking,
and a-posteriori certificate verification.

Strict inequalities are modeled as >= eps*I (resp. <= -eps*I) with a
fixed margin policy eps = STRICT_EPS * max(1, coefficient scale).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .multiplier import (
    LinearInequalities,
    MultiplierParam,
    hyperdominance_constraints,
    param_dim,
    supply_matrix,
    terminal_cost,
)
from .solver import ConeDims, ConicProblem, svec, svec_dim
from .statespace import AugmentedRealization, Realization, freq_response

STRICT_EPS = 1e-8


@dataclass(frozen=True)
class MatrixVariable:
    """A named matrix unknown; symmetric variables contribute
    m(m+1)/2 scalars, general ones rows*cols."""

    name: str
    shape: tuple[int, int]
    symmetric: bool = False

    def __post_init__(self):
        r, cdim = self.shape
        if self.symmetric and r != cdim:
            raise ValueError(f"symmetric variable {self.name} must be square")

    @property
    def n_scalars(self) -> int:
        r, cdim = self.shape
        return r * (r + 1) // 2 if self.symmetric else r * cdim

    def basis(self) -> np.ndarray:
        """Basis matrices, one per scalar unknown, shape (n_scalars, r, c).

        Symmetric variables use the unit-diagonal / symmetrized
        off-diagonal basis; general variables use unit entries row-major.
        """
        r, cdim = self.shape
        out = np.zeros((self.n_scalars, r, cdim))
        k = 0
        if self.symmetric:
            for i in range(r):
                for j in range(i, r):
                    out[k, i, j] = 1.0
                    out[k, j, i] = 1.0
                    k += 1
        else:
            for i in range(r):
                for j in range(cdim):
                    out[k, i, j] = 1.0
                    k += 1
        return out

    def to_scalars(self, M: np.ndarray) -> np.ndarray:
        """Flatten a matrix value into the scalar-unknown vector."""
        M = np.asarray(M, dtype=float).reshape(self.shape)
        if self.symmetric:
            r = self.shape[0]
            return np.array([M[i, j] for i in range(r) for j in range(i, r)])
        return M.reshape(-1)

    def from_scalars(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(self.n_scalars)
        if not self.symmetric:
            return v.reshape(self.shape)
        r = self.shape[0]
        M = np.zeros((r, r))
        k = 0
        for i in range(r):
            for j in range(i, r):
                M[i, j] = M[j, i] = v[k]
                k += 1
        return M


class VariableTable:
    """Ordered registry of matrix variables with global scalar offsets."""

    def __init__(self):
        self.variables: dict[str, MatrixVariable] = {}
        self.offsets: dict[str, int] = {}
        self.total = 0

    def add(self, var: MatrixVariable) -> MatrixVariable:
        if var.name in self.variables:
            raise ValueError(f"variable {var.name!r} already declared")
        self.variables[var.name] = var
        self.offsets[var.name] = self.total
        self.total += var.n_scalars
        return var

    def pack(self, assignment: dict[str, np.ndarray]) -> np.ndarray:
        theta = np.zeros(self.total)
        for name, var in self.variables.items():
            if name not in assignment:
                raise KeyError(f"assignment missing variable {name!r}")
            off = self.offsets[name]
            theta[off:off + var.n_scalars] = var.to_scalars(assignment[name])
        return theta

    def unpack(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for name, var in self.variables.items():
            off = self.offsets[name]
            out[name] = var.from_scalars(theta[off:off + var.n_scalars])
        return out


class AffineMatrixExpr:
    """Matrix-valued affine expression: constant plus one coefficient
    matrix per scalar unknown of each referenced variable.  Rectangular
    expressions are allowed as building blocks; constraints require
    square (symmetric) ones."""

    def __init__(self, shape, const: np.ndarray | None = None,
                 coeffs: dict[str, np.ndarray] | None = None):
        if isinstance(shape, int):
            shape = (shape, shape)
        self.shape = tuple(shape)
        self.const = np.zeros(self.shape) if const is None else np.asarray(const, dtype=float)
        # coeffs[name] has shape (var.n_scalars,) + self.shape
        self.coeffs: dict[str, np.ndarray] = coeffs or {}

    @property
    def size(self) -> int:
        if self.shape[0] != self.shape[1]:
            raise ValueError(f"expression is not square: {self.shape}")
        return self.shape[0]

    @staticmethod
    def constant(M) -> "AffineMatrixExpr":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return AffineMatrixExpr(M.shape, const=M.copy())

    @staticmethod
    def of_variable(var: MatrixVariable, L=None, R=None) -> "AffineMatrixExpr":
        """The (generally rectangular) product L @ var @ R."""
        r, cdim = var.shape
        L = np.eye(r) if L is None else np.atleast_2d(np.asarray(L, dtype=float))
        R = np.eye(cdim) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
        basis = var.basis()
        coeffs = np.einsum("ij,kjl,lm->kim", L, basis, R)
        return AffineMatrixExpr((L.shape[0], R.shape[1]), coeffs={var.name: coeffs})

    def __add__(self, other: "AffineMatrixExpr") -> "AffineMatrixExpr":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        coeffs = {k: v.copy() for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs[k] + v if k in coeffs else v.copy()
        return AffineMatrixExpr(self.shape, self.const + other.const, coeffs)

    def __sub__(self, other: "AffineMatrixExpr") -> "AffineMatrixExpr":
        return self + (-1.0) * other

    def __rmul__(self, a: float) -> "AffineMatrixExpr":
        return AffineMatrixExpr(self.shape, a * self.const,
                                {k: a * v for k, v in self.coeffs.items()})

    def congruence(self, T) -> "AffineMatrixExpr":
        """T' @ expr @ T for a constant T (square expression only)."""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        const = T.T @ self.const @ T
        coeffs = {k: np.einsum("ji,kjl,lm->kim", T, v, T)
                  for k, v in self.coeffs.items()}
        return AffineMatrixExpr((T.shape[1], T.shape[1]), const, coeffs)

    def transpose(self) -> "AffineMatrixExpr":
        return AffineMatrixExpr(
            (self.shape[1], self.shape[0]), self.const.T,
            {k: np.transpose(v, (0, 2, 1)) for k, v in self.coeffs.items()})

    def symmetrized(self) -> "AffineMatrixExpr":
        return 0.5 * (self + self.transpose())

    def evaluate(self, assignment: dict[str, np.ndarray],
                 table: "VariableTable") -> np.ndarray:
        M = self.const.copy()
        for name, coeff in self.coeffs.items():
            var = table.variables[name]
            M += np.tensordot(var.to_scalars(assignment[name]), coeff, axes=1)
        return M

    def scale(self) -> float:
        s = float(np.max(np.abs(self.const), initial=0.0))
        for v in self.coeffs.values():
            if v.size:
                s = max(s, float(np.max(np.abs(v))))
        return s


def block_expr(grid) -> AffineMatrixExpr:
    """Assemble a block matrix of AffineMatrixExpr / constant arrays.

    Off-diagonal blocks may be nonsymmetric; the result must be square.
    """
    rows = []
    for row in grid:
        rows.append([b if isinstance(b, AffineMatrixExpr) else AffineMatrixExpr.constant(b)
                     for b in row])
    row_sizes = [r[0].const.shape[0] for r in rows]
    col_sizes = [b.const.shape[1] for b in rows[0]]
    size = sum(row_sizes)
    if size != sum(col_sizes):
        raise ValueError("block grid is not square")
    out = AffineMatrixExpr((size, size))
    roff = 0
    for r, rs in zip(rows, row_sizes):
        coff = 0
        for b, cs in zip(r, col_sizes):
            if b.const.shape != (rs, cs):
                raise ValueError(
                    f"block at offset ({roff},{coff}) has shape {b.const.shape}, "
                    f"expected {(rs, cs)}")
            out.const[roff:roff + rs, coff:coff + cs] += b.const
            for k, v in b.coeffs.items():
                if k not in out.coeffs:
                    nk = v.shape[0]
                    out.coeffs[k] = np.zeros((nk, size, size))
                out.coeffs[k][:, roff:roff + rs, coff:coff + cs] += v
            coff += cs
        roff += rs
    return out


@dataclass
class MatrixConstraint:
    """expr >= eps*I (sense '>=') or expr <= -eps*I (sense '<=')."""

    expr: AffineMatrixExpr
    sense: str
    eps: float
    name: str

    def oriented(self) -> AffineMatrixExpr:
        """Expression E with the constraint equivalent to E >= eps*I."""
        return self.expr if self.sense == ">=" else (-1.0) * self.expr


@dataclass
class LmiSystem:
    """Affine LMIs plus scalar affine inequalities and a linear objective
    (to be minimized) over the declared matrix variables."""

    table: VariableTable
    constraints: list[MatrixConstraint] = field(default_factory=list)
    # scalar rows: a' theta + b >= 0 over the packed scalar vector
    lin_A: np.ndarray | None = None
    lin_b: np.ndarray | None = None
    lin_labels: tuple[str, ...] = ()
    objective: np.ndarray | None = None   # minimize objective' theta

    def add_constraint(self, expr: AffineMatrixExpr, sense: str, name: str,
                       eps: float | None = None):
        for k in expr.coeffs:
            if k not in self.table.variables:
                raise KeyError(f"constraint {name!r} references undeclared variable {k!r}")
        if sense not in (">=", "<="):
            raise ValueError(f"sense must be '>=' or '<=', got {sense!r}")
        if eps is None:
            eps = STRICT_EPS * max(1.0, expr.scale())
        self.constraints.append(MatrixConstraint(expr, sense, eps, name))

    def set_linear_inequalities(self, A: np.ndarray, b: np.ndarray, labels=()):
        self.lin_A = np.asarray(A, dtype=float).reshape(-1, self.table.total)
        self.lin_b = np.asarray(b, dtype=float).reshape(self.lin_A.shape[0])
        self.lin_labels = tuple(labels)

    def set_objective_variable(self, name: str):
        var = self.table.variables[name]
        if var.n_scalars != 1:
            raise ValueError("objective variable must be scalar")
        obj = np.zeros(self.table.total)
        obj[self.table.offsets[name]] = 1.0
        self.objective = obj

    def dump(self) -> str:
        """Text form: variable table plus coefficient triplets, shared with
        the conic-problem dump for cross-solver debugging."""
        lines = ["lmisystem v1"]
        for name, var in self.table.variables.items():
            sym = "sym" if var.symmetric else "gen"
            lines.append(f"var {name} {var.shape[0]} {var.shape[1]} {sym}")
        for con in self.constraints:
            lines.append(f"constraint {con.name} {con.sense} {con.eps!r} size {con.expr.size}")
        lines.append(flatten(self)[0].dump())
        return "\n".join(lines)


@dataclass
class ConstraintReport:
    name: str
    margin: float        # min eigenvalue (or scalar slack) beyond eps
    passed: bool


@dataclass
class VerificationReport:
    constraints: list[ConstraintReport]
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def worst(self) -> ConstraintReport:
        return min(self.constraints, key=lambda c: c.margin)


def flatten(sys: LmiSystem) -> tuple[ConicProblem, VariableTable]:
    """Flatten an LmiSystem into inequality-form conic data.

    The variable order of the returned problem is the packed scalar order
    of the system's table; round-tripping an assignment through
    pack/unpack is exact.
    """
    ntheta = sys.table.total
    lin_A, lin_b = sys.lin_A, sys.lin_b
    if lin_A is not None:
        # drop structurally trivial 0 >= 0 rows: they would force a slack
        # to sit on the cone boundary and destroy strict feasibility
        keep = (np.max(np.abs(lin_A), axis=1) > 0) | (np.abs(lin_b) > 0)
        lin_A, lin_b = lin_A[keep], lin_b[keep]
    lp_rows = 0 if lin_A is None else lin_A.shape[0]
    psd_sizes = tuple(con.expr.size for con in sys.constraints)
    total = lp_rows + sum(svec_dim(m) for m in psd_sizes)
    G = np.zeros((total, ntheta))
    h = np.zeros(total)
    if lp_rows:
        # a' theta + b >= 0  ->  s = h - G theta with G = -a, h = b
        G[:lp_rows] = -lin_A
        h[:lp_rows] = lin_b
    off = lp_rows
    for con in sys.constraints:
        expr = con.oriented()
        m = expr.size
        dim = svec_dim(m)
        h[off:off + dim] = svec(expr.const - con.eps * np.eye(m))
        for name, coeff in expr.coeffs.items():
            voff = sys.table.offsets[name]
            for k in range(coeff.shape[0]):
                Ck = 0.5 * (coeff[k] + coeff[k].T)
                G[off:off + dim, voff + k] -= svec(Ck)
        off += dim
    c = sys.objective if sys.objective is not None else np.zeros(ntheta)
    prob = ConicProblem(c, G, h, ConeDims(lp_rows, psd_sizes))
    return prob, sys.table


def verify_certificates(sys: LmiSystem, assignment: dict[str, np.ndarray],
                        tol: float = 1e-7) -> VerificationReport:
    """A-posteriori eigenvalue check of every constraint at an assignment."""
    reports = []
    for con in sys.constraints:
        E = con.oriented().evaluate(assignment, sys.table)
        margin = float(np.min(np.linalg.eigvalsh(0.5 * (E + E.T)))) - con.eps
        reports.append(ConstraintReport(con.name, margin, margin >= -tol))
    if sys.lin_A is not None:
        theta = sys.table.pack(assignment)
        slacks = sys.lin_A @ theta + sys.lin_b
        labels = sys.lin_labels or tuple(f"lin[{i}]" for i in range(len(slacks)))
        worst = float(np.min(slacks)) if len(slacks) else np.inf
        reports.append(ConstraintReport(
            f"linear({labels[int(np.argmin(slacks))] if len(slacks) else ''})",
            worst, worst >= -tol))
    return VerificationReport(reports, tol)


# ---------------------------------------------------------------------------
# dissipation LMI and the frequency-domain test

def _dissipation_expr(A, B, C, D, X_expr: AffineMatrixExpr,
                      P_expr: AffineMatrixExpr) -> AffineMatrixExpr:
    """[A B; I 0]' [X 0; 0 -X] [A B; I 0] - [C D; 0 I]' P [C D; 0 I]."""
    n, m = A.shape[0], B.shape[1]
    AB = np.block([[A, B], [np.eye(n), np.zeros((n, m))]])
    CD = np.block([[C, D], [np.zeros((m, n)), np.eye(m)]])
    inner = block_expr([
        [X_expr, np.zeros((n, n))],
        [np.zeros((n, n)), (-1.0) * X_expr],
    ])
    return inner.congruence(AB) - P_expr.congruence(CD)


def kyp_lmi(realization, P, X_name: str = "X",
            table: VariableTable | None = None) -> LmiSystem:
    """The strict dissipation LMI in the symmetric unknown X for a linear
    system with quadratic supply rate matrix P (constraint sense <= 0)."""
    if not isinstance(realization, Realization):
        realization = Realization(*realization)
    A, B, C, D = realization.A, realization.B, realization.C, realization.D
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != (C.shape[0] + B.shape[1],) * 2:
        raise ValueError(
            f"P has shape {P.shape}, expected square of size {C.shape[0] + B.shape[1]}")
    table = table or VariableTable()
    X = table.add(MatrixVariable(X_name, (realization.n, realization.n), symmetric=True))
    sys = LmiSystem(table)
    X_expr = AffineMatrixExpr.of_variable(X)
    expr = _dissipation_expr(A, B, C, D, X_expr, AffineMatrixExpr.constant(P))
    sys.add_constraint(expr, "<=", "dissipation")
    return sys


def fdi_check(realization, P, n_grid: int = 512) -> tuple[bool, float]:
    """Minimum eigenvalue of [G(lam); I]^* P [G(lam); I] over a uniform
    grid of the unit circle; strictly positive means pass."""
    if not isinstance(realization, Realization):
        realization = Realization(*realization)
    A = realization.A
    if A.shape[0] and np.any(np.abs(np.abs(np.linalg.eigvals(A)) - 1.0) < 1e-12):
        raise ValueError("A has an eigenvalue on the unit circle")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    m = realization.m_in
    worst = np.inf
    for theta in np.linspace(0.0, np.pi, n_grid):
        lam = np.exp(1j * theta)
        Gl = freq_response(realization, lam)
        M = np.vstack([Gl, np.eye(m)])
        H = M.conj().T @ P @ M
        worst = min(worst, float(np.min(np.linalg.eigvalsh(0.5 * (H + H.conj().T)))))
    return worst > 0.0, worst


def kyp_feasible(realization, P, bound: float = 1e4,
                 backend: str = "embedded") -> tuple[bool, float]:
    """Decide strict feasibility of the dissipation LMI by minimizing the
    epigraph bound t in  LMI(X) <= t I,  -bound I <= X <= bound I.

    Returns (feasible, t_star): feasible iff the optimal t is negative.
    """
    from .solver import SolverOptions, solve

    if not isinstance(realization, Realization):
        realization = Realization(*realization)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    table = VariableTable()
    X = table.add(MatrixVariable("X", (realization.n, realization.n), symmetric=True))
    t = table.add(MatrixVariable("t", (1, 1), symmetric=False))
    sys = LmiSystem(table)
    X_expr = AffineMatrixExpr.of_variable(X)
    expr = _dissipation_expr(realization.A, realization.B, realization.C,
                             realization.D, X_expr, AffineMatrixExpr.constant(P))
    size = expr.size
    tI = AffineMatrixExpr(size)
    tI.coeffs["t"] = np.eye(size)[None, :, :]
    sys.add_constraint(tI - expr, ">=", "epigraph", eps=0.0)
    if realization.n:
        nI = AffineMatrixExpr.constant(bound * np.eye(realization.n))
        sys.add_constraint(nI - X_expr, ">=", "X_upper", eps=0.0)
        sys.add_constraint(nI + X_expr, ">=", "X_lower", eps=0.0)
    sys.set_objective_variable("t")
    prob, _ = flatten(sys)
    res = solve(prob, SolverOptions(), backend=backend)
    if res.status != "optimal":
        raise RuntimeError(f"feasibility solve failed: {res.status} ({res.message})")
    t_star = float(res.x[table.offsets["t"]])
    return t_star < 0.0, t_star


# ---------------------------------------------------------------------------
# the amplitude-bound LMI system

def supply_matrix_expr(nu: int, nut: int, d: int, table: VariableTable,
                       lam_name: str = "lam", lamt_name: str = "lamt") -> AffineMatrixExpr:
    """Supply matrix P as an affine expression in the coefficient vectors."""
    lam_var = table.variables[lam_name]
    lamt_var = table.variables[lamt_name]
    size = (nu + nut + 2) * d
    expr = AffineMatrixExpr(size)
    nlam = nu + 1
    coeff = np.zeros((nlam, size, size))
    for k in range(nlam):
        e = np.zeros(nlam)
        e[k] = 1.0
        coeff[k] = supply_matrix(MultiplierParam(nu, nut, e, np.zeros(nut + 1),
                                                 np.zeros((nut, nu)), d=d))
    expr.coeffs[lam_var.name] = coeff
    nlamt = nut + 1
    coefft = np.zeros((nlamt, size, size))
    for k in range(nlamt):
        e = np.zeros(nlamt)
        e[k] = 1.0
        coefft[k] = supply_matrix(MultiplierParam(nu, nut, np.zeros(nu + 1), e,
                                                  np.zeros((nut, nu)), d=d))
    expr.coeffs[lamt_var.name] = coefft
    return expr


def terminal_cost_expr(nu: int, nut: int, d: int, table: VariableTable,
                       E_name: str = "E") -> AffineMatrixExpr:
    """Terminal cost Z(E) as an affine expression in E (zero if E absent)."""
    n_psi = (nu + nut) * d
    if E_name not in table.variables:
        return AffineMatrixExpr(n_psi)
    E_var = table.variables[E_name]
    basis = E_var.basis()
    coeff = np.zeros((E_var.n_scalars, n_psi, n_psi))
    for k in range(E_var.n_scalars):
        p = MultiplierParam(nu, nut, np.zeros(nu + 1), np.zeros(nut + 1), basis[k], d=d)
        coeff[k] = terminal_cost(p)
    expr = AffineMatrixExpr(n_psi)
    expr.coeffs[E_var.name] = coeff
    return expr


def assemble_analysis_lmis(aug: AugmentedRealization, C_e, nu: int, nut: int,
                           d: int, mode: str = "terminal") -> LmiSystem:
    """The full amplitude-bound LMI system over (Xcal, H, E, lam, lamt,
    gamma): dissipation LMI, coupling block, the two gamma epigraph LMIs,
    and the doubly-hyperdominant inequalities, with objective min gamma.

    mode: 'terminal' (E free), 'hard' (E = 0), or 'static' (nu = nut = 0).
    """
    if mode not in ("terminal", "hard", "static"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "static" and (nu or nut):
        raise ValueError("static mode requires nu = nut = 0")
    C_e = np.atleast_2d(np.asarray(C_e, dtype=float))
    n_psi, n = aug.n_filter, aug.n_plant
    if n_psi != (nu + nut) * d:
        raise ValueError(
            f"augmented filter state is {n_psi}, expected {(nu + nut) * d} "
            f"for orders ({nu}, {nut}) at dimension {d}")
    if C_e.shape[1] != n:
        raise ValueError(f"C_e has {C_e.shape[1]} cols, expected plant order {n}")
    p_dim = C_e.shape[0]

    table = VariableTable()
    Xcal = table.add(MatrixVariable("Xcal", (n_psi + n, n_psi + n), symmetric=True))
    H = table.add(MatrixVariable("H", (p_dim, p_dim), symmetric=True))
    with_E = mode == "terminal" and nu >= 1 and nut >= 1
    if with_E:
        table.add(MatrixVariable("E", (nut, nu), symmetric=False))
    table.add(MatrixVariable("lam", (nu + 1, 1), symmetric=False))
    table.add(MatrixVariable("lamt", (nut + 1, 1), symmetric=False))
    gamma = table.add(MatrixVariable("gamma", (1, 1), symmetric=False))

    sys = LmiSystem(table)
    X_expr = AffineMatrixExpr.of_variable(Xcal)
    P_expr = supply_matrix_expr(nu, nut, d, table)
    # (i) dissipation of the filtered loop w.r.t. -v'Pv:
    #     [A B; I 0]'[X 0; 0 -X][A B; I 0] + [C D]'P[C D] < 0
    AB = np.block([[aug.A, aug.B],
                   [np.eye(aug.n), np.zeros((aug.n, aug.B.shape[1]))]])
    inner = block_expr([
        [X_expr, np.zeros((aug.n, aug.n))],
        [np.zeros((aug.n, aug.n)), (-1.0) * X_expr],
    ])
    CD = np.hstack([aug.C, aug.D])
    sys.add_constraint(inner.congruence(AB) + P_expr.congruence(CD),
                       "<=", "dissipation")

    # (ii) coupling block [[H, 0, C_e], [0, Xpsi + Z(E), W], [C_e', W', X]] > 0
    sel_psi = np.vstack([np.eye(n_psi), np.zeros((n, n_psi))])
    sel_x = np.vstack([np.zeros((n_psi, n)), np.eye(n)])
    Xpsi = AffineMatrixExpr.of_variable(Xcal, sel_psi.T, sel_psi)
    W = AffineMatrixExpr.of_variable(Xcal, sel_psi.T, sel_x)
    X = AffineMatrixExpr.of_variable(Xcal, sel_x.T, sel_x)
    Z_expr = terminal_cost_expr(nu, nut, d, table)
    H_expr = AffineMatrixExpr.of_variable(H)
    coupling = block_expr([
        [H_expr, np.zeros((p_dim, n_psi)), C_e],
        [np.zeros((n_psi, p_dim)), Xpsi + Z_expr, W],
        [C_e.T, W.transpose(), X],
    ])
    sys.add_constraint(coupling, ">=", "coupling")

    # (iii) gamma epigraph: H < gamma I, X < gamma I
    # gamma * I built directly from the scalar variable's single basis entry
    g_p = AffineMatrixExpr(p_dim)
    g_p.coeffs["gamma"] = np.eye(p_dim)[None, :, :]
    g_n = AffineMatrixExpr(n)
    g_n.coeffs["gamma"] = np.eye(n)[None, :, :]
    sys.add_constraint(g_p - H_expr, ">=", "H_gamma")
    sys.add_constraint(g_n - X, ">=", "X_gamma")

    # (iv) doubly hyperdominant inequalities on M_{T0}
    hyp = hyperdominance_constraints(nu, nut)
    A_lin = np.zeros((hyp.count, table.total))
    npar = param_dim(nu, nut)
    lam_off = table.offsets["lam"]
    lamt_off = table.offsets["lamt"]
    A_lin[:, lam_off:lam_off + nu + 1] = hyp.A[:, :nu + 1]
    A_lin[:, lamt_off:lamt_off + nut + 1] = hyp.A[:, nu + 1:nu + nut + 2]
    if with_E:
        E_off = table.offsets["E"]
        A_lin[:, E_off:E_off + nu * nut] = hyp.A[:, nu + nut + 2:npar]
    sys.set_linear_inequalities(A_lin, hyp.b, hyp.labels)
    sys.set_objective_variable("gamma")
    return sys


@dataclass
class CertificateSet:
    """Solved certificate blocks with the derived state-bound matrix."""

    X_psi: np.ndarray
    W: np.ndarray
    X: np.ndarray
    H: np.ndarray
    E: np.ndarray
    lam: np.ndarray
    lamt: np.ndarray
    gamma: float
    Z: np.ndarray

    @property
    def Y(self) -> np.ndarray:
        return extract_state_bound(self)


def extract_state_bound(cert: CertificateSet) -> np.ndarray:
    """Y = X - W' (X_psi + Z)^{-1} W, the guaranteed state-bound matrix.

    Requires X_psi + Z positive definite, as implied by the coupling
    condition; Y then satisfies 0 < Y <= X.
    """
    S = cert.X_psi + cert.Z
    if S.shape[0] == 0:
        return cert.X.copy()
    eigmin = float(np.min(np.linalg.eigvalsh(0.5 * (S + S.T))))
    if eigmin <= 0:
        raise np.linalg.LinAlgError(
            f"X_psi + Z is not positive definite (min eig {eigmin:.3e})")
    return cert.X - cert.W.T @ np.linalg.solve(S, cert.W)
