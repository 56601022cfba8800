"""FIR multiplier ingredients: shift-register filter blocks, the combined
two-sided filter, its supply matrix and terminal cost, and the doubly
hyperdominant cone that certifies validity of a multiplier choice.

A multiplier is parametrized by coefficient vectors lam (length nu + 1,
causal side, acting on z) and lamt (length nut + 1, anti-causal side,
acting on w), plus a free coupling matrix E of shape (nut, nu) entering
the terminal cost.  The certifying matrix M_T must be doubly
hyperdominant at T0 = nu + nut + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statespace import FilterRealization, Realization, empty, lift


@dataclass(frozen=True)
class MultiplierParam:
    """One multiplier with terminal cost: (nu, nut, lam, lamt, E) at signal
    dimension d.  E is ignored (taken as absent) when nu == 0 or nut == 0."""

    nu: int
    nut: int
    lam: np.ndarray
    lamt: np.ndarray
    E: np.ndarray
    d: int = 1

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        lamt = np.asarray(self.lamt, dtype=float).reshape(-1)
        if self.nu < 0 or self.nut < 0:
            raise ValueError("orders nu, nut must be nonnegative")
        if lam.shape != (self.nu + 1,):
            raise ValueError(f"lam must have length {self.nu + 1}, got {lam.shape}")
        if lamt.shape != (self.nut + 1,):
            raise ValueError(f"lamt must have length {self.nut + 1}, got {lamt.shape}")
        E = np.zeros((self.nut, self.nu)) if self.E is None \
            else np.asarray(self.E, dtype=float).reshape(self.nut, self.nu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lamt", lamt)
        object.__setattr__(self, "E", E)

    @property
    def T0(self) -> int:
        return self.nu + self.nut + 1


@dataclass(frozen=True)
class HyperdominanceReport:
    """Margins of a doubly-hyperdominant check; all must be >= -tol."""

    M: np.ndarray
    worst_offdiag: float        # min over i != j of -M[i, j]
    worst_row_sum: float
    worst_col_sum: float
    tol: float

    @property
    def passed(self) -> bool:
        worst = min(self.worst_offdiag, self.worst_row_sum, self.worst_col_sum)
        return worst >= -self.tol


def jordan_block(nu: int) -> np.ndarray:
    """Upper Jordan block with eigenvalue zero (nilpotent shift)."""
    return np.eye(nu, k=1)


def shift_register(nu: int, d: int = 1) -> Realization:
    """State-only shift register x+ = (A_nu (x) I_d) x + (e_nu (x) I_d) u.

    State component j (1-based) holds the input from nu - j + 1 steps ago.
    """
    A = np.kron(jordan_block(nu), np.eye(d))
    B = np.kron(np.eye(nu, 1, k=-(nu - 1)), np.eye(d)) if nu else empty(0, d)
    C = empty(0, nu * d)
    D = empty(0, d)
    return Realization(A, B, C, D)


def jordan_filter(k: int, nu: int, d: int = 1) -> Realization:
    """Realization of the FIR block with transfer function 1 - z^{-k}
    (identity for k = 0) acting on d-dimensional signals, carried on a
    shift register of length nu."""
    if not 0 <= k <= nu:
        raise ValueError(f"need 0 <= k <= nu, got k={k}, nu={nu}")
    reg = shift_register(nu, d)
    C = np.zeros((d, nu * d))
    if k >= 1:
        # state component nu - k + 1 holds the input delayed by k steps
        C[:, (nu - k) * d:(nu - k + 1) * d] = -np.eye(d)
    return Realization(reg.A, reg.B, C, np.eye(d))


def fir_output_row(nu: int, lam: np.ndarray) -> tuple[np.ndarray, float]:
    """(C, D) of the conic combination sum_k lam_k * (1 - z^{-k}) on the
    length-nu shift register, at scalar signal dimension."""
    lam = np.asarray(lam, dtype=float).reshape(nu + 1)
    C = np.zeros((1, nu))
    for k in range(1, nu + 1):
        C[0, nu - k] = -lam[k]
    return C, float(np.sum(lam))


def fir_filter(nu: int, lam: np.ndarray, d: int = 1) -> Realization:
    """Realization of the combined FIR multiplier filter at dimension d."""
    C1, D1 = fir_output_row(nu, lam)
    reg = shift_register(nu, d)
    return Realization(reg.A, reg.B, np.kron(C1, np.eye(d)), D1 * np.eye(d))


def combined_filter(p: MultiplierParam) -> FilterRealization:
    """The two-sided filter driven by (z, w) whose output is
    v = (x, xt, z, w): causal register state, anti-causal register state,
    and the raw signals."""
    nu, nut, d = p.nu, p.nut, p.d
    reg = shift_register(nu, d)
    regt = shift_register(nut, d)
    n_psi = (nu + nut) * d
    A = np.zeros((n_psi, n_psi))
    A[:nu * d, :nu * d] = reg.A
    A[nu * d:, nu * d:] = regt.A
    B = np.zeros((n_psi, 2 * d))
    B[:nu * d, :d] = reg.B
    B[nu * d:, d:] = regt.B
    C = np.vstack([np.eye(n_psi), np.zeros((2 * d, n_psi))])
    D = np.vstack([np.zeros((n_psi, 2 * d)), np.eye(2 * d)])
    return FilterRealization(A, B, C, D, in_split=(d, d))


def supply_matrix(p: MultiplierParam) -> np.ndarray:
    """Symmetric supply matrix P acting on v = (x, xt, z, w).

    The quadratic form satisfies v' P v = 2 (w'y + z'yt) pointwise, where
    y is the causal filter response to z and yt the anti-causal-coefficient
    filter response to w.
    """
    nu, nut, d = p.nu, p.nut, p.d
    C1, D1 = fir_output_row(nu, p.lam)
    C1t, D1t = fir_output_row(nut, p.lamt)
    Cl = np.kron(C1, np.eye(d))       # d x nu*d
    Clt = np.kron(C1t, np.eye(d))     # d x nut*d
    sizes = [nu * d, nut * d, d, d]
    off = np.cumsum([0] + sizes)
    P = np.zeros((off[-1], off[-1]))

    def put(i, j, M):
        P[off[i]:off[i + 1], off[j]:off[j + 1]] = M
        P[off[j]:off[j + 1], off[i]:off[i + 1]] = M.T

    put(0, 3, Cl.T)                               # x  vs w
    put(1, 2, Clt.T)                              # xt vs z
    put(2, 3, (D1 + D1t) * np.eye(d))             # z  vs w
    return P


def terminal_cost(p: MultiplierParam) -> np.ndarray:
    """Terminal cost Z(E) = [[0, E' (x) I_d], [E (x) I_d, 0]] on (x, xt)."""
    nu, nut, d = p.nu, p.nut, p.d
    n_psi = (nu + nut) * d
    Z = np.zeros((n_psi, n_psi))
    if nu and nut:
        Ed = np.kron(p.E, np.eye(d))
        Z[:nu * d, nu * d:] = Ed.T
        Z[nu * d:, :nu * d] = Ed
    return Z


def m_matrix(p: MultiplierParam, T: int) -> np.ndarray:
    """Certifying matrix M_T = D_lam^T + (D_lamt^T)' - (Bt^T)' E (B^T),
    assembled from the scalar (d = 1) lifted filters."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    lf = lift(fir_filter(p.nu, p.lam, d=1), T)
    lft = lift(fir_filter(p.nut, p.lamt, d=1), T)
    M = lf.D_T + lft.D_T.T
    if p.nu and p.nut:
        M -= lft.B_T.T @ p.E @ lf.B_T
    return M


def check_hyperdominance(M, tol: float = 1e-9) -> HyperdominanceReport:
    """Margins for M being doubly hyperdominant: off-diagonals nonpositive,
    row and column sums nonnegative."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"M must be square, got {M.shape}")
    n = M.shape[0]
    if n <= 1:
        worst_off = np.inf
    else:
        off = M[~np.eye(n, dtype=bool)]
        worst_off = float(np.min(-off))
    worst_row = float(np.min(M.sum(axis=1)))
    worst_col = float(np.min(M.sum(axis=0)))
    return HyperdominanceReport(M, worst_off, worst_row, worst_col, tol)


@dataclass(frozen=True)
class LinearInequalities:
    """Affine inequalities A theta + b >= 0 over the stacked parameter
    vector theta = (lam, lamt, vec(E))."""

    A: np.ndarray
    b: np.ndarray
    labels: tuple[str, ...]

    @property
    def count(self) -> int:
        return self.A.shape[0]


def param_vector(p: MultiplierParam) -> np.ndarray:
    """Stacked decision vector (lam, lamt, vec(E)) used by the constraint
    representation; E entries are row-major."""
    return np.concatenate([p.lam, p.lamt, p.E.reshape(-1)])


def param_dim(nu: int, nut: int) -> int:
    return (nu + 1) + (nut + 1) + nu * nut


def _m_coefficients(nu: int, nut: int, T: int) -> np.ndarray:
    """Coefficient tensor K with M_T(theta)[i, j] = sum_p K[i, j, p] theta_p.

    M_T is linear (no constant part) in theta, so evaluation on the
    standard basis recovers the coefficients exactly.
    """
    npar = param_dim(nu, nut)
    K = np.zeros((T, T, npar))
    for idx in range(npar):
        theta = np.zeros(npar)
        theta[idx] = 1.0
        lam = theta[:nu + 1]
        lamt = theta[nu + 1:nu + nut + 2]
        E = theta[nu + nut + 2:].reshape(nut, nu)
        p = MultiplierParam(nu, nut, lam, lamt, E)
        K[:, :, idx] = m_matrix(p, T)
    return K


def hyperdominance_constraints(nu: int, nut: int, T: int | None = None) -> LinearInequalities:
    """Affine inequalities over (lam, lamt, vec(E)) expressing that M_T is
    doubly hyperdominant (default T = nu + nut + 1).

    Emits T*(T-1) off-diagonal sign constraints plus 2T sum constraints,
    i.e. T^2 + T rows, including trivially satisfied ones.
    """
    if T is None:
        T = nu + nut + 1
    K = _m_coefficients(nu, nut, T)
    rows, labels = [], []
    for i in range(T):
        for j in range(T):
            if i != j:
                rows.append(-K[i, j, :])
                labels.append(f"offdiag[{i},{j}]")
    for i in range(T):
        rows.append(K[i, :, :].sum(axis=0))
        labels.append(f"rowsum[{i}]")
    for j in range(T):
        rows.append(K[:, j, :].sum(axis=0))
        labels.append(f"colsum[{j}]")
    A = np.array(rows).reshape(len(rows), param_dim(nu, nut))
    return LinearInequalities(A, np.zeros(len(rows)), tuple(labels))


def random_feasible_param(
    nu: int, nut: int, rng: np.random.Generator, d: int = 1
) -> MultiplierParam:
    """Draw a random multiplier parameter whose M_{T0} is doubly
    hyperdominant, by sampling nonnegative coefficients and scaling the
    coupling matrix E back into the cone."""
    lam = rng.uniform(0.0, 1.0, nu + 1)
    lamt = rng.uniform(0.0, 1.0, nut + 1)
    E = rng.uniform(-1.0, 1.0, (nut, nu)) if nu and nut else np.zeros((nut, nu))
    p = MultiplierParam(nu, nut, lam, lamt, E, d=d)
    for _ in range(60):
        if check_hyperdominance(m_matrix(p, p.T0), tol=0.0).passed:
            return p
        E = 0.5 * E
        p = MultiplierParam(nu, nut, lam, lamt, E, d=d)
    return MultiplierParam(nu, nut, lam, lamt, np.zeros((nut, nu)), d=d)
