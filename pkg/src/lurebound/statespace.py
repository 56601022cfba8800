"""Discrete-time state-space algebra: realizations, finite-horizon lifting,
filter/plant interconnection, stability and frequency-response utilities.

All matrices are dense numpy arrays.  Zero-dimensional states (static
filters) are first class: every operation accepts 0-by-k blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    """Raised when matrix dimensions of a realization are inconsistent."""


def _as_matrix(M, name: str) -> np.ndarray:
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if A.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got ndim={A.ndim}")
    return A


def empty(rows: int, cols: int) -> np.ndarray:
    """A 0-filled matrix; convenient for zero-dimensional blocks."""
    return np.zeros((rows, cols))


@dataclass(frozen=True)
class Realization:
    """A plain discrete-time realization x+ = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} cols, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m_in(self) -> int:
        return self.B.shape[1]

    @property
    def m_out(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class PlantRealization:
    """The loop's linear part with performance output e = C_e x.

    x+ = A x + B w, z = C x + D w.  A must be Schur before analysis.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    C_e: np.ndarray

    def __post_init__(self):
        base = Realization(self.A, self.B, self.C, self.D)
        C_e = _as_matrix(self.C_e, "C_e")
        if C_e.shape[1] != base.n:
            raise DimensionError(
                f"C_e has {C_e.shape[1]} cols, expected {base.n}"
            )
        if base.m_in != base.m_out:
            raise DimensionError(
                f"plant must be square in (z, w): got {base.m_out} outputs, "
                f"{base.m_in} inputs"
            )
        object.__setattr__(self, "A", base.A)
        object.__setattr__(self, "B", base.B)
        object.__setattr__(self, "C", base.C)
        object.__setattr__(self, "D", base.D)
        object.__setattr__(self, "C_e", C_e)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C_e.shape[0]

    def realization(self) -> Realization:
        return Realization(self.A, self.B, self.C, self.D)


@dataclass(frozen=True)
class LiftedRealization:
    """Finite-horizon lifted map (x_0, u^T) -> (x_T, y^T)."""

    T: int
    A_T: np.ndarray
    B_T: np.ndarray
    C_T: np.ndarray
    D_T: np.ndarray


@dataclass(frozen=True)
class FilterRealization:
    """Filter xi+ = A xi + B (z; w), v = C xi + D (z; w) with xi_0 = 0.

    The input is partitioned as (z, w) with z of dimension in_split[0] and
    w of dimension in_split[1].
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    in_split: tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        base = Realization(self.A, self.B, self.C, self.D)
        dz, dw = self.in_split
        if dz + dw != base.m_in:
            raise DimensionError(
                f"input split {self.in_split} does not sum to {base.m_in}"
            )
        object.__setattr__(self, "A", base.A)
        object.__setattr__(self, "B", base.B)
        object.__setattr__(self, "C", base.C)
        object.__setattr__(self, "D", base.D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m_out(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class AugmentedRealization:
    """Series connection of the filter with the plant, state (xi, x)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n_filter: int
    n_plant: int

    @property
    def n(self) -> int:
        return self.A.shape[0]


def lift(realization, T: int) -> LiftedRealization:
    """Lift a realization over the finite horizon T >= 1.

    Returns (A^T, B^T, C^T, D^T) with A^T the T-fold product of A,
    B^T = [A^{T-1}B ... B], C^T stacking C A^t, and D^T the block
    lower-triangular Toeplitz matrix of Markov parameters (D^1 = D).
    """
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    if not hasattr(realization, "A"):
        realization = Realization(*realization)
    elif not isinstance(realization, Realization):
        realization = Realization(realization.A, realization.B,
                                  realization.C, realization.D)
    A, B, C, D = realization.A, realization.B, realization.C, realization.D
    n, m, k = realization.n, realization.m_in, realization.m_out

    # powers A^0 .. A^T
    powers = [np.eye(n)]
    for _ in range(T):
        powers.append(A @ powers[-1])

    A_T = powers[T]
    B_T = np.hstack([powers[T - 1 - j] @ B for j in range(T)]) if m else empty(n, 0)
    C_T = np.vstack([C @ powers[i] for i in range(T)]) if k else empty(0, n)

    D_T = np.zeros((k * T, m * T))
    markov = [D] + [C @ powers[j] @ B for j in range(T - 1)]
    for i in range(T):
        for j in range(i + 1):
            D_T[i * k:(i + 1) * k, j * m:(j + 1) * m] = markov[i - j]
    return LiftedRealization(T, A_T, B_T, C_T, D_T)


def interconnect(filt: FilterRealization, plant: PlantRealization) -> AugmentedRealization:
    """Series connection of the filter with the plant.

    The plant maps w to z = C x + D w; the filter is driven by (z, w).
    With state eta = (xi, x) the result maps w to the filter output v.
    """
    d = plant.d
    if filt.in_split != (d, d):
        raise DimensionError(
            f"filter input split {filt.in_split} does not match plant "
            f"signal dimension ({d}, {d})"
        )
    n_f, n = filt.n, plant.n
    sel_z = np.vstack([plant.C, np.zeros((d, n))])          # (z; 0) from x
    sel_w = np.vstack([plant.D, np.eye(d)])                 # (D; I) w

    A = np.zeros((n_f + n, n_f + n))
    A[:n_f, :n_f] = filt.A
    A[:n_f, n_f:] = filt.B @ sel_z
    A[n_f:, n_f:] = plant.A
    B = np.vstack([filt.B @ sel_w, plant.B])
    C = np.hstack([filt.C, filt.D @ sel_z])
    D = filt.D @ sel_w
    return AugmentedRealization(A, B, C, D, n_f, n)


def is_schur(A, margin: float = 0.0) -> bool:
    """True iff the spectral radius of A is strictly below 1 - margin."""
    A = _as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    if A.shape[0] == 0:
        return True
    return float(np.max(np.abs(np.linalg.eigvals(A)))) < 1.0 - margin


def freq_response(realization, lam: complex) -> np.ndarray:
    """Transfer matrix G(lam) = C (lam I - A)^{-1} B + D."""
    if not hasattr(realization, "A"):
        realization = Realization(*realization)
    elif not isinstance(realization, Realization):
        realization = Realization(realization.A, realization.B,
                                  realization.C, realization.D)
    A, B, C, D = realization.A, realization.B, realization.C, realization.D
    n = realization.n
    if n == 0:
        return D.astype(complex)
    M = lam * np.eye(n) - A
    if abs(np.linalg.det(M)) < 1e-300:
        raise np.linalg.LinAlgError(f"resolvent singular at lambda={lam}")
    return C @ np.linalg.solve(M, B) + D


def simulate(realization, x0, u) -> tuple[np.ndarray, np.ndarray]:
    """Run the recursion for an input sequence u of shape (T, m).

    Returns (x, y) with x of shape (T + 1, n) (x[T] is the final state)
    and y of shape (T, k).
    """
    if not hasattr(realization, "A"):
        realization = Realization(*realization)
    elif not isinstance(realization, Realization):
        realization = Realization(realization.A, realization.B,
                                  realization.C, realization.D)
    A, B, C, D = realization.A, realization.B, realization.C, realization.D
    u = np.atleast_2d(np.asarray(u, dtype=float))
    T = u.shape[0]
    x = np.zeros((T + 1, realization.n))
    y = np.zeros((T, realization.m_out))
    x[0] = np.asarray(x0, dtype=float).reshape(realization.n)
    for t in range(T):
        y[t] = C @ x[t] + D @ u[t]
        x[t + 1] = A @ x[t] + B @ u[t]
    return x, y
