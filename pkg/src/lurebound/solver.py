"""Standard-form conic optimization with an embedded primal-dual
interior-point method.

Problems are stated in inequality form

    minimize    c' x
    subject to  h - G x in K,

where K is a product of a nonnegative orthant and dense positive
semidefinite blocks (in scaled svec coordinates).  The embedded solver is
a homogeneous self-dual Mehrotra predictor-corrector with Nesterov-Todd
scaling; dense linear algebra throughout, sized for problems up to a few
thousand scalar unknowns.

A pluggable backend registry lets an external conic solver replace the
embedded one behind the same contract.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# symmetric vectorization

def svec(M: np.ndarray) -> np.ndarray:
    """Scaled upper-triangular vectorization: off-diagonals times sqrt(2),
    so that svec(X)'svec(Y) = trace(XY)."""
    m = M.shape[0]
    out = np.empty(m * (m + 1) // 2)
    idx = 0
    for j in range(m):
        for i in range(j + 1):
            out[idx] = M[i, j] if i == j else SQRT2 * 0.5 * (M[i, j] + M[j, i])
            idx += 1
    return out


def smat(v: np.ndarray, m: int) -> np.ndarray:
    """Inverse of svec."""
    M = np.zeros((m, m))
    idx = 0
    for j in range(m):
        for i in range(j + 1):
            if i == j:
                M[i, j] = v[idx]
            else:
                M[i, j] = M[j, i] = v[idx] / SQRT2
            idx += 1
    return M


def svec_dim(m: int) -> int:
    return m * (m + 1) // 2


# ---------------------------------------------------------------------------
# problem and result containers

@dataclass(frozen=True)
class ConeDims:
    """Cone layout: leading nonnegative-orthant length, then PSD block
    side lengths (svec coordinates)."""

    nonneg: int = 0
    psd: tuple[int, ...] = ()

    @property
    def total(self) -> int:
        return self.nonneg + sum(svec_dim(m) for m in self.psd)

    @property
    def degree(self) -> int:
        return self.nonneg + sum(self.psd)

    def slices(self):
        """(kind, slice, side) triples over the stacked cone vector."""
        out = [("l", slice(0, self.nonneg), None)]
        off = self.nonneg
        for m in self.psd:
            d = svec_dim(m)
            out.append(("s", slice(off, off + d), m))
            off += d
        return out


@dataclass(frozen=True)
class ConicProblem:
    """min c'x s.t. G x + s = h, s in K."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    dims: ConeDims

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        G = np.asarray(self.G, dtype=float).reshape(self.dims.total, c.shape[0])
        h = np.asarray(self.h, dtype=float).reshape(self.dims.total)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def nvars(self) -> int:
        return self.c.shape[0]

    def dump(self) -> str:
        """Documented text format: header, cone layout, then coefficient
        triplets (row, col, value) of G and the dense c, h vectors."""
        lines = ["conicproblem v1",
                 f"nvars {self.nvars}",
                 f"nonneg {self.dims.nonneg}",
                 "psd " + " ".join(str(m) for m in self.dims.psd)]
        lines.append("c " + " ".join(repr(float(v)) for v in self.c))
        lines.append("h " + " ".join(repr(float(v)) for v in self.h))
        rows, cols = np.nonzero(self.G)
        lines.append(f"G {len(rows)}")
        for i, j in zip(rows, cols):
            lines.append(f"{i} {j} {float(self.G[i, j])!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def load(text: str) -> "ConicProblem":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines[0].strip() != "conicproblem v1":
            raise ValueError("unrecognized problem format")
        nvars = int(lines[1].split()[1])
        nonneg = int(lines[2].split()[1])
        psd = tuple(int(t) for t in lines[3].split()[1:])
        dims = ConeDims(nonneg, psd)
        c = np.array([float(t) for t in lines[4].split()[1:]])
        h = np.array([float(t) for t in lines[5].split()[1:]])
        nnz = int(lines[6].split()[1])
        G = np.zeros((dims.total, nvars))
        for ln in lines[7:7 + nnz]:
            i, j, v = ln.split()
            G[int(i), int(j)] = float(v)
        return ConicProblem(c, G, h, dims)


@dataclass
class SolveResult:
    status: str                      # optimal | infeasible | unbounded | numerical-limit
    x: np.ndarray
    z: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    relgap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    wall_time: float
    message: str = ""


@dataclass
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98


# ---------------------------------------------------------------------------
# Nesterov-Todd scaling

class _Scaling:
    """Per-block NT scaling.  For the orthant, w = sqrt(s/z); for a PSD
    block, the matrix R with R' Z R = R^{-1} S R^{-T} = diag(lmbda)."""

    def __init__(self, dims: ConeDims, s: np.ndarray, z: np.ndarray):
        self.dims = dims
        self.blocks = []
        self.lmbda = np.empty(dims.total)
        for kind, sl, m in dims.slices():
            if kind == "l":
                w = np.sqrt(s[sl] / z[sl])
                self.blocks.append(("l", sl, w))
                self.lmbda[sl] = np.sqrt(s[sl] * z[sl])
            else:
                S = smat(s[sl], m)
                Z = smat(z[sl], m)
                Ls = np.linalg.cholesky(S)
                Lz = np.linalg.cholesky(Z)
                U, sig, Vt = np.linalg.svd(Ls.T @ Lz)
                R = Ls @ U / np.sqrt(sig)
                Rinv = np.sqrt(sig)[:, None] * U.T @ np.linalg.inv(Ls)
                self.blocks.append(("s", sl, (R, Rinv, sig, m)))
                lam_mat = np.diag(sig)
                self.lmbda[sl] = svec(lam_mat)

    def _map(self, v: np.ndarray, mode: str) -> np.ndarray:
        out = np.empty_like(v)
        for kind, sl, data in self.blocks:
            if kind == "l":
                w = data
                if mode in ("W", "Wt"):
                    out[sl] = w * v[sl]
                else:
                    out[sl] = v[sl] / w
            else:
                R, Rinv, sig, m = data
                M = smat(v[sl], m)
                if mode == "W":        # z-like: R' M R
                    res = R.T @ M @ R
                elif mode == "Wt":     # s-like adjoint: R M R'
                    res = R @ M @ R.T
                elif mode == "Winv":   # R^{-T} M R^{-1}
                    res = Rinv.T @ M @ Rinv
                else:                  # Winvt: R^{-1} M R^{-T}
                    res = Rinv @ M @ Rinv.T
                out[sl] = svec(0.5 * (res + res.T))
        return out

    def W(self, v):
        return self._map(v, "W")

    def Wt(self, v):
        return self._map(v, "Wt")

    def Winv(self, v):
        return self._map(v, "Winv")

    def Winvt(self, v):
        return self._map(v, "Winvt")

    def WtW_inv(self, v):
        return self.Winv(self.Winvt(v))


def _jordan_product(dims: ConeDims, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty(dims.total)
    for kind, sl, m in dims.slices():
        if kind == "l":
            out[sl] = u[sl] * v[sl]
        else:
            U, V = smat(u[sl], m), smat(v[sl], m)
            out[sl] = svec(0.5 * (U @ V + V @ U))
    return out


def _lambda_solve(dims: ConeDims, lmbda: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve lmbda o u = rhs in the Jordan algebra, with lmbda diagonal in
    each PSD block (as produced by NT scaling)."""
    out = np.empty(dims.total)
    for kind, sl, m in dims.slices():
        if kind == "l":
            out[sl] = rhs[sl] / lmbda[sl]
        else:
            lam = np.diag(smat(lmbda[sl], m))
            R = smat(rhs[sl], m)
            denom = 0.5 * (lam[:, None] + lam[None, :])
            out[sl] = svec(R / denom)
    return out


def _cone_identity(dims: ConeDims) -> np.ndarray:
    e = np.zeros(dims.total)
    for kind, sl, m in dims.slices():
        if kind == "l":
            e[sl] = 1.0
        else:
            e[sl] = svec(np.eye(m))
    return e


def _max_step(dims: ConeDims, v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha with v + alpha dv remaining in the cone (v interior)."""
    alpha = np.inf
    for kind, sl, m in dims.slices():
        if kind == "l":
            neg = dv[sl] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-v[sl][neg] / dv[sl][neg])))
        else:
            V = smat(v[sl], m)
            D = smat(dv[sl], m)
            L = np.linalg.cholesky(V)
            Linv = np.linalg.inv(L)
            lam_min = float(np.min(np.linalg.eigvalsh(Linv @ D @ Linv.T)))
            if lam_min < 0:
                alpha = min(alpha, -1.0 / lam_min)
    return alpha


# ---------------------------------------------------------------------------
# the embedded solver

def _solve_embedded(prob: ConicProblem, opts: SolverOptions) -> SolveResult:
    t0 = time.perf_counter()
    c, G, h, dims = prob.c, prob.G, prob.h, prob.dims
    n = prob.nvars
    m_total = dims.total
    if m_total == 0:
        return SolveResult("optimal", np.zeros(n), np.zeros(0), np.zeros(0),
                           0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, time.perf_counter() - t0,
                           "unconstrained problem; zero returned")

    x = np.zeros(n)
    s = _cone_identity(dims)
    z = s.copy()
    tau, kappa = 1.0, 1.0
    deg = dims.degree + 1

    norm_h = 1.0 + np.linalg.norm(h)
    norm_c = 1.0 + np.linalg.norm(c)
    status, msg = "numerical-limit", "iteration limit reached"
    it = 0
    best_err = np.inf
    best = None
    stall = 0

    def _result(status, msg, it):
        if status == "optimal":
            xs, zs, ss = x / tau, z / tau, s / tau
        else:
            xs, zs, ss = x, z, s
        pres = np.linalg.norm(G @ xs + ss - h) / norm_h
        dres = np.linalg.norm(G.T @ zs + c) / norm_c
        gap = float(ss @ zs)
        pobj = float(c @ xs)
        dobj = float(-h @ zs)
        relgap = gap / max(1.0, abs(pobj))
        return SolveResult(status, xs, zs, ss, pobj, dobj, gap, relgap,
                           pres, dres, it, time.perf_counter() - t0, msg)

    for it in range(1, opts.max_iter + 1):
        # residuals of the homogeneous model
        rx = G.T @ z + c * tau
        rz = s + G @ x - h * tau
        rtau = kappa + c @ x + h @ z
        mu = (s @ z + tau * kappa) / deg

        # convergence in the scaled-back variables
        pres = np.linalg.norm(G @ (x / tau) + s / tau - h) / norm_h
        dres = np.linalg.norm(G.T @ (z / tau) + c) / norm_c
        gap = float((s @ z) / tau**2)
        pobj = float(c @ x / tau)
        relgap = gap / max(1.0, abs(pobj))
        if pres <= opts.feas_tol and dres <= opts.feas_tol and \
                (gap <= opts.gap_tol or relgap <= opts.gap_tol):
            status, msg = "optimal", "converged"
            break

        # remember the most accurate iterate seen; once floating-point
        # cancellation stops the residuals from improving, bail out and fall
        # back to it rather than grinding the scaling matrices singular
        err = max(pres, dres, min(gap, relgap))
        if err < 0.9 * best_err:
            stall = 0
        else:
            stall += 1
        if err < best_err:
            best_err = err
            best = (x.copy(), z.copy(), s.copy(), tau, kappa)
        if stall >= 8:
            status, msg = "numerical-limit", "progress stalled"
            break

        # certificate-based infeasibility detection
        hz = float(h @ z)
        cx = float(c @ x)
        if hz < -1e-14:
            zc = z / (-hz)
            if np.linalg.norm(G.T @ zc) <= opts.feas_tol * norm_c:
                x, z, s = x, zc, s
                return _result("infeasible", "dual improving ray found", it)
        if cx < -1e-14:
            xc, sc = x / (-cx), s / (-cx)
            if np.linalg.norm(G @ xc + sc) <= opts.feas_tol * norm_h:
                x, z, s = xc, z, sc
                return _result("unbounded", "primal improving ray found", it)
        # mu is measured in the homogeneous embedding, so the floor must
        # scale with tau^2 (solutions with large norm drive tau small)
        if mu < 1e-16 * max(tau * tau, 1e-6) or tau < 1e-12 * max(1.0, kappa):
            status, msg = "numerical-limit", "central-path parameter vanished"
            break

        try:
            Wsc = _Scaling(dims, s, z)
        except np.linalg.LinAlgError:
            status, msg = "numerical-limit", "scaling factorization failed"
            break
        lmbda = Wsc.lmbda

        # K = G' (W'W)^{-1} G, plus its action on h
        WtWinv_G = np.empty_like(G)
        for jcol in range(n):
            WtWinv_G[:, jcol] = Wsc.WtW_inv(G[:, jcol])
        WtWinv_h = Wsc.WtW_inv(h)
        K = G.T @ WtWinv_G
        try:
            K_fact = _chol_factor(K)
        except np.linalg.LinAlgError:
            status, msg = "numerical-limit", "KKT factorization failed"
            break

        u = _kkt_solve(K, K_fact, G.T @ WtWinv_h - c) if n else np.zeros(0)
        Gu = G @ u if n else np.zeros(m_total)
        denom = (float(c @ u) + float(h @ Wsc.WtW_inv(Gu - h)) - kappa / tau)

        def newton_raw(b1, b2, b3, d_s, d_tk):
            """Solve the scaled Newton system for arbitrary right-hand sides.

            Equations: G'dz + c*dtau = -b1; ds + G*dx - h*dtau = -b2;
            dkappa + c'dx + h'dz = -b3; lambda o (W dz + W^-T ds) = d_s;
            kappa*dtau + tau*dkappa = d_tk.
            """
            bz = Wsc.Wt(_lambda_solve(dims, lmbda, d_s)) + b2
            v = (_kkt_solve(K, K_fact, -b1 - G.T @ Wsc.WtW_inv(bz))
                 if n else np.zeros(0))
            Gv = G @ v if n else np.zeros(m_total)
            numer = (-b3 - float(c @ v)
                     - float(h @ Wsc.WtW_inv(Gv + bz)) - d_tk / tau)
            dtau = numer / denom
            dx = dtau * u + v
            dz = Wsc.WtW_inv((G @ dx if n else np.zeros(m_total)) - h * dtau + bz)
            ds = Wsc.Wt(_lambda_solve(dims, lmbda, d_s)) - Wsc.Wt(Wsc.W(dz))
            dkappa = (d_tk - kappa * dtau) / tau
            return dx, dz, ds, dtau, dkappa

        def newton(theta, d_s, d_tk):
            """Newton direction with two rounds of iterative refinement."""
            dx, dz, ds, dtau, dkappa = newton_raw(
                theta * rx, theta * rz, theta * rtau, d_s, d_tk)
            for _ in range(2):
                r1 = G.T @ dz + c * dtau + theta * rx
                r2 = ds + G @ dx - h * dtau + theta * rz
                r3 = dkappa + float(c @ dx) + float(h @ dz) + theta * rtau
                r4 = _jordan_product(dims, lmbda,
                                     Wsc.W(dz) + Wsc.Winvt(ds)) - d_s
                r5 = kappa * dtau + tau * dkappa - d_tk
                ex, ez, es, etau, ekappa = newton_raw(r1, r2, r3, -r4, -r5)
                dx, dz, ds = dx + ex, dz + ez, ds + es
                dtau, dkappa = dtau + etau, dkappa + ekappa
            return dx, dz, ds, dtau, dkappa

        # predictor (affine) direction
        lam_lam = _jordan_product(dims, lmbda, lmbda)
        dxa, dza, dsa, dtaua, dkappaa = newton(1.0, -lam_lam, -tau * kappa)
        alpha_a = min(
            _max_step(dims, s, dsa),
            _max_step(dims, z, dza),
            (-tau / dtaua) if dtaua < 0 else np.inf,
            (-kappa / dkappaa) if dkappaa < 0 else np.inf,
            1.0,
        )
        sigma = (1.0 - min(alpha_a, 1.0)) ** 3

        # corrector in scaled space
        eta = _jordan_product(dims, Wsc.Winvt(dsa), Wsc.W(dza))
        d_s = sigma * mu * _cone_identity(dims) - lam_lam - eta
        d_tk = sigma * mu - tau * kappa - dtaua * dkappaa
        dx, dz, ds, dtau, dkappa = newton(1.0 - sigma, d_s, d_tk)

        alpha = opts.step_fraction * min(
            _max_step(dims, s, ds),
            _max_step(dims, z, dz),
            (-tau / dtau) if dtau < 0 else np.inf,
            (-kappa / dkappa) if dkappa < 0 else np.inf,
        )
        alpha = min(alpha, 1.0)
        if not np.isfinite(alpha) or alpha <= 1e-10:
            # corrector blocked at the cone boundary: fall back to a pure
            # centering step before declaring failure
            d_s = mu * _cone_identity(dims) - lam_lam
            d_tk = mu - tau * kappa
            dx, dz, ds, dtau, dkappa = newton(0.0, d_s, d_tk)
            alpha = opts.step_fraction * min(
                _max_step(dims, s, ds),
                _max_step(dims, z, dz),
                (-tau / dtau) if dtau < 0 else np.inf,
                (-kappa / dkappa) if dkappa < 0 else np.inf,
            )
            alpha = min(alpha, 1.0)
        if not np.isfinite(alpha) or alpha <= 1e-14:
            status, msg = "numerical-limit", "step length collapsed"
            break
        x = x + alpha * dx
        z = z + alpha * dz
        s = s + alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkappa

    # final certificate check on exit without convergence
    if status == "numerical-limit":
        hz = float(h @ z)
        if hz < -1e-14 and np.linalg.norm(G.T @ (z / -hz)) <= 1e-6 * norm_c:
            z = z / (-hz)
            return _result("infeasible", "dual improving ray found at exit", it)
        if best is not None and best_err <= max(100.0 * opts.feas_tol,
                                                10.0 * opts.gap_tol):
            x, z, s, tau, kappa = best
            return _result("optimal", "reduced accuracy (%s)" % msg, it)
    return _result(status, msg, it)


def _chol_factor(K: np.ndarray):
    if K.size == 0:
        return None
    jitter = 0.0
    scale = max(1.0, float(np.max(np.abs(K))))
    for _ in range(6):
        try:
            return np.linalg.cholesky(K + jitter * np.eye(K.shape[0]))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * scale)
    raise np.linalg.LinAlgError("KKT matrix not positive definite")


def _chol_solve(L, b):
    if L is None:
        return np.zeros(0)
    y = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, y)


def _kkt_solve(K, L, b):
    """Cholesky solve with two rounds of iterative refinement.

    Near the central-path limit K is severely ill conditioned and the raw
    triangular solves lose several digits; refinement recovers most of them.
    """
    if L is None:
        return np.zeros(0)
    x = _chol_solve(L, b)
    for _ in range(2):
        r = b - K @ x
        x = x + _chol_solve(L, r)
    return x


# ---------------------------------------------------------------------------
# backend registry

def _solve_external(prob: ConicProblem, opts: SolverOptions) -> SolveResult:
    """Optional backend via cvxpy, behind the same contract."""
    t0 = time.perf_counter()
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError("external backend requires cvxpy") from exc
    x = cp.Variable(prob.nvars)
    cons = []
    sG = prob.h - prob.G @ x if prob.nvars else prob.h
    for kind, sl, m in prob.dims.slices():
        if kind == "l":
            if prob.dims.nonneg:
                cons.append(sG[sl] >= 0)
        else:
            rows = []
            idx = sl.start
            Mexpr = [[None] * m for _ in range(m)]
            k = 0
            for j in range(m):
                for i in range(j + 1):
                    v = sG[idx + k]
                    if i == j:
                        Mexpr[i][j] = v
                    else:
                        Mexpr[i][j] = v / SQRT2
                        Mexpr[j][i] = v / SQRT2
                    k += 1
            cons.append(cp.bmat(Mexpr) >> 0)
    problem = cp.Problem(cp.Minimize(prob.c @ x if prob.nvars else 0.0), cons)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS)
    if problem.status not in ("optimal", "infeasible", "unbounded"):
        problem.solve(solver=cp.SCS, max_iters=50000)
    stat = {"optimal": "optimal", "infeasible": "infeasible",
            "unbounded": "unbounded"}.get(problem.status, "numerical-limit")
    xv = np.asarray(x.value).reshape(-1) if x.value is not None else np.zeros(prob.nvars)
    sv = prob.h - prob.G @ xv
    return SolveResult(stat, xv, np.zeros(prob.dims.total), sv,
                       float(problem.value) if problem.value is not None else np.nan,
                       np.nan, np.nan, np.nan, np.nan, np.nan,
                       -1, time.perf_counter() - t0, f"cvxpy status {problem.status}")


BACKENDS = {
    "embedded": _solve_embedded,
    "external": _solve_external,
}


def solve(prob: ConicProblem, opts: SolverOptions | None = None,
          backend: str = "embedded") -> SolveResult:
    """Solve a conic problem with the selected backend.

    Non-convergence is reported via the 'numerical-limit' status together
    with the residual diagnostics, never as a silent wrong answer.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}")
    return BACKENDS[backend](prob, opts or SolverOptions())
