"""Convex-function oracles and the dissipativity/convexity verifiers:
subgradients, proximal maps, Fenchel conjugates, cyclic monotonicity and
the storage-decrease inequalities behind the multiplier construction.

All builtin families are normalized so that f(0) = 0 and 0 is a
subgradient at 0 (hence f >= 0 everywhere); constructors reject
parameters violating this.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


class NormalizationError(ValueError):
    """Raised when a family cannot satisfy f(0) = 0, 0 in subdiff f(0)."""


class ProxError(RuntimeError):
    """Raised when proximal-map iteration fails to converge."""


class ConvexFunctionOracle:
    """Callable description of a finite convex function on R^d.

    Subclasses implement value, subgradient (one selection), and prox.
    subgradient accepts an optional rng to draw a random extreme
    subgradient at kinks; the default selection is deterministic
    (lexicographically smallest extreme subgradient).
    """

    dim: int

    def value(self, x) -> float:
        raise NotImplementedError

    def subgradient(self, x, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def prox(self, t: float, v) -> np.ndarray:
        """Unique minimizer of f(.) + ||. - v||^2 / (2 t)."""
        raise NotImplementedError

    def conjugate(self, x) -> float | None:
        """Closed-form conjugate value, or None if unavailable/infinite."""
        return None

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim,):
            raise ValueError(f"point has dimension {x.shape[0]}, expected {self.dim}")
        return x


class Quadratic(ConvexFunctionOracle):
    """f(x) = x' Q x / 2 with Q symmetric positive semidefinite."""

    def __init__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise NormalizationError("Q must be positive semidefinite")
        self.Q = 0.5 * (Q + Q.T)
        self.dim = Q.shape[0]

    def value(self, x):
        x = self._vec(x)
        return 0.5 * float(x @ self.Q @ x)

    def subgradient(self, x, rng=None):
        return self.Q @ self._vec(x)

    def prox(self, t, v):
        v = self._vec(v)
        return np.linalg.solve(np.eye(self.dim) + t * self.Q, v)

    def conjugate(self, x):
        x = self._vec(x)
        sol, res, *_ = np.linalg.lstsq(self.Q, x, rcond=None)
        if np.linalg.norm(self.Q @ sol - x) > 1e-9 * (1 + np.linalg.norm(x)):
            return None  # x outside range(Q): conjugate is +inf
        return 0.5 * float(x @ sol)


class MaxAffine(ConvexFunctionOracle):
    """f(x) = max_i (a_i' x + b_i), normalized so f(0) = 0 and
    0 in subdiff f(0) (zero must lie in the hull of the active slopes)."""

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b must have matching row counts")
        b = b - np.max(b)  # f(0) = max b = 0
        self.A, self.b = A, b
        self.dim = A.shape[1]
        if not self._zero_in_active_hull():
            raise NormalizationError("0 is not a subgradient at 0")

    def _zero_in_active_hull(self) -> bool:
        act = self.A[self.b > -1e-12]
        res = linprog(
            np.zeros(act.shape[0]),
            A_eq=np.vstack([act.T, np.ones(act.shape[0])]),
            b_eq=np.concatenate([np.zeros(self.dim), [1.0]]),
            bounds=[(0, None)] * act.shape[0],
            method="highs",
        )
        return bool(res.success)

    def _active(self, x, tol=1e-10):
        vals = self.A @ x + self.b
        return np.flatnonzero(vals >= np.max(vals) - tol)

    def value(self, x):
        x = self._vec(x)
        return float(np.max(self.A @ x + self.b))

    def subgradient(self, x, rng=None):
        x = self._vec(x)
        act = self._active(x)
        if rng is not None:
            return self.A[rng.choice(act)].copy()
        rows = self.A[act]
        order = np.lexsort(rows.T[::-1])  # lexicographic by leading coords
        return rows[order[0]].copy()

    def prox(self, t, v):
        """Exact prox via the dual simplex-constrained QP, solved by
        enumerating active sets (piece counts are small)."""
        v = self._vec(v)
        m = self.A.shape[0]
        Q = t * (self.A @ self.A.T)
        q = self.A @ v + self.b
        best, best_val = None, np.inf
        for r in range(1, m + 1):
            for S in itertools.combinations(range(m), r):
                S = list(S)
                # KKT: [Q_SS, 1; 1', 0] (mu_S, kappa) = (q_S, 1)
                k = len(S)
                KKT = np.zeros((k + 1, k + 1))
                KKT[:k, :k] = Q[np.ix_(S, S)]
                KKT[:k, k] = 1.0
                KKT[k, :k] = 1.0
                rhs = np.concatenate([q[S], [1.0]])
                try:
                    sol = np.linalg.solve(KKT, rhs)
                except np.linalg.LinAlgError:
                    continue
                mu_S = sol[:k]
                if np.min(mu_S) < -1e-11:
                    continue
                mu = np.zeros(m)
                mu[S] = np.clip(mu_S, 0.0, None)
                grad = Q @ mu - q
                kappa = sol[k]
                if np.min(grad + kappa) < -1e-9 * (1 + np.abs(kappa)):
                    continue  # not optimal over the simplex
                val = 0.5 * mu @ Q @ mu - q @ mu
                if val < best_val - 1e-15:
                    best_val, best = val, mu
        if best is None:
            raise ProxError("active-set enumeration failed")
        return v - t * (self.A.T @ best)

    def conjugate(self, x):
        """f*(x) = min -b' mu over mu in the simplex with A' mu = x;
        +inf (None) outside the hull of the slopes."""
        x = self._vec(x)
        m = self.A.shape[0]
        res = linprog(
            -self.b,
            A_eq=np.vstack([self.A.T, np.ones(m)]),
            b_eq=np.concatenate([x, [1.0]]),
            bounds=[(0, None)] * m,
            method="highs",
        )
        if not res.success:
            return None
        return float(res.fun)


class ScaledAbs(ConvexFunctionOracle):
    """Separable f(x) = alpha * sum_i |x_i| with alpha >= 0."""

    def __init__(self, alpha: float, dim: int = 1):
        if alpha < 0:
            raise NormalizationError("alpha must be nonnegative")
        self.alpha = float(alpha)
        self.dim = dim

    def value(self, x):
        return self.alpha * float(np.sum(np.abs(self._vec(x))))

    def subgradient(self, x, rng=None):
        x = self._vec(x)
        g = self.alpha * np.sign(x)
        kinks = x == 0.0
        if rng is not None and self.alpha > 0:
            g[kinks] = self.alpha * rng.choice([-1.0, 1.0], size=int(kinks.sum()))
        else:
            g[kinks] = -self.alpha  # smallest extreme subgradient
        return g

    def prox(self, t, v):
        v = self._vec(v)
        thr = t * self.alpha
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)

    def conjugate(self, x):
        x = self._vec(x)
        if np.max(np.abs(x)) > self.alpha + 1e-12:
            return None  # +inf outside [-alpha, alpha]^d
        return 0.0


class SlopeRestricted(ConvexFunctionOracle):
    """Separable Huber-type family: derivative beta * clip(x, -r, r),
    nondecreasing with value 0 at the origin."""

    def __init__(self, beta: float, r: float, dim: int = 1):
        if beta < 0 or r <= 0:
            raise NormalizationError("need beta >= 0 and r > 0")
        self.beta, self.r = float(beta), float(r)
        self.dim = dim

    def value(self, x):
        x = self._vec(x)
        a = np.abs(x)
        quad = 0.5 * self.beta * x**2
        lin = self.beta * self.r * a - 0.5 * self.beta * self.r**2
        return float(np.sum(np.where(a <= self.r, quad, lin)))

    def subgradient(self, x, rng=None):
        return self.beta * np.clip(self._vec(x), -self.r, self.r)

    def prox(self, t, v):
        v = self._vec(v)
        c = t * self.beta
        inner = v / (1.0 + c)                      # |z| <= r branch
        outer = v - np.sign(v) * c * self.r        # saturated branch
        return np.where(np.abs(inner) <= self.r, inner, outer)

    def conjugate(self, x):
        x = self._vec(x)
        if self.beta == 0:
            return 0.0 if np.max(np.abs(x)) <= 1e-12 else None
        if np.max(np.abs(x)) > self.beta * self.r + 1e-12:
            return None
        return float(np.sum(x**2)) / (2.0 * self.beta)


BUILTIN_KINDS = {
    "quadratic": Quadratic,
    "max_affine": MaxAffine,
    "abs": ScaledAbs,
    "slope_restricted": SlopeRestricted,
}


def make_builtin(kind: str, **params) -> ConvexFunctionOracle:
    """Construct a builtin family from a config-style description."""
    if kind not in BUILTIN_KINDS:
        raise ValueError(f"unknown convex family {kind!r}; choose from {sorted(BUILTIN_KINDS)}")
    return BUILTIN_KINDS[kind](**params)


@dataclass
class ConjugateValue:
    value: float
    reliable: bool


class ConjugateOracle:
    """Numeric Fenchel conjugate f*(x) = sup_w [x'w - f(w)].

    Uses the base oracle's closed form when available; otherwise maximizes
    by proximal iteration restricted to the ball of the given search
    radius.  Values whose maximizer sits on the search boundary are
    flagged unreliable rather than returned silently.
    """

    def __init__(self, base: ConvexFunctionOracle, radius: float = 50.0,
                 tol: float = 1e-9, max_iter: int = 5000):
        self.base = base
        self.radius = float(radius)
        self.tol = tol
        self.max_iter = max_iter

    def evaluate(self, x) -> ConjugateValue:
        x = np.asarray(x, dtype=float).reshape(-1)
        closed = self.base.conjugate(x)
        if closed is not None:
            return ConjugateValue(closed, True)
        # maximize g(w) = x'w - f(w): the stationarity condition is
        # x in subdiff f(w), i.e. w = prox_{t f}(w + t x) at any t > 0.
        w = np.zeros_like(x)
        t = 1.0
        for _ in range(self.max_iter):
            w_next = self.base.prox(t, w + t * x)
            nrm = np.linalg.norm(w_next)
            if nrm > self.radius:
                w_next = w_next * (self.radius / nrm)
            if np.linalg.norm(w_next - w) <= self.tol * (1 + np.linalg.norm(w)):
                w = w_next
                break
            w = w_next
        val = float(x @ w) - self.base.value(w)
        reliable = np.linalg.norm(w) < self.radius * (1 - 1e-9)
        return ConjugateValue(val, reliable)

    def __call__(self, x) -> float:
        return self.evaluate(x).value


def check_cyclic_monotonicity(F, cycle) -> float:
    """Signed margin sum_j F(v_j)' (v_j - v_{j+1}) with v_{m+1} = v_0;
    nonnegative on every cycle iff F has a convex primitive."""
    pts = [np.asarray(v, dtype=float).reshape(-1) for v in cycle]
    if len(pts) == 0:
        raise ValueError("cycle must contain at least one point")
    total = 0.0
    for j, v in enumerate(pts):
        v_next = pts[(j + 1) % len(pts)]
        total += float(np.asarray(F(v)).reshape(-1) @ (v - v_next))
    return total


def verify_subgradient_dissipation(f: ConvexFunctionOracle, samples) -> float:
    """Worst-case slack of f(x+u) - f(x) <= g(x+u)' u over the samples;
    nonnegative iff the increment inequality is verified on them."""
    samples = list(samples)
    if not samples:
        raise ValueError("samples must be nonempty")
    worst = np.inf
    for x, u in samples:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        g = f.subgradient(x + u)
        slack = float(g @ u) - (f.value(x + u) - f.value(x))
        worst = min(worst, slack)
    return worst


def verify_conjugate_dissipation(f: ConvexFunctionOracle, conj: ConjugateOracle,
                                 samples) -> float:
    """Worst-case slack of f*(v) - f*(x) <= u'(v - x) with v a subgradient
    of f at u, over samples (x, u) with x drawn from subgradient values.

    Raises ProxError-style failure as an explicit exception when a
    conjugate evaluation is unreliable (search radius hit).
    """
    worst = np.inf
    for x, u in samples:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        v = f.subgradient(u)
        cv, cx = conj.evaluate(v), conj.evaluate(x)
        if cv.value is None or cx.value is None:
            raise ValueError("conjugate is infinite at a sample point")
        if not (cv.reliable and cx.reliable):
            raise RuntimeError(
                "conjugate evaluation unreliable (search radius reached); "
                "increase the radius"
            )
        slack = float(u @ (v - x)) - (cv.value - cx.value)
        worst = min(worst, slack)
    return worst


def shift_register_trajectory(f: ConvexFunctionOracle, nu: int, u_seq,
                              form: str = "primal") -> list[tuple[np.ndarray, np.ndarray]]:
    """Build a trajectory of the length-nu shift register driven by u_seq.

    In 'primal' form the register carries the raw inputs; in 'conjugate'
    form it carries subgradient values v in subdiff f(u) (so that states
    stay inside the subgradient image where the conjugate is finite).
    """
    d = f.dim
    u_seq = [np.asarray(u, dtype=float).reshape(d) for u in u_seq]
    x = np.zeros(nu * d)
    traj = []
    for u in u_seq:
        traj.append((x.copy(), u))
        feed = u if form == "primal" else f.subgradient(u)
        x = np.concatenate([x[d:], feed]) if nu else x
    return traj


def verify_storage_decrease(f: ConvexFunctionOracle, k: int, nu: int,
                            trajectory, form: str = "primal",
                            conj: ConjugateOracle | None = None) -> float:
    """Worst-case one-step dissipation slack S(u, y) - (V(x+) - V(x)) for
    the length-nu shift register with tap k, over a trajectory of (x, u).

    'primal': storage V_k(x) = sum_{j=k}^nu f(x^j), supply g(u)'(u - x^k).
    'conjugate': storage uses f* and the supply is u'(v - x^k) with
    v in subdiff f(u); trajectory states must be subgradient values.
    """
    if not 1 <= k <= nu:
        raise ValueError(f"need 1 <= k <= nu, got k={k}, nu={nu}")
    if form not in ("primal", "conjugate"):
        raise ValueError(f"unknown form {form!r}")
    if form == "conjugate" and conj is None:
        conj = ConjugateOracle(f)
    d = f.dim

    def storage(x):
        blocks = x.reshape(nu, d)
        if form == "primal":
            return sum(f.value(blocks[j]) for j in range(k - 1, nu))
        vals = [conj.evaluate(blocks[j]) for j in range(k - 1, nu)]
        if not all(v.reliable for v in vals):
            raise RuntimeError("conjugate evaluation unreliable on trajectory")
        return sum(v.value for v in vals)

    worst = np.inf
    prev = None
    for x, u in trajectory:
        x = np.asarray(x, dtype=float).reshape(nu * d)
        u = np.asarray(u, dtype=float).reshape(d)
        if prev is not None:
            x_prev, feed_prev = prev
            expected = np.concatenate([x_prev[d:], feed_prev]) if nu else x_prev
            if not np.allclose(x, expected, atol=1e-9):
                raise ValueError("trajectory violates the shift-register structure")
        feed = u if form == "primal" else f.subgradient(u)
        x_next = np.concatenate([x[d:], feed]) if nu else x
        xk = x.reshape(nu, d)[k - 1]
        if form == "primal":
            supply = float(f.subgradient(u) @ (u - xk))
        else:
            supply = float(u @ (feed - xk))
        slack = supply - (storage(x_next) - storage(x))
        worst = min(worst, slack)
        prev = (x, feed)
    if prev is None:
        raise ValueError("trajectory must be nonempty")
    return worst


def prox(f: ConvexFunctionOracle, t: float, v) -> np.ndarray:
    """Proximal map z = prox_{t f}(v), the unique point with
    v - z in t * subdiff f(z)."""
    if t <= 0:
        raise ValueError(f"stepsize t must be positive, got {t}")
    return f.prox(t, v)
