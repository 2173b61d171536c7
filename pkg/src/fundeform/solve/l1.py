"""L1-regularized least squares with optional equality constraints.

Solves ``min_a 1/2 ||M a - b||^2 + tau ||a||_1  s.t.  A_eq a = b_eq``.

Unconstrained problems start with a feature-sign active-set search from
zero and fall back to a monotone FISTA on the Gram form; constrained ones ADMM with an exact equality-constrained quadratic step. Both are
periodically polished by active-set steps: on the current support and signs
the optimality conditions are a linear system. Unconstrained iterates are
refined by a feature-sign search; constrained ones accept the solution of
the equality-constrained system when it keeps the signs and satisfies the
KKT conditions to ``tol``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import Infeasible, MaxIterExceeded

PENALTY_WEIGHT = 1e4


@dataclass
class L1LSProblem:
    """``1/2 ||M a - b||^2 + tau ||a||_1`` subject to ``A_eq a = b_eq``."""

    M: np.ndarray
    b: np.ndarray
    tau: float = 0.0
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.M.shape[0] != self.b.size:
            raise ValueError(f"M has {self.M.shape[0]} rows but b has {self.b.size} entries")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.A_eq is not None:
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
            if self.A_eq.shape != (self.b_eq.size, self.M.shape[1]):
                raise ValueError("A_eq must be (len(b_eq), M.shape[1])")
            if self.A_eq.shape[0] == 0:
                self.A_eq = self.b_eq = None

    def objective(self, alpha):
        r = self.M @ alpha - self.b
        return 0.5 * float(r @ r) + self.tau * float(np.abs(alpha).sum())


@dataclass
class L1Result:
    """Solution and diagnostics.

    ``constraint_mode`` is ``"none"``, ``"hard"`` or ``"penalty"`` (the
    equality rows were inconsistent and were added to the objective with
    weight ``PENALTY_WEIGHT``).
    """

    alpha: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    constraint_mode: str = "none"
    constraint_residual: float = 0.0
    multipliers: np.ndarray = None


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def kkt_residual(G, c, tau, alpha, A=None, nu=None, zero_tol=0.0):
    """Largest violation of the subgradient optimality conditions.

    With gradient ``g = G a - c (+ A^T nu)``: ``|g_i + tau sign(a_i)|`` on the
    support and ``max(|g_i| - tau, 0)`` off it.
    """
    g = G @ alpha - c
    if A is not None and nu is not None:
        g = g + A.T @ nu
    on = np.abs(alpha) > zero_tol
    viol = np.where(on, np.abs(g + tau * np.sign(alpha)), np.maximum(np.abs(g) - tau, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _lstsq(A, b):
    return scipy.linalg.lstsq(A, b, cond=1e-13, lapack_driver="gelsd")[0]


def _polish(G, c, tau, alpha, A=None, b_eq=None):
    """Solve the optimality system on the support/sign pattern of ``alpha``.

    Returns ``(alpha, nu)`` or None if the pattern is inconsistent.
    """
    S = np.flatnonzero(np.abs(alpha) > 1e-12 * max(np.abs(alpha).max(), 1e-300))
    s = np.sign(alpha[S])
    rhs = c[S] - tau * s
    n = len(alpha)
    if A is None:
        if S.size == 0:
            return np.zeros(n), None
        xs = _lstsq(G[np.ix_(S, S)], rhs)
        nu = None
    else:
        m = A.shape[0]
        K = np.block([[G[np.ix_(S, S)], A[:, S].T], [A[:, S], np.zeros((m, m))]])
        sol = _lstsq(K, np.concatenate([rhs, b_eq]))
        xs, nu = sol[:S.size], sol[S.size:]
    if np.any(np.sign(xs) != s):
        return None
    out = np.zeros(n)
    out[S] = xs
    return out, nu


def _feature_sign(G, c, tau, x, max_steps=None):
    """Active-set refinement of an unconstrained iterate (feature-sign search).

    Alternates between solving the optimality system on the current
    support/signs, a line search that stops at the first sign change, and
    activating the coordinate with the largest KKT violation. The objective
    never increases, and the search ends at the exact minimizer when the
    active Gram blocks are nonsingular.
    """
    n = len(c)
    x = x.copy()
    max_steps = 4 * n + 10 if max_steps is None else max_steps

    def F(a):
        return 0.5 * float(a @ G @ a) - float(c @ a) + tau * float(np.abs(a).sum())

    for _ in range(max_steps):
        g = G @ x - c
        zero = x == 0
        viol = np.where(zero, np.abs(g) - tau, -np.inf)
        on = ~zero
        on_ok = np.all(np.abs(g[on] + tau * np.sign(x[on])) <= 1e-12 * max(1.0, np.abs(c).max()))
        if on_ok:
            j = int(np.argmax(viol)) if n else 0
            if not n or viol[j] <= 0:
                break
            theta = np.sign(x)
            theta[j] = -np.sign(g[j])
        else:
            theta = np.sign(x)
        S = np.flatnonzero(theta)
        xs = _lstsq(G[np.ix_(S, S)], c[S] - tau * theta[S])
        x0 = x[S]
        # candidate points: the new solution and every zero crossing on the way
        d = xs - x0
        with np.errstate(divide="ignore", invalid="ignore"):
            ts = -x0 / d
        ts = ts[(ts > 0) & (ts < 1) & np.isfinite(ts)]
        best, fbest = None, F(x)
        for t in np.concatenate([ts, [1.0]]):
            cand = x.copy()
            cand[S] = x0 + t * d
            cand[S[np.abs(cand[S]) <= 1e-15 * max(np.abs(cand).max(), 1e-300)]] = 0.0
            if np.any(np.sign(cand[S]) * theta[S] < 0):
                continue
            fc = F(cand)
            if fc < fbest:
                best, fbest = cand, fc
        if best is None:
            break
        x = best
    return x


def _multipliers(G, c, tau, alpha, A):
    """Least-squares multiplier estimate for a constrained iterate."""
    g = G @ alpha - c + tau * np.sign(alpha)
    on = alpha != 0
    if not on.any():
        return _lstsq(A.T, -(G @ alpha - c))
    return _lstsq(A[:, on].T, -g[on])


def _reduce_constraints(A, b, tol):
    """Independent rows spanning the constraints, or None if they are inconsistent."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
    if r == 0:
        return None if np.linalg.norm(b) > tol else (np.zeros((0, A.shape[1])), np.zeros(0))
    A_r = s[:r, None] * Vt[:r]
    b_r = U[:, :r].T @ b
    x = Vt[:r].T @ (b_r / s[:r])
    if np.linalg.norm(A @ x - b) > tol * max(1.0, np.linalg.norm(b)):
        return None
    return A_r, b_r


def solve_l1ls(problem, tol=1e-8, max_iter=20000, on_inconsistent="penalty", polish_every=25):
    """Solve an :class:`L1LSProblem`.

    Parameters
    ----------
    tol : float
        Target KKT residual (absolute, in the units of ``M^T b``) and
        equality-constraint residual.
    on_inconsistent : {"penalty", "raise"}
        What to do when the equality rows have no exact solution: fold them
        into the objective with weight ``PENALTY_WEIGHT`` or raise ``Infeasible``.

    Raises
    ------
    Infeasible
        Inconsistent equalities with ``on_inconsistent="raise"``.
    MaxIterExceeded
        Carries the best iterate as ``.result``.
    """
    M, b, tau = problem.M, problem.b, float(problem.tau)
    A, b_eq = problem.A_eq, problem.b_eq
    mode = "none"
    if A is not None:
        reduced = _reduce_constraints(A, b_eq, tol)
        if reduced is None:
            if on_inconsistent == "raise":
                raise Infeasible("equality constraints are inconsistent")
            w = np.sqrt(PENALTY_WEIGHT)
            M = np.vstack([M, w * A])
            b = np.concatenate([b, w * b_eq])
            A = b_eq = None
            mode = "penalty"
        else:
            A, b_eq = reduced
            mode = "hard" if A.shape[0] else "none"
            if not A.shape[0]:
                A = b_eq = None
    G = M.T @ M
    c = M.T @ b

    def finish(alpha, nu, it, hist, converged=True):
        res = 0.0 if A is None else float(np.linalg.norm(A @ alpha - b_eq))
        if problem.A_eq is not None:
            res = float(np.linalg.norm(problem.A_eq @ alpha - problem.b_eq))
        kkt = kkt_residual(G, c, tau, alpha, A, nu)
        obj = 0.5 * float(np.sum((M @ alpha - b) ** 2)) + tau * float(np.abs(alpha).sum())
        return L1Result(alpha, obj, kkt, it, converged, hist, mode, res, nu)

    if tau == 0.0:
        if A is None:
            alpha = _lstsq(M, b)
            return finish(alpha, None, 0, [])
        m = A.shape[0]
        K = np.block([[G, A.T], [A, np.zeros((m, m))]])
        sol = _lstsq(K, np.concatenate([c, b_eq]))
        return finish(sol[:len(c)], sol[len(c):], 0, [])

    if A is None:
        return _mfista(G, c, tau, tol, max_iter, polish_every, finish)
    return _admm(G, c, tau, A, b_eq, tol, max_iter, polish_every, finish)


def _mfista(G, c, tau, tol, max_iter, polish_every, finish):
    n = len(c)
    L = float(scipy.linalg.eigvalsh(G, subset_by_index=[n - 1, n - 1])[0]) if n else 0.0
    if L <= 0.0:
        return finish(np.zeros(n), None, 0, [0.0])

    def F(a):
        return 0.5 * float(a @ G @ a) - float(c @ a) + tau * float(np.abs(a).sum())

    x = np.zeros(n)
    hist = [F(x)]
    # active-set pass from zero; FISTA takes over if it does not reach tol
    x = _feature_sign(G, c, tau, x)
    fx = F(x)
    hist.append(fx)
    if kkt_residual(G, c, tau, x) <= tol:
        return finish(x, None, 0, hist)
    y = x.copy()
    t = 1.0
    for it in range(1, max_iter + 1):
        z = soft_threshold(y - (G @ y - c) / L, tau / L)
        fz = F(z)
        x_old = x
        if fz <= fx:
            x, fx = z, fz
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + (t / t_new) * (z - x) + ((t - 1.0) / t_new) * (x - x_old)
        t = t_new
        if it % polish_every == 0 or it == max_iter:
            p = _feature_sign(G, c, tau, x)
            fp = F(p)
            if fp <= fx:
                x, fx = p, fp
                y = x.copy()
                t = 1.0
        hist.append(fx)
        if kkt_residual(G, c, tau, x) <= tol:
            return finish(x, None, it, hist)
    result = finish(x, None, max_iter, hist, converged=False)
    raise MaxIterExceeded(f"L1 solver reached {max_iter} iterations with KKT residual "
                          f"{result.kkt_residual:.3e}", result=result)


def _admm(G, c, tau, A, b_eq, tol, max_iter, polish_every, finish):
    n, m = len(c), A.shape[0]
    rho = max(float(np.trace(G)) / n, 1e-12)
    K = np.block([[G + rho * np.eye(n), A.T], [A, np.zeros((m, m))]])
    lu = scipy.linalg.lu_factor(K)
    z = np.zeros(n)
    u = np.zeros(n)
    best = None
    hist = []
    for it in range(1, max_iter + 1):
        sol = scipy.linalg.lu_solve(lu, np.concatenate([c + rho * (z - u), b_eq]))
        x = sol[:n]
        z = soft_threshold(x + u, tau / rho)
        u += x - z
        hist.append(0.5 * float(x @ G @ x) - float(c @ x) + tau * float(np.abs(x).sum()))
        if it % polish_every == 0 or it == max_iter:
            for guess in (z, x):
                cand = _polish(G, c, tau, guess, A, b_eq)
                if cand is None:
                    continue
                p, nu = cand
                if np.linalg.norm(A @ p - b_eq) <= tol * max(1.0, np.linalg.norm(b_eq)) \
                        and kkt_residual(G, c, tau, p, A, nu) <= tol:
                    return finish(p, nu, it, hist)
            best = x
    nu = _multipliers(G, c, tau, best, A)
    result = finish(best, nu, max_iter, hist, converged=False)
    raise MaxIterExceeded(f"constrained L1 solver reached {max_iter} iterations with KKT "
                          f"residual {result.kkt_residual:.3e}", result=result)
