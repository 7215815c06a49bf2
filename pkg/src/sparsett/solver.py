"""Non-negative l1-regularized least squares.

Solves

    minimize_{theta >= 0}  0.5 * ||p - Phi theta||^2 + w * sum_m s_m theta_m

with ``s_m = 1`` or a per-column weight (``1/sigma_m`` favours wide components).
On the orthant the l1 norm is linear, so the problem is a convex QP.  Two
methods are provided and both accept a warm start:

``projected_gradient``
    Monotone FISTA with backtracking, run on a working set of columns that is
    grown from the KKT violators.  Once the support of the iterate settles the
    quadratic is minimized exactly on that face (a Newton step on the free
    coordinates, truncated at the boundary), which is what makes warm starts
    cheap.

``interior_point``
    Log-barrier path following: damped Newton on
    ``z*f(theta) - sum(log theta)`` for ``z = 1, 10, 100, ...`` until
    ``M/z <= gap_tol``, followed by a crossover onto the identified face.

Both stop on the KKT residual, so solutions at different ``w`` are equally
accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "LassoProblem",
    "SolverOptions",
    "SparseSolution",
    "objective",
    "kkt_residual",
    "solve",
]


@dataclass(eq=False)
class LassoProblem:
    phi: np.ndarray
    p_hat: np.ndarray
    w: float
    reg_scaling: np.ndarray | None = None
    gram: np.ndarray | None = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.p_hat = np.asarray(self.p_hat, dtype=float)
        if self.phi.ndim != 2 or self.p_hat.shape != (self.phi.shape[0],):
            raise ValueError(
                f"dimension mismatch: Phi {self.phi.shape}, p_hat {self.p_hat.shape}"
            )
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.p_hat))):
            raise ValueError("NaN or inf in problem data")
        if not (math.isfinite(self.w) and self.w >= 0):
            raise ValueError(f"w must be finite and >= 0, got {self.w}")
        if self.reg_scaling is not None:
            s = np.asarray(self.reg_scaling, dtype=float)
            if s.shape != (self.phi.shape[1],) or np.any(~(s > 0)):
                raise ValueError("reg_scaling must be a positive vector of length M")
            self.reg_scaling = s
        if self.gram is None:
            self.gram = self.phi.T @ self.phi

    @classmethod
    def from_dictionary(cls, d, p_hat, w: float, scaled: bool = False) -> "LassoProblem":
        """Problem over a :class:`~sparsett.dictionary.Dictionary`, sharing its cached Gram."""
        return cls(d.phi, p_hat, w, reg_scaling=(1.0 / d.scales) if scaled else None, gram=d.gram)

    @property
    def n_columns(self) -> int:
        return self.phi.shape[1]

    @property
    def penalty(self) -> np.ndarray:
        s = np.ones(self.n_columns) if self.reg_scaling is None else self.reg_scaling
        return self.w * s

    def with_w(self, w: float) -> "LassoProblem":
        return LassoProblem(self.phi, self.p_hat, w, self.reg_scaling, self.gram)

    def with_target(self, p_hat) -> "LassoProblem":
        return LassoProblem(self.phi, p_hat, self.w, self.reg_scaling, self.gram)


@dataclass
class SolverOptions:
    method: str = "projected_gradient"
    max_iters: int = 5000
    grad_tol: float = 1e-8
    barrier_z0: float = 1.0
    barrier_growth: float = 10.0
    newton_tol: float = 1e-8
    gap_tol: float = 1e-9
    warm_start: np.ndarray | None = None
    record_history: bool = False

    def __post_init__(self):
        if self.method not in ("projected_gradient", "interior_point"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.grad_tol > 0 and self.newton_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.barrier_growth <= 1 or self.barrier_z0 <= 0:
            raise ValueError("barrier schedule needs z0 > 0 and growth > 1")


@dataclass
class SparseSolution:
    theta: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    kkt: float
    method: str
    history: list = field(default_factory=list)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta > 0)


def objective(problem: LassoProblem, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (problem.n_columns,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({problem.n_columns},)")
    r = problem.p_hat - problem.phi @ theta
    return 0.5 * float(r @ r) + float(problem.penalty @ theta)


def _violation(theta, g) -> float:
    """Inf-norm of the projected gradient (KKT residual on the orthant)."""
    active = theta > 0
    v = np.where(active, np.abs(g), np.maximum(-g, 0.0))
    return float(v.max()) if v.size else 0.0


def kkt_residual(problem: LassoProblem, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    g = problem.phi.T @ (problem.phi @ theta - problem.p_hat) + problem.penalty
    return _violation(theta, g)


class _Quadratic:
    """``f(x) = 0.5 x'Gx - c'x + const`` on a fixed index set.

    ``A`` holds the matching dictionary columns (``G = A'A``); face solves use
    its SVD instead of the much worse conditioned Gram block.
    """

    def __init__(self, G, c, const, A, p):
        self.G, self.c, self.const, self.A, self.p = G, c, const, A, p

    def value(self, x):
        return 0.5 * float(x @ (self.G @ x)) - float(self.c @ x) + self.const

    def grad(self, x):
        return self.G @ x - self.c


def _lipschitz(G, iters: int = 30) -> float:
    n = G.shape[0]
    if n == 1:
        return float(G[0, 0])
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for _ in range(iters):
        u = G @ v
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            return 0.0
        v = u / nu
        lam = nu
    return lam


def _face_step(q: _Quadratic, x, enter=None):
    """Minimize ``q`` on the face ``{x_i = 0 for i outside supp(x)}``.

    ``enter`` optionally frees one more (zero) coordinate.  Returns
    ``(point, reached)``: the new point, truncated at the first coordinate
    that would turn negative, and whether the face minimizer itself was
    reached.  Returns ``(None, False)`` if the step does not decrease ``q``.
    """
    S = np.flatnonzero(x > 0)
    if enter is not None:
        S = np.union1d(S, [enter])
    if S.size == 0:
        return None, False
    # normal equations A'A z = A'p - penalty, solved in the range of A
    pen = q.A[:, S].T @ q.p - q.c[S]
    try:
        U, sv, Vt = np.linalg.svd(q.A[:, S], full_matrices=False)
    except np.linalg.LinAlgError:
        return None, False
    r = sv > sv[0] * 1e-12
    U, sv, Vt = U[:, r], sv[r], Vt[r]
    z = Vt.T @ ((U.T @ q.p) / sv - (Vt @ pen) / sv**2)
    if not np.all(np.isfinite(z)):
        return None, False
    d = z - x[S]
    neg = d < 0
    alpha = 1.0
    if np.any(z[neg] <= 0):
        ratios = x[S][neg] / -d[neg]
        alpha = min(1.0, float(ratios.min()))
    y = x.copy()
    y[S] = x[S] + alpha * d
    if alpha < 1.0:
        hit = S[neg][np.argmin(x[S][neg] / -d[neg])]
        y[hit] = 0.0
    np.maximum(y, 0.0, out=y)
    fy = q.value(y)
    reached = alpha == 1.0
    if not reached:
        # projecting the face minimizer can drop many coordinates in one step
        yp = x.copy()
        yp[S] = np.maximum(z, 0.0)
        fp = q.value(yp)
        if fp < fy:
            y, fy = yp, fp
    fx = q.value(x)
    if fy <= fx + 1e-15 * (1.0 + abs(fx)):
        return y, reached
    return None, False


def _fista_face(q: _Quadratic, x, tol, budget, history):
    """Active-set face minimization with a monotone FISTA fallback.

    Whenever the support changes, the quadratic is minimized on the new face;
    truncated face steps (one coordinate leaves) are chained until the face
    minimizer is reached.  From a face minimizer the most violating zero
    coordinate is freed and the enlarged face is solved.  A FISTA step with
    backtracking is taken only when no face step makes progress.  Every face
    step and every gradient step counts as an iteration.  Returns
    ``(x, iters, converged)``.
    """
    L = max(_lipschitz(q.G) * 1.01, 1e-300)
    fx = q.value(x)
    y = x.copy()
    t = 1.0
    it = 0
    polished_for = None
    at_minimizer = False

    def converged(xv):
        return _violation(xv, q.grad(xv)) <= tol

    if converged(x):
        return x, it, True
    while it < budget:
        supp = tuple(np.flatnonzero(x > 0))
        if supp and supp != polished_for:
            moved = False
            at_minimizer = False
            while it < budget:
                xn, reached = _face_step(q, x)
                if xn is None:
                    break
                it += 1
                moved = True
                x, fx = xn, q.value(xn)
                if history is not None:
                    history.append(fx)
                if reached:
                    at_minimizer = True
                    break
            polished_for = tuple(np.flatnonzero(x > 0))
            if moved:
                y, t = x.copy(), 1.0
                if converged(x):
                    return x, it, True
            if it >= budget:
                break

        if at_minimizer or not supp:
            g = q.grad(x)
            free = np.where((x <= 0) & (g < -tol), g, 0.0)
            if free.min() < 0:
                xn, reached = _face_step(q, x, enter=int(np.argmin(free)))
                if xn is not None:
                    it += 1
                    x, fx = xn, q.value(xn)
                    y, t = x.copy(), 1.0
                    at_minimizer = reached
                    polished_for = tuple(np.flatnonzero(x > 0)) if reached else None
                    if history is not None:
                        history.append(fx)
                    if converged(x):
                        return x, it, True
                    continue
            at_minimizer = False

        gy = q.grad(y)
        fy = q.value(y)
        while True:
            xn = np.maximum(y - gy / L, 0.0)
            d = xn - y
            fn = q.value(xn)
            if fn <= fy + float(gy @ d) + 0.5 * L * float(d @ d) + 1e-15 * (1.0 + abs(fy)):
                break
            L *= 2.0
        it += 1
        if fn > fx:
            # momentum overshoot: restart from the last accepted point
            y, t = x.copy(), 1.0
            if history is not None:
                history.append(fx)
            continue
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = xn + ((t - 1.0) / tn) * (xn - x)
        x, fx, t = xn, fn, tn
        if history is not None:
            history.append(fx)
        if converged(x):
            return x, it, True
    return x, it, False


def _full_grad(G, c, theta):
    S = np.flatnonzero(theta > 0)
    return G[:, S] @ theta[S] - c


def _solve_pg(problem: LassoProblem, opts: SolverOptions, theta, history):
    G = problem.gram
    c = problem.phi.T @ problem.p_hat - problem.penalty
    const = 0.5 * float(problem.p_hat @ problem.p_hat)
    tol = opts.grad_tol
    iters = 0
    g = _full_grad(G, c, theta)
    while True:
        if _violation(theta, g) <= tol:
            return theta, iters, True
        if iters >= opts.max_iters:
            return theta, iters, False
        supp = np.flatnonzero(theta > 0)
        viol = np.flatnonzero((theta <= 0) & (g < -tol))
        k = max(10, supp.size)
        if viol.size > k:
            viol = viol[np.argsort(g[viol])[:k]]
        W = np.union1d(supp, viol)
        q = _Quadratic(G[np.ix_(W, W)], c[W], const, problem.phi[:, W], problem.p_hat)
        xw, it, _ = _fista_face(q, theta[W].copy(), tol, opts.max_iters - iters, history)
        iters += it
        theta = np.zeros_like(theta)
        theta[W] = xw
        g = _full_grad(G, c, theta)


def _solve_ip(problem: LassoProblem, opts: SolverOptions, theta, history):
    G = problem.gram
    Phi = problem.phi
    M = problem.n_columns
    N = Phi.shape[0]
    c = Phi.T @ problem.p_hat - problem.penalty
    const = 0.5 * float(problem.p_hat @ problem.p_hat)
    q = _Quadratic(G, c, const, Phi, problem.p_hat)
    x = np.maximum(theta, 1e-8)
    z = opts.barrier_z0
    iters = 0
    alpha, beta = 0.01, 0.5

    def barrier(v):
        return z * q.value(v) - float(np.sum(np.log(v)))

    while iters < opts.max_iters:
        for _ in range(100):
            grad = z * q.grad(x) - 1.0 / x
            # Newton system in the variables u = x / theta (diagonal scaling)
            gs = x * grad
            if M > N:
                B = Phi * x[None, :]
                inner = np.eye(N) / z + B @ B.T
                u = -(gs - B.T @ scipy.linalg.solve(inner, B @ gs, assume_a="pos"))
            else:
                H = z * (x[:, None] * G * x[None, :]) + np.eye(M)
                u = -scipy.linalg.solve(H, gs, assume_a="pos")
            dx = x * u
            dec = -float(grad @ dx)
            if dec / 2.0 <= opts.newton_tol:
                break
            step = 1.0
            neg = dx < 0
            if np.any(neg):
                step = min(1.0, 0.99 * float(np.min(-x[neg] / dx[neg])))
            f0 = barrier(x)
            while barrier(x + step * dx) > f0 - alpha * step * dec and step > 1e-14:
                step *= beta
            x = x + step * dx
            iters += 1
            if history is not None:
                history.append(q.value(x) + 0.0)
            if iters >= opts.max_iters:
                break
        if M / z <= opts.gap_tol:
            break
        z *= opts.barrier_growth

    # crossover: keep coordinates whose primal value dominates the dual estimate
    theta = np.where(x * x > 1.0 / z, x, 0.0)
    g = q.grad(theta)
    if _violation(theta, g) > opts.grad_tol:
        theta, it, _ = _solve_pg(problem, SolverOptions(max_iters=max(opts.max_iters - iters, 1),
                                                        grad_tol=opts.grad_tol), theta, None)
        iters += it
    g = q.grad(theta)
    return theta, iters, _violation(theta, g) <= opts.grad_tol


def solve(problem: LassoProblem, opts: SolverOptions | None = None) -> SparseSolution:
    opts = opts or SolverOptions()
    M = problem.n_columns
    if opts.warm_start is not None:
        theta = np.asarray(opts.warm_start, dtype=float).copy()
        if theta.shape != (M,):
            raise ValueError("warm start has the wrong length")
        if not np.all(np.isfinite(theta)):
            raise ValueError("NaN in warm start")
        if np.any(theta < 0):
            raise ValueError("warm start must be non-negative")
    else:
        theta = np.zeros(M)
    history = [] if opts.record_history else None
    if np.all(problem.penalty >= problem.phi.T @ problem.p_hat):
        # w >= w0: zero satisfies the KKT conditions exactly
        theta, iters, ok = np.zeros(M), 0, True
    elif opts.method == "projected_gradient":
        theta, iters, ok = _solve_pg(problem, opts, theta, history)
    else:
        theta, iters, ok = _solve_ip(problem, opts, theta, history)
    theta = np.maximum(theta, 0.0)
    r = problem.p_hat - problem.phi @ theta
    res = float(np.linalg.norm(r))
    return SparseSolution(
        theta=theta,
        objective=0.5 * res * res + float(problem.penalty @ theta),
        residual=res,
        iterations=iters,
        converged=ok,
        kkt=kkt_residual(problem, theta),
        method=opts.method,
        history=history or [],
    )
