"""Choice of the regularization weight ``w``.

The sweep starts at ``w0``, the smallest weight whose solution is all-zero,
and walks down the geometric path ``w_k = eta**k * w0`` with warm starts.
Each point is scored by

    S2_w = ||p_hat - Phi theta_w||^2 / (M - s_w)

where ``s_w`` is the thresholded support size, and the minimizer is selected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .postprocess import threshold_support
from .solver import LassoProblem, SolverOptions, SparseSolution, solve

__all__ = [
    "SweepConfig",
    "SweepRecord",
    "SweepReport",
    "w_max",
    "sw_metric",
    "sweep",
    "bisect_to_sparsity",
]


@dataclass(frozen=True)
class SweepConfig:
    eta: float = 0.95
    eps_stop: float = 1e-3
    max_steps: int = 500
    target_sparsity: int | None = None
    eps_rel: float = 1e-3
    patience: int = 10
    bisect_iters: int = 40

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not self.eps_stop > 0:
            raise ValueError("eps_stop must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.target_sparsity is not None and self.target_sparsity < 0:
            raise ValueError("target_sparsity must be >= 0")


@dataclass
class SweepRecord:
    w: float
    objective: float
    residual: float
    rmse: float
    s_w: int
    s2w: float
    iterations: int
    converged: bool


@dataclass
class SweepReport:
    records: list
    selected: int
    solution: SparseSolution
    flags: dict = field(default_factory=dict)

    @property
    def w_star(self) -> float:
        return self.records[self.selected].w

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.records)

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.records)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["w", "rmse", "s_w", "S2w", "objective", "iterations", "converged"])
            for r in self.records:
                out.writerow([repr(r.w), repr(r.rmse), r.s_w, repr(r.s2w), repr(r.objective),
                              r.iterations, int(r.converged)])
        return path


def w_max(phi, p_hat, reg_scaling=None) -> float:
    """``max_m (Phi^T p_hat)_m / s_m``: for ``w`` at or above it the solution is zero."""
    phi = getattr(phi, "phi", phi)
    corr = np.asarray(phi).T @ np.asarray(p_hat, dtype=float)
    if reg_scaling is not None:
        corr = corr / np.asarray(reg_scaling)
    return float(max(np.max(np.abs(corr), initial=0.0), 0.0))


def sw_metric(residual_sq: float, s_w: int, M: int) -> float:
    if not 0 <= s_w <= M:
        raise ValueError(f"s_w={s_w} outside [0, {M}]")
    if s_w == M:
        return math.inf
    return residual_sq / (M - s_w)


def _record(problem: LassoProblem, sol: SparseSolution, eps_rel: float) -> SweepRecord:
    s_w = int(threshold_support(sol.theta, eps_rel).size)
    M = problem.n_columns
    return SweepRecord(
        w=problem.w,
        objective=sol.objective,
        residual=sol.residual,
        rmse=sol.residual / math.sqrt(problem.phi.shape[0]),
        s_w=s_w,
        s2w=sw_metric(sol.residual**2, s_w, M),
        iterations=sol.iterations,
        converged=sol.converged,
    )


def _argmin_s2w(records) -> int:
    vals = np.array([r.s2w for r in records])
    finite = np.isfinite(vals)
    if not finite.any():
        return 0
    return int(np.argmin(np.where(finite, vals, np.inf)))


def sweep(problem: LassoProblem, cfg: SweepConfig | None = None,
          opts: SolverOptions | None = None) -> SweepReport:
    """Warm-started descent along ``eta**k * w0``; ``problem.w`` is ignored.

    Stops once the relative change of the residual norm stays below
    ``eps_stop`` for ``patience`` consecutive steps with a non-empty support.
    A single quiet step is not enough: the path has short plateaus where one
    wide component holds on before new ones enter.
    """
    cfg = cfg or SweepConfig()
    opts = opts or SolverOptions()
    w0 = w_max(problem.phi, problem.p_hat, problem.reg_scaling)
    records, solutions = [], []
    theta = np.zeros(problem.n_columns)
    quiet = 0
    stop_reason = "max_steps"
    for k in range(cfg.max_steps):
        prob_k = problem.with_w(w0 * cfg.eta**k)
        sol = solve(prob_k, replace(opts, warm_start=theta))
        theta = sol.theta
        rec = _record(prob_k, sol, cfg.eps_rel)
        records.append(rec)
        solutions.append(sol)
        if k == 0 or w0 == 0:
            if w0 == 0:
                stop_reason = "zero_target"
                break
            continue
        r_prev = records[-2].residual
        change = abs(rec.residual - r_prev) / r_prev if r_prev > 0 else 0.0
        quiet = quiet + 1 if (rec.s_w > 0 and change < cfg.eps_stop) else 0
        if quiet >= cfg.patience:
            stop_reason = "stagnation"
            break
        if rec.residual == 0.0:
            stop_reason = "exact_fit"
            break
    sel = _argmin_s2w(records)
    assert all(records[sel].s2w <= r.s2w for r in records)
    return SweepReport(
        records=records,
        selected=sel,
        solution=solutions[sel],
        flags={"stop": stop_reason, "w0": w0, "nonconverged": sum(not r.converged for r in records)},
    )


def bisect_to_sparsity(problem: LassoProblem, target: int, cfg: SweepConfig | None = None,
                       opts: SolverOptions | None = None) -> SweepReport:
    """Find ``w`` whose thresholded support has exactly ``target`` entries.

    The geometric path brackets the target, then bisection in ``log w``
    narrows it.  The record closest to ``target`` is selected (ties go to the
    larger ``w``); ``flags["bracket"]`` is False when no bracket was found.
    """
    cfg = cfg or SweepConfig()
    opts = opts or SolverOptions()
    M = problem.n_columns
    if not 0 <= target <= M:
        raise ValueError(f"target must lie in [0, {M}]")
    w0 = w_max(problem.phi, problem.p_hat, problem.reg_scaling)
    records, solutions = [], []

    def run(w, warm):
        prob = problem.with_w(w)
        sol = solve(prob, replace(opts, warm_start=warm))
        records.append(_record(prob, sol, cfg.eps_rel))
        solutions.append(sol)
        return records[-1], sol

    if target == 0 or w0 == 0:
        run(w0 * (1 + 1e-6) if w0 > 0 else 0.0, None)
        return SweepReport(records, 0, solutions[0],
                           {"bracket": True, "w0": w0, "exact": records[0].s_w == target})

    # hi: sparser than target; lo: at least as dense
    hi_w, hi_sol = w0, None
    rec, sol = run(w0, None)
    lo = None
    for k in range(1, cfg.max_steps):
        w = w0 * cfg.eta**k
        rec, sol = run(w, sol.theta)
        if rec.s_w >= target:
            lo = (w, sol)
            break
        hi_w, hi_sol = w, sol
    bracket = lo is not None
    if bracket and records[-1].s_w != target:
        lo_w = lo[0]
        warm = hi_sol.theta if hi_sol is not None else None
        for _ in range(cfg.bisect_iters):
            mid = math.sqrt(hi_w * lo_w)
            rec, sol = run(mid, warm)
            if rec.s_w == target:
                break
            if rec.s_w > target:
                lo_w = mid
            else:
                hi_w, warm = mid, sol.theta
            if hi_w / lo_w < 1 + 1e-12:
                break
    order = sorted(range(len(records)), key=lambda i: (abs(records[i].s_w - target), -records[i].w))
    sel = order[0]
    return SweepReport(records, sel, solutions[sel],
                       {"bracket": bracket, "w0": w0, "exact": records[sel].s_w == target})
