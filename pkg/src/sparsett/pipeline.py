"""Batch fit: Parzen estimate, choice of ``w``, solve, cleanup, unity repair."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dictionary import Dictionary
from .parzen import KernelMatrix, discretize, parzen_batch
from .postprocess import MixtureModel, build_model, clean_solution, model_pmf, repair_unity
from .regularization import SweepConfig, SweepReport, sweep
from .solver import LassoProblem, SolverOptions, SparseSolution, solve

__all__ = ["FitConfig", "FitResult", "fit_pmf", "fit_samples", "finalize", "grid_density"]


@dataclass(frozen=True)
class FitConfig:
    """``w=None`` selects the weight by the S2_w sweep."""

    w: float | None = None
    scaled: bool = True
    sweep: SweepConfig = field(default_factory=SweepConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    eps_rel: float = 1e-3
    merge_dist: float = 0.0
    debias: bool = True
    repair_eps: float = 1e-6

    def __post_init__(self):
        if self.w is not None and not self.w >= 0:
            raise ValueError("w must be >= 0")
        if self.merge_dist < 0:
            raise ValueError("merge_dist must be >= 0")
        if not 0 < self.repair_eps < 1:
            raise ValueError("repair_eps must lie in (0, 1)")


@dataclass
class FitResult:
    model: MixtureModel
    p_hat: np.ndarray
    p_bar: np.ndarray
    solution: SparseSolution
    w: float
    report: SweepReport | None = None

    @property
    def converged(self) -> bool:
        ok = self.solution.converged
        return ok and (self.report is None or self.report.all_converged)


def finalize(theta, dictionary: Dictionary, p_hat, w: float, cfg: FitConfig,
             provenance: dict | None = None) -> MixtureModel:
    """Threshold, merge, de-bias and repair a raw solution."""
    support, weights = clean_solution(theta, dictionary, p_hat, cfg.eps_rel, cfg.merge_dist, cfg.debias)
    prov = {"dictionary": dictionary.kind, "w": float(w), **(provenance or {})}
    model = build_model(dictionary, support, weights, prov)
    return repair_unity(model, dictionary.grid, cfg.repair_eps)


def fit_pmf(p_hat, dictionary: Dictionary, cfg: FitConfig | None = None,
            warm_start=None) -> FitResult:
    cfg = cfg or FitConfig()
    p_hat = np.asarray(p_hat, dtype=float)
    problem = LassoProblem.from_dictionary(dictionary, p_hat, 0.0, scaled=cfg.scaled)
    report = None
    if cfg.w is None:
        report = sweep(problem, cfg.sweep, cfg.solver)
        sol, w = report.solution, report.w_star
    else:
        w = cfg.w
        sol = solve(problem.with_w(w), replace(cfg.solver, warm_start=warm_start))
    model = finalize(sol.theta, dictionary, p_hat, w, cfg)
    return FitResult(model, p_hat, model_pmf(model, dictionary), sol, w, report)


def fit_samples(samples, dictionary: Dictionary, km: KernelMatrix,
                cfg: FitConfig | None = None) -> FitResult:
    state = parzen_batch(samples, km)
    return fit_pmf(state.p_hat, dictionary, cfg)


def grid_density(pmf, grid):
    """Piecewise-constant density ``t -> pmf[row(t)] / delta``; zero off the grid."""
    pmf = np.asarray(pmf, dtype=float)
    lo, hi = -grid.delta / 2, (grid.n_support - 1) * grid.delta + grid.delta / 2

    def f(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        inside = (t >= lo) & (t <= hi)
        out[inside] = pmf[discretize(t[inside], grid)] / grid.delta
        return out

    return f
