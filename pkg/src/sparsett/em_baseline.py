"""Gaussian-mixture EM with random restarts, the comparison baseline.

Each restart alternates E and M steps until successive RMSEs against a
reference pmf on the grid (the Parzen estimate) differ by less than ``tol``,
or, with ``stop="loglik"``, until the log-likelihood gain drops below ``tol``.
The restart with the lowest RMSE wins.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dictionary import TimeGrid
from .parzen import KernelSpec, build_kernel_matrix, parzen_batch, silverman_bandwidth

__all__ = ["GaussianMixture", "EMConfig", "fit_em", "log_likelihood", "mixture_pmf"]

VAR_FLOOR = 1e-4
_FLOOR_STRIKES = 3
_LOG_2PI = math.log(2 * math.pi)


@dataclass
class GaussianMixture:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    restarts: int = 0
    iterations: int = 0
    log_likelihood: float = -math.inf
    rmse: float = math.inf
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if not (self.means.shape == self.variances.shape == self.weights.shape):
            raise ValueError("means, variances and weights must have equal length")
        if np.any(self.variances <= 0) or np.any(self.weights < 0):
            raise ValueError("variances must be positive and weights non-negative")

    @property
    def k(self) -> int:
        return self.means.size

    def pdf(self, t) -> np.ndarray:
        return np.exp(logsumexp(_log_component_pdf(np.asarray(t, dtype=float), self), axis=1))

    def to_dict(self) -> dict:
        return {
            "kernel": "gaussian",
            "components": [
                {"t_s": float(m), "sigma_s": float(math.sqrt(v)), "weight": float(w)}
                for m, v, w in zip(self.means, self.variances, self.weights)
            ],
            "metrics": {
                "log_likelihood": self.log_likelihood,
                "rmse": self.rmse,
                "iterations": self.iterations,
                "restarts": self.restarts,
            },
        }


@dataclass(frozen=True)
class EMConfig:
    restarts: int = 10
    tol: float = 1e-3
    max_iter: int = 500
    stop: str = "rmse"
    var_floor: float = VAR_FLOOR

    def __post_init__(self):
        if self.stop not in ("rmse", "loglik"):
            raise ValueError("stop must be 'rmse' or 'loglik'")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")
        if not (self.tol > 0 and self.var_floor > 0):
            raise ValueError("tol and var_floor must be positive")


def _log_component_pdf(t: np.ndarray, gm: GaussianMixture) -> np.ndarray:
    """``ln(w_k N(t_j; mu_k, v_k))`` as a (samples, K) array."""
    t = np.atleast_1d(t)[:, None]
    with np.errstate(divide="ignore"):
        logw = np.log(gm.weights)[None, :]
    return logw - 0.5 * (_LOG_2PI + np.log(gm.variances)[None, :] + (t - gm.means) ** 2 / gm.variances)


def log_likelihood(model: GaussianMixture, samples) -> float:
    """``sum_j ln sum_k w_k N(T_j; mu_k, v_k)``."""
    return float(logsumexp(_log_component_pdf(np.asarray(samples, dtype=float), model), axis=1).sum())


def mixture_pmf(model: GaussianMixture, grid: TimeGrid) -> np.ndarray:
    """Density at the support points times ``delta``."""
    return np.exp(logsumexp(_log_component_pdf(grid.support_times, model), axis=1)) * grid.delta


def _reference(samples, grid, p_ref):
    if grid is None:
        hi = int(math.ceil(1.5 * float(np.max(samples)))) + 2
        grid = TimeGrid(1.0, hi, 1)
    if p_ref is None:
        h = silverman_bandwidth(samples, grid.delta)
        p_ref = parzen_batch(samples, build_kernel_matrix(grid, KernelSpec(h))).p_hat
    return grid, np.asarray(p_ref, dtype=float)


def _prune(gm: GaussianMixture, keep: np.ndarray, strikes: np.ndarray):
    gm.means, gm.variances, gm.weights = gm.means[keep], gm.variances[keep], gm.weights[keep]
    gm.weights = gm.weights / gm.weights.sum()
    return strikes[keep]


def _run(x: np.ndarray, k: int, rng, cfg: EMConfig, grid, p_ref):
    lo, hi = float(x.min()), float(x.max())
    var0 = max(float(x.var()), cfg.var_floor)
    gm = GaussianMixture(rng.uniform(lo, hi, k), np.full(k, var0), np.full(k, 1.0 / k))
    strikes = np.zeros(k, dtype=int)
    hist = []
    prev_rmse, prev_ll = math.inf, -math.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        # E step
        logp = _log_component_pdf(x, gm)
        ll_before = float(logsumexp(logp, axis=1).sum())
        resp = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
        nk = resp.sum(axis=0)
        dead = nk < 1e-10
        if dead.any():
            warnings.warn(f"EM: pruning {int(dead.sum())} empty component(s)", RuntimeWarning)
            keep = ~dead
            strikes = _prune(gm, keep, strikes)
            resp, nk = resp[:, keep], nk[keep]
        # M step
        means = resp.T @ x / nk
        var = np.einsum("jk,jk->k", resp, (x[:, None] - means) ** 2) / nk
        floored = var < cfg.var_floor
        strikes = np.where(floored, strikes + 1, 0)
        gm.means, gm.variances, gm.weights = means, np.maximum(var, cfg.var_floor), nk / nk.sum()
        if np.any(strikes >= _FLOOR_STRIKES) and gm.k > 1:
            bad = strikes >= _FLOOR_STRIKES
            warnings.warn(f"EM: pruning {int(bad.sum())} collapsed component(s)", RuntimeWarning)
            strikes = _prune(gm, ~bad, strikes)
        ll = log_likelihood(gm, x)
        err = float(np.sqrt(np.mean((mixture_pmf(gm, grid) - p_ref) ** 2)))
        hist.append({"iteration": it, "log_likelihood": ll, "ll_before": ll_before, "rmse": err, "k": gm.k})
        if cfg.stop == "rmse" and abs(err - prev_rmse) < cfg.tol:
            break
        if cfg.stop == "loglik" and abs(ll - prev_ll) < cfg.tol:
            break
        prev_rmse, prev_ll = err, ll
    gm.iterations, gm.log_likelihood, gm.rmse, gm.history = it, hist[-1]["log_likelihood"], hist[-1]["rmse"], hist
    return gm


def fit_em(samples, k: int, restarts: int | None = None, tol: float | None = None, seed=None,
           grid: TimeGrid | None = None, p_ref=None, cfg: EMConfig | None = None) -> GaussianMixture:
    """Best-of-restarts EM fit.

    ``p_ref`` is the reference pmf on ``grid`` used for the RMSE (by default
    a Parzen estimate with Silverman's bandwidth on a 1 s grid).
    """
    cfg = cfg or EMConfig()
    if restarts is not None or tol is not None:
        cfg = EMConfig(restarts if restarts is not None else cfg.restarts,
                       tol if tol is not None else cfg.tol, cfg.max_iter, cfg.stop, cfg.var_floor)
    x = np.asarray(samples, dtype=float)
    if k < 1 or x.size <= k:
        raise ValueError(f"need more samples ({x.size}) than components ({k})")
    grid, p_ref = _reference(x, grid, p_ref)
    if p_ref.shape != (grid.n_support,):
        raise ValueError("reference pmf does not match the grid")
    seeds = np.random.SeedSequence(seed).spawn(cfg.restarts)
    runs = [_run(x, k, np.random.default_rng(s), cfg, grid, p_ref) for s in seeds]
    best = min(runs, key=lambda g: g.rmse)
    best.restarts = cfg.restarts
    return best
