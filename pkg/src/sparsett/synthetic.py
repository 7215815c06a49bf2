"""Ground-truth data generators and error metrics.

Two sources: a Gaussian plus Laplace mixture with a closed-form density, and
traffic-theoretic travel times where the traffic density along a link is a
scaled Beta variate and the speed follows the Newell-Franklin relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .errors import DomainError

__all__ = [
    "TrafficParams",
    "GaussLaplaceSpec",
    "nf_speed",
    "pace",
    "sample_density",
    "sample_travel_time",
    "beta_moment",
    "sample_gauss_laplace",
    "gauss_laplace_pdf",
    "rmse",
    "rmse_oos",
]


@dataclass(frozen=True)
class TrafficParams:
    """Link model.  Speeds in km/h, densities in veh/km, length in km."""

    v_free: float = 100.0
    v_back: float = -20.0
    rho_jam: float = 150.0
    beta_a: float = 2.0
    beta_b: float = 5.0
    length: float = 1.0

    def __post_init__(self):
        if not self.v_free > 0:
            raise ValueError("v_free must be positive")
        if not self.v_back < 0:
            raise ValueError("v_back must be negative")
        if not self.rho_jam > 0:
            raise ValueError("rho_jam must be positive")
        if not (self.beta_a > 0 and self.beta_b > 0):
            raise ValueError("Beta shape parameters must be positive")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def free_flow_time_s(self) -> float:
        return 3600.0 * self.length / self.v_free


@dataclass(frozen=True)
class GaussLaplaceSpec:
    gauss_mean: float = 60.0
    gauss_var: float = 100.0
    laplace_loc: float = 30.0
    laplace_rate: float = 0.2
    weights: tuple = (0.5, 0.5)

    def __post_init__(self):
        if not math.isclose(sum(self.weights), 1.0, abs_tol=1e-12) or min(self.weights) < 0:
            raise ValueError("weights must be non-negative and sum to 1")
        if not (self.gauss_var > 0 and self.laplace_rate > 0):
            raise ValueError("variance and rate must be positive")


def _check_rho(rho, params: TrafficParams) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(~((rho > 0) & (rho < params.rho_jam))):
        raise DomainError(f"density must lie in (0, {params.rho_jam})")
    return rho


def nf_speed(rho, params: TrafficParams):
    """``v_fr * (1 - exp((v_b / v_fr) * (rho_jam / rho - 1)))`` in km/h."""
    rho = _check_rho(rho, params)
    v = params.v_free * -np.expm1((params.v_back / params.v_free) * (params.rho_jam / rho - 1.0))
    return float(v) if v.ndim == 0 else v


def pace(rho, params: TrafficParams):
    """Reciprocal speed in h/km."""
    return 1.0 / nf_speed(rho, params)


def sample_density(params: TrafficParams, n: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rho = params.rho_jam * rng.beta(params.beta_a, params.beta_b, size=n)
    # keep draws strictly inside (0, rho_jam)
    tiny = np.finfo(float).tiny
    return np.clip(rho, tiny, np.nextafter(params.rho_jam, 0.0))


def sample_travel_time(params: TrafficParams, n: int = 1, seed=None) -> np.ndarray:
    """Travel times in seconds, ``pace(rho) * length`` for one Beta draw per trip."""
    rho = sample_density(params, n, seed)
    with np.errstate(over="ignore"):
        return 3600.0 * params.length * np.atleast_1d(pace(rho, params))


def beta_moment(m: int, params: TrafficParams) -> float:
    """``rho_jam**m * B(a + m, b) / B(a, b)``."""
    a, b = params.beta_a, params.beta_b
    return params.rho_jam**m * math.exp(betaln(a + m, b) - betaln(a, b))


def sample_gauss_laplace(spec: GaussLaplaceSpec, n: int, seed=None) -> np.ndarray:
    """Draws from the mixture; negative values are redrawn."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty(0)
    while out.size < n:
        k = n - out.size
        pick = rng.random(k) < spec.weights[0]
        x = np.where(
            pick,
            rng.normal(spec.gauss_mean, math.sqrt(spec.gauss_var), k),
            rng.laplace(spec.laplace_loc, 1.0 / spec.laplace_rate, k),
        )
        out = np.concatenate([out, x[x >= 0]])
    return out


def gauss_laplace_pdf(t, spec: GaussLaplaceSpec | None = None):
    """Closed-form mixture density, not renormalized to t >= 0 (mass below zero is 6.2e-4)."""
    spec = spec or GaussLaplaceSpec()
    t = np.asarray(t, dtype=float)
    g = np.exp(-((t - spec.gauss_mean) ** 2) / (2 * spec.gauss_var)) / math.sqrt(2 * math.pi * spec.gauss_var)
    lam = spec.laplace_rate
    lap = 0.5 * lam * np.exp(-lam * np.abs(t - spec.laplace_loc))
    return spec.weights[0] * g + spec.weights[1] * lap


def rmse(p_hat, p_bar) -> float:
    p_hat = np.asarray(p_hat, dtype=float)
    p_bar = np.asarray(p_bar, dtype=float)
    if p_hat.shape != p_bar.shape:
        raise ValueError(f"length mismatch: {p_hat.shape} vs {p_bar.shape}")
    return float(np.sqrt(np.mean((p_hat - p_bar) ** 2)))


def rmse_oos(true_pdf, fitted_pdf, test_samples) -> float:
    """RMSE between two densities at the test-sample locations.

    Both arguments are callables ``t -> density``.
    """
    t = np.asarray(test_samples, dtype=float)
    return rmse(true_pdf(t), fitted_pdf(t))
