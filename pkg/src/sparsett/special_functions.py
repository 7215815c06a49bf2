"""Gamma, Mittag-Leffler and hyper-Poisson numerics.

Everything is evaluated in log-space and exponentiated last: for the grids
used here ``Gamma(1 + n*b)`` and ``a**n`` overflow long before the ratio does.

The Mittag-Leffler function is summed from its power series

.. math::
    E_\\nu(t) = \\sum_{n \\ge 0} \\frac{t^n}{\\Gamma(1 + n\\nu)},

restricted to ``nu > 0`` and ``t >= 0``.  No analytic continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import ConvergenceError, DomainError

__all__ = [
    "MLSeriesOptions",
    "HyperPoissonParams",
    "Poisson",
    "HyperPoisson",
    "log_gamma",
    "log_mittag_leffler",
    "mittag_leffler",
    "gamma_pdf",
    "ml_pdf",
    "hyper_poisson_logpmf",
    "hyper_poisson_pmf",
    "poisson_logpmf",
    "tail_quantile",
]


@dataclass(frozen=True)
class MLSeriesOptions:
    abs_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


_DEFAULT_OPTS = MLSeriesOptions()


@dataclass(frozen=True)
class HyperPoissonParams:
    """``P(X = n) = a**n / (Gamma(1 + n*b) * E_b(a))``."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a >= 0:
            raise DomainError(f"hyper-Poisson a must be >= 0, got {self.a}")
        if not self.b > 0:
            raise DomainError(f"hyper-Poisson b must be > 0, got {self.b}")


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def log_mittag_leffler(nu: float, t: float, opts: MLSeriesOptions | None = None) -> float:
    """Natural log of ``E_nu(t)``.

    Terms are accumulated with a running log-sum-exp.  The term sequence is
    log-concave, so past its peak the ratio ``r`` of consecutive terms never
    grows and the tail after term ``T`` is at most ``T * r / (1 - r)``.
    Summation stops once that bound drops below ``abs_tol * (1 + partial_sum)``.
    """
    opts = opts or _DEFAULT_OPTS
    if not nu > 0:
        raise DomainError(f"Mittag-Leffler order must be > 0, got {nu}")
    if not t >= 0:
        raise DomainError(f"Mittag-Leffler argument must be >= 0, got {t}")
    if t == 0:
        return 0.0

    log_t = math.log(t)
    log_tol = math.log(opts.abs_tol)
    log_sum = -math.inf
    prev = math.nan
    chunks = []
    start = 0
    chunk = 64
    while start < opts.max_terms:
        stop = min(start + chunk, opts.max_terms)
        n = np.arange(start, stop, dtype=float)
        log_terms = n * log_t - gammaln(1.0 + n * nu)
        running = np.logaddexp.accumulate(np.concatenate(([log_sum], log_terms)))[1:]
        log_r = log_terms - np.concatenate(([prev], log_terms[:-1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            log_tail = log_terms + log_r - np.log(-np.expm1(log_r))
        done = (log_r < 0) & (log_tail < log_tol + np.logaddexp(0.0, running))
        hit = np.flatnonzero(done)
        if hit.size:
            # the chained log-sum-exp drifts by ~1e-13; finish with one shifted sum
            chunks.append(log_terms[: hit[0] + 1])
            terms = np.concatenate(chunks)
            peak = float(terms.max())
            return peak + math.log(math.fsum(np.exp(terms - peak)))
        chunks.append(log_terms)
        log_sum = float(running[-1])
        prev = float(log_terms[-1])
        start = stop
        chunk = min(chunk * 2, 1 << 20)
    raise ConvergenceError(
        f"E_{nu}({t}) did not converge within {opts.max_terms} terms"
    )


def mittag_leffler(nu: float, t: float, opts: MLSeriesOptions | None = None) -> float:
    """``E_nu(t)`` by direct series summation (may return inf on overflow)."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_mittag_leffler(nu, t, opts)))


def _check_shape_scale(beta, sigma):
    if not beta > 0:
        raise DomainError(f"shape must be > 0, got {beta}")
    if not sigma > 0:
        raise DomainError(f"scale must be > 0, got {sigma}")


def gamma_pdf(t, beta: float, sigma: float):
    """Gamma density with shape ``beta`` and scale ``sigma``; ``0**0 = 1``."""
    _check_shape_scale(beta, sigma)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("gamma_pdf requires t >= 0")
    x = t / sigma
    with np.errstate(divide="ignore"):
        logf = -math.log(sigma) - math.lgamma(beta) + xlogy(beta - 1.0, x) - x
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def ml_pdf(t, beta: float, sigma: float, nu: float, opts: MLSeriesOptions | None = None):
    """Gamma density with ``exp(-t/sigma)`` replaced by ``1 / E_nu((t/sigma)**nu)``."""
    _check_shape_scale(beta, sigma)
    if not nu > 0:
        raise DomainError(f"nu must be > 0, got {nu}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("ml_pdf requires t >= 0")
    x = t / sigma
    log_e = np.vectorize(lambda v: log_mittag_leffler(nu, v, opts), otypes=[float])(x**nu)
    with np.errstate(divide="ignore"):
        logf = -math.log(sigma) - math.lgamma(beta) + xlogy(beta - 1.0, x) - log_e
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def poisson_logpmf(n, rate: float):
    n = np.asarray(n, dtype=float)
    return xlogy(n, rate) - rate - gammaln(n + 1.0)


def hyper_poisson_logpmf(n, params: HyperPoissonParams, opts: MLSeriesOptions | None = None,
                         log_norm: float | None = None):
    """Log pmf, vectorized over ``n``.  ``log_norm`` may pass a cached ``ln E_b(a)``."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError("hyper-Poisson support is n >= 0")
    if log_norm is None:
        log_norm = log_mittag_leffler(params.b, params.a, opts)
    return xlogy(n, params.a) - gammaln(1.0 + n * params.b) - log_norm


def hyper_poisson_pmf(n, params: HyperPoissonParams, opts: MLSeriesOptions | None = None):
    out = np.exp(hyper_poisson_logpmf(n, params, opts))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Poisson:
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise DomainError(f"Poisson rate must be >= 0, got {self.rate}")

    def pmf(self, n):
        return np.exp(poisson_logpmf(n, self.rate))


@dataclass(frozen=True)
class HyperPoisson:
    params: HyperPoissonParams
    opts: MLSeriesOptions = _DEFAULT_OPTS

    def __post_init__(self):
        object.__setattr__(
            self, "_log_norm", log_mittag_leffler(self.params.b, self.params.a, self.opts)
        )

    def pmf(self, n):
        return np.exp(hyper_poisson_logpmf(n, self.params, log_norm=self._log_norm))


def tail_quantile(pmf, eps: float, cap: int = 10**7) -> int:
    """Smallest ``n`` with ``P(X >= n) <= eps``.

    ``pmf`` is any object with a vectorized ``pmf(n)`` method (``Poisson`` or
    ``HyperPoisson``).  The CDF is accumulated from zero.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    target = 1.0 - eps
    cdf = 0.0
    start = 0
    chunk = 256
    while start < cap:
        stop = min(start + chunk, cap)
        cum = cdf + np.cumsum(pmf.pmf(np.arange(start, stop)))
        hit = np.flatnonzero(cum >= target)
        if hit.size:
            # P(X >= k + 1) = 1 - F(k)
            return int(start + hit[0] + 1)
        cdf = float(cum[-1])
        start = stop
        chunk = min(chunk * 2, 1 << 20)
    raise ConvergenceError(f"tail quantile not reached below cap={cap}")
