"""Discretized Gamma / Mittag-Leffler mixture dictionaries.

Column ``m`` of the dictionary is the pmf, over support rows ``n = 0..N-1``,
of a component placed at location ``t_m`` with scale ``sigma_m``.  Parameter
and argument are swapped (the component's mode sits on the query point), which
turns each column into a Poisson pmf (single scale, ``sigma == delta``) or a
hyper-Poisson pmf (any scale):

    phi[n, m] = a**n / (Gamma(1 + n*b) * E_b(a)),   a = (t_m/sigma_m)**b,  b = delta/sigma_m

The support is always ``tau_n = n * delta``; the locations may be offset
(``t_m = (m + offset) * delta``), e.g. locations 1..300 s on a 0..599 s support.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GridTooSmallError
from .special_functions import (
    HyperPoisson,
    HyperPoissonParams,
    MLSeriesOptions,
    Poisson,
    hyper_poisson_logpmf,
    log_mittag_leffler,
    poisson_logpmf,
    tail_quantile,
)

__all__ = [
    "TimeGrid",
    "DictionaryConfig",
    "Dictionary",
    "build_gamma_dictionary",
    "build_ml_dictionary",
    "apply_exact_correction",
    "evaluate_mixture",
    "required_support_size",
    "save_dictionary",
    "load_dictionary",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform support ``n*delta`` (n < N) and ``M'`` component locations."""

    delta: float
    n_support: int
    m_locations: int
    location_offset: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.m_locations < 1 or self.n_support < 1:
            raise ValueError("n_support and m_locations must be positive")
        if self.location_offset < 0:
            raise ValueError("location_offset must be non-negative")
        if not self.n_support > self.m_locations:
            raise ValueError(
                f"need N > M' (got N={self.n_support}, M'={self.m_locations})"
            )
        if self.location_offset + self.m_locations > self.n_support:
            raise ValueError("component locations run past the end of the support")

    @property
    def support_times(self) -> np.ndarray:
        return np.arange(self.n_support) * self.delta

    @property
    def location_rows(self) -> np.ndarray:
        return np.arange(self.m_locations) + self.location_offset

    @property
    def location_times(self) -> np.ndarray:
        return self.location_rows * self.delta

    def row_of(self, t: float) -> int:
        """Support row of a location time; ``t`` must sit exactly on the grid."""
        r = round(t / self.delta)
        assert math.isclose(r * self.delta, t, rel_tol=1e-9, abs_tol=1e-12), (
            f"{t} is not a grid point"
        )
        return int(r)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "n_support": self.n_support,
            "m_locations": self.m_locations,
            "location_offset": self.location_offset,
        }


@dataclass(frozen=True)
class DictionaryConfig:
    scales: tuple = (1.0,)
    eps_tail: float = 1e-6
    exact_correction: bool = True

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if not scales or any(s <= 0 for s in scales):
            raise ValueError("scales must be a non-empty list of positive numbers")
        if list(scales) != sorted(scales):
            raise ValueError("scales must be sorted ascending")
        object.__setattr__(self, "scales", scales)
        if not 0 < self.eps_tail < 1:
            raise ValueError("eps_tail must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class Dictionary:
    phi: np.ndarray
    locations: np.ndarray
    scales: np.ndarray
    grid: TimeGrid
    kind: str = "ml"
    eps_tail: float = 1e-6
    corrected: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("phi", "locations", "scales"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.phi.shape != (self.grid.n_support, len(self.locations)):
            raise ValueError(f"phi has shape {self.phi.shape}, inconsistent with metadata")

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @property
    def n_columns(self) -> int:
        return self.phi.shape[1]

    @property
    def shrink(self) -> np.ndarray:
        """Per-column ``delta / sigma_m``."""
        return self.grid.delta / self.scales

    @cached_property
    def gram(self) -> np.ndarray:
        g = self.phi.T @ self.phi
        g.setflags(write=False)
        return g

    @cached_property
    def column_norms_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.phi, self.phi)

    def columns(self) -> list[tuple[float, float, float]]:
        return [(float(t), float(s), float(d)) for t, s, d in zip(self.locations, self.scales, self.shrink)]


def _poisson_required_n(rate: float, eps: float) -> int:
    return tail_quantile(Poisson(rate), eps)


def required_support_size(grid: TimeGrid, scales: Sequence[float], eps_tail: float,
                          opts: MLSeriesOptions | None = None) -> int:
    """Smallest ``N`` keeping every column's truncated tail below ``eps_tail``.

    The tail quantile grows with ``a``, so only the last location matters for
    each scale.
    """
    t_max = float(grid.location_times[-1])
    need = 0
    for sigma in scales:
        b = grid.delta / sigma
        if math.isclose(b, 1.0):
            q = _poisson_required_n(t_max / sigma, eps_tail)
        else:
            q = tail_quantile(HyperPoisson(HyperPoissonParams((t_max / sigma) ** b, b), opts or MLSeriesOptions()), eps_tail)
        need = max(need, q)
    return need


def build_gamma_dictionary(grid: TimeGrid, sigma: float, cfg: DictionaryConfig | None = None) -> Dictionary:
    """Single-scale Gamma dictionary; columns are Poisson pmfs with rate ``t_m / sigma``.

    ``sigma`` must equal ``grid.delta``.  Other single scales go through
    :func:`build_ml_dictionary` with a one-element scale list.
    """
    cfg = cfg or DictionaryConfig(scales=(sigma,))
    if not math.isclose(sigma, grid.delta, rel_tol=1e-12):
        raise ValueError(
            f"the Gamma dictionary needs sigma == delta ({grid.delta}), got {sigma}; "
            "use build_ml_dictionary for other scales"
        )
    need = _poisson_required_n(float(grid.location_times[-1]) / sigma, cfg.eps_tail)
    if grid.n_support < need:
        raise GridTooSmallError(need, grid.n_support)
    n = np.arange(grid.n_support, dtype=float)[:, None]
    rates = grid.location_times / sigma
    phi = np.exp(poisson_logpmf(n, rates[None, :]))
    d = Dictionary(
        phi=phi,
        locations=grid.location_times,
        scales=np.full(grid.m_locations, float(sigma)),
        grid=grid,
        kind="gamma",
        eps_tail=cfg.eps_tail,
    )
    return apply_exact_correction(d) if cfg.exact_correction else d


def build_ml_dictionary(grid: TimeGrid, cfg: DictionaryConfig,
                        opts: MLSeriesOptions | None = None) -> Dictionary:
    """Mittag-Leffler dictionary over all (location, scale) pairs.

    Columns are ordered location-major, then by ascending scale.
    """
    need = required_support_size(grid, cfg.scales, cfg.eps_tail, opts)
    if grid.n_support < need:
        raise GridTooSmallError(need, grid.n_support)
    scales = np.asarray(cfg.scales)
    locs = np.repeat(grid.location_times, len(scales))
    sig = np.tile(scales, grid.m_locations)
    n = np.arange(grid.n_support, dtype=float)
    phi = np.empty((grid.n_support, len(locs)))
    for m, (t, s) in enumerate(zip(locs, sig)):
        b = grid.delta / s
        a = (t / s) ** b
        if math.isclose(b, 1.0):
            phi[:, m] = np.exp(poisson_logpmf(n, t / s))
        else:
            params = HyperPoissonParams(a, b)
            phi[:, m] = np.exp(hyper_poisson_logpmf(n, params, log_norm=log_mittag_leffler(b, a, opts)))
    d = Dictionary(
        phi=phi,
        locations=locs,
        scales=sig,
        grid=grid,
        kind="ml",
        eps_tail=cfg.eps_tail,
    )
    return apply_exact_correction(d) if cfg.exact_correction else d


def apply_exact_correction(d: Dictionary) -> Dictionary:
    """Move each column's truncated tail mass onto row 0 so columns sum to one.

    Columns that overshoot one by rounding are scaled down instead.
    """
    phi = np.array(d.phi)
    sums = phi.sum(axis=0)
    tail = np.maximum(1.0 - sums, 0.0)
    phi[0, :] += tail
    over = sums > 1.0
    phi[:, over] /= sums[over]
    return Dictionary(
        phi=phi,
        locations=d.locations,
        scales=d.scales,
        grid=d.grid,
        kind=d.kind,
        eps_tail=d.eps_tail,
        corrected=True,
        meta={**d.meta, "tail_mass": tail},
    )


def evaluate_mixture(d: Dictionary, theta) -> np.ndarray:
    """Discrete mixture ``Phi @ theta``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d.n_columns,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({d.n_columns},)")
    if np.any(theta < 0):
        raise ValueError("mixture weights must be non-negative")
    return d.phi @ theta


def _header(d: Dictionary) -> dict:
    return {
        "kind": d.kind,
        "grid": d.grid.to_dict(),
        "scales": sorted(set(float(s) for s in d.scales)),
        "eps_tail": d.eps_tail,
        "corrected": d.corrected,
    }


def save_dictionary(d: Dictionary, path) -> Path:
    """Write ``d`` to ``.npz`` (binary) or ``.csv`` (row-major, JSON header line)."""
    path = Path(path)
    header = _header(d)
    if path.suffix == ".csv":
        with path.open("w") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            fh.write("# locations " + " ".join(repr(float(x)) for x in d.locations) + "\n")
            fh.write("# scales " + " ".join(repr(float(x)) for x in d.scales) + "\n")
            np.savetxt(fh, d.phi, delimiter=",", fmt="%.17g")
    else:
        np.savez_compressed(
            path, phi=d.phi, locations=d.locations, scales=d.scales, header=json.dumps(header)
        )
        if path.suffix != ".npz":
            path = path.with_name(path.name + ".npz")
    return path


def load_dictionary(path) -> Dictionary:
    path = Path(path)
    if path.suffix == ".csv":
        with path.open() as fh:
            header = json.loads(fh.readline()[2:])
            locs = np.array(fh.readline().split()[2:], dtype=float)
            sig = np.array(fh.readline().split()[2:], dtype=float)
            phi = np.loadtxt(fh, delimiter=",", ndmin=2)
    else:
        with np.load(path) as z:
            header = json.loads(str(z["header"]))
            phi, locs, sig = z["phi"], z["locations"], z["scales"]
    return Dictionary(
        phi=phi,
        locations=locs,
        scales=sig,
        grid=TimeGrid(**header["grid"]),
        kind=header["kind"],
        eps_tail=header["eps_tail"],
        corrected=header["corrected"],
    )
