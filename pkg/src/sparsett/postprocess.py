"""Solution cleanup and the unity-sum repair.

A raw solution is cleaned in three steps: relative thresholding, merging of
same-scale components that sit close together, and de-biasing (non-negative
least squares on the surviving columns).  The result becomes a
:class:`MixtureModel`.

The weights of a non-negative LASSO solution usually sum to slightly less
than one.  :func:`repair_unity` appends one very flat Mittag-Leffler column
whose contribution at every support point is below ``eps`` and gives it the
missing weight, so the mixture weights sum to exactly one without touching the
fitted ones.  The flat column depends only on ``delta`` and ``eps`` and is
cached.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import nnls
from scipy.special import gammaln

from .dictionary import Dictionary
from .special_functions import MLSeriesOptions, log_mittag_leffler

__all__ = [
    "Component",
    "RepairComponent",
    "MixtureModel",
    "threshold_support",
    "merge_nearby",
    "debias",
    "repair_scale",
    "repair_column",
    "repair_unity",
    "clean_solution",
    "build_model",
    "model_pmf",
]

# Gamma attains its minimum 0.885603 at 1.461632; 0.88 is the bound used for sigma'
GAMMA_MIN_BOUND = 0.88
_REPAIR_SERIES = MLSeriesOptions(abs_tol=1e-14, max_terms=10**9)


@dataclass(frozen=True)
class Component:
    location: float
    scale: float
    weight: float
    column: int = -1


@dataclass(frozen=True)
class RepairComponent:
    location: float
    scale: float
    weight: float
    eps: float
    max_contribution: float


@dataclass
class MixtureModel:
    components: list
    repair: RepairComponent | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.components = sorted(self.components, key=lambda c: (c.location, c.scale))
        if any(c.weight < 0 for c in self.components):
            raise ValueError("component weights must be non-negative")

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def total_weight(self) -> float:
        total = math.fsum(c.weight for c in self.components)
        return total + (self.repair.weight if self.repair else 0.0)

    def __len__(self):
        return len(self.components)

    def copy(self) -> "MixtureModel":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "components": [
                {"t_s": c.location, "sigma_s": c.scale, "weight": c.weight, "column": c.column}
                for c in self.components
            ],
            "repair": None if self.repair is None else {
                "t_s": self.repair.location,
                "sigma_s": self.repair.scale,
                "weight": self.repair.weight,
                "eps": self.repair.eps,
                "max_contribution": self.repair.max_contribution,
            },
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureModel":
        comps = [Component(c["t_s"], c["sigma_s"], c["weight"], c.get("column", -1))
                 for c in data["components"]]
        rep = data.get("repair")
        repair = None if rep is None else RepairComponent(
            rep["t_s"], rep["sigma_s"], rep["weight"], rep["eps"], rep["max_contribution"])
        return cls(comps, repair, dict(data.get("provenance", {})))


def threshold_support(theta, eps_rel: float = 1e-3) -> np.ndarray:
    """Indices with ``theta_m >= eps_rel * max(theta)``; empty for an all-zero vector."""
    theta = np.asarray(theta, dtype=float)
    top = theta.max(initial=0.0)
    if top <= 0:
        return np.array([], dtype=int)
    return np.flatnonzero(theta >= eps_rel * top)


def merge_nearby(support, theta, locations, scales, dist: float):
    """Fold same-scale components within ``dist`` of a heavier one into it.

    Components are visited by decreasing weight (ties: smaller location
    first); each absorbs the still-unassigned same-scale components within
    ``dist``.  Returns ``(support, theta)`` with the merged weights.
    """
    support = np.asarray(support, dtype=int)
    theta = np.asarray(theta, dtype=float).copy()
    if dist <= 0 or support.size < 2:
        return support, theta
    locations = np.asarray(locations)
    scales = np.asarray(scales)
    order = sorted(support, key=lambda m: (-theta[m], locations[m]))
    taken = set()
    keep = []
    for m in order:
        if m in taken:
            continue
        taken.add(m)
        keep.append(m)
        for k in order:
            if k in taken or scales[k] != scales[m]:
                continue
            if abs(locations[k] - locations[m]) <= dist:
                theta[m] += theta[k]
                theta[k] = 0.0
                taken.add(k)
    return np.array(sorted(keep), dtype=int), theta


def debias(p_hat, dictionary, support) -> np.ndarray:
    """Non-negative least-squares weights on the support columns."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ValueError("cannot de-bias an empty support")
    phi = dictionary.phi if isinstance(dictionary, Dictionary) else np.asarray(dictionary)
    A = phi[:, support]
    p_hat = np.asarray(p_hat, dtype=float)
    if support.size == 1:
        a = A[:, 0]
        return np.array([max(0.0, float(a @ p_hat) / float(a @ a))])
    weights, _ = nnls(A, p_hat, maxiter=50 * support.size)
    return weights


@lru_cache(maxsize=64)
def repair_scale(delta: float, eps: float, max_doublings: int = 64) -> float:
    """Smallest ``sigma' = delta * 2**k`` with ``E_{delta/sigma'}(1) >= 1/(0.88 eps)``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    need = -math.log(GAMMA_MIN_BOUND * eps)
    for k in range(max_doublings):
        sigma = delta * 2.0**k
        if _log_norm(delta / sigma) >= need:
            return sigma
    raise RuntimeError(f"no repair scale found for eps={eps} within {max_doublings} doublings")


@lru_cache(maxsize=64)
def _log_norm(nu: float) -> float:
    return log_mittag_leffler(nu, 1.0, _REPAIR_SERIES)


def repair_column(n_support: int, delta: float, sigma: float) -> np.ndarray:
    """``psi_n = 1 / (Gamma(1 + n*delta/sigma) * E_{delta/sigma}(1))`` for ``t' = sigma'``."""
    nu = delta / sigma
    n = np.arange(n_support, dtype=float)
    return np.exp(-gammaln(1.0 + n * nu) - _log_norm(nu))


def repair_unity(model: MixtureModel, grid, eps: float = 1e-6) -> MixtureModel:
    """Return a copy whose weights sum to exactly one.

    If the weights already exceed one they are rescaled proportionally and no
    component is appended.
    """
    out = model.copy()
    total = math.fsum(c.weight for c in out.components)
    if total > 1.0:
        out.components = [Component(c.location, c.scale, c.weight / total, c.column)
                          for c in out.components]
        out.repair = None
        out.provenance["rescaled"] = total
        return out
    sigma = repair_scale(float(grid.delta), float(eps))
    psi = repair_column(grid.n_support, grid.delta, sigma)
    out.repair = RepairComponent(
        location=sigma,
        scale=sigma,
        weight=1.0 - total,
        eps=eps,
        max_contribution=float(psi.max()),
    )
    return out


def clean_solution(theta, dictionary: Dictionary, p_hat, eps_rel: float = 1e-3,
                   merge_dist: float = 0.0, do_debias: bool = True):
    """Threshold, merge and de-bias a raw solution.  Returns ``(support, weights)``."""
    theta = np.asarray(theta, dtype=float)
    support = threshold_support(theta, eps_rel)
    if support.size == 0:
        return support, np.array([])
    support, merged = merge_nearby(support, theta, dictionary.locations, dictionary.scales, merge_dist)
    weights = merged[support]
    if do_debias:
        weights = debias(p_hat, dictionary, support)
        keep = weights > 0
        support, weights = support[keep], weights[keep]
    return support, weights


def build_model(dictionary: Dictionary, support, weights, provenance: dict | None = None) -> MixtureModel:
    comps = [
        Component(float(dictionary.locations[m]), float(dictionary.scales[m]), float(wt), int(m))
        for m, wt in zip(support, weights)
    ]
    return MixtureModel(comps, None, dict(provenance or {}))


def model_pmf(model: MixtureModel, dictionary: Dictionary) -> np.ndarray:
    """Discrete mixture on the support grid, repair column included."""
    p = np.zeros(dictionary.n_rows)
    for c in model.components:
        col = c.column if c.column >= 0 else _find_column(dictionary, c)
        p += c.weight * dictionary.phi[:, col]
    if model.repair is not None and model.repair.weight > 0:
        p += model.repair.weight * repair_column(dictionary.n_rows, dictionary.grid.delta, model.repair.scale)
    return p


def _find_column(d: Dictionary, c: Component) -> int:
    hit = np.flatnonzero(np.isclose(d.locations, c.location) & np.isclose(d.scales, c.scale))
    if hit.size == 0:
        raise KeyError(f"no dictionary column at t={c.location}, sigma={c.scale}")
    return int(hit[0])
