"""Discrete Parzen (Gaussian KDE) estimator with O(N) recursive updates.

Samples are snapped to the nearest support point, so the discrete estimate is
an average of precomputed kernel columns ``psi[:, j]``.  Columns are
renormalized over the finite support so the estimate is a proper pmf.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dictionary import TimeGrid
from .errors import OutOfRangeError

__all__ = [
    "KernelSpec",
    "KernelMatrix",
    "ParzenState",
    "silverman_bandwidth",
    "build_kernel_matrix",
    "discretize",
    "parzen_batch",
    "sequential_state",
    "rolling_state",
    "sequential_update",
    "rolling_update",
]

RENORMALIZE_EVERY = 10_000


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float
    kernel: str = "gaussian"

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.kernel != "gaussian":
            raise ValueError("only the Gaussian kernel is supported")


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    psi: np.ndarray
    grid: TimeGrid
    spec: KernelSpec

    def column(self, j: int) -> np.ndarray:
        return self.psi[:, j]

    def index(self, t) -> np.ndarray:
        return discretize(t, self.grid)


def silverman_bandwidth(samples, delta: float = 1.0) -> float:
    """``1.06 * std * S**(-1/5)``, floored at ``delta / 2``."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("Silverman's rule needs at least two samples")
    h = 1.06 * x.std(ddof=1) * x.size ** (-0.2)
    return float(max(h, delta / 2))


def build_kernel_matrix(grid: TimeGrid, spec: KernelSpec) -> KernelMatrix:
    tau = grid.support_times
    diff = tau[:, None] - tau[None, :]
    h = spec.bandwidth
    psi = np.exp(-0.5 * (diff / h) ** 2) / (h * math.sqrt(2 * math.pi))
    psi /= psi.sum(axis=0, keepdims=True)
    psi.setflags(write=False)
    return KernelMatrix(psi=psi, grid=grid, spec=spec)


def discretize(t, grid: TimeGrid) -> np.ndarray:
    """Nearest support row for each sample; exact midpoints go to the lower row."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = -grid.delta / 2, (grid.n_support - 1) * grid.delta + grid.delta / 2
    bad = (t < lo) | (t > hi) | ~np.isfinite(t)
    if np.any(bad):
        raise OutOfRangeError(t[bad].tolist(), lo, hi)
    x = t / grid.delta
    idx = np.ceil(x - 0.5).astype(int)
    return np.clip(idx, 0, grid.n_support - 1)


@dataclass(eq=False)
class ParzenState:
    """Current discrete estimate plus what the recursion needs.

    ``mode`` is ``"sequential"`` (running mean over ``count`` samples) or
    ``"rolling"`` (mean over the last ``window`` samples held in ``buffer``).
    """

    p_hat: np.ndarray
    km: KernelMatrix
    mode: str = "sequential"
    count: int = 0
    window: int | None = None
    buffer: deque = field(default_factory=deque)
    updates: int = 0

    def snapshot(self) -> np.ndarray:
        return self.p_hat.copy()

    @property
    def represented(self) -> list[int]:
        return list(self.buffer)


def parzen_batch(samples, km: KernelMatrix) -> ParzenState:
    idx = km.index(samples)
    if idx.size == 0:
        raise ValueError("no samples")
    counts = np.bincount(idx, minlength=km.grid.n_support)
    p = km.psi @ (counts / idx.size)
    return ParzenState(p_hat=p, km=km, mode="sequential", count=int(idx.size))


def sequential_state(km: KernelMatrix) -> ParzenState:
    return ParzenState(p_hat=np.zeros(km.grid.n_support), km=km, mode="sequential")


def rolling_state(km: KernelMatrix, window: int) -> ParzenState:
    if window < 1:
        raise ValueError("window must be >= 1")
    return ParzenState(p_hat=np.zeros(km.grid.n_support), km=km, mode="rolling",
                       window=window, buffer=deque())


def sequential_update(state: ParzenState, t_new: float) -> ParzenState:
    """``p <- K/(K+1) p + 1/(K+1) psi[:, tau(t_new)]`` in place."""
    j = int(state.km.index(t_new)[0])
    k = state.count
    p = state.p_hat
    p *= k / (k + 1)
    p += state.km.column(j) / (k + 1)
    state.count = k + 1
    if state.mode == "rolling":
        state.buffer.append(j)
    state.updates += 1
    return state


def rolling_update(state: ParzenState, t_new: float) -> ParzenState:
    """Add the new sample's column and drop the oldest one, each weighted 1/W.

    While the buffer is filling, this behaves as :func:`sequential_update`.
    """
    if state.mode != "rolling":
        raise ValueError("rolling_update needs a rolling-mode state")
    if len(state.buffer) < state.window:
        return sequential_update(state, t_new)
    j_new = int(state.km.index(t_new)[0])
    j_old = state.buffer.popleft()
    state.buffer.append(j_new)
    state.updates += 1
    if j_new != j_old:
        p = state.p_hat
        p += (state.km.column(j_new) - state.km.column(j_old)) / state.window
        np.maximum(p, 0.0, out=p)
    if state.updates % RENORMALIZE_EVERY == 0:
        _recompute(state)
    return state


def _recompute(state: ParzenState) -> None:
    counts = np.bincount(np.fromiter(state.buffer, int), minlength=state.km.grid.n_support)
    state.p_hat[:] = state.km.psi @ (counts / len(state.buffer))
