"""Online estimation from a stream of travel times.

Each ingested sample updates the Parzen estimate in O(N).  Every
``refit_every`` samples the LASSO is re-solved, warm-started from the previous
raw solution, and a cleaned, repaired :class:`MixtureModel` becomes the
current snapshot.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dictionary import Dictionary
from .errors import OutOfRangeError
from .parzen import (
    KernelMatrix,
    ParzenState,
    rolling_state,
    rolling_update,
    sequential_state,
    sequential_update,
)
from .pipeline import FitConfig, finalize
from .postprocess import MixtureModel
from .regularization import sweep
from .solver import LassoProblem, solve

__all__ = ["StreamConfig", "StreamStats", "StreamEstimator", "JsonLinesSink"]


@dataclass(frozen=True)
class StreamConfig:
    """``w=None`` picks ``w`` by a sweep at the first refit; ``resweep_every``
    repeats the sweep every that many refits."""

    mode: str = "sequential"
    window: int = 100
    refit_every: int = 1
    warmup: int | None = None
    w: float | None = None
    resweep_every: int | None = None
    cold: bool = False
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.mode not in ("sequential", "rolling"):
            raise ValueError("mode must be 'sequential' or 'rolling'")
        if self.window < 1 or self.refit_every < 1:
            raise ValueError("window and refit_every must be >= 1")
        if self.warmup is not None and self.warmup < 1:
            raise ValueError("warmup must be >= 1")
        if self.resweep_every is not None and self.resweep_every < 1:
            raise ValueError("resweep_every must be >= 1")
        if self.w is not None and not self.w >= 0:
            raise ValueError("w must be >= 0")

    @property
    def first_refit(self) -> int:
        if self.warmup is not None:
            return self.warmup
        return self.window if self.mode == "rolling" else 2


@dataclass
class StreamStats:
    ingested: int = 0
    dropped: int = 0
    refits: int = 0
    sweeps: int = 0
    solver_iterations: int = 0
    sweep_iterations: int = 0
    solver_seconds: float = 0.0
    nonconverged: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class JsonLinesSink:
    """Appends one JSON model per line."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w")

    def __call__(self, model: MixtureModel) -> None:
        self._fh.write(json.dumps(model.to_dict()) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class StreamEstimator:
    def __init__(self, dictionary: Dictionary, km: KernelMatrix, cfg: StreamConfig | None = None,
                 sink=None):
        if km.grid.n_support != dictionary.n_rows:
            raise ValueError("kernel matrix and dictionary use different supports")
        self.dictionary = dictionary
        self.km = km
        self.cfg = cfg or StreamConfig()
        self.sink = sink
        self.state: ParzenState = (
            rolling_state(km, self.cfg.window) if self.cfg.mode == "rolling" else sequential_state(km)
        )
        self.theta = np.zeros(dictionary.n_columns)
        self.w = self.cfg.w
        self.stats = StreamStats()
        self._model: MixtureModel | None = None
        self._since_refit = 0
        self._last_iters = 0
        self._problem = LassoProblem.from_dictionary(
            dictionary, np.zeros(dictionary.n_rows), 0.0, scaled=self.cfg.fit.scaled
        )

    @property
    def last_solution_iterations(self) -> int:
        return self._last_iters

    def ingest(self, t: float, timestamp=None) -> MixtureModel | None:
        try:
            if self.cfg.mode == "rolling":
                rolling_update(self.state, t)
            else:
                sequential_update(self.state, t)
        except OutOfRangeError:
            self.stats.dropped += 1
            return None
        self.stats.ingested += 1
        self._since_refit += 1
        if self.stats.ingested < self.cfg.first_refit or self._since_refit < self.cfg.refit_every:
            return None
        return self.refit(timestamp)

    def refit(self, timestamp=None) -> MixtureModel:
        self._since_refit = 0
        p_hat = self.state.snapshot()
        problem = self._problem.with_target(p_hat)
        fit = self.cfg.fit
        need_sweep = self.w is None or (
            self.cfg.resweep_every is not None and self.stats.refits % self.cfg.resweep_every == 0
            and self.stats.refits > 0
        )
        t0 = time.perf_counter()
        if need_sweep:
            report = sweep(problem, fit.sweep, fit.solver)
            self.w = report.w_star
            self.stats.sweeps += 1
            self.stats.sweep_iterations += report.total_iterations
        warm = None if self.cfg.cold else self.theta
        sol = solve(problem.with_w(self.w), replace(fit.solver, warm_start=warm))
        self.stats.solver_seconds += time.perf_counter() - t0
        self.stats.solver_iterations += sol.iterations
        self.stats.nonconverged += int(not sol.converged)
        self.stats.refits += 1
        self._last_iters = sol.iterations
        self.theta = sol.theta
        model = finalize(sol.theta, self.dictionary, p_hat, self.w, fit, {
            "timestamp": None if timestamp is None else str(timestamp),
            "samples": self.stats.ingested,
            "mode": self.cfg.mode,
            "converged": bool(sol.converged),
        })
        self._model = model
        if self.sink is not None:
            self.sink(model)
        return model.copy()

    def snapshot(self) -> MixtureModel:
        if self._model is None:
            raise RuntimeError("no refit has completed yet")
        return self._model.copy()

    @property
    def p_hat(self) -> np.ndarray:
        return self.state.snapshot()
