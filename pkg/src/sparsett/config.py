"""Run configuration: nested dataclasses loaded from YAML with strict key checks."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .dictionary import DictionaryConfig, TimeGrid
from .pipeline import FitConfig
from .regularization import SweepConfig
from .solver import SolverOptions
from .streaming import StreamConfig
from .synthetic import GaussLaplaceSpec, TrafficParams

__all__ = ["ConfigError", "RunConfig", "load_config", "dump_config"]


class ConfigError(ValueError):
    pass


@dataclass
class GridSection:
    delta: float = 1.0
    n_support: int = 600
    m_locations: int = 300
    location_offset: int = 1


@dataclass
class DictionarySection:
    mode: str = "ml"
    scales: list = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0])
    eps_tail: float = 1e-6
    exact_correction: bool = True
    cache: str | None = None


@dataclass
class KernelSection:
    bandwidth: Any = "auto"


@dataclass
class SolverSection:
    method: str = "projected_gradient"
    max_iters: int = 5000
    grad_tol: float = 1e-8


@dataclass
class SweepSection:
    eta: float = 0.95
    eps_stop: float = 1e-3
    max_steps: int = 500
    patience: int = 10
    target_sparsity: int | None = None


@dataclass
class FitSection:
    w: float | None = None
    scaled: bool = True
    eps_rel: float = 1e-3
    merge_dist: float = 0.0
    debias: bool = True
    repair_eps: float = 1e-6


@dataclass
class StreamSection:
    mode: str = "rolling"
    window: int = 100
    refit_every: int = 1
    warmup: int | None = None
    resweep_every: int | None = None


@dataclass
class EMSection:
    k: int = 2
    restarts: int = 10
    tol: float = 1e-3
    stop: str = "rmse"


@dataclass
class SynthSection:
    kind: str = "gauss_laplace"
    n: int = 2000
    rate_hz: float = 0.2
    start: str = "2020-01-01T16:00:00"
    v_free: float = 100.0
    v_back: float = -20.0
    rho_jam: float = 150.0
    beta_a: float = 2.0
    beta_b: float = 5.0
    length_km: float = 1.0


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    dictionary: DictionarySection = field(default_factory=DictionarySection)
    kernel: KernelSection = field(default_factory=KernelSection)
    solver: SolverSection = field(default_factory=SolverSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    fit: FitSection = field(default_factory=FitSection)
    stream: StreamSection = field(default_factory=StreamSection)
    em: EMSection = field(default_factory=EMSection)
    synth: SynthSection = field(default_factory=SynthSection)
    seed: int = 0

    # typed views on the module-level configs; each validates its own invariants

    def time_grid(self) -> TimeGrid:
        g = self.grid
        return TimeGrid(float(g.delta), int(g.n_support), int(g.m_locations), int(g.location_offset))

    def dictionary_config(self) -> DictionaryConfig:
        d = self.dictionary
        return DictionaryConfig(tuple(float(s) for s in d.scales), float(d.eps_tail), bool(d.exact_correction))

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(method=s.method, max_iters=int(s.max_iters), grad_tol=float(s.grad_tol))

    def sweep_config(self) -> SweepConfig:
        s = self.sweep
        return SweepConfig(eta=float(s.eta), eps_stop=float(s.eps_stop), max_steps=int(s.max_steps),
                           patience=int(s.patience), target_sparsity=s.target_sparsity)

    def fit_config(self) -> FitConfig:
        f = self.fit
        return FitConfig(w=None if f.w is None else float(f.w), scaled=bool(f.scaled),
                         sweep=self.sweep_config(), solver=self.solver_options(),
                         eps_rel=float(f.eps_rel), merge_dist=float(f.merge_dist),
                         debias=bool(f.debias), repair_eps=float(f.repair_eps))

    def stream_config(self, cold: bool = False) -> StreamConfig:
        s = self.stream
        return StreamConfig(mode=s.mode, window=int(s.window), refit_every=int(s.refit_every),
                            warmup=s.warmup, w=self.fit.w, resweep_every=s.resweep_every,
                            cold=cold, fit=self.fit_config())

    def traffic_params(self) -> TrafficParams:
        s = self.synth
        return TrafficParams(s.v_free, s.v_back, s.rho_jam, s.beta_a, s.beta_b, s.length_km)

    def gauss_laplace(self) -> GaussLaplaceSpec:
        return GaussLaplaceSpec()

    def validate(self) -> "RunConfig":
        try:
            self.time_grid()
            self.dictionary_config()
            self.fit_config()
            self.stream_config()
            self.traffic_params()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.dictionary.mode not in ("ml", "gamma"):
            raise ConfigError("dictionary.mode must be 'ml' or 'gamma'")
        if self.dictionary.mode == "gamma" and [float(s) for s in self.dictionary.scales] != [float(self.grid.delta)]:
            raise ConfigError("the gamma dictionary needs scales == [grid.delta]")
        bw = self.kernel.bandwidth
        if bw != "auto" and not (isinstance(bw, (int, float)) and math.isfinite(bw) and bw > 0):
            raise ConfigError("kernel.bandwidth must be 'auto' or a positive number")
        if self.em.k < 1 or self.em.restarts < 1 or self.em.stop not in ("rmse", "loglik"):
            raise ConfigError("em: k and restarts must be >= 1, stop in {rmse, loglik}")
        if self.synth.kind not in ("gauss_laplace", "traffic") or self.synth.n < 1 or not self.synth.rate_hz > 0:
            raise ConfigError("synth: kind in {gauss_laplace, traffic}, n >= 1, rate_hz > 0")
        return self


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if known[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{where}.{name}".lstrip("."))
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        node = data
        *head, last = dotted.split(".")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value
    return _build(RunConfig, data, "").validate()


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=False)
