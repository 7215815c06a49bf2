"""Command-line front end: ``sparsett {fit,stream,synth,em,sweep,dict-cache}``.

Exit codes: 0 success, 2 malformed input, 3 invalid configuration,
4 solver non-convergence (artifacts are still written and flagged).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from collections import OrderedDict
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import yaml

from .config import ConfigError, RunConfig, dump_config, load_config
from .dictionary import (
    Dictionary,
    build_gamma_dictionary,
    build_ml_dictionary,
    load_dictionary,
    save_dictionary,
)
from .em_baseline import EMConfig, fit_em, mixture_pmf
from .errors import GridTooSmallError
from .parzen import KernelSpec, build_kernel_matrix, parzen_batch, silverman_bandwidth
from .pipeline import fit_pmf
from .postprocess import model_pmf
from .regularization import bisect_to_sparsity, sweep
from .solver import LassoProblem
from .streaming import JsonLinesSink, StreamEstimator
from .synthetic import rmse, sample_gauss_laplace, sample_travel_time

log = logging.getLogger("sparsett")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3, 4


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- input

def _parse_time(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def read_samples(path, need_timestamps: bool = False):
    """Read ``timestamp_iso8601,travel_time_s[,link_id]`` rows.

    Returns ``OrderedDict(link_id -> (timestamps, values))``; the link is
    ``None`` when the column is absent.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "travel_time_s" not in cols:
            raise InputError("input needs a travel_time_s column")
        has_ts = "timestamp_iso8601" in cols
        if need_timestamps and not has_ts:
            raise InputError("this command needs a timestamp_iso8601 column")
        groups: OrderedDict = OrderedDict()
        for lineno, row in enumerate(reader, start=2):
            try:
                value = float(row["travel_time_s"])
                ts = _parse_time(row["timestamp_iso8601"]) if has_ts and row["timestamp_iso8601"] else None
            except (TypeError, ValueError) as exc:
                raise InputError(f"line {lineno}: {exc}") from exc
            if not math.isfinite(value):
                raise InputError(f"line {lineno}: travel time is not finite")
            if need_timestamps and ts is None:
                raise InputError(f"line {lineno}: missing timestamp")
            link = row.get("link_id") if "link_id" in cols else None
            times, values = groups.setdefault(link, ([], []))
            times.append(ts)
            values.append(value)
    if not groups:
        raise InputError("input has no samples")
    return groups


def _in_range(values: np.ndarray, grid):
    lo, hi = -grid.delta / 2, (grid.n_support - 1) * grid.delta + grid.delta / 2
    keep = (values >= lo) & (values <= hi)
    return values[keep], int((~keep).sum())


# ---------------------------------------------------------------- shared pieces

def get_dictionary(cfg: RunConfig) -> Dictionary:
    grid = cfg.time_grid()
    cache = cfg.dictionary.cache
    if cache and Path(cache).exists():
        d = load_dictionary(cache)
        want = (grid, sorted(cfg.dictionary_config().scales), cfg.dictionary.mode)
        have = (d.grid, sorted(set(float(s) for s in d.scales)), d.kind)
        if want != have:
            raise ConfigError(f"dictionary cache {cache} does not match the configuration")
        return d
    dcfg = cfg.dictionary_config()
    if cfg.dictionary.mode == "gamma":
        d = build_gamma_dictionary(grid, dcfg.scales[0], dcfg)
    else:
        d = build_ml_dictionary(grid, dcfg)
    if cache:
        save_dictionary(d, cache)
    return d


def _bandwidth(cfg: RunConfig, values) -> float:
    if cfg.kernel.bandwidth == "auto":
        return silverman_bandwidth(values, cfg.grid.delta)
    return float(cfg.kernel.bandwidth)


def _suffix(link) -> str:
    return "" if link is None else f"_{link}"


def write_density_csv(path, grid, parzen, fitted) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t_s", "parzen", "fitted"])
        for t, a, b in zip(grid.support_times, parzen, fitted):
            out.writerow([repr(float(t)), repr(float(a)), repr(float(b))])


def model_json(model, grid, metrics: dict) -> dict:
    body = model.to_dict()
    return {"grid": grid.to_dict(), "components": body["components"], "repair": body["repair"],
            "metrics": metrics, "provenance": body["provenance"]}


# ---------------------------------------------------------------- commands

def cmd_fit(cfg: RunConfig, args) -> int:
    groups = read_samples(args.input)
    d = get_dictionary(cfg)
    grid = d.grid
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for link, (_, values) in groups.items():
        x, dropped = _in_range(np.asarray(values), grid)
        if x.size < 2:
            raise InputError(f"link {link}: need at least two in-range samples")
        h = _bandwidth(cfg, x)
        km = build_kernel_matrix(grid, KernelSpec(h))
        p_hat = parzen_batch(x, km).p_hat
        res = fit_pmf(p_hat, d, cfg.fit_config())
        metrics = {
            "n_samples": int(x.size),
            "dropped": dropped,
            "bandwidth": h,
            "w": res.w,
            "n_components": len(res.model),
            "rmse": rmse(p_hat, res.p_bar),
            "converged": res.converged,
            "solver_iterations": res.solution.iterations,
        }
        sfx = _suffix(link)
        (out / f"model{sfx}.json").write_text(json.dumps(model_json(res.model, grid, metrics), indent=2))
        write_density_csv(out / f"density{sfx}.csv", grid, p_hat, res.p_bar)
        if res.report is not None:
            res.report.to_csv(out / f"sweep{sfx}.csv")
        log.info("fit%s: %d components, rmse %.3e, w %.3e", sfx, len(res.model), metrics["rmse"], res.w)
        if not res.converged:
            status = EXIT_SOLVER
    return status


def _replay(cfg: RunConfig, d, times, values, cold: bool, sink_path=None):
    scfg = cfg.stream_config(cold=cold)
    # an automatic bandwidth may only look at the warm-up samples
    h = _bandwidth(cfg, values[: max(scfg.first_refit, 2)])
    km = build_kernel_matrix(d.grid, KernelSpec(h))
    sink = JsonLinesSink(sink_path) if sink_path else None
    est = StreamEstimator(d, km, scfg, sink)
    t0 = time.perf_counter()
    try:
        for ts, v in zip(times, values):
            est.ingest(v, ts.isoformat() if ts is not None else None)
    finally:
        if sink is not None:
            sink.close()
    return est, time.perf_counter() - t0


def cmd_stream(cfg: RunConfig, args) -> int:
    groups = read_samples(args.input, need_timestamps=True)
    d = get_dictionary(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for link, (times, values) in groups.items():
        order = sorted(range(len(times)), key=lambda i: times[i])
        if order != list(range(len(times))):
            if not args.sort:
                raise InputError(f"timestamps are not ordered (link {link}); use --sort")
            times = [times[i] for i in order]
            values = [values[i] for i in order]
        values = np.asarray(values, dtype=float)
        sfx = _suffix(link)
        est, wall = _replay(cfg, d, times, values, args.cold, out / f"snapshots{sfx}.jsonl")
        report = {"wall_seconds": wall, "cold": bool(args.cold), **est.stats.to_dict(), "w": est.w}
        if args.compare_cold and not args.cold:
            cold, cold_wall = _replay(cfg, d, times, values, True)
            report["cold_wall_seconds"] = cold_wall
            report["cold_solver_iterations"] = cold.stats.solver_iterations
            report["iteration_ratio"] = est.stats.solver_iterations / max(cold.stats.solver_iterations, 1)
            report["wall_ratio"] = wall / cold_wall if cold_wall > 0 else None
        if est.stats.refits:
            model = est.snapshot()
            write_density_csv(out / f"density{sfx}.csv", d.grid, est.p_hat, model_pmf(model, d))
        (out / f"stream_report{sfx}.json").write_text(json.dumps(report, indent=2))
        log.info("stream%s: %d refits, %d iterations, %.2fs", sfx, est.stats.refits,
                 est.stats.solver_iterations, wall)
        if est.stats.nonconverged:
            status = EXIT_SOLVER
    return status


def cmd_synth(cfg: RunConfig, args) -> int:
    s = cfg.synth
    if s.kind == "traffic":
        x = sample_travel_time(cfg.traffic_params(), s.n, cfg.seed)
    else:
        x = sample_gauss_laplace(cfg.gauss_laplace(), s.n, cfg.seed)
    start = _parse_time(s.start)
    step = 1.0 / s.rate_hz
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_iso8601", "travel_time_s"])
        for i, v in enumerate(x):
            w.writerow([(start + timedelta(seconds=i * step)).isoformat(), repr(float(v))])
    return EXIT_OK


def cmd_em(cfg: RunConfig, args) -> int:
    groups = read_samples(args.input)
    grid = cfg.time_grid()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    e = cfg.em
    for link, (_, values) in groups.items():
        x, dropped = _in_range(np.asarray(values), grid)
        if x.size <= e.k:
            raise InputError(f"link {link}: need more samples than components")
        km = build_kernel_matrix(grid, KernelSpec(_bandwidth(cfg, x)))
        p_hat = parzen_batch(x, km).p_hat
        gm = fit_em(x, e.k, seed=cfg.seed, grid=grid, p_ref=p_hat,
                    cfg=EMConfig(restarts=e.restarts, tol=e.tol, stop=e.stop))
        body = gm.to_dict()
        body["grid"] = grid.to_dict()
        body["metrics"]["dropped"] = dropped
        sfx = _suffix(link)
        (out / f"em_model{sfx}.json").write_text(json.dumps(body, indent=2))
        write_density_csv(out / f"em_density{sfx}.csv", grid, p_hat, mixture_pmf(gm, grid))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    groups = read_samples(args.input)
    d = get_dictionary(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for link, (_, values) in groups.items():
        x, _ = _in_range(np.asarray(values), d.grid)
        if x.size < 2:
            raise InputError(f"link {link}: need at least two in-range samples")
        km = build_kernel_matrix(d.grid, KernelSpec(_bandwidth(cfg, x)))
        p_hat = parzen_batch(x, km).p_hat
        problem = LassoProblem.from_dictionary(d, p_hat, 0.0, scaled=cfg.fit.scaled)
        target = cfg.sweep.target_sparsity
        if target is None:
            report = sweep(problem, cfg.sweep_config(), cfg.solver_options())
        else:
            report = bisect_to_sparsity(problem, target, cfg.sweep_config(), cfg.solver_options())
        report.to_csv(out / f"sweep{_suffix(link)}.csv")
        if not report.all_converged:
            status = EXIT_SOLVER
    return status


def cmd_dict_cache(cfg: RunConfig, args) -> int:
    d = get_dictionary(cfg)
    path = save_dictionary(d, args.out)
    log.info("wrote %s (%d x %d)", path, d.n_rows, d.n_columns)
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "stream": cmd_stream,
    "synth": cmd_synth,
    "em": cmd_em,
    "sweep": cmd_sweep,
    "dict-cache": cmd_dict_cache,
}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set fit.w=0.001 (repeatable)")
    common.add_argument("--seed", type=int, help="shortcut for --set seed=N")
    common.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sparsett", description="Sparse travel-time density estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fit", "em", "sweep"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--input", help="CSV with travel_time_s (and optional timestamp_iso8601, link_id)")
        p.add_argument("--out", default=f"{name}_out", help="output directory")
    p = sub.add_parser("stream", parents=[common])
    p.add_argument("--input", help="CSV with timestamp_iso8601,travel_time_s")
    p.add_argument("--out", default="stream_out")
    p.add_argument("--cold", action="store_true", help="solve every refit from zero")
    p.add_argument("--compare-cold", action="store_true", help="also replay cold and report the ratios")
    p.add_argument("--sort", action="store_true", help="sort rows by timestamp instead of failing")
    p = sub.add_parser("synth", parents=[common])
    p.add_argument("--out", default="synth.csv", help="output CSV")
    p = sub.add_parser("dict-cache", parents=[common])
    p.add_argument("--out", default="dictionary.npz", help=".npz or .csv path")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    if args.seed is not None:
        out["seed"] = args.seed
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    if args.command not in ("synth", "dict-cache") and not args.input:
        print("input error: --input is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](cfg, args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, GridTooSmallError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
