"""Rolling-window replay with one refit per sample, warm vs cold solver starts."""

import argparse
import time

from sparsett.dictionary import DictionaryConfig, TimeGrid, build_ml_dictionary
from sparsett.parzen import KernelSpec, build_kernel_matrix
from sparsett.streaming import StreamConfig, StreamEstimator
from sparsett.synthetic import GaussLaplaceSpec, sample_gauss_laplace


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--minutes", type=float, default=45.0)
    ap.add_argument("--interval", type=float, default=5.0, help="seconds between samples")
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--seed", type=int, default=45)
    args = ap.parse_args()

    grid = TimeGrid(1.0, 600, 300, 1)
    ml = build_ml_dictionary(grid, DictionaryConfig(scales=(1.0, 2.0, 3.0, 4.0, 5.0)))
    km = build_kernel_matrix(grid, KernelSpec(1.5))
    x = sample_gauss_laplace(GaussLaplaceSpec(), int(args.minutes * 60 / args.interval), args.seed)
    w, out = None, {}
    for cold in (False, True):
        est = StreamEstimator(ml, km, StreamConfig(mode="rolling", window=args.window, w=w, cold=cold))
        t0 = time.perf_counter()
        for v in x:
            est.ingest(v)
        out[cold] = (est.stats, time.perf_counter() - t0)
        w = est.w
        label = "cold" if cold else "warm"
        print(f"{label}: {est.stats.refits} refits, {est.stats.solver_iterations} iterations, "
              f"{out[cold][1]:.1f} s")
    (ws, wt), (cs, ct) = out[False], out[True]
    print(f"iteration ratio {ws.solver_iterations / cs.solver_iterations:.3f}, wall ratio {wt / ct:.2f}")


if __name__ == "__main__":
    main()
