"""High-precision reference values of ln E_nu(t) by direct summation in mpmath."""

import argparse

import mpmath as mp


def log_ml(nu, t, dps):
    with mp.workdps(dps):
        # the float64 inputs the implementation sees, not the decimal strings
        nu, t = mp.mpf(float(nu)), mp.mpf(float(t))
        total, n = mp.mpf(0), 0
        eps = mp.mpf(10) ** (-dps)
        prev = mp.inf
        while True:
            term = t**n / mp.gamma(1 + n * nu)
            total += term
            # stop once the log-concave terms are decreasing and negligible
            if term < prev and term < eps * total:
                return mp.log(total)
            prev, n = term, n + 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("pairs", nargs="*", default=["0.5,0.5", "0.5,3", "0.2,1", "0.2,5", "2,20",
                                                 "1.5,10", "0.7,30", "0.1,2"])
    ap.add_argument("--dps", type=int, default=40)
    args = ap.parse_args()
    for pair in args.pairs:
        nu, t = pair.split(",")
        print(f"({nu}, {t}, {mp.nstr(log_ml(nu, t, args.dps), 20)})")


if __name__ == "__main__":
    main()
