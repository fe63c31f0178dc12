"""Compiled vs pure-Python kernel timings.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from mlr_em import _backend

CASES = {
    "bessel_k01 (10^5 points)": lambda k: k.bessel_k01(np.logspace(-6, 2.8, 100_000)),
    "bessel_k01_scaled (10^5 points)": lambda k: k.bessel_k01_scaled(np.logspace(-6, 2.8, 100_000)),
    "population_integrals (snr 3, rho 0.9)":
        lambda k: k.population_integrals(0.9, 1.5, 0.1, 0.96, 40.0, 1e-13, 1e-11, 2000, 1.0),
    "population_integrals (snr 1e4, rho 0.5)":
        lambda k: k.population_integrals(0.5, 3e4, 0.0, 0.4, 40.0, 1e-13, 1e-11, 2000, 1.0),
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = _backend.available()
    names = sorted(backends)
    print(f"{'case':42s}" + "".join(f"{n:>14s}" for n in names) +
          ("     speedup" if len(names) > 1 else ""))
    for label, fn in CASES.items():
        best = {}
        for n in names:
            k = backends[n]
            number = 1 if n == "python" else 10
            best[n] = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
        row = f"{label:42s}" + "".join(f"{best[n] * 1e3:11.3f} ms" for n in names)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:11.1f}x"
        print(row)
    if "cython" not in backends:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
