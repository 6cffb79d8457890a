"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best-of-N wall time of each backend, the
speedup and the largest difference between the two results.
"""
import argparse
import time

import numpy as np

from gabor_lattice import _backend


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    # signal on [-5, 5] at step 1/64, scattered points in [-4, 4]^2
    n = 641
    vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    xs, ws = rng.uniform(-4, 4, (2, 4000))
    xd, wd = rng.uniform(-4, 4, (2, 800))
    coeffs = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    xg, wg = rng.uniform(-4, 4, (2, 20000))
    return {
        "gabor_points (4000 pts)": lambda k: k.gabor_points(-5.0, 1 / 64, vals, xs, ws),
        "gabor_design (800 x 641)": lambda k: k.gabor_design(-5.0, 1 / 64, n, xd, wd),
        "sis_spectrogram (9 coeffs, 20000 pts)": lambda k: k.sis_spectrogram(coeffs, -4, 2 ** 0.5, xg, wg)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    avail = _backend.available()
    if "cython" not in avail:
        print("compiled kernels not built; only the numpy backend is available")
    py = _backend.load("python")
    cy = _backend.load("cython") if "cython" in avail else None
    rng = np.random.default_rng(0)
    print(f"{'kernel':<40}{'python [ms]':>13}{'cython [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for name, fn in cases(rng).items():
        tp, rp = best_of(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:<40}{tp * 1e3:13.2f}{'-':>13}{'-':>9}{'-':>11}")
            continue
        tc, rc = best_of(lambda: fn(cy), args.repeat)
        diff = float(np.max(np.abs(np.asarray(rp) - np.asarray(rc))))
        print(f"{name:<40}{tp * 1e3:13.2f}{tc * 1e3:13.2f}{tp / tc:9.1f}{diff:11.1e}")


if __name__ == "__main__":
    main()
