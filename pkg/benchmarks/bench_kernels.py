"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--samples 100000] [--modes 32] [--repeat 3]

Both backends are run on identical inputs and their outputs are compared
before any timing is reported.
"""

import argparse
import time

import numpy as np

from bolab import kernels
from bolab.rng import CounterRNG


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--modes", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    impls = kernels.backends()
    key = CounterRNG(2024).key
    amps = 1.0 / np.arange(1, args.modes + 1)
    grid = np.array([g for g in (1, 2, 4, 8, 16, 32, 64, 128, 256, 512) if g <= args.modes], dtype=np.int64)
    z = impls["python"].sample_block(key, 0, args.samples, amps, kernels.GAUSSIAN, 1.0)

    cases = {
        "sample_block": lambda m: m.sample_block(key, 0, args.samples, amps, kernels.GAUSSIAN, 1.0),
        "abs2_block": lambda m: m.abs2_block(key, 0, args.samples, amps, kernels.GAUSSIAN, 1.0),
        "centered_sums_block": lambda m: m.centered_sums_block(key, 0, args.samples, amps, kernels.GAUSSIAN,
                                                               1.0, grid),
        "flow_rows": lambda m: m.flow_rows(z, 1.7, args.modes, 0.0),
    }
    if "cython" in impls:
        for name, fn in cases.items():
            diff = np.max(np.abs(np.asarray(fn(impls["cython"])) - np.asarray(fn(impls["python"]))))
            assert diff < 1e-9, f"{name}: backends disagree by {diff}"
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"{args.samples} samples x {args.modes} modes, best of {args.repeat}")
    print(f"{'kernel':22s}" + "".join(f"{b:>12s}" for b in impls) + ("     speedup" if len(impls) > 1 else ""))
    for name, fn in cases.items():
        times = {b: best_of(lambda: fn(m), args.repeat) for b, m in impls.items()}
        line = f"{name:22s}" + "".join(f"{times[b]:11.4f}s" for b in impls)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
