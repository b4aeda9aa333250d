"""Compare the compiled session-split kernel against the pure-Python
fallback on a large synthetic flow log.

    python3 benchmarks/bench_sessionize.py [n_flows]
"""

import sys
import time

import numpy as np

from flowlens import sessions
from flowlens.sessions import KERNEL, split_runs_py


def make_arrays(n, n_streams=200, seed=0):
    rng = np.random.default_rng(seed)
    stream = np.sort(rng.integers(0, n_streams, n)).astype(np.int64)
    gaps = rng.exponential(90_000, n).astype(np.int64)
    ts = np.cumsum(gaps)
    # timestamps restart per stream so gaps stay realistic
    return np.ascontiguousarray(ts), np.ascontiguousarray(stream)


def bench(fn, ts, stream, gap_ms, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(ts, stream, gap_ms)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 5_000_000
    ts, stream = make_arrays(n)
    gap_ms = 5 * 60_000

    py_t, py_out = bench(split_runs_py, ts, stream, gap_ms)
    print(f"python fallback : {py_t:.3f}s  ({n / py_t / 1e6:.1f} Mflows/s)")

    if KERNEL == "compiled":
        from flowlens._kernel import split_runs

        c_t, c_out = bench(split_runs, ts, stream, gap_ms)
        print(f"compiled kernel : {c_t:.3f}s  ({n / c_t / 1e6:.1f} Mflows/s)")
        assert np.array_equal(np.asarray(c_out), np.asarray(py_out))
        print(f"speedup: {py_t / c_t:.1f}x  (outputs identical, "
              f"{int(np.asarray(py_out)[-1]) + 1} sessions)")
    else:
        print("compiled kernel not available; fallback only")


if __name__ == "__main__":
    main()
