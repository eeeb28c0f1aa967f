#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure numpy fallback.

Runs event synthesis and tube fitting on a bar-fixture workload at a few
scene sizes and prints a wall-time table.  Usage:

    python3 benchmarks/bench_kernels.py [--sizes 128,256] [--repeats 3]
"""

import argparse
import time

import numpy as np

from evtm._kernels import pure
from evtm.ettube import TubeParams, fit_event_tubes
from evtm.fixtures import make_bar_fixture

try:
    from evtm._kernels import _speedups as speedups
except ImportError:
    speedups = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(size: int, repeats: int):
    fix = make_bar_fixture(seed=1, sigma_tilt=1.0, size=size)
    log_frames = np.ascontiguousarray(np.log(fix.turb_seq.stack() + 1 / 255))
    ts = fix.turb_seq.timestamps()

    rows = []

    def synth(backend):
        return lambda: backend.synthesize_events_kernel(log_frames, ts, 0.25, 0, 0, size)

    pure_t = _time(synth(pure), repeats)
    comp_t = _time(synth(speedups), repeats) if speedups else float("nan")
    rows.append(("synthesize_events", pure_t, comp_t))

    stream = fix.stream
    t0 = (stream.t_begin + stream.t_end) // 2
    params = TubeParams(half_window_us=t0 - stream.t_begin, seed=3)

    def fit(force_pure):
        def run():
            import evtm._kernels as kern

            saved = kern.backend
            kern.backend = pure if force_pure else (speedups or pure)
            try:
                fit_event_tubes(stream, t0, params, dt_us=fix.turb_seq.dt)
            finally:
                kern.backend = saved

        return run

    pure_t = _time(fit(True), repeats)
    comp_t = _time(fit(False), repeats) if speedups else float("nan")
    rows.append(("fit_event_tubes", pure_t, comp_t))
    return len(stream), rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="128", help="comma-separated scene sizes")
    parser.add_argument("--repeats", type=int, default=3, help="timing repeats (min taken)")
    args = parser.parse_args()

    if speedups is None:
        print("note: compiled kernels unavailable; timing the fallback only")
    header = f"{'size':>5} {'events':>8} {'kernel':<20} {'pure (s)':>10} {'compiled (s)':>13} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size in (int(s) for s in args.sizes.split(",")):
        n_events, rows = bench(size, args.repeats)
        for name, pure_t, comp_t in rows:
            speedup = pure_t / comp_t if comp_t == comp_t and comp_t > 0 else float("nan")
            print(f"{size:>5} {n_events:>8} {name:<20} {pure_t:>10.4f} {comp_t:>13.4f} {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
