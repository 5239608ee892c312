"""Compiled vs pure-Python RK4 kernel: throughput and agreement.

    python3 benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from swarmfo import _backend, _pykernel
from swarmfo.scenarios import get_scenario
from swarmfo.sim import initial_state, kernel_args


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if "cython" not in _backend.KERNELS:
        print("compiled kernel not built; only the Python kernel is available")
    kernels = {name: _backend.get_kernel(name) for name in ("cython", "python") if name in _backend.KERNELS}

    print(f"{'scenario':14s} {'N':>3s} {'kernel':8s} {'steps/s':>12s} {'us/step':>9s} {'speedup':>8s} {'max diff':>9s}")
    for name in ("pentagon", "e-shape-good"):
        sc = get_scenario(name)
        y0 = initial_state(sc).to_vector()
        kargs = kernel_args(sc.spec, sc.gains, sc.target)
        results = {}
        for kname, kernel in kernels.items():
            steps = args.steps if kernel is not _pykernel else max(args.steps // 20, 100)
            elapsed, (records, failed) = best_time(
                lambda: kernel.rk4_integrate(y0, *kargs, sc.dt, steps, steps), args.repeat
            )
            assert failed == -1
            results[kname] = (steps / elapsed, records[-1], steps)
        base = results.get("python")
        for kname, (rate, final, steps) in results.items():
            speedup = rate / base[0] if base else float("nan")
            diff = ""
            if base and kname != "python":
                # rerun the compiled kernel over the Python horizon for a like-for-like state
                ref, _ = kernels[kname].rk4_integrate(y0, *kargs, sc.dt, base[2], base[2])
                diff = f"{np.max(np.abs(ref[-1] - base[1])):.1e}"
            print(
                f"{name:14s} {sc.spec.n_agents:3d} {kname:8s} {rate:12.0f} {1e6 / rate:9.2f} "
                f"{speedup:8.1f} {diff:>9s}"
            )


if __name__ == "__main__":
    main()
