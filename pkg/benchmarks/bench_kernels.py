"""Time the compiled and pure-Python kernel backends side by side.

    python benchmarks/bench_kernels.py [--repeat 3] [--duration 120]

Reports the best wall time per case and the speedup of the compiled backend,
and checks the two backends produce the same trace.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from circform import config as config_mod
from circform._kernels import available, load
from circform.sim import run_scenario


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def advance_loop(k, n=20000):
    # one agent circling near the path, closed-loop guidance steps only
    x, y, psi, u = 81.0, 0.0, -math.pi / 2, 0.0
    for _ in range(n):
        x, y, psi, u, _, _, _ = k.advance(1.0, 1.0, 6400.0, 0.0, 1.0, 1.0, 13.0, 0.0, 0.0, x, y, psi, 0.02, u)
    return x, y


def field_sweep(k, n=200000):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-200.0, 200.0, size=(n, 3)).tolist()
    for x, y, psi in pts:
        k.field(1.0, 1.0, 6400.0, 0.0, 1.0, 1.0, 13.0, x, y, psi)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--duration", type=float, default=120.0, help="simulated seconds of paper-flight")
    args = ap.parse_args(argv)

    backends = available()
    if "cython" not in backends:
        print("compiled backend not built; only the python fallback is available")
    kernels = {name: load(name) for name in backends}
    cfg = config_mod.load("paper-flight", [f"run.duration={args.duration:g}"])

    cases = {
        "field x200k": lambda k: field_sweep(k),
        "advance x20k": lambda k: advance_loop(k),
        f"paper-flight {args.duration:g} s": lambda k: run_scenario(cfg, kernel=k),
    }
    print(f"{'case':<24}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, fn in cases.items():
        times = {b: best_of(lambda: fn(kernels[b]), args.repeat) for b in backends}
        line = f"{label:<24}" + "".join(f"{times[b]:>11.3f}s" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['cython']:>11.1f}x"
        print(line)

    if len(backends) > 1:
        a, b = run_scenario(cfg, kernel=kernels["python"]), run_scenario(cfg, kernel=kernels["cython"])
        same = np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and np.array_equal(a.psi, b.psi)
        print(f"traces bit-identical across backends: {same}")


if __name__ == "__main__":
    main()
