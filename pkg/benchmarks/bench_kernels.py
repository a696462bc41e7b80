"""Benchmark the compiled propagation kernel against the numpy fallback.

Times fixed-step RK4 over one action interval at a few maze sizes and prints
steps/second plus the speedup.  Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--tau 28] [--h-max 0.005] [--repeats 3]
"""

import argparse
import time

import numpy as np

from qmaze import _kernels_py
from qmaze import lindblad as lb
from qmaze.maze import generate_perfect_maze

try:
    from qmaze import _kernels
except ImportError:
    _kernels = None


def time_backend(mod, gen, rho, steps, h, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        mod.rk4_evolve(rho, gen.hamiltonian, gen.coherent_weight, gen.pump,
                       gen.decay, steps, h)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tau", type=float, default=28.0)
    parser.add_argument("--h-max", type=float, default=lb.DEFAULT_H_MAX)
    parser.add_argument("--p", type=float, default=0.4)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    steps = int(np.ceil(args.tau / args.h_max))
    h = args.tau / steps
    print(f"RK4 over one interval: tau={args.tau}, h_max={args.h_max} "
          f"({steps} steps), p={args.p}")
    header = f"{'maze':>6} {'dim':>4} {'numpy':>12} {'cython':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size in ((3, 3), (4, 4), (6, 6), (8, 8)):
        maze = generate_perfect_maze(*size, seed=7)
        gen = lb.build_generator(maze, args.p)
        rho = lb.initial_state(maze)
        t_py = time_backend(_kernels_py, gen, rho, steps, h, args.repeats)
        row = (f"{size[0]}x{size[1]:<3} {maze.n_nodes + 1:>4} "
               f"{steps / t_py:>9.0f}/s")
        if _kernels is not None:
            t_cy = time_backend(_kernels, gen, rho, steps, h, args.repeats)
            out_py = _kernels_py.rk4_evolve(rho, gen.hamiltonian, gen.coherent_weight,
                                            gen.pump, gen.decay, min(steps, 200), h)
            out_cy = _kernels.rk4_evolve(rho, gen.hamiltonian, gen.coherent_weight,
                                         gen.pump, gen.decay, min(steps, 200), h)
            agree = np.abs(out_py - out_cy).max()
            row += f" {steps / t_cy:>9.0f}/s {t_py / t_cy:>7.1f}x"
            assert agree < 1e-10, f"backend mismatch {agree:.2e}"
        else:
            row += f" {'(not built)':>12} {'-':>8}"
        print(row)


if __name__ == "__main__":
    main()
