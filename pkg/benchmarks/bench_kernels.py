"""Throughput comparison of the feature-extraction kernels.

Runs the compiled extension (if built) and the pure-Python fallback on the
same batches, reports pairs/second for each, and verifies the outputs are
bit-identical. Usage: python3 benchmarks/bench_kernels.py [--episodes N]
"""

import argparse
import sys
import time

import numpy as np

from cvrptw import datagen, _kernel_py
from cvrptw.episode import EpisodeState, PreparedInstance, apply_decision, feasible_pairs
from cvrptw.features import N_FEATURES
from cvrptw.model import parse_solomon

try:
    from cvrptw import _speedups
except ImportError:
    _speedups = None


def collect_batches(names, episodes, seed):
    """Mid-episode candidate batches from random-policy episodes."""
    batches = []
    for name in names:
        prep = PreparedInstance.build(parse_solomon(datagen.generate_text(name)))
        rng = np.random.Generator(np.random.PCG64(seed))
        for _ in range(episodes):
            state = EpisodeState(prep)
            while state.unserved_count > 0:
                pv, pc = feasible_pairs(state)
                if len(pv) == 0:
                    break
                ctx = state.ctx
                args = (ctx.d, ctx.speed, ctx.capacity, ctx.demand, ctx.tw_open,
                        ctx.tw_close, ctx.service, ctx.cluster_of,
                        ctx.member_start, ctx.members, ctx.cluster_size,
                        ctx.nearest_nonmember, ctx.remote, ctx.rho, ctx.tau,
                        ctx.d_norm, ctx.t_norm, state.served.copy(), pv, pc,
                        *state.vehicle_arrays())
                batches.append(args)
                i = int(rng.integers(len(pv)))
                apply_decision(state, int(pv[i]), int(pc[i]))
    return batches


def run(kernel, batches):
    outs = []
    pairs = 0
    t0 = time.perf_counter()
    for args in batches:
        out = np.empty((len(args[18]), N_FEATURES))
        kernel.extract_batch(*args, out)
        outs.append(out)
        pairs += len(out)
    return time.perf_counter() - t0, pairs, outs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    names = ("C101", "C201", "R101", "R201", "RC101", "RC201")
    batches = collect_batches(names, args.episodes, args.seed)
    print(f"{len(batches)} batches collected from {len(names)} instances")

    t_py, pairs, out_py = run(_kernel_py, batches)
    print(f"pure python : {pairs / t_py:>12,.0f} pairs/s  ({t_py:.3f}s)")

    if _speedups is None:
        print("compiled    : extension not built (pip install -e . to build)")
        return 0
    t_c, _, out_c = run(_speedups, batches)
    print(f"compiled    : {pairs / t_c:>12,.0f} pairs/s  ({t_c:.3f}s)")
    print(f"speedup     : {t_py / t_c:.1f}x")

    for a, b in zip(out_py, out_c):
        if not np.array_equal(a, b):
            print("ERROR: kernel outputs differ")
            return 1
    print("outputs bit-identical across kernels")
    return 0


if __name__ == "__main__":
    sys.exit(main())
