"""Benchmark the numba kernels against the pure-numpy fallback.

Both backends must produce identical tallies; this script times curve
construction under each and verifies the outputs match exactly.

Usage: python benchmarks/bench_backends.py [--questions 20] [--n-max 64] [--tau 20000]
"""

from __future__ import annotations

import argparse
import time

from overscale_lab.backend import get_backend
from overscale_lab.categorical_sim import SynthSpec, synth_dataset
from overscale_lab.vote_curve import SubsampleParams, budget_accuracy_curve


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--questions", type=int, default=20)
    parser.add_argument("--n-max", type=int, default=64)
    parser.add_argument("--tau", type=int, default=20_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    per_type = max(1, args.questions // 4)
    result = synth_dataset(SynthSpec(
        counts={1: per_type, 2: per_type, 3: per_type, 4: per_type},
        n_max=args.n_max, seed=args.seed,
    ))
    params = SubsampleParams(tau=args.tau, seed=args.seed)

    timings = {}
    outputs = {}
    for name in ("numba", "numpy"):
        kern = get_backend(name)
        # warm up JIT compilation outside the timed region
        budget_accuracy_curve(result.dataset.traces[0], params, kernels=kern)
        start = time.perf_counter()
        outputs[name] = [
            budget_accuracy_curve(trace, params, kernels=kern).values
            for trace in result.dataset.traces
        ]
        timings[name] = time.perf_counter() - start

    identical = outputs["numba"] == outputs["numpy"]
    print(f"questions={len(result.dataset.traces)} n_max={args.n_max} "
          f"tau={args.tau}")
    for name, elapsed in timings.items():
        print(f"  {name:6s}: {elapsed:8.2f}s")
    print(f"  speedup: {timings['numpy'] / timings['numba']:.1f}x "
          f"(numba over numpy)")
    print(f"  outputs bit-identical: {identical}")
    if not identical:
        raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
