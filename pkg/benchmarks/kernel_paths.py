"""Compare the compiled and pure-numpy kernel paths.

Runs the same seeded workload once per path in a subprocess (the path is
fixed at import time by HAPFLOW_KERNELS), then checks that both produce
bitwise-identical message state and reports the wall-clock ratio.

Usage: python3 benchmarks/kernel_paths.py [--n 200] [--levels 2]
       [--iterations 10] [--seed 0]
"""

from __future__ import annotations

import argparse
import hashlib
import os
import subprocess
import sys
import time


def _worker(n: int, levels: int, iterations: int, seed: int) -> None:
    import numpy as np

    from hapflow.config import RunConfig
    from hapflow.kernels import active_path
    from hapflow.similarity import (
        METRIC_NEG_SQ_EUCLIDEAN,
        PointSet,
        PreferenceStrategy,
        similarity_from_points,
    )
    from hapflow.engine_sequential import run_sequential

    rng = np.random.default_rng(seed)
    ps = PointSet(rng.normal(size=(n, 2)) * 4.0)
    s = similarity_from_points(
        ps, METRIC_NEG_SQ_EUCLIDEAN, levels,
        PreferenceStrategy.parse("median"), seed,
    )
    cfg = RunConfig(levels=levels, iterations=iterations, seed=seed)

    run_sequential(s, cfg.with_updates(iterations=1))  # warm the JIT cache
    t0 = time.perf_counter()
    state, table = run_sequential(s, cfg)
    wall_ms = (time.perf_counter() - t0) * 1e3

    digest = hashlib.sha256()
    for lv in range(levels):
        digest.update(state.rho[lv].tobytes())
        digest.update(state.alpha[lv].tobytes())
    digest.update(table.exemplars.tobytes())
    print(f"{active_path()}\t{wall_ms!r}\t{digest.hexdigest()}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--levels", type=int, default=2)
    ap.add_argument("--iterations", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--worker", choices=("numba", "numpy"), default=None,
                    help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker is not None:
        _worker(args.n, args.levels, args.iterations, args.seed)
        return 0

    results = {}
    for path in ("numba", "numpy"):
        env = dict(os.environ, HAPFLOW_KERNELS=path)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker", path,
             "--n", str(args.n), "--levels", str(args.levels),
             "--iterations", str(args.iterations), "--seed", str(args.seed)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return 1
        name, wall, digest = proc.stdout.strip().split("\t")
        results[name] = (float(wall), digest)

    print(f"workload: n={args.n} levels={args.levels} "
          f"iterations={args.iterations} seed={args.seed}")
    for name in ("numba", "numpy"):
        wall, digest = results[name]
        print(f"  {name:<6} {wall:10.1f} ms  state sha256 {digest[:16]}")
    if results["numba"][1] != results["numpy"][1]:
        print("MISMATCH: the two paths disagree bitwise", file=sys.stderr)
        return 1
    ratio = results["numpy"][0] / results["numba"][0]
    print(f"  paths agree bitwise; numba is {ratio:.1f}x faster")
    return 0


if __name__ == "__main__":
    sys.exit(main())
