"""Compiled kernels vs. their numpy/python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

The fallback columns call the same functions the package uses when
``BDMEC_DISABLE_NUMBA=1`` is set. The Laplace row compares the compiled
loop against numpy; the package always uses the numpy one. A last row times one full preset run in a
subprocess under each setting.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from bdmec import _accel
from bdmec.model import generate_task


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def preset_seconds(disable):
    env = dict(os.environ, BDMEC_DISABLE_NUMBA="1" if disable else "0")
    code = ("import time; from bdmec.harness import preset_spec, run_scenario; "
            "from bdmec.config import config_from_dict; "
            "s = preset_spec('small-jobs'); c = config_from_dict(s['config']); "
            "run_scenario(c, 1); t = time.perf_counter(); run_scenario(c, s['repetitions']); "
            "print(time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.NUMBA_ENABLED:
        sys.exit("numba is disabled or missing; nothing to compare")

    rng = np.random.default_rng(0)
    u = rng.random(1_000_000) - 0.5
    noisy = rng.integers(0, 400, size=(100_000, 4))
    task = generate_task(4000, (10_000, 700_000), (0.03, 0.07), 40, seed=1)
    cost, payload, result = task.arrays()
    rate = np.array([10.0, 10.0, 10.0, 10.0, 0.7])
    bw = np.full(5, 40e6)
    lat = np.array([0.0, 0.5, 0.5, 0.5, 0.5])
    delay = np.zeros(5)
    sched = (cost, payload, result, rate, bw, lat, delay, 40, 0.8, np.inf)

    cases = [
        ("laplace 1e6", lambda: _accel.laplace_from_uniform_jit(u, 10.0),
         lambda: _accel.laplace_from_uniform_numpy(u, 10.0)),
        ("rank 1e5x4", lambda: _accel.rank_outcomes(noisy, 0, 0),
         lambda: _accel.rank_outcomes_numpy(noisy, 0, 0)),
        ("schedule 4000 jobs", lambda: _accel.steal_schedule(*sched),
         lambda: _accel.steal_schedule_python(*sched)),
    ]
    print(f"{'kernel':<22}{'numba s':>12}{'fallback s':>12}{'ratio':>9}")
    for name, fast, slow in cases:
        fast()  # compile
        a, b = best(fast, args.repeat), best(slow, args.repeat)
        print(f"{name:<22}{a:>12.5f}{b:>12.5f}{b / a:>9.1f}")
    a, b = preset_seconds(False), preset_seconds(True)
    print(f"{'small-jobs preset':<22}{a:>12.3f}{b:>12.3f}{b / a:>9.1f}")


if __name__ == "__main__":
    main()
