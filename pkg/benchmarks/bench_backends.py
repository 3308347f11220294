"""Compare the numba and numpy backends on the three hot kernels.

Runs each operation in a subprocess per backend (backend choice is fixed
at import time by RKHS_REACH_NUMBA), so one process never mixes paths.

Usage: python benchmarks/bench_backends.py [--repeats 5]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys

_WORKER = r"""
import json, statistics, sys, time
import numpy as np
from rkhs_reach import _backend

repeats = int(sys.argv[1])
rng = np.random.default_rng(0)
cases = []

# d=3 exercises the compiled direct-sum path; at d=1000 and beyond the
# numba backend routes to the same BLAS form as the numpy backend, so
# those rows should show speedup ~1
a3 = rng.normal(size=(1024, 3))
b3 = rng.normal(size=(1024, 3))
cases.append(("rbf_cross 1024x1024 d=3", lambda: _backend.rbf_cross(a3, b3, 50.0)))

a1k = rng.normal(size=(1024, 1000))
b1k = rng.normal(size=(256, 1000))
cases.append(("rbf_cross 1024x256 d=1000", lambda: _backend.rbf_cross(a1k, b1k, 50.0)))

a10k = rng.normal(size=(512, 10000))
cases.append(("rbf_cross 512x512 d=10000", lambda: _backend.rbf_cross(a10k, a10k, 50.0)))

coeffs = np.exp(np.arange(60) * np.log(0.25) - np.cumsum(np.log(np.maximum(np.arange(60), 1))))
x = rng.normal(size=(1024, 10000))
cases.append(("chain_apply 1024x10000", lambda: _backend.chain_apply(coeffs, x)))

v = rng.random((201, 201))
means = rng.uniform(-1, 1, size=(201 * 201, 2))
glx, glw = np.polynomial.legendre.leggauss(25)
cases.append((
    "dp_backup 40401 pts x 625 nodes",
    lambda: _backend.dp_backup(
        v, (-1.1, -1.1), (0.011, 0.011), (0.1, 0.1), means, glx, glw
    ),
))

_backend.warmup()
results = {}
for name, fn in cases:
    fn()  # one untimed run covers compilation of these exact signatures
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    results[name] = statistics.median(times)
print(json.dumps({"backend": _backend.active_backend(), "results": results}))
"""


def run_backend(flag, repeats):
    env = dict(os.environ, RKHS_REACH_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, str(repeats)],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    runs = {}
    for flag in ("0", "auto"):
        data = run_backend(flag, args.repeats)
        runs[data["backend"]] = data["results"]
    if "numba" not in runs:
        print("numba unavailable; only the numpy backend was timed")
    names = list(next(iter(runs.values())))
    width = max(len(n) for n in names)
    header = f"{'operation':<{width}}  " + "  ".join(
        f"{b:>10}" for b in runs
    )
    if len(runs) == 2:
        header += "  " + f"{'speedup':>8}"
    print(header)
    for name in names:
        row = f"{name:<{width}}  " + "  ".join(
            f"{runs[b][name] * 1e3:>8.2f}ms" for b in runs
        )
        if len(runs) == 2:
            numpy_t = runs["numpy"][name]
            numba_t = runs["numba"][name]
            row += f"  {numpy_t / numba_t:>7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
