"""Timing comparison of the compiled kernels against the numpy fallback.

Runs every hot kernel at recognizer-scale shapes under both backends and
prints one table. The two backends are selected by the PLATEKIT_NO_NUMBA
environment flag at import time, so each side runs in its own
subprocess.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 11
    python3 benchmarks/bench_kernels.py --single     # active backend only
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def _cases():
    from platekit import kernels

    rng = np.random.default_rng(0)
    xp = rng.normal(size=(8, 18, 66, 16))
    k = rng.normal(size=(3, 3, 16, 32))
    dout = rng.normal(size=(8, 16, 64, 32))
    dxp = rng.normal(size=(8, 18, 66, 32))
    dk = rng.normal(size=(3, 3, 32))
    pool_in = rng.normal(size=(8, 16, 64, 32))
    _, arg = kernels.maxpool_fwd(pool_in, 2, 2, 2, 2)
    pool_dout = rng.normal(size=(8, 8, 32, 32))

    logits = rng.normal(size=(40, 68))
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    ext = np.empty(15, dtype=np.int64)
    ext[0::2] = 67
    ext[1::2] = rng.integers(0, 67, 7)

    return [
        ("conv2d-fwd", 3, lambda: kernels.conv2d_fwd(xp, k, 1, 1)),
        ("conv2d-bwd-input", 3, lambda: kernels.conv2d_bwd_input(dout, k, 1, 1, 18, 66)),
        ("conv2d-bwd-kernel", 3, lambda: kernels.conv2d_bwd_kernel(xp, dout, 1, 1, 3, 3)),
        ("depthwise-fwd", 5, lambda: kernels.depthwise_fwd(dxp, dk, 1, 1)),
        ("depthwise-bwd-input", 5, lambda: kernels.depthwise_bwd_input(dout, dk, 1, 1, 18, 66)),
        ("depthwise-bwd-kernel", 5, lambda: kernels.depthwise_bwd_kernel(dxp, dout, 1, 1, 3, 3)),
        ("maxpool-fwd", 10, lambda: kernels.maxpool_fwd(pool_in, 2, 2, 2, 2)),
        ("maxpool-bwd", 10, lambda: kernels.maxpool_bwd(pool_dout, arg, 16, 64)),
        ("ctc-forward-backward", 20, lambda: kernels.ctc_forward_backward(logp, ext)),
    ]


def run_single(repeats: int) -> None:
    from platekit import accel

    backend = "numba" if accel.USE_NUMBA else "numpy"
    print(f"# backend {backend}", flush=True)
    for name, inner, fn in _cases():
        fn()   # warm-up; compiles on the numba side
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for _ in range(inner):
                fn()
            samples.append((time.perf_counter() - t0) / inner)
        print(f"{name}\t{1e3 * statistics.median(samples):.4f}", flush=True)


def _collect(no_numba: bool, repeats: int) -> dict:
    env = dict(os.environ)
    env["PLATEKIT_NO_NUMBA"] = "1" if no_numba else "0"
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--single",
         "--repeats", str(repeats)],
        env=env, capture_output=True, text=True, check=True).stdout
    rows = {}
    backend = "?"
    for line in out.splitlines():
        if line.startswith("# backend"):
            backend = line.split()[-1]
        elif "\t" in line:
            name, ms = line.split("\t")
            rows[name] = float(ms)
    return {"backend": backend, "rows": rows}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--single", action="store_true",
                    help="time only the backend active in this process")
    ap.add_argument("--repeats", type=int, default=7,
                    help="samples per kernel; the median is reported")
    args = ap.parse_args()

    if args.single:
        run_single(args.repeats)
        return

    fast = _collect(no_numba=False, repeats=args.repeats)
    slow = _collect(no_numba=True, repeats=args.repeats)
    if fast["backend"] != "numba":
        print("note: numba unavailable, both columns use the numpy fallback")

    width = max(len(n) for n, _, _ in _cases())
    print(f"{'kernel':<{width}}  {'numba ms':>10}  {'numpy ms':>10}  {'speedup':>8}")
    for name, _, _ in _cases():
        a = fast["rows"][name]
        b = slow["rows"][name]
        print(f"{name:<{width}}  {a:>10.4f}  {b:>10.4f}  {b / a:>7.1f}x")


if __name__ == "__main__":
    main()
