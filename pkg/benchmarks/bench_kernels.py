"""Timing of the numba kernels against their pure-numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py``. The train-step rows build a
network in each backend by re-running this script in a child process with
``EMGWIN_NO_NUMBA=1``, because the backend is chosen at import time.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_rows(repeat):
    from emgwin import _kernels
    from emgwin.dsp import design_bandpass

    rng = np.random.default_rng(0)
    sos = design_bandpass(20.0, 450.0, 1024.0, 4).sos
    sig = rng.standard_normal((20000, 8))
    xp = rng.standard_normal((32, 34, 127, 8))
    cols = _kernels.im2col_numpy(xp, 3)
    fmap = rng.standard_normal((32, 32, 125, 16))
    pooled, arg = _kernels.maxpool_numpy(fmap)

    cases = [
        ("sosfilt 20000x8, 4 sections", lambda: _kernels.sosfilt(sos, sig),
         lambda: _kernels.sosfilt_numpy(sos, sig)),
        ("col2im 32x32x125x8, k=3", lambda: _kernels.col2im(cols, (32, 32, 125, 8), 3),
         lambda: _kernels.col2im_numpy(cols, (32, 32, 125, 8), 3)),
        ("maxpool 32x32x125x16", lambda: _kernels.maxpool(fmap),
         lambda: _kernels.maxpool_numpy(fmap)),
        ("maxpool backward", lambda: _kernels.maxpool_backward(pooled, arg, fmap.shape),
         lambda: _kernels.maxpool_backward_numpy(pooled, arg, fmap.shape)),
    ]
    rows = []
    for name, fast, slow in cases:
        if _kernels.BACKEND == "numba":
            rows.append((name, best_of(fast, repeat), best_of(slow, repeat)))
        else:
            rows.append((name, float("nan"), best_of(slow, repeat)))
    return rows


def train_step_time(repeat, filters, window, kernel):
    from emgwin.nn.network import backward, build_network, forward_batch

    net = build_network(window, kernel, seed=0, filters=filters)
    x = np.random.default_rng(0).standard_normal((32, 32, window))
    y = np.arange(32) % 5

    def step():
        _, cache = forward_batch(net, x, "train")
        backward(net, cache, y)

    return best_of(step, repeat)


def child_train_step(args):
    # runs in a child process so the backend can be switched by environment
    env = dict(os.environ)
    if args.backend == "numpy":
        env["EMGWIN_NO_NUMBA"] = "1"
    else:
        env.pop("EMGWIN_NO_NUMBA", None)
    cmd = [sys.executable, __file__, "--train-step-only", "--repeat", str(args.repeat),
           "--filters", args.filters, "--window", str(args.window), "--kernel", str(args.kernel)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--filters", default="32,32,64,64")
    p.add_argument("--window", type=int, default=125)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--train-step-only", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    filters = tuple(int(v) for v in args.filters.split(","))

    if args.train_step_only:
        from emgwin import _kernels

        t = train_step_time(args.repeat, filters, args.window, args.kernel)
        print(json.dumps({"backend": _kernels.BACKEND, "seconds": t}))
        return

    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speed-up':>9s}")
    for name, fast, slow in kernel_rows(args.repeat):
        print(f"{name:32s} {1e3 * fast:10.2f} {1e3 * slow:10.2f} {slow / fast:8.1f}x")

    times = {}
    for backend in ("numba", "numpy"):
        args.backend = backend
        res = child_train_step(args)
        times[backend] = res["seconds"] if res["backend"] == backend else float("nan")
    name = f"train step, batch 32, T={args.window}, k={args.kernel}"
    print(f"{name:32s} {1e3 * times['numba']:10.2f} {1e3 * times['numpy']:10.2f} "
          f"{times['numpy'] / times['numba']:8.1f}x")


if __name__ == "__main__":
    main()
