#!/usr/bin/env python3
"""Micro-benchmarks for the CNN kernel backends.

Times the four kernel primitives plus a composite conv-pool forward/backward
chain on every backend importable right now (the compiled extension and the
pure-numpy fallback), verifies the backends agree numerically, and prints a
table with per-call times and the speedup of the compiled backend.

Run from anywhere after installing the package:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --batch 256 --length 600 --repeats 30
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from structbias.nn import available_backends


def _time_call(fn, repeats: int) -> float:
    """Best-of-``repeats`` wall time in seconds (one warmup call first)."""
    fn()
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _conv_inputs(rng, batch, channels, out_channels, kernel_size, length):
    x = rng.standard_normal((batch, channels, length))
    w = rng.standard_normal((out_channels, channels, kernel_size))
    b = rng.standard_normal(out_channels)
    dy = rng.standard_normal((batch, out_channels, length))
    return x, w, b, dy


def build_cases(args) -> list[tuple[str, dict, float | None]]:
    """(name, backend-name -> zero-arg callable, flops or None) per case."""
    rng = np.random.default_rng(args.seed)
    backends = available_backends()
    cases = []

    x, w, b, dy = _conv_inputs(rng, args.batch, args.channels,
                               args.out_channels, args.kernel_size, args.length)
    conv_flops = 2.0 * args.batch * args.out_channels * args.channels \
        * args.kernel_size * args.length
    cases.append((
        f"conv1d_forward  (B={args.batch}, C={args.channels}->"
        f"{args.out_channels}, K={args.kernel_size}, L={args.length})",
        {name: (lambda m=mod: m.conv1d_forward(x, w, b))
         for name, mod in backends.items()},
        conv_flops,
    ))
    cases.append((
        "conv1d_backward (same shapes)",
        {name: (lambda m=mod: m.conv1d_backward(x, w, dy))
         for name, mod in backends.items()},
        3.0 * conv_flops,
    ))

    pool_x = rng.standard_normal((args.batch, args.out_channels, args.length))
    window = 2
    pooled_len = -(-args.length // window)
    pool_dy = rng.standard_normal((args.batch, args.out_channels, pooled_len))
    pool_argmax = {name: mod.maxpool_forward(pool_x, window)[1]
                   for name, mod in backends.items()}
    cases.append((
        f"maxpool_forward (window={window})",
        {name: (lambda m=mod: m.maxpool_forward(pool_x, window))
         for name, mod in backends.items()},
        None,
    ))
    cases.append((
        "maxpool_backward",
        {name: (lambda m=mod, a=pool_argmax[name]:
                m.maxpool_backward(pool_dy, a, args.length))
         for name, mod in backends.items()},
        None,
    ))

    def chain(mod):
        y1 = np.maximum(mod.conv1d_forward(x, w, b), 0.0)
        pooled, argmax = mod.maxpool_forward(y1, window)
        grad_pool = mod.maxpool_backward(
            np.ones_like(pooled), argmax, args.length)
        return mod.conv1d_backward(x, w, grad_pool * (y1 > 0))

    cases.append((
        "conv->relu->pool forward+backward chain",
        {name: (lambda m=mod: chain(m)) for name, mod in backends.items()},
        None,
    ))
    return cases


def check_agreement(backends: dict, args) -> float:
    """Max elementwise |compiled - numpy| over all primitive outputs."""
    rng = np.random.default_rng(args.seed + 1)
    x, w, b, dy = _conv_inputs(rng, 8, args.channels, args.out_channels,
                               args.kernel_size, 61)
    worst = 0.0
    outputs = {name: mod.conv1d_forward(x, w, b) for name, mod in backends.items()}
    reference = outputs["numpy"]
    for value in outputs.values():
        worst = max(worst, float(np.max(np.abs(value - reference))))
    grads = {name: mod.conv1d_backward(x, w, dy) for name, mod in backends.items()}
    for parts in grads.values():
        for ours, theirs in zip(parts, grads["numpy"]):
            worst = max(worst, float(np.max(np.abs(ours - theirs))))
    pools = {name: mod.maxpool_forward(outputs[name], 2)
             for name, mod in backends.items()}
    for pooled, argmax in pools.values():
        worst = max(worst, float(np.max(np.abs(pooled - pools["numpy"][0]))))
        assert np.array_equal(argmax, pools["numpy"][1]), "argmax indices differ"
    return worst


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--channels", type=int, default=32)
    parser.add_argument("--out-channels", type=int, default=32)
    parser.add_argument("--kernel-size", type=int, default=5)
    parser.add_argument("--length", type=int, default=600)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {', '.join(sorted(backends))}")
    if "compiled" not in backends:
        print("note: compiled extension not built; timing the numpy backend only")
    else:
        worst = check_agreement(backends, args)
        print(f"backend agreement: max |compiled - numpy| = {worst:.3e}")
    print()

    header = f"{'case':<55}" + "".join(f"{name:>14}" for name in sorted(backends))
    if "compiled" in backends:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, calls, flops in build_cases(args):
        times = {backend: _time_call(fn, args.repeats)
                 for backend, fn in calls.items()}
        row = f"{name:<55}"
        for backend in sorted(times):
            row += f"{times[backend] * 1e3:>11.3f} ms"
        if "compiled" in times:
            row += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(row)
        if flops is not None:
            rates = ", ".join(
                f"{backend} {flops / times[backend] / 1e9:.1f} GFLOP/s"
                for backend in sorted(times))
            print(f"{'':<55}  ({rates})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
