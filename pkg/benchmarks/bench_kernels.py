"""Benchmark the compiled kernels against the numpy fallback.

Shapes are the real feature-map sizes of the default architecture on a
60 s window (bvp 64 Hz, eda/temp 4 Hz). Run:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from emllm.nn import _pykernels

try:
    from emllm.nn import _ckernels
except ImportError:
    _ckernels = None

rng = np.random.default_rng(0)


def _timeit(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e6  # us


def _cases():
    def conv(c_in, length, c_out, stride):
        x = rng.normal(size=(c_in, length))
        w = rng.normal(size=(c_out, c_in, 3))
        b = rng.normal(size=c_out)
        l_out = (length - 3) // stride + 1
        gy = rng.normal(size=(c_out, l_out))
        return (
            lambda m: m.conv1d_forward(x, w, b, stride),
            lambda m: m.conv1d_backward(x, w, stride, gy),
        )

    def dense(n, m_out):
        x = rng.normal(size=n)
        w = rng.normal(size=(m_out, n))
        b = rng.normal(size=m_out)
        gy = rng.normal(size=m_out)
        return (
            lambda m: m.dense_forward(x, w, b),
            lambda m: m.dense_backward(x, w, gy),
        )

    def pool(c, length):
        x = rng.normal(size=(c, length))
        l_out = (length - 4) // 4 + 1
        gy = rng.normal(size=(c, l_out))
        _, arg = _pykernels.maxpool1d_forward(x, 4, 4)
        return (
            lambda m: m.maxpool1d_forward(x, 4, 4),
            lambda m: m.maxpool1d_backward(arg, gy, length),
        )

    cases = {}
    cases["conv bvp-1 (1x3840 -> 16x240, s16)"] = conv(1, 3840, 16, 16)
    cases["conv bvp-2 (16x240 -> 32x119, s2)"] = conv(16, 240, 32, 2)
    cases["conv bvp-3 (32x119 -> 64x59, s2)"] = conv(32, 119, 64, 2)
    cases["conv eda-1 (1x240 -> 16x238, s1)"] = conv(1, 240, 16, 1)
    cases["conv eda-3 (32x118 -> 64x58, s2)"] = conv(32, 118, 64, 2)
    cases["pool (64x59, 4/4)"] = pool(64, 59)
    cases["dense head (2688 -> 128)"] = dense(2688, 128)
    cases["dense out (128 -> 1)"] = dense(128, 1)
    return cases


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled backend not built (pip install -e . --no-build-isolation); "
              "timing the numpy fallback only\n")
    header = f"{'case':42s} {'dir':4s} {'numpy us':>10s} {'cython us':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    totals = [0.0, 0.0]
    for name, (fwd, bwd) in _cases().items():
        for direction, fn in (("fwd", fwd), ("bwd", bwd)):
            t_py = _timeit(lambda: fn(_pykernels), args.repeats)
            if _ckernels is not None:
                t_cy = _timeit(lambda: fn(_ckernels), args.repeats)
                ratio = f"{t_py / t_cy:7.2f}x"
                totals[1] += t_cy
            else:
                t_cy, ratio = float("nan"), "    -"
            totals[0] += t_py
            print(f"{name:42s} {direction:4s} {t_py:10.1f} {t_cy:10.1f} {ratio:>8s}")
    print("-" * len(header))
    if _ckernels is not None:
        print(f"{'total':42s} {'':4s} {totals[0]:10.1f} {totals[1]:10.1f} "
              f"{totals[0] / totals[1]:7.2f}x")


if __name__ == "__main__":
    main()
