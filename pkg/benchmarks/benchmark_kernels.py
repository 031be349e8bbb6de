"""Compare the compiled and pure chain-DP kernels on realistic table sizes.

Usage: python3 benchmarks/benchmark_kernels.py [--repeats N]

The default shape (T=325, C=11) matches one human-preset video. Both
backends run the same tables; the report shows per-call times and speedups,
and cross-checks that results agree.
"""

import argparse
import time

import numpy as np

from stagecrf import _dp_py, crf

try:
    from stagecrf import _dp_c
except ImportError:
    _dp_c = None


def bench(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def make_table(rng, T, C):
    unary = rng.random((T, C))
    pairwise = rng.random((T - 1, C, C))
    mask = crf.monotone_mask(C)
    pairwise[:, ~mask] = 0.0
    return unary, pairwise, mask


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--frames", type=int, default=325)
    parser.add_argument("--classes", type=int, default=11)
    args = parser.parse_args()

    if _dp_c is None:
        raise SystemExit("compiled kernels are not built; reinstall the package")

    rng = np.random.default_rng(0)
    table = make_table(rng, args.frames, args.classes)

    a_p, _, z_p = _dp_py.forward_pass(*table)
    a_c, _, z_c = _dp_c.forward_pass(*table)
    assert abs(z_p - z_c) < 1e-9
    l_p, _ = _dp_py.viterbi_path(*table)
    l_c, _ = _dp_c.viterbi_path(*table)
    assert (l_p == l_c).all()

    kernels = [
        ("forward", _dp_py.forward_pass, _dp_c.forward_pass),
        ("backward", _dp_py.backward_pass, _dp_c.backward_pass),
        ("viterbi", _dp_py.viterbi_path, _dp_c.viterbi_path),
    ]
    print(f"table: T={args.frames} C={args.classes}, best of {args.repeats} runs")
    print(f"{'kernel':>10}  {'pure':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, pure, compiled in kernels:
        t_pure = bench(pure, table, args.repeats)
        t_comp = bench(compiled, table, args.repeats)
        print(
            f"{name:>10}  {1e3 * t_pure:8.3f}ms  {1e3 * t_comp:8.3f}ms  "
            f"{t_pure / t_comp:7.1f}x"
        )


if __name__ == "__main__":
    main()
