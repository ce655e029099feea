"""Compare the compiled and numpy log-cosh kernels.

    python benchmarks/bench_kernels.py [--points 2000] [--samples 50000] [--repeat 3]

Times the batched objective (one landscape-grid-sized call) and the fused
value/gradient/Hessian evaluation, and checks that the two backends agree.
"""
import argparse
import timeit

import numpy as np

from ridable import kernels
from ridable.problems import bernoulli_gaussian


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2000, help="query points per batched call")
    ap.add_argument("--samples", type=int, default=50000, help="data columns p")
    ap.add_argument("--n", type=int, default=3, help="ambient dimension")
    ap.add_argument("--mu", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if kernels.compiled_impl is None:
        raise SystemExit("compiled extension is not built; reinstall with Cython available")
    rng = np.random.default_rng(0)
    Yt = np.ascontiguousarray(bernoulli_gaussian(args.n, args.samples, 0.3, rng).T)
    Q = rng.standard_normal((args.points, args.n))
    Q /= np.linalg.norm(Q, axis=1, keepdims=True)
    q = Q[0].copy()

    impls = {"cython": kernels.compiled_impl, "python": kernels.python_impl}
    print(f"n={args.n} p={args.samples} points={args.points} mu={args.mu} (default backend: {kernels.BACKEND})")
    print(f"{'kernel':<22}{'backend':<10}{'best [s]':>12}{'per term [ns]':>16}")
    results = {}
    for name, impl in impls.items():
        t = min(timeit.repeat(lambda: impl.logcosh_mean(Q, Yt, args.mu), number=1, repeat=args.repeat))
        results[("mean", name)] = t
        print(f"{'logcosh_mean':<22}{name:<10}{t:>12.4f}{1e9 * t / (args.points * args.samples):>16.2f}")
    n_calls = 20
    for name, impl in impls.items():
        t = min(timeit.repeat(lambda: impl.logcosh_derivatives(q, Yt, args.mu), number=n_calls,
                              repeat=args.repeat)) / n_calls
        results[("derivatives", name)] = t
        print(f"{'logcosh_derivatives':<22}{name:<10}{t:>12.5f}{1e9 * t / args.samples:>16.2f}")
    for kernel in ("mean", "derivatives"):
        print(f"speedup {kernel}: {results[(kernel, 'python')] / results[(kernel, 'cython')]:.2f}x")

    a = impls["cython"].logcosh_mean(Q, Yt, args.mu)
    b = impls["python"].logcosh_mean(Q, Yt, args.mu)
    va, ga, Ha = impls["cython"].logcosh_derivatives(q, Yt, args.mu)
    vb, gb, Hb = impls["python"].logcosh_derivatives(q, Yt, args.mu)
    print(f"max relative difference: mean {np.max(np.abs(a - b) / np.abs(b)):.2e}, "
          f"grad {np.max(np.abs(ga - gb)):.2e}, hess {np.max(np.abs(Ha - Hb)) / np.max(np.abs(Hb)):.2e}")


if __name__ == "__main__":
    main()
