"""Benchmark the jitted CG kernel against the pure-numpy paths.

Times the inner solve of the penalized problem (the hot loop of dual
sweeps and parameter selection) three ways:

* ``cg_dense`` jitted with numba (the default for dense operators),
* the same algorithm as plain Python over numpy calls,
* ``cg_matvec``, the callback path that matrix-free operators use,

plus the direct Cholesky solve for reference. Run as::

    python benchmarks/bench_cg.py [--sizes 64,128,256] [--repeats 20]

Setting MOROZOV_NUMBA=0 in the environment would disable the jitted
path package-wide; this script imports the implementation directly so
both variants can be compared in one process regardless.
"""

import argparse
import time

import numpy as np
import scipy.linalg

from morozov._kernels import NUMBA_ENABLED, _cg_dense_impl, cg_dense, cg_matvec
from morozov.problems import make_deconvolution


def build_system(n, lam=5.0, seed=0):
    rng = np.random.default_rng(seed)
    A = make_deconvolution(n, kernel_width=1.2).matrix
    L = np.eye(n)
    g = A @ (np.abs(rng.standard_normal(n)) + 0.3)
    g += 0.05 * np.linalg.norm(g) / np.sqrt(n) * rng.standard_normal(n)
    b = lam * (A.T @ g)
    return A, L, lam, b


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="32,64,128,256")
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--tol", type=float, default=1e-10)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"numba enabled: {NUMBA_ENABLED}")
    header = f"{'n':>5} {'numba cg':>12} {'numpy cg':>12} {'matvec cg':>12} {'cholesky':>12} {'speedup':>8} {'iters':>6}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        A, L, lam, b = build_system(n)
        diag = np.ones(n)
        max_iter = 10 * n

        # warm up the JIT before timing
        cg_dense(A, L, lam, b, diag, args.tol, max_iter)

        t_jit, (x_jit, iters, _, status) = timeit(
            lambda: cg_dense(A, L, lam, b, diag, args.tol, max_iter), args.repeats
        )
        assert status == 0, "jitted CG did not converge"

        t_plain, (x_plain, *_rest) = timeit(
            lambda: _cg_dense_impl(A, L, lam, b, diag, args.tol, max_iter),
            args.repeats,
        )

        def system_apply(p, A=A, L=L, lam=lam):
            return L.T @ (L @ p) + lam * (A.T @ (A @ p))

        t_mv, (x_mv, *_rest) = timeit(
            lambda: cg_matvec(system_apply, b, tol=args.tol, max_iter=max_iter),
            args.repeats,
        )

        M = L.T @ L + lam * (A.T @ A)
        t_cho, x_cho = timeit(
            lambda: scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(M, check_finite=False), b, check_finite=False
            ),
            args.repeats,
        )

        for x in (x_plain, x_mv):
            err = np.linalg.norm(x - x_jit) / (1 + np.linalg.norm(x_jit))
            assert err < 1e-6, f"paths disagree at n={n}: {err:.2e}"

        speedup = t_plain / t_jit if t_jit > 0 else float("inf")
        print(
            f"{n:>5} {t_jit * 1e3:>10.3f}ms {t_plain * 1e3:>10.3f}ms "
            f"{t_mv * 1e3:>10.3f}ms {t_cho * 1e3:>10.3f}ms {speedup:>7.1f}x {iters:>6}"
        )


if __name__ == "__main__":
    main()
