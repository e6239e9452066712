"""Compare the numba and numpy paths of the alternating least-squares kernel.

Each problem plants a random solution, so the target Gram matrix is
reachable and both backends should drive the residual to zero.  Timings are
medians over ``--repeat`` runs from identical starting points; the first
numba call (JIT compile) is done before timing.

    python3 benchmarks/bench_solver.py --rows 4 8 12 --dim 3 --repeat 3
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from constructor_kit import _kernels


def planted_problem(n: int, dim: int, blocks: int, rng: np.random.Generator):
    """Random subspaces per (row, block) plus a feasible Gram target."""
    ks = np.full((n, blocks + 1), dim, dtype=np.int64)
    ks[:, blocks] = n
    K = int(ks.max())
    bases = [[np.linalg.qr(rng.standard_normal((dim + 2, dim))
                           + 1j * rng.standard_normal((dim + 2, dim)))[0]
              for _ in range(blocks)] for _ in range(n)]
    M = np.zeros((blocks + 1, n, n, K, K), dtype=np.complex128)
    for b in range(blocks):
        for r in range(n):
            for s in range(n):
                M[b, r, s, :dim, :dim] = bases[r][b].conj().T @ bases[s][b]
    M[blocks, :, :, :n, :n] = np.eye(n)
    free = np.ones_like(ks, dtype=np.bool_)

    def unit_columns():
        C = np.zeros((n, blocks + 1, K), dtype=np.complex128)
        for r in range(n):
            for b in range(blocks + 1):
                z = rng.standard_normal(ks[r, b]) + 1j * rng.standard_normal(ks[r, b])
                C[r, b, :ks[r, b]] = z / np.linalg.norm(z)
        return C

    planted = unit_columns()
    G = np.ones((n, n), dtype=np.complex128)
    for b in range(blocks + 1):
        for r in range(n):
            for s in range(n):
                G[r, s] *= planted[r, b].conj() @ M[b, r, s] @ planted[s, b]
    return G, M, ks, free, unit_columns()


def time_backend(problem, use_numba: bool, iters: int, repeat: int):
    G, M, ks, free, C0 = problem
    times, res = [], None
    for _ in range(repeat):
        C = C0.copy()
        t0 = time.perf_counter()
        res, used = _kernels.als_sweeps(G, M, ks, free, C, iters, 1e-10, use_numba)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), res, used


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--blocks", type=int, default=2)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or disabled by CONSTRUCTOR_KIT_DISABLE_NUMBA); numpy only")
    rng = np.random.default_rng(args.seed)
    warm = planted_problem(2, args.dim, args.blocks, rng)
    if _kernels.HAVE_NUMBA:
        time_backend(warm, True, 2, 1)

    print(f"{'rows':>5} {'numpy s':>10} {'numba s':>10} {'speedup':>8} "
          f"{'res numpy':>11} {'res numba':>11} {'sweeps':>7}")
    for n in args.rows:
        prob = planted_problem(n, args.dim, args.blocks, rng)
        t_np, r_np, used = time_backend(prob, False, args.iters, args.repeat)
        if _kernels.HAVE_NUMBA:
            t_nb, r_nb, _ = time_backend(prob, True, args.iters, args.repeat)
            print(f"{n:>5} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.1f} "
                  f"{r_np:>11.2e} {r_nb:>11.2e} {used:>7}")
        else:
            print(f"{n:>5} {t_np:>10.4f} {'-':>10} {'-':>8} {r_np:>11.2e} {'-':>11} {used:>7}")


if __name__ == "__main__":
    main()
