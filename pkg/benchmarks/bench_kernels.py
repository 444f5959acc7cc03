"""Time the numba kernels against their numpy/python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--grid 300]

Both paths are imported explicitly, so the WELLGEO_DISABLE_NUMBA flag does
not matter here; results are also checked for agreement.
"""
import argparse
import time

import numpy as np

from wellgeo import _accel
from wellgeo.oracle import GridSpec, edge_weights, stencil
from wellgeo.potential import make_alikakos_fusco


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_block_solve(K, N, repeat):
    rng = np.random.default_rng(0)
    off = rng.uniform(0.5, 1.5, K - 1)
    diag = np.zeros((K, N, N))
    for i in range(K):
        A = rng.standard_normal((N, N))
        w = (off[i - 1] if i > 0 else 0.0) + (off[i] if i < K - 1 else 0.0)
        diag[i] = A @ A.T + (w + 0.1) * np.eye(N)
    rhs = rng.standard_normal((K, N))
    _accel.block_tridiag_solve_numba(diag, off, rhs)  # compile
    t_nb, x_nb = best_of(lambda: _accel.block_tridiag_solve_numba(diag, off, rhs), repeat)
    t_np, x_np = best_of(lambda: _accel.block_tridiag_solve_numpy(diag, off, rhs), repeat)
    err = float(np.max(np.abs(x_nb - x_np)))
    print(f"block_tridiag_solve K={K:5d} N={N}: numba {t_nb * 1e3:8.3f} ms  scipy {t_np * 1e3:8.3f} ms  max|diff| {err:.2e}")


def bench_dijkstra(res, repeat):
    pot = make_alikakos_fusco(0.3)
    spec = GridSpec((-2, -2), (2, 2), res)
    offsets, forward, half, at_target = stencil(2)
    weights = edge_weights(pot, spec, forward)
    shape = np.array(spec.resolution)
    src = int(np.ravel_multi_index((res // 4, res // 2), (res, res)))
    dst = int(np.ravel_multi_index((3 * res // 4, res // 2), (res, res)))
    args = (shape, offsets, half, at_target, weights, src, dst)
    _accel.lattice_dijkstra_numba(*args)  # compile
    t_nb, (d_nb, _) = best_of(lambda: _accel.lattice_dijkstra_numba(*args), repeat)
    t_py, (d_py, _) = best_of(lambda: _accel.lattice_dijkstra_python(*args), max(1, repeat // 2))
    print(f"lattice_dijkstra {res}x{res}: numba {t_nb * 1e3:8.1f} ms  python {t_py * 1e3:8.1f} ms  "
          f"costs {d_nb:.12g} / {d_py:.12g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=int, default=300)
    args = ap.parse_args()
    for K, N in [(255, 2), (255, 3), (1023, 3)]:
        bench_block_solve(K, N, args.repeat)
    bench_dijkstra(args.grid, args.repeat)


if __name__ == "__main__":
    main()
